"""Decision-tree state clustering over pentaphone contexts.

Each context carries sufficient statistics (frame count, sum, sum of squares)
for a diagonal Gaussian.  The tree grows top-down: at each node the question
with the largest log-likelihood gain is applied, provided both children keep
enough occupancy and the gain beats ``min_gain``.  Leaves are tied states.
Routing only inspects the questions, so every syntactically valid label,
seen in training or not, lands on exactly one leaf.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .phones import SLOTS, FullContextLabel, ParseError, Question, QuestionSet

VARIANCE_FLOOR = 1e-4
LOG_2PI_E = math.log(2 * math.pi * math.e)


class ClusterError(ValueError):
    pass


@dataclass
class ContextStats:
    label: FullContextLabel
    occupancy: float
    sum: np.ndarray
    sum_sq: np.ndarray

    @property
    def dim(self) -> int:
        return self.sum.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.sum / self.occupancy

    def add(self, other: "ContextStats") -> None:
        self.occupancy += other.occupancy
        self.sum = self.sum + other.sum
        self.sum_sq = self.sum_sq + other.sum_sq


def accumulate_stats(utterances: Iterable[tuple[Sequence[FullContextLabel], Sequence]]) -> dict[FullContextLabel, ContextStats]:
    """Sum per-context frame statistics.

    Each utterance is ``(labels, blocks)`` with one ``frames x dim`` block per
    label.  Repeated contexts pool additively.
    """
    out: dict[FullContextLabel, ContextStats] = {}
    dim = None
    for labels, blocks in utterances:
        if len(labels) != len(blocks):
            raise ClusterError(f"{len(labels)} labels but {len(blocks)} frame blocks")
        for lab, block in zip(labels, blocks):
            x = np.asarray(block, dtype=np.float64)
            if x.ndim == 1:
                x = x[:, None]
            if x.ndim != 2 or x.shape[0] == 0:
                raise ClusterError(f"empty or malformed frame block for {lab}")
            if dim is None:
                dim = x.shape[1]
            elif x.shape[1] != dim:
                raise ClusterError(f"dimension mismatch: {x.shape[1]} vs {dim} at {lab}")
            key = FullContextLabel(*lab.context)
            st = ContextStats(key, float(x.shape[0]), x.sum(axis=0), (x * x).sum(axis=0))
            if key in out:
                out[key].add(st)
            else:
                out[key] = st
    return out


def pooled_variance(occ: float, s: np.ndarray, sq: np.ndarray, floor: float = VARIANCE_FLOOR) -> np.ndarray:
    mean = s / occ
    return np.maximum(sq / occ - mean * mean, floor)


def gaussian_log_likelihood(occ: float, s: np.ndarray, sq: np.ndarray, floor: float = VARIANCE_FLOOR) -> float:
    if occ <= 0:
        raise ClusterError("log-likelihood of a pool with zero occupancy")
    var = pooled_variance(occ, s, sq, floor)
    return -0.5 * occ * (s.shape[0] * LOG_2PI_E + float(np.log(var).sum()))


def node_log_likelihood(pool: Iterable[ContextStats], floor: float = VARIANCE_FLOOR) -> float:
    pool = list(pool)
    if not pool:
        raise ClusterError("log-likelihood of an empty pool")
    occ = sum(p.occupancy for p in pool)
    s = np.sum([p.sum for p in pool], axis=0)
    sq = np.sum([p.sum_sq for p in pool], axis=0)
    return gaussian_log_likelihood(occ, s, sq, floor)


@dataclass
class Node:
    id: int
    question: Question | None = None
    yes: int = -1
    no: int = -1
    occupancy: float = 0.0
    mean: np.ndarray | None = None
    variance: np.ndarray | None = None
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.question is None


@dataclass
class ClusterTree:
    nodes: dict[int, Node]
    dim: int
    root: int = 0
    var_floor: float = VARIANCE_FLOOR

    def leaves(self) -> list[Node]:
        return [n for _, n in sorted(self.nodes.items()) if n.is_leaf]

    def leaf(self, leaf_id: int) -> Node:
        return self.nodes[leaf_id]

    def depth(self) -> int:
        def walk(i: int) -> int:
            n = self.nodes[i]
            return 0 if n.is_leaf else 1 + max(walk(n.yes), walk(n.no))
        return walk(self.root)


def route(tree: ClusterTree, label: FullContextLabel) -> int:
    node = tree.nodes[tree.root]
    while not node.is_leaf:
        node = tree.nodes[node.yes if node.question.ask(label) else node.no]
    return node.id


def _tie_tolerance(ll: float) -> float:
    # gains this close are the same split up to rounding
    return 1e-9 * max(1.0, abs(ll))


def choose_question(occ: np.ndarray, s: np.ndarray, sq: np.ndarray, answers: np.ndarray,
                    min_occupancy: float, floor: float = VARIANCE_FLOOR) -> tuple[int, float, float]:
    """Best admissible question for one node.

    ``answers`` is ``contexts x questions``.  Returns ``(index, gain, node_ll)``
    with index -1 when no question leaves both sides non-empty and occupied.
    """
    node_ll = gaussian_log_likelihood(occ.sum(), s.sum(axis=0), sq.sum(axis=0), floor)
    gains = np.full(answers.shape[1], -np.inf)
    for q in range(answers.shape[1]):
        yes = answers[:, q]
        if yes.all() or not yes.any():
            continue
        no = ~yes
        oy, on = occ[yes].sum(), occ[no].sum()
        if oy < min_occupancy or on < min_occupancy:
            continue
        gains[q] = (gaussian_log_likelihood(oy, s[yes].sum(axis=0), sq[yes].sum(axis=0), floor)
                    + gaussian_log_likelihood(on, s[no].sum(axis=0), sq[no].sum(axis=0), floor)
                    - node_ll)
    if not np.isfinite(gains).any():
        return -1, -math.inf, node_ll
    best = float(gains.max())
    idx = int(np.flatnonzero(gains >= best - _tie_tolerance(node_ll))[0])
    return idx, float(gains[idx]), node_ll


def grow_tree(stats: Mapping[FullContextLabel, ContextStats] | Iterable[ContextStats],
              questions: QuestionSet, min_occupancy: float = 10.0, min_gain: float = 0.0,
              var_floor: float = VARIANCE_FLOOR) -> ClusterTree:
    """Greedy top-down clustering.

    A node splits only when its best gain exceeds ``min_gain`` (strictly, up
    to rounding) and both children hold at least ``min_occupancy`` frames.
    Node ids are assigned breadth-first; ties go to the earlier question.
    """
    items = list(stats.values()) if isinstance(stats, Mapping) else list(stats)
    if not items:
        raise ClusterError("no statistics to cluster")
    if min_gain < 0:
        raise ClusterError("min_gain must be >= 0")
    items.sort(key=lambda st: st.label.context)
    dim = items[0].dim
    occ = np.array([st.occupancy for st in items], dtype=np.float64)
    s = np.stack([st.sum for st in items])
    sq = np.stack([st.sum_sq for st in items])
    qlist = list(questions)
    answers = np.array([[q.ask(st.label) for q in qlist] for st in items], dtype=bool)
    answers = answers.reshape(len(items), len(qlist))

    nodes: dict[int, Node] = {}
    queue = deque([(0, np.arange(len(items)))])
    next_id = 1
    while queue:
        nid, idx = queue.popleft()
        q, gain, node_ll = choose_question(occ[idx], s[idx], sq[idx], answers[idx], min_occupancy, var_floor)
        if q >= 0 and gain > min_gain + _tie_tolerance(node_ll):
            yes_ids = idx[answers[idx, q]]
            no_ids = idx[~answers[idx, q]]
            nodes[nid] = Node(nid, qlist[q], next_id, next_id + 1, gain=gain)
            queue.append((next_id, yes_ids))
            queue.append((next_id + 1, no_ids))
            next_id += 2
        else:
            o = occ[idx].sum()
            ss, ssq = s[idx].sum(axis=0), sq[idx].sum(axis=0)
            nodes[nid] = Node(nid, occupancy=float(o), mean=ss / o,
                              variance=pooled_variance(o, ss, ssq, var_floor))
    return ClusterTree(nodes, dim, 0, var_floor)


def format_tree(tree: ClusterTree) -> str:
    """Text form; floats use repr so parsing returns the same values."""
    lines = ["hmmaug-tree 1", f"dim {tree.dim}", f"floor {tree.var_floor!r}"]
    for nid, n in sorted(tree.nodes.items()):
        if n.is_leaf:
            mean = " ".join(repr(float(x)) for x in n.mean)
            var = " ".join(repr(float(x)) for x in n.variance)
            lines.append(f"leaf {nid} occ {n.occupancy!r} mean {mean} var {var}")
        else:
            q = n.question
            phones = ",".join(sorted(q.phones))
            lines.append(f'node {nid} question "{q.name}" {q.slot} {phones} yes {n.yes} no {n.no} gain {n.gain!r}')
    return "\n".join(lines) + "\n"


def parse_tree(text: str, source: str = "") -> ClusterTree:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "hmmaug-tree 1":
        raise ParseError("missing 'hmmaug-tree 1' header", 1, 1, source)
    dim = None
    floor = VARIANCE_FLOOR
    nodes: dict[int, Node] = {}
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "dim":
                dim = int(parts[1])
            elif parts[0] == "floor":
                floor = float(parts[1])
            elif parts[0] == "leaf":
                nid = int(parts[1])
                if parts[2] != "occ" or parts[4] != "mean" or dim is None:
                    raise ValueError("malformed leaf")
                mean = [float(x) for x in parts[5:5 + dim]]
                if parts[5 + dim] != "var":
                    raise ValueError("malformed leaf")
                var = [float(x) for x in parts[6 + dim:]]
                if len(var) != dim:
                    raise ValueError(f"expected {dim} variances")
                nodes[nid] = Node(nid, occupancy=float(parts[3]), mean=np.array(mean), variance=np.array(var))
            elif parts[0] == "node":
                head, _, rest = line.partition('"')
                name, _, tail = rest.partition('"')
                nid = int(head.split()[1])
                t = tail.split()
                if len(t) != 8 or t[2] != "yes" or t[4] != "no" or t[6] != "gain" or t[0] not in SLOTS:
                    raise ValueError("malformed node")
                q = Question(name, t[0], frozenset(t[1].split(",")))
                nodes[nid] = Node(nid, q, int(t[3]), int(t[5]), gain=float(t[7]))
            else:
                raise ValueError(f"unknown record {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise ParseError(str(exc), lineno, 1, source) from None
    if dim is None or 0 not in nodes:
        raise ParseError("tree has no dimension or no root", len(lines), 1, source)
    for n in nodes.values():
        if not n.is_leaf and (n.yes not in nodes or n.no not in nodes):
            raise ParseError(f"node {n.id} points at a missing child", 0, 0, source)
    return ClusterTree(nodes, dim, 0, floor)


def write_tree(path: str | Path, tree: ClusterTree) -> None:
    Path(path).write_text(format_tree(tree), encoding="utf-8")


def read_tree(path: str | Path) -> ClusterTree:
    return parse_tree(Path(path).read_text(encoding="utf-8"), str(path))


@dataclass
class LeafPool:
    occupancy: float = 0.0
    sum: np.ndarray | None = None
    sum_sq: np.ndarray | None = None
    contexts: list = field(default_factory=list)


def pool_by_leaf(tree: ClusterTree, stats: Mapping[FullContextLabel, ContextStats]) -> dict[int, LeafPool]:
    """Re-pool statistics per leaf by routing every context."""
    pools: dict[int, LeafPool] = {}
    for lab, st in sorted(stats.items(), key=lambda kv: kv[0].context):
        lp = pools.setdefault(route(tree, lab), LeafPool())
        lp.occupancy += st.occupancy
        lp.sum = st.sum.copy() if lp.sum is None else lp.sum + st.sum
        lp.sum_sq = st.sum_sq.copy() if lp.sum_sq is None else lp.sum_sq + st.sum_sq
        lp.contexts.append(lab)
    return pools
