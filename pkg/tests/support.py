"""Independent oracles and fixture builders shared by the tests.

The oracles never call the code under test: the KN oracle works from raw
counts and the textbook formula, the alignment oracle enumerates every
alignment path.  Package data types are imported only to build fixtures.
"""
from __future__ import annotations

import itertools
import math
import random
from collections import Counter
from functools import lru_cache
from pathlib import Path

import numpy as np

from hmmaug.cluster import ContextStats
from hmmaug.phones import FullContextLabel, PhoneSet, Question, QuestionSet

DATA = Path(__file__).resolve().parents[1] / "src" / "hmmaug" / "data"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


# --- interpolated Kneser-Ney, straight from the formula -----------------------

class KNOracle:
    def __init__(self, sentences, order, open_vocab=True):
        self.n = order
        padded = [["<s>", *s, "</s>"] for s in sentences]
        self.raw = Counter()
        for s in padded:
            for k in range(1, order + 1):
                for i in range(len(s) - k + 1):
                    self.raw[tuple(s[i:i + k])] += 1
        self.V = sorted({w for s in sentences for w in s} | {"</s>"} | ({"<unk>"} if open_vocab else set()))
        self.D = {}
        for k in range(1, order + 1):
            vals = [self.count(g) for g in self.raw if len(g) == k and g != ("<s>",)]
            n1, n2 = vals.count(1), vals.count(2)
            self.D[k] = 0.5 if n1 == 0 or n2 == 0 else n1 / (n1 + 2 * n2)

    def count(self, g):
        """Raw count at the top order or for <s>-initial grams, else distinct left contexts."""
        if len(g) == self.n or g[0] == "<s>":
            return self.raw.get(g, 0)
        return sum(1 for x in self._left_words() if self.raw.get((x, *g), 0) > 0)

    @lru_cache(maxsize=None)
    def _left_words(self):
        return tuple(sorted({g[0] for g in self.raw}))

    @lru_cache(maxsize=None)
    def p(self, w, h=()):
        h = tuple(h)[-(self.n - 1):] if self.n > 1 else ()
        lower = self.p(w, h[1:]) if h else 1.0 / len(self.V)
        k = len(h) + 1
        counts = {x: self.count(h + (x,)) for x in self.V}
        denom = sum(counts.values())
        if denom == 0:
            return lower
        types = sum(1 for c in counts.values() if c > 0)
        D = self.D[k]
        return max(counts[w] - D, 0.0) / denom + D * types / denom * lower


def random_corpus(rng: random.Random, max_tokens=50, alphabet="abcdefg"):
    sents, total = [], 0
    while True:
        n = rng.randint(1, 6)
        if total + n > max_tokens:
            break
        sents.append([rng.choice(alphabet) for _ in range(n)])
        total += n
    return sents or [["a"]]


# --- exhaustive alignment ----------------------------------------------------

RANK = {"M": 0, "S": 1, "D": 2, "I": 3}


def all_paths(n, m):
    """Every monotone path from (0,0) to (n,m) as a tuple of 'G' (diagonal), 'D', 'I'."""
    out = []

    def rec(i, j, acc):
        if i == n and j == m:
            out.append(tuple(acc))
            return
        if i < n and j < m:
            rec(i + 1, j + 1, acc + ["G"])
        if i < n:
            rec(i + 1, j, acc + ["D"])
        if j < m:
            rec(i, j + 1, acc + ["I"])

    rec(0, 0, [])
    return out


def path_ops(path, ref, hyp):
    ops, i, j = [], 0, 0
    for step in path:
        if step == "G":
            ops.append(("M" if ref[i] == hyp[j] else "S", i, j))
            i, j = i + 1, j + 1
        elif step == "D":
            ops.append(("D", i, None))
            i += 1
        else:
            ops.append(("I", None, j))
            j += 1
    return ops


def classify_ops(ops, hyp):
    skips = reps = mis = ins = 0
    for op, _, j in ops:
        if op == "S":
            mis += 1
        elif op == "D":
            skips += 1
        elif op == "I":
            if j > 0 and hyp[j - 1] == hyp[j]:
                reps += 1
            else:
                ins += 1
    return skips, reps, mis, ins


def oracle_counts(ref, hyp):
    """Minimum cost over every path; ties broken by the lexicographically smallest op string."""
    best = None
    for path in all_paths(len(ref), len(hyp)):
        ops = path_ops(path, ref, hyp)
        cost = sum(op != "M" for op, _, _ in ops)
        key = (cost, [RANK[op] for op, _, _ in ops])
        if best is None or key < best[0]:
            best = (key, ops)
    return classify_ops(best[1], hyp)


def exhaustive_oracle_shape(n, m, alphabet=3):
    """Vectorized oracle over every (ref, hyp) pair of lengths (n, m).

    Returns (refs, hyps, counts) with counts of shape (P, 4).
    """
    L = n + m
    combos = np.array(list(itertools.product(range(alphabet), repeat=L)), dtype=np.int8).reshape(alphabet ** L, L)
    refs, hyps = combos[:, :n], combos[:, n:]
    P = combos.shape[0]
    paths = all_paths(n, m)
    width = 9
    best_key = np.full(P, np.iinfo(np.int64).max, dtype=np.int64)
    best_idx = np.zeros(P, dtype=np.int64)
    for pi, path in enumerate(paths):
        cost = np.zeros(P, dtype=np.int64)
        lex = np.zeros(P, dtype=np.int64)
        i = j = 0
        for t, step in enumerate(path):
            scale = 4 ** (width - 1 - t)
            if step == "G":
                diff = (refs[:, i] != hyps[:, j]).astype(np.int64)
                cost += diff
                lex += diff * scale  # M=0, S=1
                i, j = i + 1, j + 1
            elif step == "D":
                cost += 1
                lex += 2 * scale
                i += 1
            else:
                cost += 1
                lex += 3 * scale
                j += 1
        key = cost * 4 ** width + lex
        better = key < best_key
        best_key[better] = key[better]
        best_idx[better] = pi
    counts = np.zeros((P, 4), dtype=np.int64)
    for p in range(P):
        ref, hyp = refs[p].tolist(), hyps[p].tolist()
        counts[p] = classify_ops(path_ops(paths[best_idx[p]], ref, hyp), hyp)
    return refs, hyps, counts


# --- splitter fixture ----------------------------------------------------------

NOUNS = ["kaam", "ghar", "khaana", "paani", "din", "raasta", "kamra", "phal", "kapda", "bagicha"]
ADVERBS = ["bahut", "kaafi", "thoda", "bilkul", "sach"]
ADJECTIVES = ["aasaan", "achchha", "bada", "saaf", "sundar", "naya", "lamba", "thanda"]
HAI_SENTENCE = "yah kaam bahut aasaan hai to ham aage chalte hain".split()


def hai_corpus(n=800, seed=7):
    """Copular sentences ending in "hai", plus a few starting with "to".

    The pair (hai, to) never occurs, so its score rests on back-off alone.
    """
    rng = random.Random(seed)
    sents = []
    for _ in range(n):
        sents.append([rng.choice(["yah", "vah"]), rng.choice(NOUNS), rng.choice(ADVERBS),
                      rng.choice(ADJECTIVES), "hai"])
    sents += [["to", "ham", "aage", "chalte", "hain"]] * 5
    return sents


# --- clustering fixtures ---------------------------------------------------------

def gaussian_ll(occ, s, sq, floor=1e-4):
    mean = s / occ
    var = np.maximum(sq / occ - mean * mean, floor)
    d = len(s)
    return -0.5 * occ * (d * np.log(2 * np.pi * np.e) + np.sum(np.log(var)))


def path_table(n, m):
    """Every path for shape (n, m) as arrays: step codes (0=G, 1=D, 2=I, 3=padding) and the i, j read at each step.

    Paths are padded to n + m steps; no two complete paths share a prefix, so padding never decides a tie.
    """
    paths = all_paths(n, m)
    L = max(n + m, 1)
    code = {"G": 0, "D": 1, "I": 2}
    steps = np.full((len(paths), L), 3, dtype=np.int8)
    for k, p in enumerate(paths):
        steps[k, :len(p)] = [code[s] for s in p]
    is_i = ((steps == 0) | (steps == 1)).astype(np.int64)
    is_j = ((steps == 0) | (steps == 2)).astype(np.int64)
    i_at = np.cumsum(is_i, axis=1) - is_i
    j_at = np.cumsum(is_j, axis=1) - is_j
    return paths, steps, np.minimum(i_at, max(n - 1, 0)), np.minimum(j_at, max(m - 1, 0))


def oracle_counts_table(ref, hyp, table):
    """Same answer as ``oracle_counts`` but vectorized over the precomputed paths."""
    paths, steps, i_at, j_at = table
    L = steps.shape[1]
    r = np.array(ref if ref else [-1])
    h = np.array(hyp if hyp else [-2])
    diff = (r[i_at] != h[j_at]).astype(np.int64)
    # op rank per step: M=0, S=1, D=2, I=3
    rank = np.where(steps == 0, diff, steps.astype(np.int64) + 1)
    rank[steps == 3] = 0
    cost = (rank > 0).sum(axis=1)
    lex = (rank * (4 ** np.arange(L - 1, -1, -1, dtype=np.int64))).sum(axis=1)
    key = cost * 4 ** L + lex
    best = int(np.argmin(key))
    return classify_ops(path_ops(paths[best], ref, hyp), hyp)


# --- clustering fixtures ----------------------------------------------------------

PH4 = PhoneSet(frozenset({"sil", "a", "m", "k"}), "sil",
               {"Vowel": frozenset({"a"}), "Nasal": frozenset({"m"}), "Stop": frozenset({"k"}),
                "Sil": frozenset({"sil"})})


def L(*ctx):
    return FullContextLabel(*ctx)


def stats_for(label, frames):
    x = np.asarray(frames, dtype=float).reshape(len(frames), -1)
    return ContextStats(label, float(len(x)), x.sum(0), (x * x).sum(0))


def random_fixture(rng, n_ctx, n_q, dim=2):
    phones = sorted(PH4.phones)
    labels = set()
    while len(labels) < n_ctx:
        labels.add(L(*rng.choice(phones, 5).tolist()))
    stats = {}
    for lab in sorted(labels, key=lambda x: x.context):
        frames = rng.normal(rng.normal(0, 2, dim), rng.uniform(0.1, 2.0), (int(rng.integers(2, 12)), dim))
        stats[lab] = stats_for(lab, frames)
    qs = []
    for k in range(n_q):
        slot = rng.choice(["LL", "L", "C", "R", "RR"])
        members = frozenset(rng.choice(phones, int(rng.integers(1, 4)), replace=False).tolist())
        qs.append(Question(f"q{k}", str(slot), members))
    return stats, QuestionSet(tuple(qs))


def exhaustive_first_split(stats, qs, min_occupancy):
    items = list(stats.items())
    occ = sum(s.occupancy for _, s in items)
    tot_s = sum(s.sum for _, s in items)
    tot_q = sum(s.sum_sq for _, s in items)
    root = gaussian_ll(occ, tot_s, tot_q)
    best, best_gain = -1, -math.inf
    for k, q in enumerate(qs):
        yes = [s for lab, s in items if q.ask(lab)]
        no = [s for lab, s in items if not q.ask(lab)]
        oy, on = sum(s.occupancy for s in yes), sum(s.occupancy for s in no)
        if not yes or not no or oy < min_occupancy or on < min_occupancy:
            continue
        g = (gaussian_ll(oy, sum(s.sum for s in yes), sum(s.sum_sq for s in yes))
             + gaussian_ll(on, sum(s.sum for s in no), sum(s.sum_sq for s in no)) - root)
        if g > best_gain + 1e-9 * max(1.0, abs(root)):
            best, best_gain = k, g
    return best, best_gain, root
