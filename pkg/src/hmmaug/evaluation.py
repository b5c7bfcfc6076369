"""Synthesis error counting and listening-test score aggregation.

Error taxonomy over a minimum-edit alignment of reference and produced
word sequences:

* deletion -> word skip
* insertion equal to the hypothesis word just before it -> repetition
* any other insertion -> plain insertion (reported on its own)
* substitution -> mispronunciation

Among equally cheap alignments the one chosen prefers, at the earliest
position where candidates differ, match > substitute > delete > insert.
"""
from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from scipy import stats as sps

MATCH, SUB, DEL, INS = "M", "S", "D", "I"
OP_RANK = {MATCH: 0, SUB: 1, DEL: 2, INS: 3}
LOOP_WINDOW = 4


@dataclass(frozen=True)
class AlignedOp:
    op: str
    ref: str | None
    hyp: str | None
    kind: str  # match, skip, repetition, insertion, mispronunciation
    loop: bool = False  # insertion repeating a word seen shortly before


@dataclass
class ErrorCounts:
    skips: int = 0
    repetitions: int = 0
    mispronunciations: int = 0
    insertions: int = 0

    @property
    def edits(self) -> int:
        return self.skips + self.repetitions + self.mispronunciations + self.insertions

    def __iadd__(self, other: "ErrorCounts") -> "ErrorCounts":
        self.skips += other.skips
        self.repetitions += other.repetitions
        self.mispronunciations += other.mispronunciations
        self.insertions += other.insertions
        return self


@dataclass
class UtteranceErrors:
    id: str
    counts: ErrorCounts
    trace: list[AlignedOp]


@dataclass
class ErrorReport:
    utterances: list[UtteranceErrors] = field(default_factory=list)

    @property
    def total(self) -> ErrorCounts:
        tot = ErrorCounts()
        for u in self.utterances:
            tot += u.counts
        return tot


def _suffix_costs(ref: Sequence[str], hyp: Sequence[str]) -> list[list[int]]:
    n, m = len(ref), len(hyp)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n, -1, -1):
        for j in range(m, -1, -1):
            if i == n:
                cost[i][j] = m - j
            elif j == m:
                cost[i][j] = n - i
            else:
                diag = cost[i + 1][j + 1] + (ref[i] != hyp[j])
                cost[i][j] = min(diag, cost[i + 1][j] + 1, cost[i][j + 1] + 1)
    return cost


def align(ref: Sequence[str], hyp: Sequence[str]) -> list[tuple[str, int | None, int | None]]:
    """Minimum-edit alignment as ``(op, ref_index, hyp_index)`` steps."""
    cost = _suffix_costs(ref, hyp)
    n, m = len(ref), len(hyp)
    i = j = 0
    steps = []
    while i < n or j < m:
        here = cost[i][j]
        if i < n and j < m and ref[i] == hyp[j] and cost[i + 1][j + 1] == here:
            steps.append((MATCH, i, j))
            i, j = i + 1, j + 1
        elif i < n and j < m and cost[i + 1][j + 1] + 1 == here:
            steps.append((SUB, i, j))
            i, j = i + 1, j + 1
        elif i < n and cost[i + 1][j] + 1 == here:
            steps.append((DEL, i, None))
            i += 1
        else:
            steps.append((INS, None, j))
            j += 1
    return steps


def classify(ref: Sequence[str], hyp: Sequence[str], steps) -> tuple[ErrorCounts, list[AlignedOp]]:
    counts = ErrorCounts()
    trace = []
    for op, i, j in steps:
        r = ref[i] if i is not None else None
        h = hyp[j] if j is not None else None
        loop = False
        if op == MATCH:
            kind = "match"
        elif op == SUB:
            kind = "mispronunciation"
            counts.mispronunciations += 1
        elif op == DEL:
            kind = "skip"
            counts.skips += 1
        elif j > 0 and hyp[j - 1] == h:
            kind = "repetition"
            counts.repetitions += 1
        else:
            kind = "insertion"
            counts.insertions += 1
            loop = h in hyp[max(0, j - LOOP_WINDOW):j]
        trace.append(AlignedOp(op, r, h, kind, loop))
    return counts, trace


def count_errors(reference: Sequence[str], hypothesis: Sequence[str], utt_id: str = "") -> UtteranceErrors:
    ref, hyp = list(reference), list(hypothesis)
    counts, trace = classify(ref, hyp, align(ref, hyp))
    return UtteranceErrors(utt_id, counts, trace)


def edit_distance(ref: Sequence[str], hyp: Sequence[str]) -> int:
    return _suffix_costs(list(ref), list(hyp))[0][0]


def error_report(pairs: Iterable[tuple[str, Sequence[str], Sequence[str]]]) -> ErrorReport:
    return ErrorReport([count_errors(r, h, uid) for uid, r, h in pairs])


def format_error_report(report: ErrorReport, sep: str = "\t") -> str:
    rows = [sep.join(["id", "skips", "repetitions", "mispronunciations", "insertions"])]
    for u in report.utterances:
        c = u.counts
        rows.append(sep.join(map(str, [u.id, c.skips, c.repetitions, c.mispronunciations, c.insertions])))
    t = report.total
    rows.append(sep.join(map(str, ["TOTAL", t.skips, t.repetitions, t.mispronunciations, t.insertions])))
    return "\n".join(rows) + "\n"


# --- listening tests ----------------------------------------------------------

@dataclass(frozen=True)
class Rating:
    listener: str
    item: str
    system: str
    quality: float | None = None
    intelligibility: float | None = None
    correct: bool | None = None


@dataclass
class RatingSet:
    ratings: list[Rating]
    scale: tuple[float, float] = (1.0, 5.0)

    def __post_init__(self):
        lo, hi = self.scale
        for r in self.ratings:
            for name in ("quality", "intelligibility"):
                v = getattr(r, name)
                if v is not None and not lo <= v <= hi:
                    raise ValueError(f"{name} {v} outside scale {self.scale} ({r.listener}/{r.item})")

    def systems(self) -> list[str]:
        return sorted({r.system for r in self.ratings})

    def for_system(self, system: str) -> "RatingSet":
        return RatingSet([r for r in self.ratings if r.system == system], self.scale)


@dataclass(frozen=True)
class ScoreSummary:
    system: str
    mos: float | None
    intelligibility: float | None
    comprehension: float | None  # percent correct
    dmos: float | None = None
    n_ratings: int = 0

    def table_row(self) -> str:
        """``MOS / intelligibility / comprehension%`` as in a results table."""
        def f(x, spec):
            return "-" if x is None else format(x, spec)
        row = f"{f(self.mos, '.3f')} / {f(self.intelligibility, '.3f')} / {f(self.comprehension, '.2f')}%"
        if self.dmos is not None:
            row += f" / DMOS {self.dmos:.2f}"
        return row


def _mean(values):
    vals = [v for v in values if v is not None]
    return statistics.fmean(vals) if vals else None


def summarize_ratings(ratings: RatingSet, system: str | None = None,
                      reference: RatingSet | None = None) -> ScoreSummary:
    """Means over all ratings; comprehension as percent of answered quiz items.

    With ``reference`` (ratings of the ground-truth audio), DMOS is computed
    per listener as mean system score over mean reference score, averaged over
    listeners, rescaled to the top of the scale and clamped into it.
    """
    rs = ratings.ratings
    if not rs:
        raise ValueError("no ratings to summarize")
    answered = [r.correct for r in rs if r.correct is not None]
    comp = 100.0 * sum(answered) / len(answered) if answered else None
    dmos = None
    if reference is not None:
        lo, hi = ratings.scale
        ratios = []
        for listener in sorted({r.listener for r in rs}):
            sys_q = _mean(r.quality if r.quality is not None else r.intelligibility
                          for r in rs if r.listener == listener)
            ref_q = _mean(r.quality if r.quality is not None else r.intelligibility
                          for r in reference.ratings if r.listener == listener)
            if sys_q is not None and ref_q:
                ratios.append(sys_q / ref_q)
        if ratios:
            dmos = min(max(hi * statistics.fmean(ratios), lo), hi)
    return ScoreSummary(
        system=system if system is not None else ",".join(sorted({r.system for r in rs})),
        mos=_mean(r.quality for r in rs),
        intelligibility=_mean(r.intelligibility for r in rs),
        comprehension=comp,
        dmos=dmos,
        n_ratings=len(rs),
    )


def read_ratings(path: str | Path, scale: tuple[float, float] = (1.0, 5.0)) -> RatingSet:
    """Tab-separated with header: listener, item, system, quality, intelligibility, correct.

    Empty cells mean "not rated"; ``correct`` takes 1/0 or true/false.
    """
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        need = {"listener", "item", "system"}
        if not reader.fieldnames or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: header must include {sorted(need)}")
        for lineno, row in enumerate(reader, 2):
            try:
                q = row.get("quality") or ""
                it = row.get("intelligibility") or ""
                c = (row.get("correct") or "").strip().lower()
                out.append(Rating(
                    row["listener"], row["item"], row["system"],
                    float(q) if q.strip() else None,
                    float(it) if it.strip() else None,
                    None if not c else c in ("1", "true", "yes", "y"),
                ))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return RatingSet(out, scale)


# --- significance -------------------------------------------------------------

def welch_t(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Welch t statistic and Welch-Satterthwaite degrees of freedom."""
    na, nb = len(a), len(b)
    va, vb = statistics.variance(a), statistics.variance(b)
    sa, sb = va / na, vb / nb
    t = (statistics.fmean(a) - statistics.fmean(b)) / math.sqrt(sa + sb)
    # scale by the larger term so tiny variances do not underflow when squared
    top = max(sa, sb)
    ra, rb = sa / top, sb / top
    df = (ra + rb) ** 2 / (ra * ra / (na - 1) + rb * rb / (nb - 1))
    return t, df


def significance_test(a: Sequence[float], b: Sequence[float], paired: bool = False) -> float:
    """Two-tailed p-value: Welch's unequal-variance t-test, or a paired t-test."""
    a, b = [float(x) for x in a], [float(x) for x in b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    if paired:
        if len(a) != len(b):
            raise ValueError("paired samples must have equal length")
        diffs = [x - y for x, y in zip(a, b)]
        sd = statistics.stdev(diffs)
        mean = statistics.fmean(diffs)
        if sd == 0:
            if mean == 0:
                return 1.0
            raise ValueError("constant non-zero differences: t statistic is infinite")
        t = mean / (sd / math.sqrt(len(diffs)))
        df = len(diffs) - 1
    else:
        if statistics.variance(a) == 0 and statistics.variance(b) == 0:
            if statistics.fmean(a) == statistics.fmean(b):
                return 1.0
            raise ValueError("both samples are constant with different means: t statistic is infinite")
        t, df = welch_t(a, b)
    return float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
