"""Split sentences where the language model finds an unlikely word transition."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ngram import NgramModel, ScoredBigram, score_bigrams

DEFAULT_THRESHOLD = -5.12


@dataclass(frozen=True)
class SplitResult:
    segments: tuple[tuple[str, ...], ...]
    split_points: tuple[tuple[int, ScoredBigram], ...]
    threshold: float

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(t for seg in self.segments for t in seg)


@dataclass(frozen=True)
class SynthesisPlan:
    segments: tuple[str, ...]
    pause_frames: int = 0

    @property
    def joins(self) -> int:
        return max(len(self.segments) - 1, 0)

    def text(self) -> str:
        return " ".join(self.segments)


def split(model: NgramModel, sentence, threshold: float = DEFAULT_THRESHOLD) -> SplitResult:
    """Cut after the left word of every interior pair scoring strictly below ``threshold``.

    Pairs touching the start or end marker never cut.  A split point index is
    the token position the cut follows (0-based).
    """
    tokens = tuple(getattr(sentence, "tokens", sentence))
    if len(tokens) < 2:
        return SplitResult((tokens,) if tokens else (), (), threshold)
    scored = score_bigrams(model, tokens)
    # scored[0] is (<s>, w1) and scored[-1] is (wN, </s>)
    points = []
    for i, sb in enumerate(scored[1:-1]):
        if sb.log_likelihood < threshold:
            points.append((i, sb))
    segments, start = [], 0
    for i, _ in points:
        segments.append(tokens[start:i + 1])
        start = i + 1
    segments.append(tokens[start:])
    return SplitResult(tuple(segments), tuple(points), threshold)


def plan_synthesis(result: SplitResult, pause_frames: int = 0) -> SynthesisPlan:
    if pause_frames < 0:
        raise ValueError("pause_frames must be >= 0")
    return SynthesisPlan(tuple(" ".join(seg) for seg in result.segments), pause_frames)


@dataclass
class SweepRow:
    threshold: float
    sentences: int = 0
    splits: int = 0
    segment_lengths: Counter = field(default_factory=Counter)


def sweep_thresholds(model: NgramModel, sentences: Iterable, thresholds: Sequence[float]) -> list[SweepRow]:
    """Segment-length histograms for each candidate threshold.

    Only a reporting aid: the threshold is domain dependent and picking it is
    left to whoever reads the histograms.
    """
    sents = [tuple(getattr(s, "tokens", s)) for s in sentences]
    rows = []
    for th in thresholds:
        row = SweepRow(th)
        for toks in sents:
            if not toks:
                continue
            res = split(model, toks, th)
            row.sentences += 1
            row.splits += len(res.split_points)
            row.segment_lengths.update(len(s) for s in res.segments)
        rows.append(row)
    return rows
