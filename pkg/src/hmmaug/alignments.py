"""Phone-aligned feature files produced by an external aligner.

One phone occurrence per line, tab separated::

    utt_id  LL^L-C+R=RR  f1 f2 f3,f1 f2 f3,...

Frames are comma separated, dimensions space separated.  Lines of one
utterance must be contiguous and in time order.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .phones import FullContextLabel, ParseError, parse_label


@dataclass
class AlignedUtterance:
    id: str
    labels: list[FullContextLabel]
    blocks: list[np.ndarray]

    def __iter__(self):
        # unpacks as (labels, blocks) for the statistics accumulators
        return iter((self.labels, self.blocks))


def parse_alignments(text: str, source: str = "") -> list[AlignedUtterance]:
    utts: list[AlignedUtterance] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError("expected 'utt<TAB>label<TAB>frames'", lineno, 1, source)
        uid, lab_text, frames = parts
        lab = parse_label(lab_text, lineno, source)
        try:
            block = np.array([[float(x) for x in fr.split()] for fr in frames.split(",")])
        except ValueError:
            raise ParseError("non-numeric frame value", lineno, len(uid) + len(lab_text) + 3, source) from None
        if block.ndim != 2 or block.shape[1] == 0:
            raise ParseError("ragged or empty frames", lineno, len(uid) + len(lab_text) + 3, source)
        if not utts or utts[-1].id != uid:
            if uid in seen:
                raise ParseError(f"utterance {uid!r} is not contiguous", lineno, 1, source)
            seen.add(uid)
            utts.append(AlignedUtterance(uid, [], []))
        utts[-1].labels.append(lab)
        utts[-1].blocks.append(block)
    return utts


def read_alignments(path: str | Path) -> list[AlignedUtterance]:
    return parse_alignments(Path(path).read_text(encoding="utf-8"), str(path))


def format_alignments(utts: Iterable[AlignedUtterance], precision: int = 4) -> str:
    lines = []
    for u in utts:
        for lab, block in zip(u.labels, u.blocks):
            frames = ",".join(" ".join(f"{x:.{precision}f}" for x in row) for row in block)
            lines.append(f"{u.id}\t{lab}\t{frames}")
    return "\n".join(lines) + "\n"
