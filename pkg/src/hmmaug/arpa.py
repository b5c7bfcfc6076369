"""ARPA back-off file reading and writing."""
from __future__ import annotations

import math
import re
from pathlib import Path

from .ngram import BOS, LMError, NgramModel

# log10 value conventionally written for the start marker's unigram
BOS_LOGPROB = -99.0

_NGRAM_DECL = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")


class ArpaFormatError(LMError):
    def __init__(self, message: str, lineno: int, section: str = ""):
        where = f"line {lineno}" + (f" ({section})" if section else "")
        super().__init__(f"{where}: {message}")
        self.lineno = lineno
        self.section = section


def _fmt(x: float) -> str:
    return f"{x:.7f}"


def format_arpa(model: NgramModel) -> str:
    """Render a model as ARPA text; output is a pure function of the model."""
    by_order: dict[int, list] = {k: [] for k in range(1, model.order + 1)}
    for g in model.probs:
        by_order[len(g)].append(g)
    if BOS in model.vocab:
        by_order[1].append((BOS,))
    lines = ["\\data\\"]
    for k in range(1, model.order + 1):
        by_order[k].sort()
        lines.append(f"ngram {k}={len(by_order[k])}")
    for k in range(1, model.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for g in by_order[k]:
            lp = BOS_LOGPROB if g == (BOS,) else math.log10(model.probs[g])
            row = [_fmt(lp), " ".join(g)]
            if k < model.order and g in model.backoffs:
                row.append(_fmt(math.log10(model.backoffs[g])))
            lines.append("\t".join(row))
    lines.append("")
    lines.append("\\end\\")
    return "\n".join(lines) + "\n"


def export_arpa(model: NgramModel, path: str | Path) -> None:
    Path(path).write_text(format_arpa(model), encoding="utf-8")


def parse_arpa(text: str, source: str = "<string>", log_base: float = 10.0) -> NgramModel:
    try:
        return _parse(text.splitlines(), log_base)
    except ArpaFormatError as exc:
        exc.args = (f"{source}: {exc}",)
        raise


def _parse(lines: list[str], log_base: float) -> NgramModel:
    i = 0

    def skip_blank():
        nonlocal i
        while i < len(lines) and not lines[i].strip():
            i += 1

    skip_blank()
    if i >= len(lines) or lines[i].strip() != "\\data\\":
        raise ArpaFormatError("expected '\\data\\' header", i + 1, "header")
    i += 1
    declared: dict[int, int] = {}
    while i < len(lines) and lines[i].strip():
        m = _NGRAM_DECL.match(lines[i].strip())
        if not m:
            raise ArpaFormatError(f"malformed count line {lines[i]!r}", i + 1, "header")
        k, cnt = int(m.group(1)), int(m.group(2))
        if k != len(declared) + 1:
            raise ArpaFormatError(f"n-gram orders must be declared in sequence, got {k}", i + 1, "header")
        declared[k] = cnt
        i += 1
    if not declared:
        raise ArpaFormatError("no n-gram counts declared", i + 1, "header")
    order = len(declared)

    probs: dict[tuple, float] = {}
    backoffs: dict[tuple, float] = {}
    vocab: set[str] = set()
    for k in range(1, order + 1):
        skip_blank()
        name = f"\\{k}-grams:"
        if i >= len(lines) or lines[i].strip() != name:
            raise ArpaFormatError(f"expected section '{name}'", i + 1, name)
        i += 1
        start = i
        seen = 0
        while i < len(lines) and lines[i].strip() and not lines[i].startswith("\\"):
            fields = lines[i].split()
            if len(fields) not in (k + 1, k + 2) or (k == order and len(fields) != k + 1):
                raise ArpaFormatError(f"expected {k} words plus scores, got {lines[i]!r}", i + 1, name)
            try:
                lp = float(fields[0])
                bow = float(fields[k + 1]) if len(fields) == k + 2 else None
            except ValueError:
                raise ArpaFormatError(f"non-numeric field in {lines[i]!r}", i + 1, name) from None
            if not math.isfinite(lp) or (bow is not None and not math.isfinite(bow)):
                raise ArpaFormatError(f"non-finite score in {lines[i]!r}", i + 1, name)
            g = tuple(fields[1:k + 1])
            if g in probs or (k == 1 and g[0] in vocab):
                raise ArpaFormatError(f"duplicate n-gram {' '.join(g)!r}", i + 1, name)
            if k == 1:
                vocab.add(g[0])
            elif any(w not in vocab for w in g):
                raise ArpaFormatError(f"n-gram {' '.join(g)!r} uses a word missing from 1-grams", i + 1, name)
            if g != (BOS,):
                probs[g] = 10.0 ** lp
            if bow is not None:
                backoffs[g] = 10.0 ** bow
            seen += 1
            i += 1
        if seen != declared[k]:
            raise ArpaFormatError(
                f"header declares {declared[k]} {k}-grams but section lists {seen}", start, name)
    skip_blank()
    if i >= len(lines) or lines[i].strip() != "\\end\\":
        raise ArpaFormatError("expected '\\end\\'", i + 1, "end")
    return NgramModel(order=order, vocab=frozenset(vocab), probs=probs, backoffs=backoffs,
                      log_base=log_base)


def import_arpa(path: str | Path, log_base: float = 10.0) -> NgramModel:
    return parse_arpa(Path(path).read_text(encoding="utf-8"), source=str(path), log_base=log_base)
