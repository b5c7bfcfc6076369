"""Phone inventories, rule-based G2P, pentaphone labels and question sets.

Label text format, one per line::

    LL^L-C+R=RR

Question file format, one per line::

    QS "R-Nasal" {*+m=*,*+n=*}

Each pattern pins exactly one slot; all patterns of a question pin the same slot.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

SLOTS = ("LL", "L", "C", "R", "RR")
_RESERVED = set("^-+=*{},\" \t\n")

# slot -> (prefix, suffix) of its single-slot pattern
SLOT_PATTERNS = {
    "LL": ("", "^*"),
    "L": ("*^", "-*"),
    "C": ("*-", "+*"),
    "R": ("*+", "=*"),
    "RR": ("*=", ""),
}


class ParseError(ValueError):
    def __init__(self, message: str, lineno: int = 0, column: int = 0, source: str = ""):
        loc = ":".join(str(x) for x in (source, lineno, column) if x not in ("", 0))
        super().__init__(f"{loc}: {message}" if loc else message)
        self.lineno = lineno
        self.column = column


class G2PError(ValueError):
    pass


class UnknownPhoneError(ValueError):
    pass


def _check_symbol(sym: str) -> None:
    if not sym or any(c in _RESERVED for c in sym):
        raise ValueError(f"invalid phone symbol {sym!r}")


@dataclass(frozen=True)
class PhoneSet:
    phones: frozenset[str]
    silence: str = "sil"
    categories: dict[str, frozenset[str]] = field(default_factory=dict)

    def __post_init__(self):
        for p in self.phones:
            _check_symbol(p)
        if self.silence not in self.phones:
            raise ValueError(f"silence symbol {self.silence!r} missing from phone set")
        for name, members in self.categories.items():
            extra = set(members) - self.phones
            if extra:
                raise ValueError(f"category {name!r} has unknown phones {sorted(extra)}")

    def __contains__(self, phone: str) -> bool:
        return phone in self.phones


def load_phoneset(path: str | Path) -> PhoneSet:
    """Read ``phone cat1 cat2 ...`` lines; a ``silence <sym>`` line names the silence phone."""
    phones: set[str] = set()
    cats: dict[str, set[str]] = {}
    silence = "sil"
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "silence":
            if len(parts) != 2:
                raise ParseError("expected 'silence <phone>'", lineno, 1, str(path))
            silence = parts[1]
            phones.add(silence)
            continue
        phones.add(parts[0])
        for c in parts[1:]:
            cats.setdefault(c, set()).add(parts[0])
    return PhoneSet(frozenset(phones), silence, {k: frozenset(v) for k, v in sorted(cats.items())})


@dataclass(frozen=True)
class G2PRules:
    rules: tuple[tuple[str, tuple[str, ...]], ...]
    longest_match_first: bool = True
    fallback: tuple[str, ...] | None = None

    def check(self, phoneset: PhoneSet) -> None:
        emitted = {p for _, seq in self.rules for p in seq} | set(self.fallback or ())
        bad = emitted - phoneset.phones
        if bad:
            raise UnknownPhoneError(f"rules emit phones outside the phone set: {sorted(bad)}")


def load_g2p_rules(path: str | Path) -> G2PRules:
    """Read ``grapheme<TAB>phone phone ...`` lines.

    A ``*`` grapheme defines the per-character fallback.  A ``!first-match``
    line switches from longest-match to file-order matching.
    """
    rules = []
    fallback = None
    longest = True
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        if line.strip() == "!first-match":
            longest = False
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0]:
            raise ParseError("expected 'grapheme<TAB>phones'", lineno, 1, str(path))
        seq = tuple(parts[1].split())
        if parts[0] == "*":
            fallback = seq
        else:
            rules.append((parts[0], seq))
    return G2PRules(tuple(rules), longest, fallback)


def g2p(word: str, rules: G2PRules) -> list[str]:
    """Left-to-right rewrite of ``word`` into phones.

    At each position the candidate rules are tried longest first (or in file
    order); if the remainder cannot be covered the next candidate is tried, so
    rules {k, ka, am} still rewrite "kam" as k + am.
    """
    order = sorted(rules.rules, key=lambda r: -len(r[0])) if rules.longest_match_first else rules.rules
    dead: set[int] = set()
    furthest = 0

    def cover(i: int):
        nonlocal furthest
        if i == len(word):
            return []
        if i in dead:
            return None
        furthest = max(furthest, i)
        for graph, seq in order:
            if word.startswith(graph, i):
                rest = cover(i + len(graph))
                if rest is not None:
                    return [*seq, *rest]
        if rules.fallback is not None:
            rest = cover(i + 1)
            if rest is not None:
                return [*rules.fallback, *rest]
        dead.add(i)
        return None

    out = cover(0)
    if out is None:
        raise G2PError(f"no rule covers grapheme {word[furthest]!r} in {word!r}")
    return out


def words_to_phones(words: Iterable[str], rules: G2PRules) -> list[str]:
    out: list[str] = []
    for w in words:
        out.extend(g2p(w, rules))
    return out


@dataclass(frozen=True, order=True)
class FullContextLabel:
    ll: str
    l: str  # noqa: E741
    c: str
    r: str
    rr: str
    index: int = field(default=-1, compare=False)

    def slot(self, name: str) -> str:
        return getattr(self, name.lower())

    @property
    def context(self) -> tuple[str, str, str, str, str]:
        return (self.ll, self.l, self.c, self.r, self.rr)

    def __str__(self) -> str:
        return f"{self.ll}^{self.l}-{self.c}+{self.r}={self.rr}"


def expand_contexts(phones: Sequence[str], phoneset: PhoneSet) -> list[FullContextLabel]:
    if not phones:
        raise ValueError("cannot expand an empty phone sequence")
    for p in phones:
        if p not in phoneset:
            raise UnknownPhoneError(f"unknown phone {p!r}")
    sil = phoneset.silence
    padded = [sil, sil, *phones, sil, sil]
    return [FullContextLabel(*padded[i:i + 5], index=i) for i in range(len(phones))]


def centers(labels: Iterable[FullContextLabel]) -> list[str]:
    return [lab.c for lab in labels]


_LABEL_RE = re.compile(r"^([^\^\-\+=\s]+)\^([^\^\-\+=\s]+)-([^\^\-\+=\s]+)\+([^\^\-\+=\s]+)=([^\^\-\+=\s]+)$")


def parse_label(text: str, lineno: int = 0, source: str = "") -> FullContextLabel:
    m = _LABEL_RE.match(text)
    if m:
        return FullContextLabel(*m.groups(), index=max(lineno - 1, 0))
    seps = "^-+="
    pos = 0
    for k, slot in enumerate(SLOTS):
        start = pos
        while pos < len(text) and text[pos] not in seps and not text[pos].isspace():
            pos += 1
        if pos == start:
            raise ParseError(f"empty {slot} slot", lineno, pos + 1, source)
        if k == len(SLOTS) - 1:
            break
        if pos >= len(text) or text[pos] != seps[k]:
            found = repr(text[pos]) if pos < len(text) else "end of line"
            raise ParseError(f"expected {seps[k]!r} after {slot}, found {found}", lineno, pos + 1, source)
        pos += 1
    raise ParseError(f"unexpected trailing text {text[pos:]!r}", lineno, pos + 1, source)


def parse_labels(text: str, source: str = "") -> list[FullContextLabel]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [parse_label(line, lineno, source) for lineno, line in enumerate(lines, 1)]


def format_labels(labels: Iterable[FullContextLabel]) -> str:
    return "".join(f"{lab}\n" for lab in labels)


def read_label_file(path: str | Path) -> list[FullContextLabel]:
    return parse_labels(Path(path).read_text(encoding="utf-8"), str(path))


def write_label_file(path: str | Path, labels: Iterable[FullContextLabel]) -> None:
    Path(path).write_text(format_labels(labels), encoding="utf-8")


@dataclass(frozen=True)
class Question:
    name: str
    slot: str
    phones: frozenset[str]

    def ask(self, label: FullContextLabel) -> bool:
        return label.slot(self.slot) in self.phones

    def __str__(self) -> str:
        pre, suf = SLOT_PATTERNS[self.slot]
        pats = ",".join(f"{pre}{p}{suf}" for p in sorted(self.phones))
        return f'QS "{self.name}" {{{pats}}}'


@dataclass(frozen=True)
class QuestionSet:
    questions: tuple[Question, ...]

    def __post_init__(self):
        names = [q.name for q in self.questions]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise ValueError(f"duplicate question names: {sorted(dup)}")
        for q in self.questions:
            if q.slot not in SLOTS:
                raise ValueError(f"question {q.name!r}: bad slot {q.slot!r}")
            if not q.phones:
                raise ValueError(f"question {q.name!r} has an empty phone set")

    def __iter__(self):
        return iter(self.questions)

    def __len__(self):
        return len(self.questions)

    def by_name(self, name: str) -> Question:
        for q in self.questions:
            if q.name == name:
                return q
        raise KeyError(name)

    def check(self, phoneset: PhoneSet) -> None:
        for q in self.questions:
            extra = q.phones - phoneset.phones
            if extra:
                raise UnknownPhoneError(f"question {q.name!r} uses unknown phones {sorted(extra)}")


_QS_RE = re.compile(r'^QS\s+"([^"]+)"\s+\{([^{}]*)\}\s*$')


def _parse_pattern(pat: str, lineno: int, col: int, source: str) -> tuple[str, str]:
    for slot, (pre, suf) in SLOT_PATTERNS.items():
        if pat.startswith(pre) and pat.endswith(suf) and len(pat) > len(pre) + len(suf):
            phone = pat[len(pre):len(pat) - len(suf)]
            if not any(c in _RESERVED for c in phone):
                return slot, phone
    raise ParseError(f"pattern {pat!r} does not pin exactly one slot", lineno, col, source)


def parse_questions(text: str, source: str = "") -> QuestionSet:
    qs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _QS_RE.match(line)
        if not m:
            col = 1 if not line.startswith("QS") else (line.find("{") + 1 or len(line) + 1)
            raise ParseError("expected 'QS \"name\" {pattern,...}'", lineno, col, source)
        name, body = m.group(1), m.group(2)
        slots, phones = set(), set()
        col = m.start(2) + 1
        for pat in body.split(","):
            if not pat:
                raise ParseError("empty pattern", lineno, col, source)
            slot, phone = _parse_pattern(pat.strip(), lineno, col, source)
            slots.add(slot)
            phones.add(phone)
            col += len(pat) + 1
        if len(slots) != 1:
            raise ParseError(f"question {name!r} mixes slots {sorted(slots)}", lineno, m.start(2) + 1, source)
        qs.append(Question(name, slots.pop(), frozenset(phones)))
    try:
        return QuestionSet(tuple(qs))
    except ValueError as exc:
        raise ParseError(str(exc), source=source) from None


def format_questions(qset: QuestionSet) -> str:
    return "".join(f"{q}\n" for q in qset)


def read_question_file(path: str | Path) -> QuestionSet:
    return parse_questions(Path(path).read_text(encoding="utf-8"), str(path))


def write_question_file(path: str | Path, qset: QuestionSet) -> None:
    Path(path).write_text(format_questions(qset), encoding="utf-8")


def category_questions(phoneset: PhoneSet, slots: Sequence[str] = SLOTS,
                       identity_slots: Sequence[str] = ("C",)) -> QuestionSet:
    """Build a question set from phone categories plus per-phone identity questions."""
    qs = []
    for slot in slots:
        for name, members in phoneset.categories.items():
            qs.append(Question(f"{slot}-{name}", slot, members))
    for slot in identity_slots:
        for p in sorted(phoneset.phones):
            qs.append(Question(f"{slot}=={p}", slot, frozenset([p])))
    return QuestionSet(tuple(qs))
