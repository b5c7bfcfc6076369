"""Text cleaning and normalization for multi-domain corpora.

Documents go through: decode, NFC, optional lowercase fold, strip-set removal,
sentence splitting on delimiter characters, table-driven transliteration of
whitespace chunks (numbers, acronyms, foreign words) and finally whitespace
tokenization.  Sentences that end up empty are not emitted.
"""
from __future__ import annotations

import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

DIGITS_REPLACEMENT = "@digits"

DEFAULT_STRIP_CHARS = "@#$%^&*()[]{}<>_=+~`\"'|\\/;:,-"
DEFAULT_DELIMITERS = ".?!\n"
DEFAULT_STRIP_CATEGORIES = ("So", "Sk", "Sm", "Sc", "Cc", "Cf")


class ConfigError(ValueError):
    """Raised for an invalid normalization configuration."""


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str | bytes
    source_tag: str = ""


@dataclass(frozen=True)
class NormalizedSentence:
    id: str
    tokens: tuple[str, ...]
    doc_id: str = ""
    index: int = 0
    source: str = ""

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class TranslitEntry:
    pattern: str
    replacement: str  # space-separated words, or DIGITS_REPLACEMENT
    is_regex: bool = False


@dataclass
class NormalizationConfig:
    strip_chars: str = DEFAULT_STRIP_CHARS
    strip_categories: tuple[str, ...] = DEFAULT_STRIP_CATEGORIES
    sentence_delimiters: str = DEFAULT_DELIMITERS
    transliteration: list[TranslitEntry] = field(default_factory=list)
    lowercase_fold: bool = True

    def __post_init__(self):
        self.validate()
        self._compiled = [
            (re.compile(e.pattern) if e.is_regex else None, e) for e in self.transliteration
        ]
        self._literals = {}
        for e in self.transliteration:
            if not e.is_regex:
                self._literals.setdefault(self._fold(e.pattern), e)

    def _fold(self, s: str) -> str:
        return s.lower() if self.lowercase_fold else s

    def validate(self) -> None:
        if not self.sentence_delimiters:
            raise ConfigError("sentence_delimiters must not be empty")
        seen: dict[tuple[bool, str], str] = {}
        for e in self.transliteration:
            key = (e.is_regex, e.pattern if e.is_regex else self._fold(e.pattern))
            if key in seen and seen[key] != e.replacement:
                raise ConfigError(
                    f"ambiguous transliteration pattern {e.pattern!r}: "
                    f"{seen[key]!r} vs {e.replacement!r}")
            seen[key] = e.replacement
            if e.is_regex:
                try:
                    re.compile(e.pattern)
                except re.error as exc:
                    raise ConfigError(f"bad regex {e.pattern!r}: {exc}") from None
        literals = {self._fold(e.pattern) for e in self.transliteration if not e.is_regex}
        regexes = [re.compile(e.pattern) for e in self.transliteration if e.is_regex]
        for e in self.transliteration:
            if e.replacement == DIGITS_REPLACEMENT:
                continue
            words = e.replacement.split()
            if not words:
                raise ConfigError(f"empty replacement for {e.pattern!r}")
            for w in words:
                bad = [c for c in w if self.is_stripped(c) or c in self.sentence_delimiters]
                if bad:
                    raise ConfigError(f"replacement {w!r} contains stripped/delimiter characters {bad}")
                # replacements must be fixed points, otherwise normalization is not idempotent
                if self._fold(w) in literals or any(r.fullmatch(self._fold(w)) for r in regexes):
                    raise ConfigError(f"replacement word {w!r} is itself a transliteration pattern")
                if self.lowercase_fold and w != w.lower():
                    raise ConfigError(f"replacement word {w!r} is not lowercase")
        if any(e.replacement == DIGITS_REPLACEMENT for e in self.transliteration):
            for d in "0123456789":
                if d not in literals:
                    raise ConfigError(f"{DIGITS_REPLACEMENT} needs a literal entry for digit {d!r}")

    def is_stripped(self, ch: str) -> bool:
        # delimiters win over the strip set; "\n" is a control character
        if ch in self.sentence_delimiters:
            return False
        return ch in self.strip_chars or unicodedata.category(ch) in self.strip_categories


@dataclass(frozen=True)
class DocumentError:
    doc_id: str
    message: str


@dataclass
class NormalizedCorpus:
    sentences: list[NormalizedSentence]
    dropped: list[str] = field(default_factory=list)
    errors: list[DocumentError] = field(default_factory=list)

    def __iter__(self):
        return iter(self.sentences)

    def __len__(self):
        return len(self.sentences)


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    tokens: int
    vocabulary: int
    per_source: dict[str, int]


def load_transliteration_table(path: str | Path) -> list[TranslitEntry]:
    """Read a tab-separated table: ``pattern<TAB>replacement``.

    Patterns prefixed with ``re:`` are full-match regexes over a chunk; the
    replacement ``@digits`` spells a digit string one digit at a time using
    the single-digit literal entries.
    """
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 'pattern<TAB>replacement'")
        pat, rep = parts[0], parts[1].strip()
        if pat.startswith("re:"):
            entries.append(TranslitEntry(pat[3:], rep, is_regex=True))
        else:
            entries.append(TranslitEntry(pat, rep))
    return entries


def _transliterate_chunk(chunk: str, cfg: NormalizationConfig) -> list[str]:
    key = cfg._fold(chunk)
    lit = cfg._literals.get(key)
    if lit is not None:
        return _expand(lit, key, cfg)
    for rx, entry in cfg._compiled:
        if rx is not None and rx.fullmatch(key):
            return _expand(entry, key, cfg)
    return [key]


def _expand(entry: TranslitEntry, chunk: str, cfg: NormalizationConfig) -> list[str]:
    if entry.replacement == DIGITS_REPLACEMENT:
        out = []
        for ch in chunk:
            if ch.isdigit() and ch in cfg._literals:
                out.extend(cfg._literals[ch].replacement.split())
            else:
                out.append(ch)
        return out
    return entry.replacement.split()


def _decode(text: str | bytes) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8")
    return text


def normalize_text(text: str, cfg: NormalizationConfig) -> list[list[str]]:
    """Normalize one decoded text into token lists, one per sentence."""
    text = unicodedata.normalize("NFC", text)
    if cfg.lowercase_fold:
        text = unicodedata.normalize("NFC", text.lower())
    cleaned = unicodedata.normalize("NFC", "".join(c for c in text if not cfg.is_stripped(c)))
    pattern = "[" + re.escape(cfg.sentence_delimiters) + "]"
    sentences = []
    for segment in re.split(pattern, cleaned):
        tokens: list[str] = []
        for chunk in segment.split():
            tokens.extend(_transliterate_chunk(chunk, cfg))
        if tokens:
            sentences.append(tokens)
    return sentences


def normalize_document(doc: RawDocument, cfg: NormalizationConfig) -> list[NormalizedSentence]:
    text = _decode(doc.text)
    return [
        NormalizedSentence(f"{doc.id}_{i:04d}", tuple(toks), doc.id, i, doc.source_tag)
        for i, toks in enumerate(normalize_text(text, cfg))
    ]


def normalize_corpus(docs: Iterable[RawDocument], cfg: NormalizationConfig) -> NormalizedCorpus:
    out = NormalizedCorpus([])
    seen_ids: set[str] = set()
    for doc in docs:
        if not doc.id:
            out.errors.append(DocumentError(doc.id, "empty document id"))
            continue
        if doc.id in seen_ids:
            out.errors.append(DocumentError(doc.id, "duplicate document id"))
            continue
        seen_ids.add(doc.id)
        try:
            sents = normalize_document(doc, cfg)
        except UnicodeDecodeError as exc:
            log.warning("document %s: undecodable text (%s)", doc.id, exc)
            out.errors.append(DocumentError(doc.id, f"undecodable text: {exc}"))
            continue
        if not sents:
            out.dropped.append(doc.id)
            continue
        out.sentences.extend(sents)
    return out


def corpus_stats(sentences: Sequence[NormalizedSentence]) -> CorpusStats:
    vocab: set[str] = set()
    tokens = 0
    per_source: Counter[str] = Counter()
    for s in sentences:
        tokens += len(s.tokens)
        vocab.update(s.tokens)
        per_source[s.source] += 1
    return CorpusStats(len(sentences), tokens, len(vocab), dict(sorted(per_source.items())))


def read_documents(path: str | Path, one_per_line: bool = True) -> list[RawDocument]:
    """Load raw documents from a UTF-8 text file.

    Line mode: each line is ``[source_tag<TAB>]text`` and gets id ``<stem>-<lineno>``.
    Whole-file mode: the file is one document named after its stem.  Bytes are
    kept undecoded so bad lines surface as per-document errors.
    """
    path = Path(path)
    data = path.read_bytes()
    if not one_per_line:
        return [RawDocument(path.stem, data, "")]
    docs = []
    for lineno, raw in enumerate(data.splitlines(), 1):
        tag = b""
        if b"\t" in raw:
            tag, raw = raw.split(b"\t", 1)
        docs.append(RawDocument(f"{path.stem}-{lineno:05d}", raw, tag.decode("utf-8", "replace")))
    return docs


def write_sentences(sentences: Iterable[NormalizedSentence], fh) -> None:
    for s in sentences:
        fh.write(s.text + "\n")
