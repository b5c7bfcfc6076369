"""Interpolated Kneser-Ney n-gram language model.

The model keeps one absolute discount per order, estimated from the
count-of-counts of the counts actually used at that order: raw counts at
the highest order, continuation counts (number of distinct left contexts)
below it.  N-grams that begin with the sentence-start marker have no left
context, so they keep their raw counts at every order.  The lowest order
interpolates with a uniform distribution over the predictable vocabulary,
which gives every word (the unknown marker included) non-zero probability.

After training, the interpolated model is stored in back-off form: the full
probability of every observed n-gram plus one weight per history.  This is
exactly what an ARPA file holds, so a model read back from ARPA scores
identically.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

Ngram = tuple[str, ...]

DEGENERATE_DISCOUNT = 0.5


class LMError(ValueError):
    pass


class LMTrainingError(LMError):
    pass


class OOVError(LMError, KeyError):
    pass


@dataclass(frozen=True)
class LMConfig:
    order: int = 2
    min_count: int = 1
    log_base: float = 10.0
    open_vocab: bool = True


@dataclass(frozen=True)
class ScoredBigram:
    left: str
    right: str
    log_likelihood: float


@dataclass
class NgramModel:
    order: int
    vocab: frozenset[str]
    probs: dict[Ngram, float]
    backoffs: dict[Ngram, float]
    discounts: list[float] = field(default_factory=list)
    counts: dict[Ngram, int] = field(default_factory=dict)
    continuation_counts: dict[Ngram, int] = field(default_factory=dict)
    log_base: float = 10.0

    @property
    def open_vocab(self) -> bool:
        return UNK in self.vocab

    @property
    def predictable(self) -> list[str]:
        """Words a history can predict: the vocabulary minus the start marker."""
        return sorted(w for w in self.vocab if w != BOS)

    def map_word(self, word: str) -> str:
        if word in self.vocab:
            return word
        if self.open_vocab:
            return UNK
        raise OOVError(f"word {word!r} not in closed vocabulary")

    def prob(self, word: str, history: Sequence[str] = ()) -> float:
        """Conditional probability of ``word`` given ``history`` (already mapped)."""
        hist = tuple(history)[-(self.order - 1):] if self.order > 1 else ()
        weight = 1.0
        while True:
            p = self.probs.get(hist + (word,))
            if p is not None:
                return weight * p
            if not hist:
                raise OOVError(f"no unigram entry for {word!r}")
            weight *= self.backoffs.get(hist, 1.0)
            hist = hist[1:]

    def log_prob(self, word: str, history: Sequence[str] = ()) -> float:
        return math.log(self.prob(word, history)) / math.log(self.log_base)

    def histories(self) -> list[Ngram]:
        """Every history that has at least one observed continuation."""
        return sorted({g[:-1] for g in self.probs if len(g) > 1})


def _discount(counts: Iterable[int], order: int) -> float:
    coc = Counter(c for c in counts if c in (1, 2))
    n1, n2 = coc[1], coc[2]
    if n1 == 0 or n2 == 0:
        log.warning("order %d: count-of-counts n1=%d n2=%d leave D outside (0,1); using %.1f",
                    order, n1, n2, DEGENERATE_DISCOUNT)
        return DEGENERATE_DISCOUNT
    return n1 / (n1 + 2 * n2)


def _padded(sentences: Sequence[Sequence[str]]) -> list[list[str]]:
    return [[BOS, *s, EOS] for s in sentences]


def train(sentences: Iterable, config: LMConfig | None = None, **overrides) -> NgramModel:
    """Train an interpolated Kneser-Ney model.

    ``sentences`` may be token sequences or objects with a ``tokens`` attribute.
    Keyword overrides are applied on top of ``config``.
    """
    cfg = config or LMConfig()
    if overrides:
        cfg = LMConfig(**{**cfg.__dict__, **overrides})
    n = cfg.order
    if n < 1:
        raise LMTrainingError(f"order must be >= 1, got {n}")
    sents = [list(getattr(s, "tokens", s)) for s in sentences]
    sents = [s for s in sents if s]
    if not sents:
        raise LMTrainingError("empty training corpus")
    longest = max(len(s) for s in sents) + 2
    if n > longest:
        raise LMTrainingError(f"order {n} exceeds longest padded sentence length {longest}")

    freq = Counter(w for s in sents for w in s)
    for marker in (BOS, EOS, UNK):
        if marker in freq:
            raise LMTrainingError(f"training text contains reserved token {marker!r}")
    keep = {w for w, c in freq.items() if c >= cfg.min_count}
    if not cfg.open_vocab and len(keep) < len(freq):
        raise LMTrainingError("closed vocabulary cannot drop words below min_count")
    sents = [[w if w in keep else UNK for w in s] for s in sents]
    vocab = set(keep) | {BOS, EOS}
    if cfg.open_vocab:
        vocab.add(UNK)
    padded = _padded(sents)

    raw: Counter[Ngram] = Counter()
    for s in padded:
        for k in range(1, n + 1):
            for i in range(len(s) - k + 1):
                g = tuple(s[i:i + k])
                if k == 1 and g[0] == BOS:
                    continue
                raw[g] += 1

    left_contexts: dict[Ngram, set[str]] = defaultdict(set)
    for g in raw:
        if len(g) > 1:
            left_contexts[g[1:]].add(g[0])
    used: dict[Ngram, int] = {}
    cont: dict[Ngram, int] = {}
    for g, c in raw.items():
        if len(g) == n or g[0] == BOS:
            used[g] = c
        else:
            used[g] = cont[g] = len(left_contexts[g])

    discounts = [_discount((c for g, c in used.items() if len(g) == k), k) for k in range(1, n + 1)]

    hist_total: Counter[Ngram] = Counter()
    hist_types: Counter[Ngram] = Counter()
    for g, c in used.items():
        hist_total[g[:-1]] += c
        hist_types[g[:-1]] += 1

    predictable = sorted(w for w in vocab if w != BOS)
    uniform = 1.0 / len(predictable)
    backoffs: dict[Ngram, float] = {}
    for h, total in hist_total.items():
        backoffs[h] = discounts[len(h)] * hist_types[h] / total

    probs: dict[Ngram, float] = {}

    def interp(word: str, hist: Ngram) -> float:
        key = hist + (word,)
        if key in probs:
            return probs[key]
        lo = interp(word, hist[1:]) if hist else uniform
        total = hist_total.get(hist)
        if not total:
            return lo
        d = discounts[len(hist)]
        return max(used.get(key, 0) - d, 0.0) / total + backoffs[hist] * lo

    for k in range(1, n + 1):
        grams = sorted(g for g in used if len(g) == k)
        if k == 1:
            grams = [(w,) for w in predictable]
        for g in grams:
            probs[g] = interp(g[-1], g[:-1])
    # the empty history has no ARPA line to carry a weight
    backoffs = {h: w for h, w in backoffs.items() if h}

    return NgramModel(
        order=n,
        vocab=frozenset(vocab),
        probs=probs,
        backoffs=backoffs,
        discounts=discounts,
        counts=dict(raw),
        continuation_counts=cont,
        log_base=cfg.log_base,
    )


def _tokens(sentence) -> list[str]:
    return list(getattr(sentence, "tokens", sentence))


def score_bigrams(model: NgramModel, sentence) -> list[ScoredBigram]:
    """One score per adjacent pair, including the start and end marker pairs.

    For models of order > 2 the score of each pair is conditioned on the full
    available history, not only the left word.
    """
    if model.order < 2:
        raise LMError("pair scoring needs a model of order >= 2")
    toks = _tokens(sentence)
    if not toks:
        return []
    seq = [BOS, *(model.map_word(t) for t in toks), EOS]
    shown = [BOS, *toks, EOS]
    out = []
    for i in range(1, len(seq)):
        hist = seq[max(0, i - model.order + 1):i]
        out.append(ScoredBigram(shown[i - 1], shown[i], model.log_prob(seq[i], hist)))
    return out


def sentence_log_likelihood(model: NgramModel, sentence) -> float:
    toks = _tokens(sentence)
    if not toks:
        return 0.0
    seq = [BOS, *(model.map_word(t) for t in toks), EOS]
    total = 0.0
    for i in range(1, len(seq)):
        total += model.log_prob(seq[i], seq[max(0, i - model.order + 1):i])
    return total


def normalized_log_likelihood(model: NgramModel, sentence) -> float:
    """Sentence score divided by the number of words (markers excluded)."""
    toks = _tokens(sentence)
    if not toks:
        raise LMError("cannot normalize the score of an empty sentence")
    return sentence_log_likelihood(model, toks) / len(toks)


def cumulative_scores(model: NgramModel, sentence) -> list[float]:
    """Running sum of pair scores, one entry per scored pair."""
    out, acc = [], 0.0
    for sb in score_bigrams(model, sentence):
        acc += sb.log_likelihood
        out.append(acc)
    return out


def _key(g: Ngram) -> str:
    return " ".join(g)


def save_model(model: NgramModel, path: str | Path) -> None:
    """Write the native JSON form, which keeps counts as well as probabilities."""
    doc = {
        "format": "hmmaug-ngram",
        "version": 1,
        "order": model.order,
        "log_base": model.log_base,
        "vocab": sorted(model.vocab),
        "discounts": model.discounts,
        "counts": {_key(g): c for g, c in sorted(model.counts.items())},
        "continuation_counts": {_key(g): c for g, c in sorted(model.continuation_counts.items())},
        "probs": {_key(g): p for g, p in sorted(model.probs.items())},
        "backoffs": {_key(g): b for g, b in sorted(model.backoffs.items())},
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> NgramModel:
    """Load a model from native JSON or ARPA, picked by content."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        if doc.get("format") != "hmmaug-ngram":
            raise LMError(f"{path}: not an hmmaug n-gram model")
        split = lambda d: {tuple(k.split(" ")): v for k, v in d.items()}  # noqa: E731
        return NgramModel(
            order=doc["order"],
            vocab=frozenset(doc["vocab"]),
            probs=split(doc["probs"]),
            backoffs=split(doc["backoffs"]),
            discounts=list(doc["discounts"]),
            counts=split(doc["counts"]),
            continuation_counts=split(doc["continuation_counts"]),
            log_base=doc["log_base"],
        )
    from .arpa import parse_arpa

    return parse_arpa(text, source=str(path))
