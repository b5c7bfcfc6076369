"""Data-level augmentation recipe and staged corpus manifests.

The recipe: normalize multi-domain text, split each sentence with the
language model, synthesize a feature trajectory per sentence from the
clustered duration and acoustic models, and emit a manifest whose records
are tagged for the two training stages of an external neural trainer
(pretrain on synthetic pairs, then fine-tune on clean recordings).

Manifest format: ``#`` lines carry metadata, every other line is one record
``id|text|labels|features|stage|source``.  Paths are relative to the
manifest's directory.
"""
from __future__ import annotations

import json
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from . import arpa, ngram
from .alignments import read_alignments
from .cluster import accumulate_stats, grow_tree, write_tree
from .config import Config, ConfigError
from .models import (
    AcousticModel,
    DurationModel,
    _atomic_write,
    concatenate,
    duration_stats,
    generate_trajectory,
    predict_durations,
    read_sidecar,
    save_model,
    silence_frames,
    train_acoustic_model,
    train_duration_model,
    write_trajectory,
)
from .phones import (
    G2PError,
    G2PRules,
    PhoneSet,
    UnknownPhoneError,
    expand_contexts,
    format_labels,
    load_g2p_rules,
    load_phoneset,
    read_question_file,
    words_to_phones,
)
from .splitter import plan_synthesis, split
from .textnorm import NormalizationConfig, NormalizedSentence, normalize_corpus, normalize_text, read_documents

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SYNTHETIC = "synthetic-pretrain"
CLEAN = "clean-finetune"
STAGES = (SYNTHETIC, CLEAN)
COLUMNS = ("id", "text", "labels", "features", "stage", "source")
NO_PATH = "-"


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    text: str
    labels: str
    features: str
    stage: str
    source: str = ""

    def to_line(self) -> str:
        fields = [self.id, self.text, self.labels, self.features, self.stage, self.source]
        for f in fields:
            if "|" in f or "\n" in f:
                raise ValueError(f"record {self.id!r}: field {f!r} contains a separator")
        return "|".join(fields)


@dataclass
class CorpusManifest:
    records: list[ManifestRecord] = field(default_factory=list)
    stages: dict[str, dict[str, str]] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def by_stage(self, stage: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.stage == stage]


def merge_manifests(*parts: CorpusManifest) -> CorpusManifest:
    out = CorpusManifest()
    for p in parts:
        out.records.extend(p.records)
        for st, meta in p.stages.items():
            out.stages.setdefault(st, {}).update(meta)
    return out


def format_manifest(manifest: CorpusManifest) -> str:
    lines = [f"# hmmaug-manifest schema={manifest.schema_version}"]
    for st in STAGES:
        if st in manifest.stages:
            meta = " ".join(f"{k}={v}" for k, v in sorted(manifest.stages[st].items()))
            lines.append(f"# stage {st} {meta}".rstrip())
    lines.append("# columns " + "|".join(COLUMNS))
    lines.extend(r.to_line() for r in manifest.records)
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> CorpusManifest:
    m = CorpusManifest()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["hmmaug-manifest"]:
                m.schema_version = int(parts[1].split("=", 1)[1])
            elif parts[:1] == ["stage"] and len(parts) >= 2:
                m.stages[parts[1]] = dict(p.split("=", 1) for p in parts[2:])
            continue
        fields = line.split("|")
        if len(fields) != len(COLUMNS):
            raise ValueError(f"manifest line {lineno}: expected {len(COLUMNS)} fields, got {len(fields)}")
        m.records.append(ManifestRecord(*fields))
    return m


def write_manifest(path: str | Path, manifest: CorpusManifest) -> None:
    _atomic_write(Path(path), format_manifest(manifest).encode("utf-8"))


def read_manifest(path: str | Path) -> CorpusManifest:
    return parse_manifest(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    rows: tuple[int, ...] = ()


def validate_manifest(manifest: CorpusManifest, root: str | Path) -> list[Finding]:
    """Check ids, stage tags, path existence and feature sidecar consistency.

    Row numbers count records from 1.
    """
    root = Path(root)
    findings: list[Finding] = []
    first_row: dict[str, int] = {}
    for row, rec in enumerate(manifest.records, 1):
        if rec.id in first_row:
            findings.append(Finding("duplicate-id", f"id {rec.id!r} on rows {first_row[rec.id]} and {row}",
                                    (first_row[rec.id], row)))
        else:
            first_row[rec.id] = row
        if rec.stage not in STAGES:
            findings.append(Finding("bad-stage", f"row {row}: unknown stage {rec.stage!r}", (row,)))
        for col in ("labels", "features"):
            rel = getattr(rec, col)
            if rel == NO_PATH:
                if col == "features" or rec.stage == SYNTHETIC:
                    findings.append(Finding("missing-path", f"row {row}: no {col} path", (row,)))
                continue
            if not (root / rel).is_file():
                findings.append(Finding("missing-file", f"row {row}: {col} file {rel!r} does not exist", (row,)))
        if rec.stage == SYNTHETIC and rec.features != NO_PATH and (root / rec.features).is_file():
            try:
                T, d, _ = read_sidecar(root / rec.features)
            except (OSError, ValueError) as exc:
                findings.append(Finding("bad-sidecar", f"row {row}: {exc}", (row,)))
                continue
            size = (root / rec.features).stat().st_size
            if size != T * d * 4:
                findings.append(Finding(
                    "frame-count", f"row {row}: sidecar says T={T} d={d} ({T * d * 4} bytes) "
                    f"but file has {size} bytes ({size / (4 * d) if d else 0:g} frames)", (row,)))
    return findings


# --- synthesis -------------------------------------------------------------

@dataclass
class SynthesisContext:
    lm: ngram.NgramModel
    threshold: float
    rules: G2PRules
    phoneset: PhoneSet
    duration: DurationModel
    acoustic: AcousticModel
    pause_frames: int = 0
    smoothing_window: int = 0
    rate: float = 0.0


@dataclass
class SentenceResult:
    sentence: NormalizedSentence
    labels: list | None = None
    durations: list[int] | None = None
    trajectory: object = None
    segments: int = 0
    error: str | None = None


def synthesize_sentence(ctx: SynthesisContext, sentence: NormalizedSentence) -> SentenceResult:
    """LM split, then per segment: G2P, contexts, durations, trajectory; then join."""
    res = split(ctx.lm, sentence.tokens, ctx.threshold)
    plan = plan_synthesis(res, ctx.pause_frames)
    parts, all_labels, all_durs = [], [], []
    try:
        for seg in res.segments:
            labels = expand_contexts(words_to_phones(seg, ctx.rules), ctx.phoneset)
            durs = predict_durations(ctx.duration, labels, ctx.rate)
            parts.append(generate_trajectory(ctx.acoustic, labels, durs, ctx.smoothing_window))
            all_labels.extend(labels)
            all_durs.extend(durs)
    except (G2PError, UnknownPhoneError) as exc:
        return SentenceResult(sentence, error=str(exc))
    pause = silence_frames(ctx.acoustic, ctx.phoneset.silence, plan.pause_frames) if plan.pause_frames else None
    return SentenceResult(sentence, all_labels, all_durs, concatenate(parts, pause), len(res.segments))


_WORKER_CTX: SynthesisContext | None = None


def _init_worker(ctx: SynthesisContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _work(sentence: NormalizedSentence) -> SentenceResult:
    return synthesize_sentence(_WORKER_CTX, sentence)


def synthesize_all(ctx: SynthesisContext, sentences: Sequence[NormalizedSentence], workers: int = 1) -> list[SentenceResult]:
    """Results come back in input order whatever the worker count."""
    if workers <= 1 or len(sentences) < 2:
        return [synthesize_sentence(ctx, s) for s in sentences]
    chunk = max(1, len(sentences) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(ctx,)) as ex:
        return list(ex.map(_work, sentences, chunksize=chunk))


def build_synthetic_corpus(results: Iterable[SentenceResult], out_root: str | Path,
                           meta: dict[str, str] | None = None) -> tuple[CorpusManifest, list[dict]]:
    """Write label and feature files for successful sentences; collect skips."""
    out_root = Path(out_root)
    (out_root / "labels").mkdir(parents=True, exist_ok=True)
    (out_root / "features").mkdir(parents=True, exist_ok=True)
    manifest = CorpusManifest(stages={SYNTHETIC: {"order": "1", **(meta or {})}})
    skips = []
    for r in results:
        s = r.sentence
        if r.error is not None:
            log.warning("skipping %s: %s", s.id, r.error)
            skips.append({"id": s.id, "reason": r.error})
            continue
        lab_rel = f"labels/{s.id}.lab"
        feat_rel = f"features/{s.id}.feat"
        _atomic_write(out_root / lab_rel, format_labels(r.labels).encode("utf-8"))
        write_trajectory(out_root / feat_rel, r.trajectory)
        manifest.records.append(ManifestRecord(s.id, s.text, lab_rel, feat_rel, SYNTHETIC, s.source))
    return manifest, skips


def stage_clean_corpus(pairs: Iterable[tuple[str, str, str]], manifest_dir: str | Path,
                       norm: NormalizationConfig | None = None, epochs: int = 200,
                       base_dir: str | Path | None = None) -> tuple[CorpusManifest, list[dict]]:
    """Tag clean ``(id, text, audio_path)`` pairs for fine-tuning, keeping their order.

    Audio paths resolve against ``base_dir`` and are stored relative to the
    manifest directory.  Missing audio yields an error entry, not a record.
    """
    manifest_dir = Path(manifest_dir).resolve()
    base = Path(base_dir).resolve() if base_dir else Path.cwd()
    manifest = CorpusManifest(stages={CLEAN: {"order": "2", "epochs": str(epochs)}})
    errors = []
    for uid, text, audio in pairs:
        apath = Path(audio)
        apath = apath if apath.is_absolute() else base / apath
        if not apath.is_file():
            errors.append({"id": uid, "reason": f"missing audio file {audio}"})
            continue
        if norm is not None:
            text = " ".join(t for sent in normalize_text(text, norm) for t in sent)
        rel = os.path.relpath(apath, manifest_dir)
        manifest.records.append(ManifestRecord(uid, text, NO_PATH, rel, CLEAN, "clean"))
    return manifest, errors


def read_clean_list(path: str | Path) -> list[tuple[str, str, str]]:
    """``id|text|audio_path`` lines."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise PipelineError(f"{path}:{lineno}: expected 'id|text|audio_path'")
        out.append((parts[0], parts[1], parts[2]))
    return out


# --- orchestration -----------------------------------------------------------

@dataclass
class RunSummary:
    input_sentences: int = 0
    records: int = 0
    skips: list[dict] = field(default_factory=list)
    dropped_documents: list[str] = field(default_factory=list)
    document_errors: list[dict] = field(default_factory=list)
    clean_records: int = 0
    clean_errors: list[dict] = field(default_factory=list)
    split_sentences: int = 0
    segments: int = 0
    tree_leaves: dict[str, int] = field(default_factory=dict)
    findings: list[dict] = field(default_factory=list)
    manifest: str = "manifest.txt"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _require(cfg: Config, key: str) -> Path:
    p = cfg.path(key)
    if p is None:
        raise ConfigError(f"paths.{key} is required")
    if not p.exists():
        raise ConfigError(f"paths.{key}: {p} does not exist")
    return p


def train_models(cfg: Config, phoneset: PhoneSet, out_root: Path | None = None):
    """Cluster and train the duration and acoustic models from aligned data."""
    questions = read_question_file(_require(cfg, "questions"))
    questions.check(phoneset)
    utts = read_alignments(_require(cfg, "alignments"))
    cl = cfg.values["cluster"]
    floor = cl["variance_floor"]
    ac_stats = accumulate_stats(utts)
    ac_tree = grow_tree(ac_stats, questions, cl["min_occupancy"], cl["min_gain"], floor)
    du_stats = duration_stats(utts)
    du_tree = grow_tree(du_stats, questions, cl["duration_min_occupancy"], cl["duration_min_gain"], floor)
    syn = cfg.values["synthesis"]
    dur = train_duration_model(du_stats, du_tree, syn["rate"])
    ac = train_acoustic_model(ac_stats, ac_tree, syn["frame_period_ms"])
    if out_root is not None:
        mdir = out_root / "models"
        mdir.mkdir(parents=True, exist_ok=True)
        write_tree(mdir / "acoustic.tree", ac_tree)
        write_tree(mdir / "duration.tree", du_tree)
        save_model(dur, mdir / "duration.model")
        save_model(ac, mdir / "acoustic.model")
    return dur, ac


def run_pipeline(cfg: Config, workers: int | None = None) -> RunSummary:
    """Run the full recipe; everything is written under ``paths.output_root``."""
    out_root = cfg.path("output_root")
    if out_root is None:
        raise ConfigError("paths.output_root is required")
    out_root.mkdir(parents=True, exist_ok=True)
    if workers is None:
        workers = cfg.get("run", "workers") or (os.cpu_count() or 1)

    norm = cfg.normalization()
    phoneset = load_phoneset(_require(cfg, "phoneset"))
    rules = load_g2p_rules(_require(cfg, "g2p_rules"))
    rules.check(phoneset)
    summary = RunSummary()

    parts = []
    if cfg.get("stages", "synthetic"):
        corpus = normalize_corpus(read_documents(_require(cfg, "raw_text")), norm)
        summary.input_sentences = len(corpus.sentences)
        summary.dropped_documents = corpus.dropped
        summary.document_errors = [asdict(e) for e in corpus.errors]

        lm_path = cfg.path("lm_model")
        if lm_path is not None:
            lm = ngram.load_model(lm_path)
        else:
            lm_sents = [s.tokens for s in corpus.sentences]
            extra = cfg.path("lm_text")
            if extra is not None:
                lm_sents += normalize_text(extra.read_text(encoding="utf-8"), norm)
            lm = ngram.train(lm_sents, cfg.lm())
        arpa.export_arpa(lm, out_root / "lm.arpa")

        dur, ac = train_models(cfg, phoneset, out_root)
        syn = cfg.values["synthesis"]
        ctx = SynthesisContext(lm, cfg.get("lm", "threshold"), rules, phoneset, dur, ac,
                               syn["pause_frames"], syn["smoothing_window"], syn["rate"])
        results = synthesize_all(ctx, corpus.sentences, workers)
        summary.split_sentences = sum(1 for r in results if r.segments > 1)
        summary.segments = sum(r.segments for r in results)
        summary.tree_leaves = {"acoustic": len(ac.tree.leaves()), "duration": len(dur.tree.leaves())}
        synth, skips = build_synthetic_corpus(results, out_root,
                                              {"threshold": repr(cfg.get("lm", "threshold"))})
        summary.records = len(synth.records)
        summary.skips = skips
        parts.append(synth)

    if cfg.get("stages", "clean") and cfg.path("clean_list") is not None:
        clean_path = _require(cfg, "clean_list")
        clean, errors = stage_clean_corpus(read_clean_list(clean_path), out_root, norm,
                                           cfg.get("stages", "clean_epochs"), clean_path.parent)
        summary.clean_records = len(clean.records)
        summary.clean_errors = errors
        parts.append(clean)

    manifest = merge_manifests(*parts)
    write_manifest(out_root / summary.manifest, manifest)
    summary.findings = [asdict(f) for f in validate_manifest(manifest, out_root)]
    _atomic_write(out_root / "summary.json", summary.to_json().encode("utf-8"))
    return summary


TOY_FILES = ("toy.cfg", "corpus.txt", "tts_text.txt", "aligned.txt", "phoneset.txt", "g2p.tsv",
             "questions.hed", "translit.tsv", "clean.txt")


def install_toy(dest: str | Path) -> Path:
    """Copy the bundled toy corpus and config into ``dest``; returns the config path."""
    dest = Path(dest)
    (dest / "clean").mkdir(parents=True, exist_ok=True)
    data = resources.files("hmmaug") / "data"
    for name in TOY_FILES:
        with resources.as_file(data / name) as src:
            shutil.copyfile(src, dest / name)
    for item in (data / "clean").iterdir():
        with resources.as_file(item) as src:
            shutil.copyfile(src, dest / "clean" / item.name)
    return dest / "toy.cfg"
