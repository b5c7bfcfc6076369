"""Command line entry point: ``hmmaug <command> ...``.

Exit status is 0 on success, 1 on a usage error and 2 on a data error.
Diagnostics go to stderr; data goes to stdout or to the named output files.
A ``--config`` file supplies defaults and explicit flags override it.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, arpa, ngram
from .alignments import read_alignments
from .cluster import accumulate_stats, format_tree, grow_tree, write_tree
from .config import Config, ConfigError, load_config
from .evaluation import error_report, format_error_report, read_ratings, significance_test, summarize_ratings
from .models import (
    concatenate,
    dump_text,
    duration_stats,
    generate_trajectory,
    load_model,
    predict_durations,
    save_model,
    silence_frames,
    train_acoustic_model,
    train_duration_model,
    write_trajectory,
)
from .phones import (
    G2PError,
    ParseError,
    UnknownPhoneError,
    expand_contexts,
    format_labels,
    g2p,
    load_g2p_rules,
    load_phoneset,
    read_label_file,
    read_question_file,
    words_to_phones,
)
from .pipeline import PipelineError, install_toy, run_pipeline
from .splitter import plan_synthesis, split, sweep_thresholds
from .textnorm import normalize_corpus, normalize_text, read_documents, write_sentences

log = logging.getLogger("hmmaug")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# --- helpers -----------------------------------------------------------------

def _cfg(args) -> Config:
    return load_config(getattr(args, "config", None))


def _pick(flag, cfg: Config, section: str, key: str):
    """Explicit flag wins over the config value."""
    return flag if flag is not None else cfg.get(section, key)


def _cfg_path(flag, cfg: Config, key: str, what: str) -> Path:
    if flag is not None:
        return Path(flag)
    p = cfg.path(key)
    if p is None:
        raise UsageError(f"{what} is required (flag or paths.{key} in the config)")
    return p


def _read_input(path: str | None) -> str:
    if path in (None, "-"):
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _norm(cfg: Config, translit: str | None = None):
    if translit is not None:
        cfg.set("paths", "transliteration", str(Path(translit).resolve()))
    return cfg.normalization()


def _sentences(args, cfg: Config) -> list[list[str]]:
    """Normalized sentences from ``args.input`` (stdin if absent)."""
    return [s for s in normalize_text(_read_input(args.input), _norm(cfg)) if s]


def _open_out(path: str | None):
    if path in (None, "-"):
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8")


# --- commands ------------------------------------------------------------------

def cmd_normalize(args) -> int:
    cfg = _cfg(args)
    norm = _norm(cfg, args.translit)
    corpus = normalize_corpus([d for f in args.inputs for d in read_documents(f)], norm)
    out = _open_out(args.output)
    try:
        if args.ids:
            for s in corpus.sentences:
                out.write(f"{s.id}\t{s.source}\t{s.text}\n")
        else:
            write_sentences(corpus.sentences, out)
    finally:
        if out is not sys.stdout:
            out.close()
    for err in corpus.errors:
        print(f"document {err.doc_id}: {err.message}", file=sys.stderr)
    log.info("%d sentences, %d dropped documents", len(corpus.sentences), len(corpus.dropped))
    return EXIT_DATA if corpus.errors and args.strict else EXIT_OK


def cmd_lm_train(args) -> int:
    cfg = _cfg(args)
    norm = _norm(cfg)
    sents = []
    for f in args.inputs:
        sents += [s for s in normalize_text(Path(f).read_text(encoding="utf-8"), norm) if s]
    lmcfg = cfg.lm()
    model = ngram.train(sents, lmcfg, order=_pick(args.order, cfg, "lm", "order"),
                        min_count=_pick(args.min_count, cfg, "lm", "min_count"))
    if args.output.endswith(".arpa"):
        arpa.export_arpa(model, args.output)
    else:
        ngram.save_model(model, args.output)
    log.info("order %d, %d words, discounts %s", model.order, len(model.vocab),
             " ".join(f"{d:.4f}" for d in model.discounts))
    return EXIT_OK


def cmd_lm_score(args) -> int:
    cfg = _cfg(args)
    model = ngram.load_model(args.lm)
    for toks in _sentences(args, cfg):
        if args.pairs:
            for sb in ngram.score_bigrams(model, toks):
                print(f"{sb.left}\t{sb.right}\t{sb.log_likelihood:.6f}")
            print()
        else:
            print(f"{ngram.normalized_log_likelihood(model, toks):.6f}\t{' '.join(toks)}")
    return EXIT_OK


def cmd_lm_export(args) -> int:
    arpa.export_arpa(ngram.load_model(args.model), args.output)
    return EXIT_OK


def cmd_lm_import(args) -> int:
    ngram.save_model(arpa.import_arpa(args.arpa), args.output)
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _cfg(args)
    model = ngram.load_model(_cfg_path(args.lm, cfg, "lm_model", "--lm"))
    sents = _sentences(args, cfg)
    if args.sweep:
        for row in sweep_thresholds(model, sents, args.sweep):
            hist = " ".join(f"{k}:{v}" for k, v in sorted(row.segment_lengths.items()))
            print(f"{row.threshold:g}\t{row.sentences}\t{row.splits}\t{hist}")
        return EXIT_OK
    threshold = _pick(args.threshold, cfg, "lm", "threshold")
    for toks in sents:
        res = split(model, toks, threshold)
        if args.json:
            print(json.dumps({
                "segments": [" ".join(s) for s in res.segments],
                "split_points": [{"after": i, "left": sb.left, "right": sb.right,
                                  "log_likelihood": sb.log_likelihood} for i, sb in res.split_points],
                "threshold": threshold,
            }, sort_keys=True))
        else:
            for seg in plan_synthesis(res).segments:
                print(seg)
            print()
    return EXIT_OK


def cmd_g2p(args) -> int:
    cfg = _cfg(args)
    rules = load_g2p_rules(_cfg_path(args.rules, cfg, "g2p_rules", "--rules"))
    words = args.words or [w for s in _sentences(args, cfg) for w in s]
    bad = 0
    for w in words:
        try:
            print(f"{w}\t{' '.join(g2p(w, rules))}")
        except G2PError as exc:
            print(f"{w}: {exc}", file=sys.stderr)
            bad += 1
    return EXIT_DATA if bad else EXIT_OK


def cmd_labels(args) -> int:
    cfg = _cfg(args)
    rules = load_g2p_rules(_cfg_path(args.rules, cfg, "g2p_rules", "--rules"))
    ps = load_phoneset(_cfg_path(args.phoneset, cfg, "phoneset", "--phoneset"))
    out = _open_out(args.output)
    try:
        for toks in _sentences(args, cfg):
            out.write(format_labels(expand_contexts(words_to_phones(toks, rules), ps)))
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_cluster(args) -> int:
    cfg = _cfg(args)
    qs = read_question_file(_cfg_path(args.questions, cfg, "questions", "--questions"))
    utts = read_alignments(_cfg_path(args.alignments, cfg, "alignments", "--alignments"))
    cl = cfg.values["cluster"]
    if args.kind == "duration":
        stats = duration_stats(utts)
        occ = _pick(args.min_occupancy, cfg, "cluster", "duration_min_occupancy")
        gain = _pick(args.min_gain, cfg, "cluster", "duration_min_gain")
    else:
        stats = accumulate_stats(utts)
        occ = _pick(args.min_occupancy, cfg, "cluster", "min_occupancy")
        gain = _pick(args.min_gain, cfg, "cluster", "min_gain")
    tree = grow_tree(stats, qs, occ, gain, cl["variance_floor"])
    if args.output:
        write_tree(args.output, tree)
    else:
        sys.stdout.write(format_tree(tree))
    if args.model:
        syn = cfg.values["synthesis"]
        if args.kind == "duration":
            model = train_duration_model(stats, tree, syn["rate"])
        else:
            model = train_acoustic_model(stats, tree, syn["frame_period_ms"])
        save_model(model, args.model)
    log.info("%d leaves, depth %d", len(tree.leaves()), tree.depth())
    return EXIT_OK


def cmd_duration(args) -> int:
    cfg = _cfg(args)
    model = load_model(args.model)
    rate = _pick(args.rate, cfg, "synthesis", "rate")
    labels = read_label_file(args.labels)
    for lab, d in zip(labels, predict_durations(model, labels, rate)):
        print(f"{lab}\t{d}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg = _cfg(args)
    dur = load_model(args.duration_model)
    ac = load_model(args.acoustic_model)
    rate = _pick(args.rate, cfg, "synthesis", "rate")
    window = _pick(args.smoothing, cfg, "synthesis", "smoothing_window")
    if args.labels:
        labels = read_label_file(args.labels)
        traj = generate_trajectory(ac, labels, predict_durations(dur, labels, rate), window)
    else:
        rules = load_g2p_rules(_cfg_path(args.rules, cfg, "g2p_rules", "--rules"))
        ps = load_phoneset(_cfg_path(args.phoneset, cfg, "phoneset", "--phoneset"))
        lm_path = args.lm or cfg.path("lm_model")
        toks = [t for s in _sentences(args, cfg) for t in s]
        segments = [toks]
        if lm_path is not None:
            segments = list(split(ngram.load_model(lm_path), toks,
                                  _pick(args.threshold, cfg, "lm", "threshold")).segments)
        parts = []
        for seg in segments:
            labels = expand_contexts(words_to_phones(seg, rules), ps)
            parts.append(generate_trajectory(ac, labels, predict_durations(dur, labels, rate), window))
        pause_n = cfg.get("synthesis", "pause_frames")
        traj = concatenate(parts, silence_frames(ac, ps.silence, pause_n) if pause_n else None)
    if args.output:
        write_trajectory(args.output, traj)
    else:
        dump_text(traj, sys.stdout)
    log.info("%d frames x %d dims", traj.num_frames, traj.dim)
    return EXIT_OK


def cmd_pipeline_run(args) -> int:
    cfg = _cfg(args)
    if args.output_root:
        cfg.set("paths", "output_root", str(Path(args.output_root).resolve()))
    summary = run_pipeline(cfg, args.workers)
    for f in summary.findings:
        print(f"finding: {f['code']}: {f['message']}", file=sys.stderr)
    print(f"{summary.records} synthetic records, {len(summary.skips)} skipped, "
          f"{summary.clean_records} clean records -> {cfg.path('output_root') / summary.manifest}",
          file=sys.stderr)
    return EXIT_DATA if summary.findings else EXIT_OK


def cmd_pipeline_init(args) -> int:
    print(install_toy(args.directory))
    return EXIT_OK


def _token_lines(path: str) -> list[list[str]]:
    return [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines()]


def cmd_eval_errors(args) -> int:
    refs, hyps = _token_lines(args.reference), _token_lines(args.hypothesis)
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} reference lines but {len(hyps)} hypothesis lines")
    report = error_report((f"{i + 1}", r, h) for i, (r, h) in enumerate(zip(refs, hyps)))
    sys.stdout.write(format_error_report(report))
    if args.trace:
        for u in report.utterances:
            for op in u.trace:
                if op.kind != "match":
                    flag = " loop" if op.loop else ""
                    print(f"{u.id}: {op.kind} ref={op.ref} hyp={op.hyp}{flag}", file=sys.stderr)
    return EXIT_OK


def cmd_eval_mos(args) -> int:
    scale = (args.scale_min, args.scale_max)
    ratings = read_ratings(args.ratings, scale)
    reference = read_ratings(args.reference, scale) if args.reference else None
    systems = [args.system] if args.system else ratings.systems()
    for name in systems:
        sub = ratings.for_system(name)
        ref = None
        if reference is not None:
            ref = reference.for_system(args.reference_system) if args.reference_system else reference
        s = summarize_ratings(sub, name, ref)
        print(f"{name}\t{s.table_row()}\tn={s.n_ratings}")
    return EXIT_OK


def _sample(path: str) -> list[float]:
    return [float(x) for x in Path(path).read_text(encoding="utf-8").split()]


def cmd_eval_significance(args) -> int:
    p = significance_test(_sample(args.a), _sample(args.b), paired=args.paired)
    print(f"{p:.6g}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    # accepted before or after the command; SUPPRESS keeps a later parser from
    # resetting a value given earlier
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="INI config file (flags override it)")
    common.add_argument("-v", "--verbose", action="count")
    common.add_argument("-q", "--quiet", action="store_true")

    p = _Parser(prog="hmmaug", description="HMM-based data augmentation tools for TTS corpora.",
                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    # subcommands are checked after parsing so an unknown flag is reported by name
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    p.set_defaults(func=None, group=p)

    def add(parent, name, func, help_):
        sp = parent.add_parser(name, help=help_, description=help_, parents=[common])
        sp.set_defaults(func=func)
        return sp

    sp = add(sub, "normalize", cmd_normalize, "normalize raw text into one sentence per line")
    sp.add_argument("inputs", nargs="+", help="text files, one document per line ([tag<TAB>]text)")
    sp.add_argument("-o", "--output")
    sp.add_argument("--translit", help="transliteration table (TSV)")
    sp.add_argument("--ids", action="store_true", help="prefix each sentence with its id and source")
    sp.add_argument("--strict", action="store_true", help="exit 2 if any document fails")

    lm = sub.add_parser("lm", help="n-gram language model tools")
    lm.set_defaults(func=None, group=lm)
    lms = lm.add_subparsers(dest="lm_command", metavar="ACTION", parser_class=_Parser)
    sp = add(lms, "train", cmd_lm_train, "train an interpolated Kneser-Ney model")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("-o", "--output", required=True, help="model path (.arpa for ARPA, else JSON)")
    sp.add_argument("--order", type=int)
    sp.add_argument("--min-count", type=int)
    sp = add(lms, "score", cmd_lm_score, "score sentences with a model")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--lm", required=True)
    sp.add_argument("--pairs", action="store_true", help="print per-pair scores")
    sp = add(lms, "export", cmd_lm_export, "write a model as ARPA")
    sp.add_argument("model")
    sp.add_argument("-o", "--output", required=True)
    sp = add(lms, "import", cmd_lm_import, "read an ARPA file into the native format")
    sp.add_argument("arpa")
    sp.add_argument("-o", "--output", required=True)

    sp = add(sub, "split", cmd_split, "split sentences at low-probability word pairs")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--lm")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--sweep", type=float, nargs="+", metavar="T",
                    help="print segment-length histograms for these thresholds instead")

    sp = add(sub, "g2p", cmd_g2p, "convert words to phones")
    sp.add_argument("words", nargs="*")
    sp.add_argument("--input")
    sp.add_argument("--rules")

    sp = add(sub, "labels", cmd_labels, "produce full-context labels for text")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--rules")
    sp.add_argument("--phoneset")
    sp.add_argument("-o", "--output")

    sp = add(sub, "cluster", cmd_cluster, "grow a context clustering tree from aligned data")
    sp.add_argument("--alignments")
    sp.add_argument("--questions")
    sp.add_argument("--kind", choices=("acoustic", "duration"), default="acoustic")
    sp.add_argument("--min-occupancy", type=float)
    sp.add_argument("--min-gain", type=float)
    sp.add_argument("-o", "--output", help="tree file (stdout if omitted)")
    sp.add_argument("--model", help="also train and save the leaf model here")

    sp = add(sub, "duration", cmd_duration, "predict phone durations in frames")
    sp.add_argument("labels")
    sp.add_argument("--model", required=True)
    sp.add_argument("--rate", type=float)

    sp = add(sub, "synthesize", cmd_synthesize, "generate a feature trajectory")
    sp.add_argument("input", nargs="?")
    sp.add_argument("--labels", help="label file (otherwise text from INPUT or stdin)")
    sp.add_argument("--duration-model", required=True)
    sp.add_argument("--acoustic-model", required=True)
    sp.add_argument("--rules")
    sp.add_argument("--phoneset")
    sp.add_argument("--lm")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--smoothing", type=int)
    sp.add_argument("-o", "--output", help="binary feature file (text dump to stdout if omitted)")

    pl = sub.add_parser("pipeline", help="run the full augmentation recipe")
    pl.set_defaults(func=None, group=pl)
    pls = pl.add_subparsers(dest="pipeline_command", metavar="ACTION", parser_class=_Parser)
    sp = add(pls, "run", cmd_pipeline_run, "run the recipe described by --config")
    sp.add_argument("--workers", type=int, help="parallel workers (default: config, else all cores)")
    sp.add_argument("--output-root")
    sp = add(pls, "init", cmd_pipeline_init, "copy the bundled toy corpus and config into DIR")
    sp.add_argument("directory")

    ev = sub.add_parser("eval", help="error counting and listening-test statistics")
    ev.set_defaults(func=None, group=ev)
    evs = ev.add_subparsers(dest="eval_command", metavar="ACTION", parser_class=_Parser)
    sp = add(evs, "errors", cmd_eval_errors, "count skips, repetitions and mispronunciations")
    sp.add_argument("reference", help="one tokenized reference per line")
    sp.add_argument("hypothesis", help="one tokenized hypothesis per line")
    sp.add_argument("--trace", action="store_true", help="print non-match operations to stderr")
    sp = add(evs, "mos", cmd_eval_mos, "summarize listening-test ratings")
    sp.add_argument("ratings")
    sp.add_argument("--system")
    sp.add_argument("--reference", help="ratings of the ground-truth audio, for DMOS")
    sp.add_argument("--reference-system")
    sp.add_argument("--scale-min", type=float, default=1.0)
    sp.add_argument("--scale-max", type=float, default=5.0)
    sp = add(evs, "significance", cmd_eval_significance, "two-tailed t-test p-value")
    sp.add_argument("a", help="file of numbers")
    sp.add_argument("b", help="file of numbers")
    sp.add_argument("--paired", action="store_true")
    return p


DATA_ERRORS = (ValueError, KeyError, OSError, ConfigError, ParseError, PipelineError,
               G2PError, UnknownPhoneError, ngram.LMError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    verbose = getattr(args, "verbose", 0)
    level = logging.ERROR if getattr(args, "quiet", False) else (
        logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.func is None:
        try:
            args.group.error("a command is required")
        except SystemExit as exc:
            return exc.code
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hmmaug: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"hmmaug: {exc}", file=sys.stderr)
        return EXIT_DATA
