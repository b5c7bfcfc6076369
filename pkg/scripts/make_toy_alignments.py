#!/usr/bin/env python3
"""Regenerate the bundled toy alignment file.

Phone durations and 3-d features are drawn from simple phone-class
templates with right-context effects, so the clustering has real structure
to find.  Output is deterministic for a given seed.
"""
import argparse
from pathlib import Path

import numpy as np

from hmmaug.alignments import AlignedUtterance, format_alignments
from hmmaug.phones import expand_contexts, load_g2p_rules, load_phoneset, words_to_phones
from hmmaug.textnorm import NormalizationConfig, load_transliteration_table, normalize_text

DATA = Path(__file__).resolve().parents[1] / "src" / "hmmaug" / "data"

BASE_DUR = {"Vowel": 8.0, "Nasal": 6.0, "Stop": 4.0, "Affricate": 5.0, "Fricative": 7.0, "Approximant": 5.0}
BASE_FEAT = {
    "Vowel": [2.0, 0.5, 1.0],
    "Nasal": [1.0, 1.5, 0.0],
    "Stop": [-1.0, 0.0, -1.0],
    "Affricate": [-0.5, 0.5, -1.5],
    "Fricative": [0.0, -1.5, 0.5],
    "Approximant": [1.0, -0.5, 0.5],
}


def phone_class(phone, ps):
    for name in BASE_DUR:
        if phone in ps.categories.get(name, ()):
            return name
    raise ValueError(phone)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20221)
    ap.add_argument("--out", default=str(DATA / "aligned.txt"))
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    ps = load_phoneset(DATA / "phoneset.txt")
    rules = load_g2p_rules(DATA / "g2p.tsv")
    cfg = NormalizationConfig(transliteration=load_transliteration_table(DATA / "translit.tsv"))
    text = (DATA / "tts_text.txt").read_text(encoding="utf-8")
    utts = []
    for n, tokens in enumerate(normalize_text(text, cfg)):
        labels = expand_contexts(words_to_phones(tokens, rules), ps)
        blocks = []
        for lab in labels:
            cls = phone_class(lab.c, ps)
            dur = BASE_DUR[cls] + (2.0 if lab.c in ps.categories["Long"] else 0.0)
            dur += 3.0 if lab.r == ps.silence else 0.0
            frames = max(1, int(round(dur + rng.normal(0.0, 1.0))))
            mean = np.array(BASE_FEAT[cls])
            if lab.r in ps.categories["Nasal"]:
                mean = mean + np.array([0.0, 0.6, 0.0])
            if lab.l in ps.categories["Vowel"]:
                mean = mean + np.array([0.0, 0.0, 0.4])
            blocks.append(mean + rng.normal(0.0, 0.15, size=(frames, 3)))
        utts.append(AlignedUtterance(f"tts_{n:03d}", labels, blocks))
    Path(args.out).write_text(format_alignments(utts), encoding="utf-8")


if __name__ == "__main__":
    main()
