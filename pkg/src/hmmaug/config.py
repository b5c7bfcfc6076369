"""INI-style configuration shared by the pipeline and the CLI.

Every section and key is declared in ``SCHEMA``; unknown ones are rejected
before any work starts.  Relative paths resolve against the config file's
directory.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .ngram import LMConfig
from .textnorm import (
    DEFAULT_DELIMITERS,
    DEFAULT_STRIP_CATEGORIES,
    DEFAULT_STRIP_CHARS,
    NormalizationConfig,
    load_transliteration_table,
)


class ConfigError(ValueError):
    pass


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _path_or_none(v: str):
    return v.strip() or None


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "paths": {
        "raw_text": (_path_or_none, None),
        "lm_text": (_path_or_none, None),
        "lm_model": (_path_or_none, None),
        "alignments": (_path_or_none, None),
        "phoneset": (_path_or_none, None),
        "g2p_rules": (_path_or_none, None),
        "questions": (_path_or_none, None),
        "transliteration": (_path_or_none, None),
        "clean_list": (_path_or_none, None),
        "output_root": (_path_or_none, "out"),
    },
    "normalize": {
        "strip_chars": (str, DEFAULT_STRIP_CHARS),
        "strip_categories": (lambda v: tuple(v.split()), DEFAULT_STRIP_CATEGORIES),
        "sentence_delimiters": (str, DEFAULT_DELIMITERS.replace("\n", "")),
        "lowercase": (_bool, True),
    },
    "lm": {
        "order": (int, 2),
        "min_count": (int, 1),
        "log_base": (float, 10.0),
        "threshold": (float, -5.12),
    },
    "cluster": {
        "min_occupancy": (float, 10.0),
        "min_gain": (float, 0.0),
        "duration_min_occupancy": (float, 5.0),
        "duration_min_gain": (float, 0.0),
        "variance_floor": (float, 1e-4),
    },
    "synthesis": {
        "rate": (float, 0.0),
        "frame_period_ms": (float, 5.0),
        "smoothing_window": (int, 0),
        "pause_frames": (int, 0),
    },
    "stages": {
        "synthetic": (_bool, True),
        "clean": (_bool, True),
        "clean_epochs": (int, 200),
    },
    "run": {
        "workers": (int, 0),
        "log_level": (str, "INFO"),
    },
}

PATH_KEYS = set(SCHEMA["paths"])


@dataclass
class Config:
    values: dict[str, dict[str, Any]]
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, section: str, key: str):
        return self.values[section][key]

    def path(self, key: str) -> Path | None:
        v = self.values["paths"][key]
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else (self.base_dir / p)

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown setting {section}.{key}")
        self.values[section][key] = value

    def normalization(self) -> NormalizationConfig:
        n = self.values["normalize"]
        table = self.path("transliteration")
        try:
            return NormalizationConfig(
                strip_chars=n["strip_chars"],
                strip_categories=tuple(n["strip_categories"]),
                sentence_delimiters=n["sentence_delimiters"] + "\n",
                transliteration=load_transliteration_table(table) if table else [],
                lowercase_fold=n["lowercase"],
            )
        except ValueError as exc:
            raise ConfigError(f"normalize: {exc}") from None

    def lm(self) -> LMConfig:
        v = self.values["lm"]
        return LMConfig(order=v["order"], min_count=v["min_count"], log_base=v["log_base"])


def defaults() -> dict[str, dict[str, Any]]:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def load_config(path: str | Path | None = None) -> Config:
    values = defaults()
    if path is None:
        return Config(values)
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            conv = SCHEMA[section][key][0]
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{path}: [{section}] {key}: {exc}") from None
    cfg = Config(values, path.resolve().parent)
    validate(cfg)
    return cfg


def validate(cfg: Config) -> None:
    v = cfg.values
    if v["lm"]["order"] < 1:
        raise ConfigError("lm.order must be >= 1")
    if v["lm"]["min_count"] < 1:
        raise ConfigError("lm.min_count must be >= 1")
    if v["lm"]["log_base"] <= 1:
        raise ConfigError("lm.log_base must be > 1")
    for k in ("min_occupancy", "min_gain", "duration_min_occupancy", "duration_min_gain"):
        if v["cluster"][k] < 0:
            raise ConfigError(f"cluster.{k} must be >= 0")
    if v["cluster"]["variance_floor"] <= 0:
        raise ConfigError("cluster.variance_floor must be > 0")
    if v["synthesis"]["smoothing_window"] < 0 or v["synthesis"]["pause_frames"] < 0:
        raise ConfigError("synthesis windows and pauses must be >= 0")
    if v["synthesis"]["frame_period_ms"] <= 0:
        raise ConfigError("synthesis.frame_period_ms must be > 0")
    if not v["normalize"]["sentence_delimiters"]:
        raise ConfigError("normalize.sentence_delimiters must not be empty")
    if v["run"]["workers"] < 0:
        raise ConfigError("run.workers must be >= 0")


def format_config(cfg: Config) -> str:
    """Render the merged configuration as INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for sec, keys in cfg.values.items():
        parser[sec] = {}
        for k, val in keys.items():
            if val is None:
                val = ""
            elif isinstance(val, tuple):
                val = " ".join(val)
            elif isinstance(val, bool):
                val = "true" if val else "false"
            parser[sec][k] = str(val)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
