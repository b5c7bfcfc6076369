"""Explicit-duration and mean-trajectory acoustic models on clustered trees."""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cluster import (
    ClusterError,
    ClusterTree,
    ContextStats,
    format_tree,
    parse_tree,
    pool_by_leaf,
    pooled_variance,
    route,
)
from .phones import FullContextLabel, ParseError

DEFAULT_FRAME_PERIOD_MS = 5.0


@dataclass
class DurationModel:
    tree: ClusterTree
    params: dict[int, tuple[float, float]]  # leaf id -> (mean frames, std frames)
    rate: float = 0.0


@dataclass
class AcousticModel:
    tree: ClusterTree
    means: dict[int, np.ndarray]
    variances: dict[int, np.ndarray]
    dim: int
    frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS


@dataclass
class FeatureTrajectory:
    frames: np.ndarray  # T x d
    frame_period_ms: float
    spans: list[tuple[int, int]]

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])


def duration_stats(utterances: Iterable[tuple[Sequence[FullContextLabel], Sequence]]) -> dict[FullContextLabel, ContextStats]:
    """Per-context duration statistics: one 1-d observation per phone occurrence."""
    out: dict[FullContextLabel, ContextStats] = {}
    for labels, blocks in utterances:
        if len(labels) != len(blocks):
            raise ClusterError(f"{len(labels)} labels but {len(blocks)} frame blocks")
        for lab, block in zip(labels, blocks):
            d = float(len(block))
            if d < 1:
                raise ClusterError(f"phone {lab} has no frames")
            key = FullContextLabel(*lab.context)
            st = ContextStats(key, 1.0, np.array([d]), np.array([d * d]))
            if key in out:
                out[key].add(st)
            else:
                out[key] = st
    return out


def train_duration_model(stats: dict[FullContextLabel, ContextStats], tree: ClusterTree,
                         rate: float = 0.0) -> DurationModel:
    """Leaf mean and population standard deviation of pooled phone durations."""
    pools = pool_by_leaf(tree, stats)
    params = {}
    for leaf in tree.leaves():
        pool = pools.get(leaf.id)
        if pool is None or pool.occupancy <= 0:
            raise ClusterError(f"leaf {leaf.id} received no training durations")
        mu = float(pool.sum[0] / pool.occupancy)
        var = float(pool.sum_sq[0] / pool.occupancy) - mu * mu
        params[leaf.id] = (mu, math.sqrt(max(var, 0.0)))
    return DurationModel(tree, params, rate)


def train_acoustic_model(stats: dict[FullContextLabel, ContextStats], tree: ClusterTree,
                         frame_period_ms: float = DEFAULT_FRAME_PERIOD_MS) -> AcousticModel:
    pools = pool_by_leaf(tree, stats)
    means, variances = {}, {}
    for leaf in tree.leaves():
        pool = pools.get(leaf.id)
        if pool is None or pool.occupancy <= 0:
            raise ClusterError(f"leaf {leaf.id} received no training frames")
        means[leaf.id] = pool.sum / pool.occupancy
        variances[leaf.id] = pooled_variance(pool.occupancy, pool.sum, pool.sum_sq, tree.var_floor)
    return AcousticModel(tree, means, variances, tree.dim, frame_period_ms)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def predict_durations(model: DurationModel, labels: Sequence[FullContextLabel],
                      rate: float | None = None) -> list[int]:
    """frames = max(1, round(mean + rate * std)), rounding halves up."""
    rho = model.rate if rate is None else rate
    out = []
    for lab in labels:
        mu, sigma = model.params[route(model.tree, lab)]
        out.append(max(1, round_half_up(mu + rho * sigma)))
    return out


def generate_trajectory(model: AcousticModel, labels: Sequence[FullContextLabel],
                        durations: Sequence[int], smoothing_window: int = 0) -> FeatureTrajectory:
    """Repeat each phone's leaf mean for its duration.

    With ``smoothing_window`` w > 0, frames within w of a phone boundary are
    linearly cross-faded between the two leaf means.  The window at each
    boundary is clipped to half of either neighbour so windows never overlap.
    """
    if len(labels) != len(durations):
        raise ValueError(f"{len(labels)} labels but {len(durations)} durations")
    if any(int(d) < 1 for d in durations):
        raise ValueError("every duration must be at least one frame")
    if smoothing_window < 0:
        raise ValueError("smoothing_window must be >= 0")
    means = [model.means[route(model.tree, lab)] for lab in labels]
    total = int(sum(durations))
    frames = np.empty((total, model.dim), dtype=np.float64)
    spans = []
    t = 0
    for mean, d in zip(means, durations):
        frames[t:t + d] = mean
        spans.append((t, t + int(d)))
        t += int(d)
    if smoothing_window > 0:
        for i in range(len(spans) - 1):
            b = spans[i][1]
            w = min(smoothing_window, durations[i] // 2, durations[i + 1] // 2)
            if w == 0:
                continue
            for k in range(2 * w):
                alpha = (k + 0.5) / (2 * w)
                frames[b - w + k] = (1 - alpha) * means[i] + alpha * means[i + 1]
    return FeatureTrajectory(frames, model.frame_period_ms, spans)


def silence_frames(model: AcousticModel, silence: str, count: int) -> np.ndarray:
    sil = FullContextLabel(silence, silence, silence, silence, silence)
    return np.tile(model.means[route(model.tree, sil)], (count, 1))


def concatenate(parts: Sequence[FeatureTrajectory], pause: np.ndarray | None = None) -> FeatureTrajectory:
    """Join segment trajectories in order with ``pause`` frames between them."""
    if not parts:
        raise ValueError("nothing to concatenate")
    blocks, spans, t = [], [], 0
    for i, p in enumerate(parts):
        if i and pause is not None and len(pause):
            blocks.append(pause)
            t += len(pause)
        blocks.append(p.frames)
        spans.extend((a + t, b + t) for a, b in p.spans)
        t += p.num_frames
    return FeatureTrajectory(np.concatenate(blocks, axis=0), parts[0].frame_period_ms, spans)


# --- file formats -----------------------------------------------------------

def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".txt")


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory(path: str | Path, traj: FeatureTrajectory) -> None:
    """float32 little-endian frames plus a one-line ``T d frame_period_ms`` sidecar."""
    path = Path(path)
    _atomic_write(path, traj.frames.astype("<f4").tobytes())
    _atomic_write(sidecar_path(path), f"{traj.num_frames} {traj.dim} {traj.frame_period_ms!r}\n".encode())


def read_sidecar(path: str | Path) -> tuple[int, int, float]:
    text = sidecar_path(path).read_text(encoding="utf-8").split()
    if len(text) != 3:
        raise ParseError("sidecar must hold 'T d frame_period_ms'", 1, 1, str(sidecar_path(path)))
    try:
        return int(text[0]), int(text[1]), float(text[2])
    except ValueError:
        raise ParseError("non-numeric sidecar field", 1, 1, str(sidecar_path(path))) from None


def read_trajectory(path: str | Path) -> FeatureTrajectory:
    T, d, period = read_sidecar(path)
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if data.size != T * d:
        raise ValueError(f"{path}: sidecar says {T}x{d} but file holds {data.size} values")
    return FeatureTrajectory(data.reshape(T, d).astype(np.float64), period, [])


def dump_text(traj: FeatureTrajectory, fh, sep: str = "\t") -> None:
    """Delimited debug dump: frame index then one column per dimension."""
    for t, row in enumerate(traj.frames):
        fh.write(sep.join([str(t), *(f"{float(x):.6g}" for x in row)]) + "\n")


def format_duration_model(model: DurationModel) -> str:
    lines = ["hmmaug-duration 1", f"rate {model.rate!r}"]
    for leaf, (mu, sd) in sorted(model.params.items()):
        lines.append(f"dur {leaf} {mu!r} {sd!r}")
    lines.append("tree")
    return "\n".join(lines) + "\n" + format_tree(model.tree)


def format_acoustic_model(model: AcousticModel) -> str:
    lines = ["hmmaug-acoustic 1", f"frame_period_ms {model.frame_period_ms!r}"]
    for leaf in sorted(model.means):
        mean = " ".join(repr(float(x)) for x in model.means[leaf])
        var = " ".join(repr(float(x)) for x in model.variances[leaf])
        lines.append(f"state {leaf} mean {mean} var {var}")
    lines.append("tree")
    return "\n".join(lines) + "\n" + format_tree(model.tree)


def _split_tree(text: str, header: str, source: str) -> tuple[list[str], ClusterTree]:
    head, sep, tree_text = text.partition("\ntree\n")
    lines = head.splitlines()
    if not sep or not lines or lines[0].strip() != header:
        raise ParseError(f"expected '{header}' header and a tree section", 1, 1, source)
    return lines[1:], parse_tree(tree_text, source)


def parse_duration_model(text: str, source: str = "") -> DurationModel:
    lines, tree = _split_tree(text, "hmmaug-duration 1", source)
    rate, params = 0.0, {}
    for lineno, line in enumerate(lines, 2):
        p = line.split()
        try:
            if p[0] == "rate":
                rate = float(p[1])
            elif p[0] == "dur" and len(p) == 4:
                params[int(p[1])] = (float(p[2]), float(p[3]))
            else:
                raise ValueError(line)
        except (ValueError, IndexError):
            raise ParseError(f"malformed line {line!r}", lineno, 1, source) from None
    missing = {leaf.id for leaf in tree.leaves()} - set(params)
    if missing:
        raise ParseError(f"no duration parameters for leaves {sorted(missing)}", 0, 0, source)
    return DurationModel(tree, params, rate)


def parse_acoustic_model(text: str, source: str = "") -> AcousticModel:
    lines, tree = _split_tree(text, "hmmaug-acoustic 1", source)
    period, means, variances = DEFAULT_FRAME_PERIOD_MS, {}, {}
    d = tree.dim
    for lineno, line in enumerate(lines, 2):
        p = line.split()
        try:
            if p[0] == "frame_period_ms":
                period = float(p[1])
            elif p[0] == "state" and len(p) == 4 + 2 * d and p[2] == "mean" and p[3 + d] == "var":
                leaf = int(p[1])
                means[leaf] = np.array([float(x) for x in p[3:3 + d]])
                variances[leaf] = np.array([float(x) for x in p[4 + d:]])
            else:
                raise ValueError(line)
        except (ValueError, IndexError):
            raise ParseError(f"malformed line {line!r}", lineno, 1, source) from None
    missing = {leaf.id for leaf in tree.leaves()} - set(means)
    if missing:
        raise ParseError(f"no state parameters for leaves {sorted(missing)}", 0, 0, source)
    return AcousticModel(tree, means, variances, d, period)


def save_model(model: DurationModel | AcousticModel, path: str | Path) -> None:
    text = format_duration_model(model) if isinstance(model, DurationModel) else format_acoustic_model(model)
    Path(path).write_text(text, encoding="utf-8")


def load_model(path: str | Path) -> DurationModel | AcousticModel:
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("hmmaug-duration"):
        return parse_duration_model(text, str(path))
    return parse_acoustic_model(text, str(path))

