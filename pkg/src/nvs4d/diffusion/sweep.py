"""Two-stage guidance sweep producing a table for Pareto plots.

Stage 1 sweeps one shared weight for all signals. Stage 2 fixes the best
stage-1 weight and varies the weight of a single signal.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from .guidance import GuidanceSpec
from .sampler import ddim_sample

CSV_HEADER = ("stage", "w_image", "w_pose", "w_time", "metric_name", "metric_value")
SIGNAL_INDEX = {"image": 0, "pose": 1, "time": 2}


@dataclass(frozen=True)
class SweepRow:
    stage: int
    weights: tuple[float, float, float]
    metrics: dict


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_stage1: float

    def to_csv(self, fh=None) -> str:
        """Long-format CSV, one line per (configuration, metric)."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows:
            for name, value in row.metrics.items():
                w.writerow([row.stage, *(repr(float(x)) for x in row.weights), name, repr(float(value))])
        return buf.getvalue() if fh is None else ""


def pareto_front(points) -> np.ndarray:
    """Boolean mask of non-dominated rows; every column is minimised."""
    pts = np.asarray(points, dtype=np.float64)
    keep = np.ones(len(pts), dtype=bool)
    for i in range(len(pts)):
        le = np.all(pts <= pts[i], axis=1)
        lt = np.any(pts < pts[i], axis=1)
        if np.any(le & lt):
            keep[i] = False
    return keep


def guidance_sweep(
    oracle,
    signals,
    stage1_grid,
    stage2_grid=(),
    stage2_signal: str = "pose",
    metrics=None,
    select: str | None = None,
    n_samples: int = 4096,
    seed: int = 0,
    steps: int = 256,
    **sample_kwargs,
) -> SweepResult:
    """Run the sweep. ``metrics`` maps a name to ``f(samples) -> float``.

    The stage-1 optimum is the grid weight minimising metric ``select``
    (default: the first metric). Every configuration reuses ``seed`` so
    differences between rows come from the weights alone.
    """
    stage1_grid = [float(w) for w in stage1_grid]
    stage2_grid = [float(w) for w in stage2_grid]
    if not stage1_grid:
        raise InvalidInput("stage-1 grid must not be empty")
    if not metrics:
        raise InvalidInput("need at least one metric")
    if stage2_signal not in SIGNAL_INDEX:
        raise InvalidInput(f"stage2_signal must be one of {sorted(SIGNAL_INDEX)}")
    select = select or next(iter(metrics))
    if select not in metrics:
        raise InvalidInput(f"unknown selection metric {select!r}")

    def evaluate(weights):
        spec = GuidanceSpec(weights)
        x = ddim_sample(oracle, spec, signals, n_samples, seed, steps=steps, **sample_kwargs)
        return {name: float(f(x)) for name, f in metrics.items()}

    rows = []
    for w in stage1_grid:
        rows.append(SweepRow(1, (w, w, w), evaluate((w, w, w))))
    best = min(rows, key=lambda r: r.metrics[select]).weights[0]
    j = SIGNAL_INDEX[stage2_signal]
    for w in stage2_grid:
        weights = [best, best, best]
        weights[j] = w
        rows.append(SweepRow(2, tuple(weights), evaluate(tuple(weights))))
    return SweepResult(tuple(rows), best)


def posterior_metrics(world, signals, level: int = 3):
    """Metrics for the Gaussian world: distance of the sample mean to the
    exact conditional mean, and the RMS per-dimension sample spread."""
    m, _ = world.conditional(level, signals)

    def mean_distance(x):
        return float(np.linalg.norm(x.mean(axis=0) - m))

    def spread(x):
        return float(np.sqrt(np.mean(x.var(axis=0))))

    return {"mean_distance": mean_distance, "spread": spread}
