"""Symmetric epipolar distance and thresholded SED (TSED).

Fundamental matrices always come from known poses here; nothing is
estimated from the correspondences themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLine, DegeneratePair, InvalidInput, NoValidPairs
from .geometry import Intrinsics, Pose, relative_pose

BASELINE_EPS = 1e-12
LINE_EPS = 1e-300


@dataclass(frozen=True, eq=False)
class MatchSet:
    """Correspondences between frame ``pair_id[0]`` and frame ``pair_id[1]``.

    ``matches`` is an ``(M, 4)`` array of ``x1, y1, x2, y2`` rows.
    """

    pair_id: tuple[int, int]
    matches: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))

    def __post_init__(self):
        a, b = (int(i) for i in self.pair_id)
        if a == b:
            raise InvalidInput("a match set must link two distinct frames")
        m = np.asarray(self.matches, dtype=np.float64)
        if m.size == 0:
            m = m.reshape(0, 4)
        if m.ndim != 2 or m.shape[1] != 4:
            raise InvalidInput(f"matches must be an (M, 4) array, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidInput("match coordinates must be finite")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "pair_id", (a, b))
        object.__setattr__(self, "matches", m)

    def __len__(self):
        return len(self.matches)

    @property
    def first(self) -> np.ndarray:
        return self.matches[:, :2]

    @property
    def second(self) -> np.ndarray:
        return self.matches[:, 2:]


@dataclass(frozen=True)
class TsedConfig:
    threshold: float = 2.0
    min_matches: int = 10

    def __post_init__(self):
        if not self.threshold > 0:
            raise InvalidInput("threshold must be positive")
        if self.min_matches < 1:
            raise InvalidInput("min_matches must be at least 1")


def skew(t) -> np.ndarray:
    x, y, z = np.asarray(t, dtype=np.float64)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def fundamental_from_poses(Ka: Intrinsics, Kb: Intrinsics, rel: Pose) -> np.ndarray:
    """F with ``x_b^T F x_a = 0``; ``rel`` is ``relative_pose(pose_a, pose_b)``.

    Normalized to unit Frobenius norm.
    """
    # camera-from-world of rel maps camera-a coordinates into camera b
    R, t = rel.camera_from_world()
    if np.linalg.norm(t) <= BASELINE_EPS:
        raise DegeneratePair("zero baseline between the two views")
    F = Kb.K_inv.T @ skew(t) @ R @ Ka.K_inv
    return F / np.linalg.norm(F)


def _homog(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1, 2)
    return np.hstack([x, np.ones((len(x), 1))])


def point_line_distance(lines: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Distance in pixels from each homogeneous point to the matching line."""
    norm = np.hypot(lines[:, 0], lines[:, 1])
    if np.any(norm <= LINE_EPS):
        raise DegenerateLine("epipolar line has a zero normal")
    return np.abs(np.sum(lines * points, axis=1)) / norm


def sed_many(F, matches) -> np.ndarray:
    """Symmetric epipolar distance for every ``x1, y1, x2, y2`` row."""
    F = np.asarray(F, dtype=np.float64)
    m = np.asarray(matches, dtype=np.float64).reshape(-1, 4)
    x1 = _homog(m[:, :2])
    x2 = _homog(m[:, 2:])
    lines_in_2 = x1 @ F.T
    lines_in_1 = x2 @ F
    return point_line_distance(lines_in_2, x2) + point_line_distance(lines_in_1, x1)


def symmetric_epipolar_distance(F, match) -> float:
    """``d(x2, F x1) + d(x1, F^T x2)`` for one correspondence."""
    return float(sed_many(F, np.asarray(match, dtype=np.float64).reshape(1, 4))[0])


def pair_sed(F, ms: MatchSet, cfg: TsedConfig = TsedConfig()) -> float | None:
    """Median SED over a pair's matches, or None if it has too few matches."""
    if len(ms) < cfg.min_matches:
        return None
    return float(np.median(sed_many(F, ms.matches)))


@dataclass(frozen=True)
class TsedResult:
    score: float
    n_valid: int
    n_discarded: int
    medians: tuple[float | None, ...]
    match_counts: tuple[int, ...]


def tsed(pairs, cfg: TsedConfig = TsedConfig()) -> TsedResult:
    """Fraction of scored pairs whose median SED is below ``cfg.threshold``.

    Pairs with fewer than ``cfg.min_matches`` matches are dropped from the
    denominator and counted in ``n_discarded``.
    """
    medians = []
    counts = []
    for F, ms in pairs:
        medians.append(pair_sed(F, ms, cfg))
        counts.append(len(ms))
    valid = [m for m in medians if m is not None]
    if not valid:
        raise NoValidPairs(f"all {len(medians)} pairs have < {cfg.min_matches} matches")
    below = sum(m < cfg.threshold for m in valid)
    return TsedResult(
        score=below / len(valid),
        n_valid=len(valid),
        n_discarded=len(medians) - len(valid),
        medians=tuple(medians),
        match_counts=tuple(counts),
    )


def trajectory_pairs(traj, match_sets):
    """(F, MatchSet) for the contiguous pairs ``(i, i+1)`` of a trajectory.

    Match sets for non-contiguous pairs are ignored. A contiguous pair
    without any matches is included with an empty set so it shows up as
    discarded.
    """
    by_pair = {}
    for ms in match_sets:
        by_pair.setdefault(ms.pair_id, []).append(ms.matches)
    out = []
    for i in range(len(traj) - 1):
        a, b = traj[i], traj[i + 1]
        rows = by_pair.get((i, i + 1), [])
        m = np.vstack(rows) if rows else np.zeros((0, 4))
        F = fundamental_from_poses(a.intrinsics, b.intrinsics, relative_pose(a.pose, b.pose))
        out.append((F, MatchSet((i, i + 1), m)))
    return out
