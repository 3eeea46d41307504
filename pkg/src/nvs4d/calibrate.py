"""Metric-scale calibration of SfM scenes from monocular metric depth.

Each frame gets one scale by L1 regression of SfM depths onto metric
depths. The scene scale is the mean over frames. Scenes are ranked by the
variance of their per-frame scales, and the least consistent fraction is
dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal

import numpy as np

from .errors import InvalidInput, NoVisiblePoints, UncalibratableScene
from .geometry import Intrinsics, Pose, Trajectory, project_points


@dataclass(frozen=True, eq=False)
class SparsePoint:
    xyz: np.ndarray
    track: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(3)
        if not self.track:
            raise InvalidInput("a sparse point needs at least one observing frame")
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "track", tuple(int(i) for i in self.track))


@dataclass(frozen=True, eq=False)
class DepthMap:
    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidInput("depth map must be 2-D")
        finite = np.isfinite(values) & (values > 0)
        valid = finite if self.valid is None else np.asarray(self.valid, bool) & finite
        if valid.shape != values.shape:
            raise InvalidInput("valid mask shape differs from depth shape")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class FrameScale:
    scale: float
    inliers: int


@dataclass(frozen=True)
class SceneCalibration:
    per_frame_scales: tuple[FrameScale, ...]
    mean_scale: float
    variance: float

    @property
    def n_frames(self) -> int:
        return len(self.per_frame_scales)


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half of the total.

    This minimizes ``sum w_i |s - values_i|`` exactly.
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.size == 0 or values.shape != weights.shape:
        raise InvalidInput("need equally many values and weights")
    if np.any(weights < 0) or not weights.sum() > 0:
        raise InvalidInput("weights must be non-negative with a positive sum")
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(values[order][min(k, len(values) - 1)])


def l1_objective(s, z, d) -> np.ndarray:
    """``sum_i |s z_i - d_i|`` for one or many candidate scales."""
    s = np.asarray(s, dtype=np.float64)
    return np.abs(s[..., None] * np.asarray(z) - np.asarray(d)).sum(axis=-1)


def depth_samples(points, depth: DepthMap, K: Intrinsics, pose: Pose):
    """Paired SfM depths and metric depths for the points this frame sees.

    Returns ``(z, d)``. Lookup is nearest pixel; points behind the camera,
    outside the image or on invalid depth are skipped.
    """
    xyz = _as_xyz(points)
    if len(xyz) == 0:
        raise NoVisiblePoints("no points given for this frame")
    px, z = project_points(xyz, K, pose)
    front = z > 0
    if not np.any(front):
        raise NoVisiblePoints("every point is behind the camera")
    H, W = depth.shape
    u = np.floor(px[:, 0])
    v = np.floor(px[:, 1])
    ok = front & np.isfinite(u) & np.isfinite(v) & (u >= 0) & (v >= 0) & (u < W) & (v < H)
    ui = u[ok].astype(np.intp)
    vi = v[ok].astype(np.intp)
    z = z[ok]
    good = depth.valid[vi, ui]
    return z[good], depth.values[vi[good], ui[good]]


def _as_xyz(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        return points.reshape(-1, 3).astype(np.float64)
    pts = list(points)
    if pts and isinstance(pts[0], SparsePoint):
        return np.array([p.xyz for p in pts]).reshape(-1, 3)
    return np.asarray(pts, dtype=np.float64).reshape(-1, 3)


def frame_scale(
    points, depth: DepthMap, K: Intrinsics, pose: Pose, min_points: int = 5
) -> FrameScale | None:
    """Exact L1 scale for one frame, or None with fewer than ``min_points`` samples.

    ``sum |s z_i - d_i| = sum z_i |s - d_i / z_i|``, so the minimizer is the
    z-weighted median of the depth ratios.
    """
    z, d = depth_samples(points, depth, K, pose)
    if len(z) < min_points:
        return None
    return FrameScale(weighted_median(d / z, z), int(len(z)))


def scene_scale(frame_results) -> SceneCalibration:
    """Mean and population variance of the usable per-frame scales."""
    usable = tuple(r for r in frame_results if r is not None)
    if not usable:
        raise UncalibratableScene("no frame produced a scale estimate")
    s = np.array([r.scale for r in usable])
    return SceneCalibration(usable, float(s.mean()), float(s.var()))


def n_discarded(n: int, discard_fraction: float) -> int:
    # Decimal of the repr avoids ceil(0.3 * 70) == 22 style float artefacts.
    return int(math.ceil(Decimal(repr(float(discard_fraction))) * n))


def filter_scenes(scenes, discard_fraction: float = 0.30) -> list[int]:
    """Indices of the scenes kept after dropping the highest-variance fraction.

    Ties in variance drop the later scene first. Returned in original order.
    """
    if not 0 <= discard_fraction < 1:
        raise InvalidInput("discard_fraction must be in [0, 1)")
    var = [s.variance if isinstance(s, SceneCalibration) else float(s) for s in scenes]
    n_drop = n_discarded(len(var), discard_fraction)
    order = sorted(range(len(var)), key=lambda i: (-var[i], -i))
    dropped = set(order[:n_drop])
    return [i for i in range(len(var)) if i not in dropped]


def apply_scale(traj: Trajectory, points, s: float):
    """Scale all translations and point coordinates by ``s``."""
    if not (np.isfinite(s) and s > 0):
        raise InvalidInput("scale must be a positive finite number")
    poses = [Pose(p.rotation, p.translation * s, p.convention) for p in traj.poses]
    if isinstance(points, np.ndarray):
        new_points = points * s
    else:
        new_points = [SparsePoint(p.xyz * s, p.track) for p in points]
    return traj.with_poses(poses), new_points


def calibrate_scene(traj: Trajectory, points, depths, min_points: int = 5):
    """Run ``frame_scale`` on every frame and aggregate.

    ``points`` is a sequence of SparsePoint whose ``track`` holds frame
    indices into ``traj``; ``depths[i]`` is the DepthMap of frame ``i`` or
    None. Returns ``(SceneCalibration, per-frame results)``.
    """
    pts = list(points)
    results = []
    for i, frame in enumerate(traj):
        dm = depths[i]
        visible = [p for p in pts if i in p.track]
        if dm is None or not visible:
            results.append(None)
            continue
        try:
            results.append(frame_scale(visible, dm, frame.intrinsics, frame.pose, min_points))
        except NoVisiblePoints:
            results.append(None)
    return scene_scale(results), results
