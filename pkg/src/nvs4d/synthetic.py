"""Synthetic scenes: camera paths, point clouds, splatted depth, matches.

Used by the demos and tests wherever real captures would otherwise be
needed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from .calibrate import DepthMap, SparsePoint, apply_scale
from .epipolar import MatchSet
from .geometry import Convention, Frame, Intrinsics, Pose, Role, Trajectory, project_points
from .ingest.colmap import model_from_trajectory, write_colmap
from .ingest.depth import write_depth
from .ingest.matches import write_matches

DEFAULT_INTRINSICS = Intrinsics(300.0, 300.0, 160.0, 120.0, 320, 240)


def random_rotation(rng) -> np.ndarray:
    return Rotation.random(random_state=rng).as_matrix()


def look_at(center, target, up=(0.0, -1.0, 0.0)) -> Pose:
    """Camera-from-world pose at ``center`` whose +z axis points at ``target``."""
    center = np.asarray(center, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - center
    z /= np.linalg.norm(z)
    x = np.cross(np.asarray(up, dtype=np.float64), z)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross([1.0, 0.0, 0.0], z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R_wc = np.stack([x, y, z], axis=1)
    return Pose(R_wc, center, Convention.WORLD_FROM_CAMERA).to_convention(Convention.CAMERA_FROM_WORLD)


def camera_path(rng, n_frames: int, step: float = 0.15, target=(0.0, 0.0, 4.0)) -> list[Pose]:
    """A smooth, slightly random walk of cameras near the origin looking at ``target``."""
    centers = [np.zeros(3)]
    direction = rng.normal(size=3)
    direction[2] *= 0.2
    direction /= np.linalg.norm(direction)
    for _ in range(n_frames - 1):
        direction = direction + 0.3 * rng.normal(size=3)
        direction[2] *= 0.2
        direction /= np.linalg.norm(direction)
        centers.append(centers[-1] + step * direction)
    tgt = np.asarray(target, dtype=np.float64)
    return [look_at(c, tgt + 0.2 * rng.normal(size=3)) for c in centers]


def make_scene(
    rng,
    n_frames: int = 8,
    n_points: int = 400,
    intrinsics: Intrinsics = DEFAULT_INTRINSICS,
    step: float = 0.15,
    depth_range=(2.5, 6.0),
    conditioning=(0,),
    dt: float = 1.0,
):
    """Metric scene: a trajectory plus points that every camera can see.

    Points are sampled through the first camera's image and pushed to a
    random depth, then kept only if they project inside every frame.
    """
    poses = camera_path(rng, n_frames, step)
    frames = tuple(
        Frame(p, intrinsics, i * dt, Role.CONDITIONING if i in conditioning else Role.TARGET, f"frame_{i:04d}.png")
        for i, p in enumerate(poses)
    )
    traj = Trajectory(frames)
    pts = []
    first = poses[0]
    R_wc, c = first.world_from_camera()
    while len(pts) < n_points:
        m = 4 * (n_points - len(pts))
        u = rng.uniform(0.1, 0.9, m) * intrinsics.width
        v = rng.uniform(0.1, 0.9, m) * intrinsics.height
        z = rng.uniform(*depth_range, m)
        cam = np.stack([(u - intrinsics.cx) / intrinsics.fx * z, (v - intrinsics.cy) / intrinsics.fy * z, z], 1)
        world = cam @ R_wc.T + c
        ok = np.ones(m, dtype=bool)
        for p in poses:
            px, zz = project_points(world, intrinsics, p)
            ok &= (zz > 0.1) & (px[:, 0] >= 0) & (px[:, 0] < intrinsics.width)
            ok &= (px[:, 1] >= 0) & (px[:, 1] < intrinsics.height)
        pts.extend(world[ok][: n_points - len(pts)])
    points = [SparsePoint(x, tuple(range(n_frames))) for x in pts]
    return traj, points


def splat_depth(points, intrinsics: Intrinsics, pose: Pose) -> DepthMap:
    """Depth map holding each point's camera depth at its nearest pixel.

    Where several points land on one pixel the closest wins; all other
    pixels are invalid.
    """
    xyz = np.array([p.xyz for p in points]) if not isinstance(points, np.ndarray) else points
    px, z = project_points(xyz, intrinsics, pose)
    H, W = intrinsics.height, intrinsics.width
    values = np.full((H, W), np.inf)
    u = np.floor(px[:, 0])
    v = np.floor(px[:, 1])
    ok = (z > 0) & (u >= 0) & (v >= 0) & (u < W) & (v < H)
    ui, vi, zz = u[ok].astype(int), v[ok].astype(int), z[ok]
    order = np.argsort(-zz)  # far first so near points overwrite
    values[vi[order], ui[order]] = zz[order]
    valid = np.isfinite(values)
    return DepthMap(np.where(valid, values, 0.0), valid)


def corrupt_depth(depth: DepthMap, rng, noise: float = 0.0, outlier_frac: float = 0.0, outlier_max: float = 10.0):
    """Multiplicative Gaussian noise plus outliers scaled by a log-uniform factor."""
    values = depth.values.copy()
    valid = depth.valid
    idx = np.flatnonzero(valid)
    if noise > 0:
        values.flat[idx] *= np.clip(1.0 + noise * rng.normal(size=idx.size), 0.05, None)
    if outlier_frac > 0:
        n_out = int(round(outlier_frac * idx.size))
        bad = rng.choice(idx, size=n_out, replace=False)
        values.flat[bad] *= np.exp(rng.uniform(-np.log(outlier_max), np.log(outlier_max), n_out))
    return DepthMap(values, valid)


def scale_scene(traj: Trajectory, points, s: float):
    """Similarity-scale a metric scene by ``s`` (e.g. ``1/s`` to simulate SfM units)."""
    return apply_scale(traj, points, s)


def project_matches(traj: Trajectory, points, pairs=None, noise: float = 0.0, rng=None) -> list[MatchSet]:
    """Correspondences from projecting shared points into each frame pair."""
    xyz = np.array([p.xyz for p in points])
    if pairs is None:
        pairs = [(i, i + 1) for i in range(len(traj) - 1)]
    out = []
    for a, b in pairs:
        pa, za = project_points(xyz, traj[a].intrinsics, traj[a].pose)
        pb, zb = project_points(xyz, traj[b].intrinsics, traj[b].pose)
        ok = (za > 0) & (zb > 0)
        m = np.hstack([pa[ok], pb[ok]])
        if noise > 0:
            m = m + noise * rng.normal(size=m.shape)
        out.append(MatchSet((a, b), m))
    return out


def similarity_transform(traj: Trajectory, R, t, s: float) -> Trajectory:
    """Apply ``X -> s R X + t`` to the world the cameras live in."""
    poses = []
    for p in traj.poses:
        Rw, c = p.world_from_camera()
        q = Pose(R @ Rw, s * (R @ c) + t, Convention.WORLD_FROM_CAMERA)
        poses.append(q.to_convention(p.convention))
    return traj.with_poses(poses)


def write_scene_files(
    root,
    scene_id: str,
    rng,
    n_frames: int = 6,
    n_points: int = 300,
    sfm_scale: float | None = None,
    depth_noise: float = 0.0,
    outlier_frac: float = 0.0,
    match_noise: float = 0.0,
) -> tuple[dict, float]:
    """Write one synthetic scene to ``root/scene_id``.

    Returns ``(manifest entry, true scale)``.

    Layout: ``target/`` (metric COLMAP model), ``sparse/`` (the same scene
    in SfM units, metric / ``sfm_scale``), ``depth/*.f32`` metric depth,
    ``matches.txt`` between contiguous generated frames. Paths in the
    entry are relative to ``root``.
    """
    root = Path(root)
    d = root / scene_id
    s = float(rng.uniform(0.2, 5.0)) if sfm_scale is None else float(sfm_scale)
    traj, pts = make_scene(rng, n_frames=n_frames, n_points=n_points)
    write_colmap(model_from_trajectory(traj, pts), d / "target")
    sfm_traj, sfm_pts = scale_scene(traj, pts, 1.0 / s)
    write_colmap(model_from_trajectory(sfm_traj, sfm_pts), d / "sparse")
    (d / "depth").mkdir(parents=True, exist_ok=True)
    for f in traj:
        depth = splat_depth(pts, f.intrinsics, f.pose)
        if depth_noise > 0 or outlier_frac > 0:
            depth = corrupt_depth(depth, rng, depth_noise, outlier_frac)
        write_depth(d / "depth" / (Path(f.name).stem + ".f32"), depth)
    write_matches(d / "matches.txt", project_matches(traj, pts, noise=match_noise, rng=rng))
    rel = Path(scene_id)
    entry = {
        "id": scene_id,
        "colmap": str(rel / "sparse"),
        "depth_dir": str(rel / "depth"),
        "target": str(rel / "target"),
        "predicted_sfm": str(rel / "sparse"),
        "matches": str(rel / "matches.txt"),
        "conditioning": [0],
    }
    return entry, s
