"""SfM-distance pose alignment: relativize, fit one scale, measure the error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateReference, DegenerateScale, InvalidInput
from .geometry import Trajectory, relative_pose, rotation_angle


@dataclass(frozen=True)
class AlignmentReport:
    sfmd_pos: float
    sfmd_rot: float
    fitted_scale: float
    n_frames: int


def relativize(traj: Trajectory, anchor: int = 0) -> Trajectory:
    """Re-express every pose relative to the pose of frame ``anchor``."""
    if len(traj) == 0:
        raise InvalidInput("empty trajectory")
    if not -len(traj) <= anchor < len(traj):
        raise InvalidInput(f"anchor {anchor} out of range for {len(traj)} frames")
    ref = traj[anchor].pose
    return traj.with_poses(relative_pose(ref, f.pose) for f in traj)


def fit_scale(pred_positions, ref_positions) -> float:
    """Closed-form ``argmin_s sum ||s * pred - ref||^2``."""
    p = np.asarray(pred_positions, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(ref_positions, dtype=np.float64).reshape(-1, 3)
    if len(p) == 0 or p.shape != r.shape:
        raise InvalidInput("need equally many predicted and reference positions")
    denom = float(np.sum(p * p))
    if denom == 0.0:
        raise DegenerateScale("all predicted positions are zero")
    return float(np.sum(p * r)) / denom


def sfm_distances(pred: Trajectory, ref: Trajectory, anchor: int = 0) -> AlignmentReport:
    """Compare an SfM-recovered trajectory against the target trajectory.

    Both are relativized to ``anchor``; the predicted camera centers are
    rescaled by the least-squares factor. The position error is the
    stacked L2 residual divided by the norm of the reference positions.
    The rotation error is the mean geodesic angle over the non-anchor
    frames (the anchor is identity in both and carries no information).
    """
    if len(pred) != len(ref):
        raise InvalidInput(f"trajectory lengths differ: {len(pred)} vs {len(ref)}")
    if pred[0].pose.convention is not ref[0].pose.convention:
        pred = pred.with_poses(p.to_convention(ref[0].pose.convention) for p in pred.poses)
    pr = relativize(pred, anchor)
    rr = relativize(ref, anchor)
    p_hat = pr.centers()
    p_ref = rr.centers()
    ref_norm = float(np.linalg.norm(p_ref))
    if ref_norm == 0.0:
        raise DegenerateReference("reference camera positions are all at the anchor")
    s = fit_scale(p_hat, p_ref)
    pos = float(np.linalg.norm(s * p_hat - p_ref)) / ref_norm

    n = len(pred)
    anchor = anchor % n
    angles = [
        rotation_angle(
            pr[i].pose.world_from_camera()[0], rr[i].pose.world_from_camera()[0]
        )
        for i in range(n)
        if i != anchor
    ]
    rot = float(np.mean(angles)) if angles else 0.0
    return AlignmentReport(sfmd_pos=pos, sfmd_rot=rot, fitted_scale=s, n_frames=n)
