"""Rigid poses, pinhole projection and per-pixel ray maps.

Poses carry an explicit convention. ``CAMERA_FROM_WORLD`` matches the
COLMAP text format (``x_cam = R @ x_world + t``); ``WORLD_FROM_CAMERA`` is
its inverse. All arithmetic goes through the camera-from-world form so a
pose never gets silently transposed.

Pixel coordinates are continuous, with pixel ``(u, v)`` covering
``[u, u+1) x [v, v+1)``; its center is therefore ``(u + 0.5, v + 0.5)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import BehindCamera, InvalidInput

ORTHO_TOL = 1e-9


class Convention(enum.Enum):
    WORLD_FROM_CAMERA = "world_from_camera"
    CAMERA_FROM_WORLD = "camera_from_world"


def _check_rotation(R: np.ndarray, name: str = "rotation") -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise InvalidInput(f"{name} must be a finite 3x3 matrix")
    if np.abs(R.T @ R - np.eye(3)).max() >= ORTHO_TOL or np.linalg.det(R) <= 0:
        raise InvalidInput(f"{name} is not a proper rotation")
    return R


@dataclass(frozen=True, eq=False)
class Pose:
    rotation: np.ndarray
    translation: np.ndarray
    convention: Convention = Convention.CAMERA_FROM_WORLD

    def __post_init__(self):
        R = _check_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidInput("translation must be a finite 3-vector")
        R = R.copy()
        t = t.copy()
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "convention", Convention(self.convention))

    @classmethod
    def identity(cls, convention: Convention = Convention.CAMERA_FROM_WORLD) -> Pose:
        return cls(np.eye(3), np.zeros(3), convention)

    @classmethod
    def from_quaternion(cls, qvec, tvec, convention=Convention.CAMERA_FROM_WORLD) -> Pose:
        """Build from a Hamilton quaternion ``(w, x, y, z)``, COLMAP order."""
        R = quaternion_to_rotation(qvec)
        return cls(R, tvec, convention)

    @classmethod
    def from_matrix(cls, T, convention=Convention.CAMERA_FROM_WORLD) -> Pose:
        T = np.asarray(T, dtype=np.float64)
        return cls(T[:3, :3], T[:3, 3], convention)

    def camera_from_world(self) -> tuple[np.ndarray, np.ndarray]:
        if self.convention is Convention.CAMERA_FROM_WORLD:
            return self.rotation, self.translation
        R = self.rotation.T
        return R, -R @ self.translation

    def world_from_camera(self) -> tuple[np.ndarray, np.ndarray]:
        if self.convention is Convention.WORLD_FROM_CAMERA:
            return self.rotation, self.translation
        R = self.rotation.T
        return R, -R @ self.translation

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix in this pose's own convention."""
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def to_convention(self, convention: Convention) -> Pose:
        convention = Convention(convention)
        if convention is self.convention:
            return self
        if convention is Convention.CAMERA_FROM_WORLD:
            R, t = self.camera_from_world()
        else:
            R, t = self.world_from_camera()
        return Pose(R, t, convention)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.world_from_camera()[1]

    def inverse(self) -> Pose:
        # The inverse swaps the roles of the two frames; keep the label.
        R, t = self.rotation.T, -self.rotation.T @ self.translation
        return Pose(R, t, self.convention)

    def allclose(self, other: Pose, atol: float = 1e-9) -> bool:
        other = other.to_convention(self.convention)
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self):
        return (
            f"Pose(convention={self.convention.value}, "
            f"rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"
        )


def compose(a: Pose, b: Pose) -> Pose:
    """Chain two poses: ``compose(P1, relative_pose(P1, P2)) == P2``.

    In world-from-camera matrices this is ``A @ B``. The result keeps
    ``a``'s convention.
    """
    if a.convention is not b.convention:
        raise InvalidInput("cannot compose poses with different conventions")
    Ra, ta = a.world_from_camera()
    Rb, tb = b.world_from_camera()
    out = Pose(Ra @ Rb, Ra @ tb + ta, Convention.WORLD_FROM_CAMERA)
    return out.to_convention(a.convention)


def relative_pose(reference: Pose, other: Pose) -> Pose:
    """Express ``other`` in the camera frame of ``reference``.

    The returned pose maps the reference camera frame to ``other`` in the
    same convention as the inputs.
    """
    if reference.convention is not other.convention:
        raise InvalidInput("relative_pose needs poses with one convention")
    Rr, tr = reference.world_from_camera()
    Ro, to = other.world_from_camera()
    rel = Pose(Rr.T @ Ro, Rr.T @ (to - tr), Convention.WORLD_FROM_CAMERA)
    return rel.to_convention(reference.convention)


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidInput("intrinsics must be finite")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise InvalidInput("width and height must be integers")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInput("width and height must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInput("principal point outside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def scaled(self, factor: float) -> Intrinsics:
        """Intrinsics of the same camera resampled by ``factor`` (e.g. 0.5)."""
        return Intrinsics(
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
            int(round(self.width * factor)),
            int(round(self.height * factor)),
        )


class Role(enum.Enum):
    CONDITIONING = "conditioning"
    TARGET = "target"


@dataclass(frozen=True)
class Frame:
    pose: Pose
    intrinsics: Intrinsics
    timestamp: float = 0.0
    role: Role = Role.TARGET
    name: str = ""


@dataclass(frozen=True)
class Trajectory:
    frames: tuple[Frame, ...] = field(default_factory=tuple)

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise InvalidInput("trajectory must contain at least one frame")
        conv = frames[0].pose.convention
        if any(f.pose.convention is not conv for f in frames):
            raise InvalidInput("all poses in a trajectory must share one convention")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self):
        return iter(self.frames)

    @property
    def poses(self) -> list[Pose]:
        return [f.pose for f in self.frames]

    @property
    def conditioning_indices(self) -> list[int]:
        return [i for i, f in enumerate(self.frames) if f.role is Role.CONDITIONING]

    def centers(self) -> np.ndarray:
        return np.array([f.pose.center for f in self.frames])

    def with_poses(self, poses) -> Trajectory:
        poses = list(poses)
        if len(poses) != len(self.frames):
            raise InvalidInput("pose count does not match frame count")
        return Trajectory(
            tuple(
                Frame(p, f.intrinsics, f.timestamp, f.role, f.name)
                for p, f in zip(poses, self.frames)
            )
        )


@dataclass(frozen=True, eq=False)
class RayMap:
    origins: np.ndarray
    directions: np.ndarray


def pixel_rays(intrinsics: Intrinsics, pose: Pose, reference: Pose) -> RayMap:
    """Per-pixel ray origins and unit directions in the frame of ``reference``."""
    if pose.convention is not reference.convention:
        raise InvalidInput("pose and reference must share a convention")
    rel = relative_pose(reference, pose)
    R, t = rel.world_from_camera()
    H, W = intrinsics.height, intrinsics.width
    u = np.arange(W, dtype=np.float64) + 0.5
    v = np.arange(H, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    cam = np.stack(
        [
            (uu - intrinsics.cx) / intrinsics.fx,
            (vv - intrinsics.cy) / intrinsics.fy,
            np.ones_like(uu),
        ],
        axis=-1,
    )
    dirs = cam @ R.T
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    origins = np.broadcast_to(t, (H, W, 3)).copy()
    return RayMap(origins, dirs)


def project(point, intrinsics: Intrinsics, pose: Pose) -> tuple[np.ndarray, float]:
    """Project a world point; returns the continuous pixel and camera-frame depth."""
    R, t = pose.camera_from_world()
    Xc = R @ np.asarray(point, dtype=np.float64) + t
    depth = float(Xc[2])
    if not depth > 0:
        raise BehindCamera(f"point has depth {depth:g} in the camera frame")
    pixel = np.array(
        [
            intrinsics.fx * Xc[0] / depth + intrinsics.cx,
            intrinsics.fy * Xc[1] / depth + intrinsics.cy,
        ]
    )
    return pixel, depth


def project_points(points, intrinsics: Intrinsics, pose: Pose):
    """Vectorised ``project`` that does not raise; depth <= 0 rows are left for the caller."""
    R, t = pose.camera_from_world()
    Xc = np.asarray(points, dtype=np.float64).reshape(-1, 3) @ R.T + t
    z = Xc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.stack(
            [
                intrinsics.fx * Xc[:, 0] / z + intrinsics.cx,
                intrinsics.fy * Xc[:, 1] / z + intrinsics.cy,
            ],
            axis=-1,
        )
    return px, z


def backproject(pixel, depth: float, intrinsics: Intrinsics, pose: Pose) -> np.ndarray:
    """World point seen at continuous ``pixel`` with camera-frame ``depth``."""
    u, v = pixel
    Xc = np.array(
        [
            (u - intrinsics.cx) / intrinsics.fx * depth,
            (v - intrinsics.cy) / intrinsics.fy * depth,
            depth,
        ]
    )
    R, t = pose.world_from_camera()
    return R @ Xc + t


def rotation_angle(Ra, Rb) -> float:
    """Geodesic angle between two rotations, in radians.

    Uses atan2 of the sine and cosine parts rather than a bare arccos so
    small and near-pi angles keep full precision.
    """
    Ra = _check_rotation(Ra, "Ra")
    Rb = _check_rotation(Rb, "Rb")
    M = Ra.T @ Rb
    cos = (np.trace(M) - 1.0) / 2.0
    skew = np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    sin = np.linalg.norm(skew) / 2.0
    return float(np.clip(np.arctan2(sin, cos), 0.0, np.pi))


def quaternion_to_rotation(qvec) -> np.ndarray:
    q = np.asarray(qvec, dtype=np.float64)
    if q.shape != (4,) or not np.all(np.isfinite(q)) or not np.linalg.norm(q) > 0:
        raise InvalidInput("quaternion must be a finite nonzero 4-vector")
    return Rotation.from_quat(q, scalar_first=True).as_matrix()


def rotation_to_quaternion(R) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
    q = Rotation.from_matrix(np.asarray(R, dtype=np.float64)).as_quat(
        scalar_first=True, canonical=True
    )
    return q


def axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    return Rotation.from_rotvec(axis * angle).as_matrix()
