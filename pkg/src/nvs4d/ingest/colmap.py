"""COLMAP text model reader/writer (cameras.txt, images.txt, points3D.txt).

Only PINHOLE and SIMPLE_PINHOLE cameras are accepted. Poses are
camera-from-world, as stored by COLMAP. Floats are written with 17
significant digits so a write/parse cycle is lossless.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..calibrate import SparsePoint
from ..errors import IntegrityError, InvalidInput, IoError, ParseError, UnsupportedCamera
from ..geometry import (
    Convention,
    Frame,
    Intrinsics,
    Pose,
    Role,
    Trajectory,
    project_points,
    rotation_to_quaternion,
)

QUAT_TOL = 1e-3
# Quaternions closer to unit norm than this are kept verbatim (keeps round trips byte-stable).
QUAT_EXACT = 1e-12

CAMERA_MODELS = {"SIMPLE_PINHOLE": 3, "PINHOLE": 4}


@dataclass(frozen=True, eq=False)
class Camera:
    id: int
    model: str
    width: int
    height: int
    params: tuple[float, ...]

    @property
    def intrinsics(self) -> Intrinsics:
        if self.model == "SIMPLE_PINHOLE":
            f, cx, cy = self.params
            return Intrinsics(f, f, cx, cy, self.width, self.height)
        fx, fy, cx, cy = self.params
        return Intrinsics(fx, fy, cx, cy, self.width, self.height)


@dataclass(frozen=True, eq=False)
class Image:
    id: int
    qvec: np.ndarray
    tvec: np.ndarray
    camera_id: int
    name: str
    xys: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    point3D_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def pose(self) -> Pose:
        return Pose.from_quaternion(self.qvec, self.tvec, Convention.CAMERA_FROM_WORLD)


@dataclass(frozen=True, eq=False)
class Point3D:
    id: int
    xyz: np.ndarray
    rgb: tuple[int, int, int]
    error: float
    track: tuple[tuple[int, int], ...]

    @property
    def image_ids(self) -> tuple[int, ...]:
        return tuple(img for img, _ in self.track)


@dataclass(eq=False)
class ColmapModel:
    cameras: dict[int, Camera]
    images: dict[int, Image]
    points3D: dict[int, Point3D]

    def validate(self):
        for img in self.images.values():
            if img.camera_id not in self.cameras:
                raise IntegrityError(f"image {img.id} references missing camera {img.camera_id}")
            for pid in img.point3D_ids:
                if pid != -1 and pid not in self.points3D:
                    raise IntegrityError(f"image {img.id} references missing point {pid}")
        for pt in self.points3D.values():
            for image_id, _ in pt.track:
                if image_id not in self.images:
                    raise IntegrityError(f"point {pt.id} references missing image {image_id}")
        return self

    def image_order(self) -> list[int]:
        """Image ids sorted by id; this fixes the frame index of each image."""
        return sorted(self.images)

    def trajectory(self, conditioning=(), timestamps=None) -> Trajectory:
        frames = []
        for k, image_id in enumerate(self.image_order()):
            img = self.images[image_id]
            role = Role.CONDITIONING if k in set(conditioning) else Role.TARGET
            t = 0.0 if timestamps is None else float(timestamps[k])
            frames.append(Frame(img.pose, self.cameras[img.camera_id].intrinsics, t, role, img.name))
        return Trajectory(tuple(frames))

    def sparse_points(self) -> list[SparsePoint]:
        """Points with tracks expressed as frame indices (see ``image_order``)."""
        index = {image_id: k for k, image_id in enumerate(self.image_order())}
        out = []
        for pid in sorted(self.points3D):
            pt = self.points3D[pid]
            frames = tuple(sorted({index[i] for i in pt.image_ids}))
            if frames:
                out.append(SparsePoint(pt.xyz, frames))
        return out

    def with_scale(self, s: float) -> ColmapModel:
        """Copy with all translations and point positions multiplied by ``s``."""
        if not (math.isfinite(s) and s > 0):
            raise InvalidInput("scale must be positive and finite")
        images = {
            k: Image(im.id, im.qvec, im.tvec * s, im.camera_id, im.name, im.xys, im.point3D_ids)
            for k, im in self.images.items()
        }
        points = {
            k: Point3D(p.id, p.xyz * s, p.rgb, p.error, p.track) for k, p in self.points3D.items()
        }
        return ColmapModel(dict(self.cameras), images, points)


def _content_lines(path: Path):
    """Yield (line number, stripped text) for non-comment, non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield n, line


def _num(tok: str, kind, n: int, path, what: str):
    try:
        v = kind(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", line=n, path=path) from None
    if kind is float and not math.isfinite(v):
        raise ParseError(f"non-finite {what}", line=n, path=path)
    return v


def read_cameras(path) -> dict[int, Camera]:
    path = Path(path)
    cams = {}
    for n, line in _content_lines(path):
        el = line.split()
        if len(el) < 4:
            raise ParseError("camera line needs CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]", n, path)
        cid = _num(el[0], int, n, path, "camera id")
        model = el[1]
        if model not in CAMERA_MODELS:
            raise UnsupportedCamera(f"{path}:{n}: camera model {model} is not supported")
        if len(el) != 4 + CAMERA_MODELS[model]:
            raise ParseError(f"{model} needs {CAMERA_MODELS[model]} parameters", n, path)
        w = _num(el[2], int, n, path, "width")
        h = _num(el[3], int, n, path, "height")
        params = tuple(_num(t, float, n, path, "camera parameter") for t in el[4:])
        cam = Camera(cid, model, w, h, params)
        try:
            cam.intrinsics
        except InvalidInput as exc:
            raise ParseError(str(exc), n, path) from None
        if cid in cams:
            raise ParseError(f"duplicate camera id {cid}", n, path)
        cams[cid] = cam
    return cams


def _normalize_quat(q: np.ndarray, n: int, path) -> np.ndarray:
    norm = float(np.linalg.norm(q))
    if abs(norm - 1.0) <= QUAT_EXACT:
        return q
    if abs(norm - 1.0) < QUAT_TOL:
        return q / norm
    raise ParseError(f"quaternion norm {norm:.6g} is not close to 1", n, path)


def read_images(path) -> dict[int, Image]:
    path = Path(path)
    images = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    i = 0
    while i < len(lines):
        n = i + 1
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        el = line.split()
        if len(el) < 10:
            raise ParseError("image line needs IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME", n, path)
        iid = _num(el[0], int, n, path, "image id")
        q = np.array([_num(t, float, n, path, "quaternion") for t in el[1:5]])
        t = np.array([_num(t, float, n, path, "translation") for t in el[5:8]])
        cid = _num(el[8], int, n, path, "camera id")
        name = " ".join(el[9:])
        q = _normalize_quat(q, n, path)
        if i >= len(lines):
            raise ParseError("missing POINTS2D line after image line", n, path)
        obs_n = i + 1
        obs = lines[i].split()
        i += 1
        if len(obs) % 3:
            raise ParseError("POINTS2D line must hold X Y POINT3D_ID triples", obs_n, path)
        xys = np.array(
            [[_num(obs[k], float, obs_n, path, "x"), _num(obs[k + 1], float, obs_n, path, "y")]
             for k in range(0, len(obs), 3)]
        ).reshape(-1, 2)
        pids = np.array(
            [_num(obs[k + 2], int, obs_n, path, "point id") for k in range(0, len(obs), 3)],
            dtype=np.int64,
        )
        if iid in images:
            raise ParseError(f"duplicate image id {iid}", n, path)
        images[iid] = Image(iid, q, t, cid, name, xys, pids)
    return images


def read_points3D(path) -> dict[int, Point3D]:
    path = Path(path)
    points = {}
    for n, line in _content_lines(path):
        el = line.split()
        if len(el) < 8 or (len(el) - 8) % 2:
            raise ParseError("point line needs POINT3D_ID X Y Z R G B ERROR TRACK[]", n, path)
        pid = _num(el[0], int, n, path, "point id")
        xyz = np.array([_num(t, float, n, path, "coordinate") for t in el[1:4]])
        rgb = tuple(_num(t, int, n, path, "color") for t in el[4:7])
        err = _num(el[7], float, n, path, "error")
        track = tuple(
            (_num(el[k], int, n, path, "image id"), _num(el[k + 1], int, n, path, "point2D index"))
            for k in range(8, len(el), 2)
        )
        if pid in points:
            raise ParseError(f"duplicate point id {pid}", n, path)
        points[pid] = Point3D(pid, xyz, rgb, err, track)
    return points


def parse_colmap(directory) -> ColmapModel:
    """Read a COLMAP text model directory and check cross references."""
    d = Path(directory)
    for name in ("cameras.txt", "images.txt", "points3D.txt"):
        if not (d / name).is_file():
            raise ParseError(f"missing {name}", path=d)
    model = ColmapModel(
        read_cameras(d / "cameras.txt"),
        read_images(d / "images.txt"),
        read_points3D(d / "points3D.txt"),
    )
    return model.validate()


def _f(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInput("refusing to write a non-finite value")
    return "%.17g" % x


def format_cameras(cameras) -> str:
    out = ["# Camera list with one line of data per camera:",
           "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]",
           f"# Number of cameras: {len(cameras)}"]
    for cid in sorted(cameras):
        c = cameras[cid]
        out.append(" ".join([str(c.id), c.model, str(c.width), str(c.height), *map(_f, c.params)]))
    return "\n".join(out) + "\n"


def format_images(images) -> str:
    out = ["# Image list with two lines of data per image:",
           "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
           "#   POINTS2D[] as (X, Y, POINT3D_ID)",
           f"# Number of images: {len(images)}"]
    for iid in sorted(images):
        im = images[iid]
        out.append(" ".join([str(im.id), *map(_f, im.qvec), *map(_f, im.tvec), str(im.camera_id), im.name]))
        obs = []
        for (x, y), pid in zip(im.xys, im.point3D_ids):
            obs += [_f(x), _f(y), str(int(pid))]
        out.append(" ".join(obs))
    return "\n".join(out) + "\n"


def format_points3D(points) -> str:
    out = ["# 3D point list with one line of data per point:",
           "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)",
           f"# Number of points: {len(points)}"]
    for pid in sorted(points):
        p = points[pid]
        track = [str(int(v)) for pair in p.track for v in pair]
        out.append(" ".join([str(p.id), *map(_f, p.xyz), *(str(int(c)) for c in p.rgb), _f(p.error), *track]))
    return "\n".join(out) + "\n"


def write_colmap(model: ColmapModel, directory) -> list[Path]:
    """Write the three text files into ``directory`` (created if missing)."""
    model.validate()
    texts = {
        "cameras.txt": format_cameras(model.cameras),
        "images.txt": format_images(model.images),
        "points3D.txt": format_points3D(model.points3D),
    }
    d = Path(directory)
    try:
        os.makedirs(d, exist_ok=True)
        paths = []
        for name, text in texts.items():
            p = d / name
            with open(p, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            paths.append(p)
    except OSError as exc:
        raise IoError(f"cannot write COLMAP model to {d}: {exc}") from exc
    return paths


def model_from_trajectory(traj: Trajectory, points=None, names=None) -> ColmapModel:
    """Build a model from poses and optional SparsePoints (synthetic data, exports).

    One camera per distinct intrinsics. Point tracks reference frame
    indices, which become image ids ``index + 1``; observations are
    synthesised by projection.
    """
    cameras: dict[int, Camera] = {}
    cam_of: dict[Intrinsics, int] = {}
    images = {}
    obs: dict[int, list] = {k: [] for k in range(len(traj))}
    point_list = list(points or [])
    points3D = {}
    for pid, sp in enumerate(point_list, start=1):
        track = []
        for k in sp.track:
            fr = traj[k]
            px, _ = project_points(sp.xyz[None], fr.intrinsics, fr.pose.to_convention(Convention.CAMERA_FROM_WORLD))
            track.append((k + 1, len(obs[k])))
            obs[k].append((px[0, 0], px[0, 1], pid))
        points3D[pid] = Point3D(pid, sp.xyz.copy(), (128, 128, 128), 0.0, tuple(track))
    for k, fr in enumerate(traj):
        K = fr.intrinsics
        if K not in cam_of:
            cid = len(cameras) + 1
            cam_of[K] = cid
            cameras[cid] = Camera(cid, "PINHOLE", K.width, K.height, (K.fx, K.fy, K.cx, K.cy))
        R, t = fr.pose.camera_from_world()
        name = (names[k] if names else fr.name) or f"frame_{k:04d}.png"
        o = obs[k]
        images[k + 1] = Image(
            k + 1,
            rotation_to_quaternion(R),
            np.array(t, dtype=np.float64),
            cam_of[K],
            name,
            np.array([[x, y] for x, y, _ in o]).reshape(-1, 2),
            np.array([p for _, _, p in o], dtype=np.int64),
        )
    return ColmapModel(cameras, images, points3D).validate()
