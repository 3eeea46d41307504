"""Depth map files.

Two layouts are read:

* 16-bit PGM or PNG, values in millimeters, 0 meaning invalid;
* raw little-endian float32 grids (``.f32``) with a JSON sidecar
  ``<file>.json`` holding ``{"width": W, "height": H, "unit": "m"}``.

Values come back in meters.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..calibrate import DepthMap
from ..errors import InvalidInput, IoError, ParseError

UNITS = {"m": 1.0, "mm": 1e-3, "cm": 1e-2}
RAW_SUFFIXES = (".f32", ".raw", ".bin")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_depth(path) -> DepthMap:
    path = Path(path)
    if path.suffix.lower() in RAW_SUFFIXES:
        return _read_raw(path)
    try:
        with Image.open(path) as im:
            arr = np.array(im)
    except OSError as exc:
        raise ParseError(f"cannot decode depth image: {exc}", path=path) from None
    if arr.ndim != 2:
        raise ParseError("depth image must have a single channel", path=path)
    if arr.dtype == np.uint8:
        raise ParseError("8-bit depth images are not supported; use 16-bit millimeters", path=path)
    values = arr.astype(np.float64) * UNITS["mm"]
    return DepthMap(values, arr > 0)


def _read_raw(path: Path) -> DepthMap:
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ParseError(f"missing sidecar {side.name}", path=path) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad sidecar JSON: {exc.msg}", line=exc.lineno, path=side) from None
    try:
        w, h = int(meta["width"]), int(meta["height"])
        unit = meta.get("unit", "m")
        factor = UNITS[unit]
    except (KeyError, TypeError, ValueError):
        raise ParseError("sidecar needs integer width/height and a known unit", path=side) from None
    data = np.fromfile(path, dtype="<f4")
    if data.size != w * h:
        raise ParseError(f"file holds {data.size} values, sidecar says {w}x{h}", path=path)
    values = data.reshape(h, w).astype(np.float64)
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(values) & (values > 0)
    return DepthMap(np.where(valid, values * factor, 0.0), valid)


def write_depth(path, depth, unit: str = "m") -> Path:
    """Write a DepthMap or 2-D array of meters. Format follows the suffix."""
    path = Path(path)
    if isinstance(depth, DepthMap):
        values = np.where(depth.valid, depth.values, 0.0)
    else:
        values = np.asarray(depth, dtype=np.float64)
    if values.ndim != 2:
        raise InvalidInput("depth must be 2-D")
    try:
        if path.suffix.lower() in RAW_SUFFIXES:
            if unit not in UNITS:
                raise InvalidInput(f"unknown unit {unit!r}")
            h, w = values.shape
            (values / UNITS[unit]).astype("<f4").tofile(path)
            sidecar_path(path).write_text(
                json.dumps({"width": w, "height": h, "unit": unit}, sort_keys=True) + "\n",
                encoding="utf-8",
            )
        else:
            mm = np.rint(np.nan_to_num(values, nan=0.0, posinf=0.0) / UNITS["mm"])
            if mm.min() < 0 or mm.max() > 65535:
                raise InvalidInput("depth out of the 16-bit millimeter range")
            Image.fromarray(mm.astype(np.uint16)).save(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
