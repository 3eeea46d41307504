"""8/16-bit PNG and PGM images as float arrays in [0, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import InvalidInput, IoError, ParseError


def read_image(path) -> np.ndarray:
    """Return an ``H x W x C`` float64 array, C in (1, 3)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.mode in ("RGBA", "P", "LA", "CMYK", "YCbCr"):
                im = im.convert("RGB")
            arr = np.array(im)
            mode = im.mode
    except OSError as exc:
        raise ParseError(f"cannot decode image: {exc}", path=path) from None
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8) * 255
    if arr.dtype == np.uint8:
        out = arr.astype(np.float64) / 255.0
    elif arr.dtype in (np.uint16, np.int32) or mode.startswith("I"):
        out = arr.astype(np.float64) / 65535.0
    else:
        raise ParseError(f"unsupported pixel type {arr.dtype}", path=path)
    if out.ndim == 2:
        out = out[:, :, None]
    return out


def write_image(path, image, bits: int = 8) -> Path:
    path = Path(path)
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if a.min() < 0 or a.max() > 1:
        raise InvalidInput("image values must be in [0, 1]")
    if bits == 8:
        arr = np.rint(a * 255).astype(np.uint8)
    elif bits == 16:
        if a.ndim != 2:
            raise InvalidInput("16-bit output is single-channel only")
        arr = np.rint(a * 65535).astype(np.uint16)
    else:
        raise InvalidInput("bits must be 8 or 16")
    try:
        Image.fromarray(arr).save(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
