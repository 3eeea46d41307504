"""Geometry, metrics, scale calibration and guided diffusion sampling for
pose- and time-conditioned novel view synthesis."""

from . import align, calibrate, diffusion, epipolar, geometry, imgmetrics, ingest
from .errors import Nvs4dError

__version__ = "0.1.0"

__all__ = [
    "Nvs4dError",
    "align",
    "calibrate",
    "diffusion",
    "epipolar",
    "geometry",
    "imgmetrics",
    "ingest",
]
