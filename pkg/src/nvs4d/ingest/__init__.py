"""Readers and writers for every on-disk format, plus the mixture sampler."""

from .colmap import ColmapModel, model_from_trajectory, parse_colmap, write_colmap
from .depth import read_depth, write_depth
from .images import read_image, write_image
from .matches import read_matches, write_matches
from .mixture import (
    DatasetDescriptor,
    DatasetKind,
    MixtureDraw,
    mixture_sample,
    mixture_weights,
    window_for_views,
)

__all__ = [
    "ColmapModel",
    "DatasetDescriptor",
    "DatasetKind",
    "MixtureDraw",
    "mixture_sample",
    "mixture_weights",
    "model_from_trajectory",
    "parse_colmap",
    "read_depth",
    "read_image",
    "read_matches",
    "window_for_views",
    "write_colmap",
    "write_depth",
    "write_image",
    "write_matches",
]
