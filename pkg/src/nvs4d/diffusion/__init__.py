"""Diffusion sampling machinery checked against an exact Gaussian world."""

from .film import FilmParams, masked_film
from .guidance import (
    ALL_PRESENT,
    NESTED_MASKS,
    ConditioningMask,
    GuidanceSpec,
    drop_level_probabilities,
    multi_guided_eps,
    multi_guided_v,
    sample_mask,
    sample_mask_levels,
)
from .sampler import ddim_sample, moment_report
from .schedule import NoiseSchedule, alpha_sigma, logsnr, v_convert, v_from_eps, v_target
from .sweep import SweepResult, SweepRow, guidance_sweep, pareto_front, posterior_metrics
from .world import GaussianWorld, toy_signals, toy_world

__all__ = [
    "ALL_PRESENT",
    "NESTED_MASKS",
    "ConditioningMask",
    "FilmParams",
    "GaussianWorld",
    "GuidanceSpec",
    "NoiseSchedule",
    "SweepResult",
    "SweepRow",
    "alpha_sigma",
    "ddim_sample",
    "drop_level_probabilities",
    "guidance_sweep",
    "logsnr",
    "masked_film",
    "moment_report",
    "multi_guided_eps",
    "multi_guided_v",
    "pareto_front",
    "posterior_metrics",
    "sample_mask",
    "sample_mask_levels",
    "toy_signals",
    "toy_world",
    "v_convert",
    "v_from_eps",
    "v_target",
]
