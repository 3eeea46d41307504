"""Cosine logSNR schedule and v-parametrization conversions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import InvalidInput


@dataclass(frozen=True)
class NoiseSchedule:
    """Cosine schedule in logSNR, truncated to ``[lambda_min, lambda_max]``.

    ``t = 0`` is clean (``lambda_max``), ``t = 1`` is pure noise
    (``lambda_min``).
    """

    lambda_min: float = -15.0
    lambda_max: float = 15.0
    kind: str = "cosine_logsnr"

    def __post_init__(self):
        if self.kind != "cosine_logsnr":
            raise InvalidInput(f"unknown schedule kind {self.kind!r}")
        if not self.lambda_min < self.lambda_max:
            raise InvalidInput("lambda_min must be below lambda_max")

    @property
    def _bounds(self):
        a = np.arctan(np.exp(-0.5 * self.lambda_max))
        b = np.arctan(np.exp(-0.5 * self.lambda_min))
        return a, b

    def logsnr(self, t):
        return logsnr(self, t)


def logsnr(schedule: NoiseSchedule, t):
    """``lambda(t) = -2 log tan(a + t (b - a))``; endpoints returned exactly."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0) or np.any(t_arr > 1):
        raise InvalidInput("t must lie in [0, 1]")
    a, b = schedule._bounds
    lam = -2.0 * np.log(np.tan(a + t_arr * (b - a)))
    lam = np.where(t_arr == 0, schedule.lambda_max, lam)
    lam = np.where(t_arr == 1, schedule.lambda_min, lam)
    return float(lam) if lam.ndim == 0 else lam


def alpha_sigma(lam):
    """``alpha = sqrt(sigmoid(lam))``, ``sigma = sqrt(sigmoid(-lam))``."""
    lam = np.asarray(lam, dtype=np.float64)
    alpha = np.sqrt(expit(lam))
    sigma = np.sqrt(expit(-lam))
    if alpha.ndim == 0:
        return float(alpha), float(sigma)
    return alpha, sigma


def v_convert(z, v, lam):
    """Clean-data and noise estimates from a v-prediction: ``(x_hat, eps_hat)``."""
    alpha, sigma = alpha_sigma(lam)
    z = np.asarray(z, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return alpha * z - sigma * v, sigma * z + alpha * v


def v_from_eps(z, eps, lam):
    """Inverse of the noise half of ``v_convert``."""
    alpha, sigma = alpha_sigma(lam)
    return (np.asarray(eps) - sigma * np.asarray(z)) / alpha


def v_target(x, eps, lam):
    alpha, sigma = alpha_sigma(lam)
    return alpha * np.asarray(eps) - sigma * np.asarray(x)
