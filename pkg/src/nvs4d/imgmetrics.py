"""PSNR, SSIM and keypoint distance (KD)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInput, NoValidPairs


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidInput("SSIM window must be odd and >= 3")
        if not (self.k1 > 0 and self.k2 > 0 and self.sigma > 0 and self.dynamic_range > 0):
            raise InvalidInput("SSIM constants must be positive")


def as_image(a) -> np.ndarray:
    """Validate and return an ``H x W x C`` float64 image in [0, 1]."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3) or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"expected H x W x C image with C in (1, 3), got {a.shape}")
    if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise InvalidInput("image values must be finite and in [0, 1]")
    return a


def psnr(a, b, dynamic_range: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(dynamic_range**2 / mse)


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    # x: H x W, w: k x k; "valid" weighted window sums
    return np.einsum("ijkl,kl->ij", sliding_window_view(x, w.shape), w)


def ssim_map(a, b, cfg: SsimConfig = SsimConfig()) -> np.ndarray:
    """Local SSIM for every fully-contained window, per channel (H' x W' x C)."""
    a = as_image(a)
    b = as_image(b)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < cfg.window:
        raise InvalidInput(f"image smaller than the {cfg.window}px SSIM window")
    w = gaussian_window(cfg.window, cfg.sigma)
    c1 = (cfg.k1 * cfg.dynamic_range) ** 2
    c2 = (cfg.k2 * cfg.dynamic_range) ** 2
    out = []
    for c in range(a.shape[2]):
        x, y = a[:, :, c], b[:, :, c]
        mx = _filter_valid(x, w)
        my = _filter_valid(y, w)
        sxx = _filter_valid(x * x, w) - mx * mx
        syy = _filter_valid(y * y, w) - my * my
        sxy = _filter_valid(x * y, w) - mx * my
        num = (2.0 * mx * my + c1) * (2.0 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        out.append(num / den)
    return np.stack(out, axis=-1)


def ssim(a, b, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean Gaussian-weighted SSIM, averaged over channels."""
    return float(np.mean(ssim_map(a, b, cfg)))


@dataclass(frozen=True)
class KeypointDistance:
    value: float
    n_pairs: int
    n_excluded: int
    per_pair: tuple[float, ...]


def keypoint_distance(pairs, min_matches: int = 10) -> KeypointDistance:
    """Mean over pairs of the mean keypoint displacement in pixels.

    Each pair is averaged over its own matches first; pairs with fewer than
    ``min_matches`` matches are left out and counted in ``n_excluded``.
    """
    per_pair = []
    excluded = 0
    for ms in pairs:
        if len(ms) < min_matches:
            excluded += 1
            continue
        d = np.linalg.norm(ms.second - ms.first, axis=1)
        per_pair.append(float(np.mean(d)))
    if not per_pair:
        raise NoValidPairs(f"no pair has >= {min_matches} matches")
    return KeypointDistance(
        value=float(np.mean(per_pair)),
        n_pairs=len(per_pair),
        n_excluded=excluded,
        per_pair=tuple(per_pair),
    )
