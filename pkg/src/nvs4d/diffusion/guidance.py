"""Nested conditioning masks, dropout sampling and multi-guidance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from .schedule import alpha_sigma

SIGNALS = ("images", "poses", "timestamps")


@dataclass(frozen=True)
class ConditioningMask:
    """Which signals are present. Only nested masks are valid: timestamps
    need poses, poses need images."""

    images: bool = True
    poses: bool = True
    timestamps: bool = True

    def __post_init__(self):
        if self.poses and not self.images:
            raise InvalidInput("poses present without images is not a trained mask")
        if self.timestamps and not self.poses:
            raise InvalidInput("timestamps present without poses is not a trained mask")

    @property
    def level(self) -> int:
        """Number of leading signals present (0 to 3)."""
        return int(self.images) + int(self.poses) + int(self.timestamps)

    @classmethod
    def from_level(cls, level: int) -> ConditioningMask:
        if not 0 <= level <= 3:
            raise InvalidInput(f"mask level must be 0..3, got {level}")
        return cls(level >= 1, level >= 2, level >= 3)


ALL_PRESENT = ConditioningMask.from_level(3)
NESTED_MASKS = tuple(ConditioningMask.from_level(k) for k in range(4))

DROPOUT_SCHEMES = ("uniform", "cascade")


def drop_level_probabilities(p_drop: float = 0.1, scheme: str = "uniform") -> np.ndarray:
    """Probability of each mask level ``[0, 1, 2, 3]`` under a dropout scheme.

    ``uniform``: with probability ``p_drop`` one of the three drop masks is
    chosen uniformly. ``cascade``: timestamps are dropped with ``p_drop``;
    once dropped, poses are dropped with ``p_drop``; once dropped, images.
    """
    if not 0 <= p_drop < 1:
        raise InvalidInput("p_drop must be in [0, 1)")
    p = float(p_drop)
    if scheme == "uniform":
        return np.array([p / 3, p / 3, p / 3, 1 - p])
    if scheme == "cascade":
        return np.array([p**3, p**2 * (1 - p), p * (1 - p), 1 - p])
    raise InvalidInput(f"unknown dropout scheme {scheme!r}")


def sample_mask_levels(rng, n: int, p_drop: float = 0.1, scheme: str = "uniform") -> np.ndarray:
    """Vectorised ``sample_mask``; returns mask levels."""
    probs = drop_level_probabilities(p_drop, scheme)
    u = rng.random(n)
    return np.searchsorted(np.cumsum(probs)[:-1], u, side="right")


def sample_mask(rng, p_drop: float = 0.1, scheme: str = "uniform") -> ConditioningMask:
    """Draw one training-time conditioning mask."""
    return ConditioningMask.from_level(int(sample_mask_levels(rng, 1, p_drop, scheme)[0]))


@dataclass(frozen=True)
class GuidanceSpec:
    """Guidance weights over nested signal groups.

    ``group_sizes`` splits the ordered signals (images, poses, timestamps)
    into consecutive groups, one weight per group. Three weights default
    to one group per signal; a single weight treats all three as one
    variable, which is ordinary classifier-free guidance.
    """

    weights: tuple[float, ...]
    group_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not w or not all(np.isfinite(x) for x in w):
            raise InvalidInput("guidance weights must be finite and non-empty")
        sizes = self.group_sizes
        if sizes is None:
            if len(w) == 3:
                sizes = (1, 1, 1)
            elif len(w) == 1:
                sizes = (3,)
            else:
                raise InvalidInput("give group_sizes when using two weights")
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) != len(w) or any(s < 1 for s in sizes) or sum(sizes) != 3:
            raise InvalidInput("group_sizes must partition the three signals")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "group_sizes", sizes)

    @classmethod
    def per_signal(cls, w_image: float, w_pose: float, w_time: float) -> GuidanceSpec:
        return cls((w_image, w_pose, w_time))

    @classmethod
    def standard(cls, w: float) -> GuidanceSpec:
        return cls((w,))

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def levels(self) -> tuple[int, ...]:
        """Mask level after conditioning on the first j groups, j = 0..k."""
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.group_sizes)]))

    def coefficients(self) -> np.ndarray:
        """Mixing coefficient per level in the classifier-free form.

        ``(1 - w_1), (w_1 - w_2), ..., (w_{k-1} - w_k), w_k``; sums to one.
        """
        w = np.asarray(self.weights)
        c = np.empty(self.k + 1)
        c[0] = 1.0 - w[0]
        c[1:-1] = w[:-1] - w[1:]
        c[-1] = w[-1]
        return c

    def per_signal_weights(self) -> tuple[float, float, float]:
        out = []
        for w, size in zip(self.weights, self.group_sizes):
            out.extend([w] * size)
        return tuple(out)


def multi_guided_v(oracle, z, lam, spec: GuidanceSpec, signals):
    """Guided v-prediction.

    The nested conditional predictions are mixed with
    ``spec.coefficients()``. At a fixed noise level eps, v and the score
    are affine in each other with the same offset for every prediction,
    and the coefficients sum to one, so mixing the v-predictions directly
    is the same as mixing noise estimates (or scores) and converting back.
    Only the ``spec.k + 1`` nested masks are queried, and levels with a
    zero coefficient are skipped.
    """
    z = np.asarray(z, dtype=np.float64)
    out = None
    for c, level in zip(spec.coefficients(), spec.levels):
        if c == 0.0:
            continue
        v = np.asarray(oracle(z, lam, NESTED_MASKS[level], signals), dtype=np.float64)
        term = v if c == 1.0 else c * v
        out = term if out is None else out + term
    if out is None:
        return np.zeros_like(z)
    return out


def multi_guided_eps(oracle, z, lam, spec: GuidanceSpec, signals):
    """Noise estimate of the guided prediction."""
    alpha, sigma = alpha_sigma(lam)
    return sigma * np.asarray(z) + alpha * multi_guided_v(oracle, z, lam, spec, signals)
