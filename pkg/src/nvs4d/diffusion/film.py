"""Masked FiLM: feature-wise modulation that is the identity when masked."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput

# x + (-0.0) == x bit for bit, including x == +0.0; x + 0.0 would turn -0.0 into +0.0.
_IDENTITY_SHIFT = -0.0


@dataclass(frozen=True, eq=False)
class FilmParams:
    """Affine maps from an embedding to per-channel scale and shift.

    ``scale = embedding @ scale_weight + scale_bias`` (same for shift).
    """

    scale_weight: np.ndarray
    scale_bias: np.ndarray
    shift_weight: np.ndarray
    shift_bias: np.ndarray

    @property
    def embed_dim(self) -> int:
        return self.scale_weight.shape[0]

    @property
    def channels(self) -> int:
        return self.scale_weight.shape[1]

    @classmethod
    def random(cls, rng, embed_dim: int, channels: int) -> FilmParams:
        return cls(
            rng.normal(size=(embed_dim, channels)),
            1.0 + rng.normal(size=channels),
            rng.normal(size=(embed_dim, channels)),
            rng.normal(size=channels),
        )


def masked_film(h, signal, params: FilmParams, present=None):
    """Apply FiLM where the signal is present, the exact identity elsewhere.

    ``signal=None`` masks every row. ``present`` is an optional boolean
    array over the leading (batch) axes of ``h`` for per-example masking.
    Masked rows use scale one and a signed-zero shift, so they come back
    bit-identical to the input.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1:] != (params.channels,):
        raise InvalidInput(f"feature dim {h.shape[-1:]} != FiLM channels {params.channels}")
    batch = h.shape[:-1]
    if present is None:
        present = np.full(batch, signal is not None)
    present = np.broadcast_to(np.asarray(present, dtype=bool), batch)
    if signal is None:
        if np.any(present):
            raise InvalidInput("signal marked present but none given")
        scale = np.ones_like(h)
        shift = np.full_like(h, _IDENTITY_SHIFT)
        return scale * h + shift
    e = np.asarray(signal, dtype=np.float64)
    if e.shape[-1:] != (params.embed_dim,):
        raise InvalidInput(f"embedding dim {e.shape[-1:]} != {params.embed_dim}")
    scale = e @ params.scale_weight + params.scale_bias
    shift = e @ params.shift_weight + params.shift_bias
    scale, shift = np.broadcast_arrays(scale, shift)
    scale = np.broadcast_to(scale, h.shape)
    shift = np.broadcast_to(shift, h.shape)
    keep = present[..., None]
    scale = np.where(keep, scale, 1.0)
    shift = np.where(keep, shift, _IDENTITY_SHIFT)
    return scale * h + shift
