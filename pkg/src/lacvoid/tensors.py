"""Dense float32 numeric substrate and the three L2-norm reductions.

Hidden states are rank-3 float32 arrays shaped (batch, length, depth),
stored row-major. Norm reductions accumulate in float64 and return
float32, so results are stable regardless of tensor size.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import NonFiniteError, ShapeError

DTYPE = np.float32


class NormGranularity(Enum):
    """Unit at which the activation norm (and halting) is computed.

    BATCH reduces the whole tensor to one scalar, EXAMPLE reduces each
    batch row, TOKEN reduces each (example, position) vector.
    """

    BATCH = "batch"
    EXAMPLE = "example"
    TOKEN = "token"


def as_f32(x) -> np.ndarray:
    """Coerce input to a contiguous float32 array."""
    return np.ascontiguousarray(x, dtype=DTYPE)


def require_hidden_state(h) -> np.ndarray:
    """Validate and coerce h to a rank-3 (batch, length, depth) float32 array."""
    arr = as_f32(h)
    if arr.ndim != 3:
        raise ShapeError(f"hidden state must have rank 3 (batch, length, depth), got shape {arr.shape}")
    return arr


def l2_norm(h, granularity: NormGranularity) -> np.ndarray:
    """L2 norm of a hidden state at the requested granularity.

    Args:
        h: rank-3 array (batch, length, depth); all values finite.
        granularity: BATCH -> shape (1,); EXAMPLE -> (batch, 1);
            TOKEN -> (batch, length, 1).

    Each output element is sqrt of the sum of squares over the axes the
    granularity reduces. Sums accumulate in float64.
    """
    arr = require_hidden_state(h)
    if not np.isfinite(arr).all():
        raise NonFiniteError("hidden state contains NaN or Inf")
    sq = np.square(arr, dtype=np.float64)
    if granularity is NormGranularity.BATCH:
        out = np.sqrt(sq.sum()).reshape(1)
    elif granularity is NormGranularity.EXAMPLE:
        out = np.sqrt(sq.sum(axis=(1, 2)))[:, None]
    elif granularity is NormGranularity.TOKEN:
        out = np.sqrt(sq.sum(axis=2))[:, :, None]
    else:
        raise TypeError(f"unknown granularity: {granularity!r}")
    return out.astype(DTYPE)


def matmul(a, b) -> np.ndarray:
    """Matrix product of the last two axes, float32.

    Leading axes broadcast; the inner extents must agree.
    """
    a = as_f32(a)
    b = as_f32(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} x {b.shape}")
    return np.matmul(a, b)


def layer_norm_pre(h, gain, eps: float = 1e-5) -> np.ndarray:
    """RMS-style normalization over the last axis, then elementwise gain.

    out = h / sqrt(mean(h^2) + eps) * gain. The mean accumulates in
    float64; eps keeps an all-zero vector at zero instead of blowing up.
    """
    arr = as_f32(h)
    g = as_f32(gain)
    if g.ndim != 1 or g.shape[0] != arr.shape[-1]:
        raise ShapeError(f"gain length {g.shape} does not match depth {arr.shape[-1]}")
    ms = np.mean(np.square(arr, dtype=np.float64), axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(ms + float(eps))
    return (arr * inv).astype(DTYPE) * g
