"""Progress measurement, dynamic thresholds, and per-unit void decisions.

A unit (whole batch, one example, or one token, per the norm
granularity) makes "progress" at each layer: the change in its
activation L2 norm. The running range of observed progress values sets
a dynamic threshold; a layer whose progress falls below the threshold
is a void for that unit.

Two threshold variants are kept as explicit configuration:

    original: lambda = alpha * |max(deltas) - min(deltas)|
    modified: lambda = alpha *  (max(deltas) - min(deltas))

max(deltas) >= min(deltas) always, so the two are numerically identical
as written; both are retained so configurations can name either form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ShapeError
from .tensors import DTYPE, NormGranularity

__all__ = [
    "ThresholdFormula",
    "SkipMode",
    "HaltPolicy",
    "ProgressHistory",
    "HaltDecision",
    "progress",
    "threshold",
    "decide",
    "offline_void_mask",
    "detect_voids_offline",
]


class ThresholdFormula(Enum):
    ORIGINAL = "original"
    MODIFIED = "modified"


class SkipMode(Enum):
    """What the executor does with a unit flagged void at a layer.

    OFF            plain forward pass, norms recorded only.
    DETECT         record void flags, never alter the stream.
    MASK_ZERO      zero the unit's activations after a void layer.
    SKIP_IDENTITY  the layer acts as identity for the unit (residual
                   stream preserved); the unit may reactivate later.
    HALT_FROZEN    first void latches the unit; its state is carried
                   unchanged through all remaining layers.
    """

    OFF = "off"
    DETECT = "detect"
    MASK_ZERO = "mask-zero"
    SKIP_IDENTITY = "skip-identity"
    HALT_FROZEN = "halt-frozen"


@dataclass(frozen=True)
class HaltPolicy:
    """Configuration for halting decisions. Immutable and shareable.

    alpha scales the threshold: larger alpha means a more decisive
    threshold and more voids. min_layers is the usage floor: layers
    1..min_layers are never flagged void, and layer 1 is always kept
    regardless (with a single observation the threshold is zero, so a
    negative first delta would otherwise void layer 1).
    """

    granularity: NormGranularity = NormGranularity.TOKEN
    alpha: float = 0.8
    formula: ThresholdFormula = ThresholdFormula.MODIFIED
    skip_mode: SkipMode = SkipMode.DETECT
    min_layers: int = 1

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.min_layers < 1:
            raise ValueError(f"min_layers must be >= 1, got {self.min_layers}")


class ProgressHistory:
    """Ordered per-unit progress measurements with running extrema.

    One instance tracks one forward pass of one unit grid (all units of
    a granularity at once, e.g. shape (batch, length) for per-token).
    Mutable, single-threaded by design; independent passes use
    independent histories.
    """

    def __init__(self) -> None:
        self._deltas: list[np.ndarray] = []
        self.running_max: np.ndarray | None = None
        self.running_min: np.ndarray | None = None
        self.latched: np.ndarray | None = None

    @property
    def step_count(self) -> int:
        return len(self._deltas)

    @property
    def deltas(self) -> tuple[np.ndarray, ...]:
        return tuple(self._deltas)

    @property
    def unit_shape(self) -> tuple[int, ...]:
        if not self._deltas:
            raise ValueError("history is empty")
        return self._deltas[0].shape

    def append(self, delta) -> None:
        d = np.asarray(delta, dtype=DTYPE)
        if self._deltas and d.shape != self._deltas[0].shape:
            raise ShapeError(f"delta shape {d.shape} does not match history unit shape {self._deltas[0].shape}")
        self._deltas.append(d)
        if self.running_max is None:
            self.running_max = d.copy()
            self.running_min = d.copy()
            self.latched = np.zeros(d.shape, dtype=bool)
        else:
            self.running_max = np.maximum(self.running_max, d)
            self.running_min = np.minimum(self.running_min, d)

    def stacked(self) -> np.ndarray:
        """All recorded deltas as one (step_count, *unit_shape) array."""
        if not self._deltas:
            raise ValueError("history is empty")
        return np.stack(self._deltas)


@dataclass
class HaltDecision:
    """Per-unit outcome of one layer's halting check."""

    void: np.ndarray
    threshold_value: np.ndarray
    delta_value: np.ndarray
    step_count: int


def progress(norm_prev, norm_curr) -> np.ndarray:
    """Per-unit progress: current norm minus previous norm. May be negative."""
    a = np.asarray(norm_prev, dtype=DTYPE)
    b = np.asarray(norm_curr, dtype=DTYPE)
    if a.shape != b.shape:
        raise ShapeError(f"norm shapes disagree: {a.shape} vs {b.shape}")
    return b - a


def _lambda_from_extrema(dmax: np.ndarray, dmin: np.ndarray, alpha: float, formula: ThresholdFormula) -> np.ndarray:
    rng = dmax - dmin
    if formula is ThresholdFormula.ORIGINAL:
        rng = np.abs(rng)
    return np.float32(alpha) * rng


def threshold(history: ProgressHistory, alpha: float, formula: ThresholdFormula) -> np.ndarray:
    """Dynamic per-unit threshold from the observed progress range."""
    if history.step_count == 0:
        raise ValueError("cannot compute a threshold from an empty history")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return _lambda_from_extrema(history.running_max, history.running_min, alpha, formula)


def _eligible(step_count: int, min_layers: int) -> bool:
    # Layer 1 is always kept; layers up to min_layers are the usage floor.
    return step_count >= 2 and step_count >= min_layers


def decide(history: ProgressHistory, delta, policy: HaltPolicy) -> HaltDecision:
    """Void decision for the layer whose delta was just appended.

    The history must already contain delta (the threshold range includes
    the current measurement). Under HALT_FROZEN, a unit's first void
    sets its latch on the history and every later decision reports it
    void regardless of progress.
    """
    d = np.asarray(delta, dtype=DTYPE)
    if history.step_count == 0:
        raise ValueError("decide requires the current delta to be appended to the history first")
    if d.shape != history.unit_shape:
        raise ShapeError(f"delta shape {d.shape} does not match history unit shape {history.unit_shape}")
    lam = threshold(history, policy.alpha, policy.formula)
    if _eligible(history.step_count, policy.min_layers):
        void = d < lam
    else:
        void = np.zeros(d.shape, dtype=bool)
    if policy.skip_mode is SkipMode.HALT_FROZEN:
        void = void | history.latched
        history.latched = void.copy()
    return HaltDecision(void=void, threshold_value=lam, delta_value=d, step_count=history.step_count)


def offline_void_mask(delta_sequence, alpha: float, formula: ThresholdFormula = ThresholdFormula.MODIFIED,
                      min_layers: int = 1) -> np.ndarray:
    """Boolean void mask over a recorded scalar progress sequence.

    Replays the stepwise decision exactly as the live path would have
    made it, so traces recorded without skipping can be re-thresholded
    at any alpha after the fact.
    """
    deltas = np.asarray(delta_sequence, dtype=DTYPE)
    if deltas.ndim != 1 or deltas.size == 0:
        raise ValueError(f"expected a non-empty 1-d delta sequence, got shape {deltas.shape}")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    mask = np.zeros(deltas.size, dtype=bool)
    dmax = dmin = deltas[0]
    for t, d in enumerate(deltas, start=1):
        dmax = max(dmax, d)
        dmin = min(dmin, d)
        lam = _lambda_from_extrema(np.float32(dmax), np.float32(dmin), alpha, formula)
        mask[t - 1] = _eligible(t, min_layers) and bool(d < lam)
    return mask


def detect_voids_offline(delta_sequence, alpha: float, formula: ThresholdFormula = ThresholdFormula.MODIFIED,
                         min_layers: int = 1) -> set[int]:
    """Set of void layer indices (1-based, matching step numbering)."""
    mask = offline_void_mask(delta_sequence, alpha, formula, min_layers)
    return {i + 1 for i in np.flatnonzero(mask)}
