"""Shared builders for scripted and random layer stacks and records."""

from __future__ import annotations

import numpy as np
import pytest

from lacvoid import LayerStack, TraceRecord


def add_constant_stack(increments) -> LayerStack:
    """Stack whose layer t adds a constant to every element.

    With depth-1 hidden states starting positive and staying positive,
    each layer's progress equals its increment exactly.
    """
    return LayerStack([lambda h, c=np.float32(c): h + c for c in increments])


def random_affine_stack(seed: int, layer_count: int, depth: int) -> LayerStack:
    """Shape-preserving nonlinear layers with seeded weights."""
    rng = np.random.default_rng(seed)
    layers = []
    for _ in range(layer_count):
        w = rng.uniform(-0.5, 0.5, size=(depth, depth)).astype(np.float32)
        b = rng.uniform(-0.1, 0.1, size=depth).astype(np.float32)
        layers.append(lambda h, w=w, b=b: h + np.tanh(h @ w + b))
    return LayerStack(layers)


def compose_stack(stack: LayerStack, h0: np.ndarray) -> np.ndarray:
    """Independent oracle: fold the layers directly, no controller."""
    h = h0
    for layer in stack.layers:
        h = layer(h)
    return h


def make_record(seq="s0", token_index=0, phase="PP", token_id=65,
                flags=(True, True), norms=(1.0, 2.0), deltas=(1.0, 1.0),
                alpha=0.8, formula="modified", skip_mode="detect") -> TraceRecord:
    return TraceRecord(
        sequence_id=seq, token_index=token_index, phase=phase, token_id=token_id,
        layer_flags=list(flags), layer_norms=[float(x) for x in norms],
        layer_deltas=[float(x) for x in deltas], alpha=alpha, formula=formula, skip_mode=skip_mode,
    )


@pytest.fixture
def rng42():
    return np.random.default_rng(42)
