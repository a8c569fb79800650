"""Parameter and FLOP accounting for networks of K x K + 1x1 layers.

One FLOP is one multiply-accumulate.  Same padding and stride 1 keep the
spatial size, so every layer runs at the input resolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import ConvLayer, DimensionError, Network


@dataclass(frozen=True)
class LayerStats:
    params: int
    flops: int
    out_channels: int
    width: int


@dataclass(frozen=True)
class ModelStats:
    params: int
    flops: int
    per_layer: tuple[LayerStats, ...]


def layer_stats(layer: ConvLayer, height: int, width: int) -> LayerStats:
    n, m, k = layer.out_channels, layer.in_channels, layer.kernel_size
    params = n * m * k * k
    if layer.comp is not None:
        params += layer.comp.shape[0] * layer.comp.shape[1]
    flops = height * width * params
    return LayerStats(params, flops, n, layer.width)


def count_stats(net: Network, input_shape: tuple[int, int, int]) -> ModelStats:
    """Totals and per-layer breakdown at the given (channels, H, W) input."""
    m0, h, w = (int(v) for v in input_shape)
    if min(m0, h, w) <= 0:
        raise DimensionError(f"bad input shape {input_shape}")
    if m0 != net.in_channels:
        raise DimensionError(
            f"network expects {net.in_channels} input channels, shape says {m0}"
        )
    per_layer = tuple(layer_stats(layer, h, w) for layer in net.layers)
    return ModelStats(
        params=int(sum(s.params for s in per_layer)),
        flops=int(sum(s.flops for s in per_layer)),
        per_layer=per_layer,
    )


def _drop_pct(before: int, after: int) -> float:
    if before <= 0:
        raise ValueError("reference count must be positive")
    return float(np.round(100.0 * (1.0 - after / before), 1))


@dataclass(frozen=True)
class ReductionReport:
    """Reduction percentages, rendered to 0.1% precision."""

    param_drop_pct: float
    flops_drop_pct: float


def reduction_report(before: ModelStats, after: ModelStats) -> ReductionReport:
    return ReductionReport(
        param_drop_pct=_drop_pct(before.params, after.params),
        flops_drop_pct=_drop_pct(before.flops, after.flops),
    )


def param_reduction(before: ModelStats, after: ModelStats) -> float:
    """Unrounded fractional parameter reduction (may be negative)."""
    return 1.0 - after.params / before.params
