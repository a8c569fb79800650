"""Synthetic test networks with planted filter redundancy.

Each layer gets a base of independent Gaussian filters plus a planted set
of filters that are exact linear combinations of base filters, so a
fraction of every layer can be pruned with zero reconstruction residual.
The planted combination coefficients are returned as a manifest for oracle
tests.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .nets import ConvLayer, Network


def _layer_redundancies(redundancy, n_layers: int) -> list[float]:
    if isinstance(redundancy, (int, float)):
        values = [float(redundancy)] * n_layers
    else:
        values = [float(v) for v in redundancy]
        if len(values) != n_layers:
            raise ValueError(
                f"{len(values)} redundancy values for {n_layers} layers"
            )
    for v in values:
        if not 0.0 <= v < 1.0:
            raise ValueError(f"redundancy must be in [0, 1), got {v}")
    return values


def planted_network(
    n_layers: int,
    channels: int,
    kernel: int,
    redundancy: float | Sequence[float],
    seed: int,
    in_channels: int | None = None,
    activation: str = "identity",
) -> tuple[Network, dict]:
    """Build a network whose layers contain exactly-redundant filters.

    Every layer has `channels` filters; round(redundancy * channels) of them
    are linear combinations of 2-3 base filters.  Returns the network and a
    manifest recording, per layer, which filter indices are planted and
    their combination coefficients (keyed by base filter index).
    """
    if n_layers < 1 or channels < 2 or kernel < 1:
        raise ValueError("need n_layers >= 1, channels >= 2, kernel >= 1")
    reds = _layer_redundancies(redundancy, n_layers)
    rng = np.random.default_rng(seed)
    m0 = channels if in_channels is None else in_channels
    layers = []
    manifest_layers = []
    m = m0
    for c in range(n_layers):
        n = channels
        n_planted = int(np.floor(reds[c] * n + 0.5))
        n_planted = min(n_planted, n - 1)
        perm = rng.permutation(n)
        base_pos = sorted(int(i) for i in perm[: n - n_planted])
        planted_pos = sorted(int(i) for i in perm[n - n_planted :])
        weights = np.zeros((n, m, kernel, kernel))
        for i in base_pos:
            weights[i] = rng.standard_normal((m, kernel, kernel))
        planted_entries = []
        for p in planted_pos:
            if len(base_pos) == 1:
                k_mix = 1
            else:
                k_mix = int(rng.integers(2, min(3, len(base_pos)) + 1))
            sources = sorted(
                int(i) for i in rng.choice(base_pos, size=k_mix, replace=False)
            )
            coeffs = rng.uniform(0.5, 1.5, size=k_mix) * rng.choice(
                [-1.0, 1.0], size=k_mix
            )
            for src, coef in zip(sources, coeffs):
                weights[p] += coef * weights[src]
            if np.linalg.norm(weights[p]) < 1e-6:
                weights[p] += weights[sources[0]]  # avoid accidental cancellation
                coeffs[0] += 1.0
            planted_entries.append(
                {
                    "index": p,
                    "combo": {str(s): float(v) for s, v in zip(sources, coeffs)},
                }
            )
        layers.append(ConvLayer(weights=weights, activation=activation))
        manifest_layers.append({"base": base_pos, "planted": planted_entries})
        m = n
    manifest = {
        "seed": seed,
        "channels": channels,
        "kernel": kernel,
        "redundancy": reds,
        "layers": manifest_layers,
    }
    return Network(layers), manifest


def make_dataset(
    n_examples: int, channels: int, spatial: int, seed: int
) -> np.ndarray:
    """Gaussian calibration inputs of shape (n_examples, channels, spatial, spatial)."""
    if n_examples < 1 or channels < 1 or spatial < 1:
        raise ValueError("dataset dimensions must be positive")
    rng = np.random.default_rng([seed, 7])
    return rng.standard_normal((n_examples, channels, spatial, spatial))
