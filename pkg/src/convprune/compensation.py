"""Analytic weight compensation for pruned filters.

When filters are dropped, the 1x1 channel-mixing map that follows the
convolution absorbs their contribution: each retained filter's mixing row is
augmented by the reconstruction coefficients of every removed filter.  The
composite layer output then differs from the original only through the
reconstruction residuals, so a zero-residual selection prunes with no output
change at all.  Both orientations are provided: rows of the map for output-
channel pruning and columns for input-channel pruning.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import ConvLayer
from .selection import ConsistencyError, FilterMatrix, SelectionResult


@dataclass(frozen=True)
class CompensationUpdate:
    """Compensated 1x1 map plus the per-removed-filter residual vectors.

    g_prime: (|retained|, width) in the output orientation, (rows, |retained|)
        in the input orientation.
    epsilons: (n_removed, flat filter length); row r is the reconstruction
        residual of removed column removed[r].
    """

    retained: tuple[int, ...]
    removed: tuple[int, ...]
    g_prime: np.ndarray
    epsilons: np.ndarray


def _split(sel: SelectionResult, n: int):
    kept = list(sel.retained)
    if sel.coeffs.shape != (len(kept), n):
        raise ConsistencyError(
            f"selection coeffs {sel.coeffs.shape} do not match {len(kept)} retained "
            f"of {n} columns"
        )
    if kept and not (0 <= kept[0] and kept[-1] < n):
        raise ConsistencyError(f"retained indices {kept} out of range for n={n}")
    dropped = list(sel.removed)
    return kept, dropped


def _residuals(filters: FilterMatrix, sel: SelectionResult, dropped: list[int]):
    a = filters.matrix
    kept = list(sel.retained)
    return (a[:, dropped] - a[:, kept] @ sel.coeffs[:, dropped]).T


def compensate_output(
    g: np.ndarray, sel: SelectionResult, filters: FilterMatrix
) -> CompensationUpdate:
    """Fold removed output channels into the retained rows of the 1x1 map.

    Row l of the result is g[retained[l], :] plus, for every removed channel
    j, coeffs[l, j] * g[j, :].  The map keeps all of its columns, so the
    composite output width is unchanged.
    """
    g = np.asarray(g, dtype=np.float64)
    n = sel.coeffs.shape[1]
    if g.ndim != 2 or g.shape[0] != n:
        raise ConsistencyError(f"map has shape {g.shape}, expected {n} rows")
    kept, dropped = _split(sel, n)
    g_prime = g[kept, :] + sel.coeffs[:, dropped] @ g[dropped, :]
    return CompensationUpdate(
        tuple(kept), tuple(dropped), g_prime, _residuals(filters, sel, dropped)
    )


def compensate_input(
    g: np.ndarray, sel: SelectionResult, filters: FilterMatrix
) -> CompensationUpdate:
    """Column-wise mirror of compensate_output, for input-channel pruning."""
    g = np.asarray(g, dtype=np.float64)
    n = sel.coeffs.shape[1]
    if g.ndim != 2 or g.shape[1] != n:
        raise ConsistencyError(f"map has shape {g.shape}, expected {n} columns")
    kept, dropped = _split(sel, n)
    g_prime = g[:, kept] + g[:, dropped] @ sel.coeffs[:, dropped].T
    return CompensationUpdate(
        tuple(kept), tuple(dropped), g_prime, _residuals(filters, sel, dropped)
    )


def identity_comp(layer: ConvLayer) -> np.ndarray:
    """The 1x1 map a plain layer implicitly applies: the identity."""
    return np.eye(layer.out_channels)


def apply_pruning(
    layer: ConvLayer, sel: SelectionResult, update: CompensationUpdate
) -> ConvLayer:
    """New layer keeping only the selected filters, with the compensated map.

    The composite output width is preserved, so downstream layers are
    untouched.
    """
    if sel.retained != update.retained:
        raise ConsistencyError("selection and compensation disagree on retained set")
    if len(sel.retained) < 1:
        raise ConsistencyError("cannot prune away every filter")
    if sel.coeffs.shape[1] != layer.out_channels:
        raise ConsistencyError(
            f"selection covers {sel.coeffs.shape[1]} filters, layer has "
            f"{layer.out_channels}"
        )
    return ConvLayer(
        weights=layer.weights[list(sel.retained)].copy(),
        comp=update.g_prime.copy(),
        activation=layer.activation,
    )
