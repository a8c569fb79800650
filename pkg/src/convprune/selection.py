"""Filter subset selection by sparse approximation.

A layer's filter bank is flattened into a matrix whose columns are the
filters; selection keeps the subset of columns that reconstructs all columns
best in the least-squares sense.  Two selectors are provided: a greedy
forward pass (orthogonal matching pursuit over the filters themselves) and a
backward elimination pass that removes one filter at a time using a
closed-form expression for the exact error increase of each removal, with
the inverse Gram matrix downdated in place instead of refactorized.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import ConvLayer

# Scale factor for the diagonal regularizer added to every Gram matrix
# before inversion; keeps near-duplicate filter banks invertible without
# visibly perturbing well-conditioned solves.
RIDGE_SCALE = 1e-10

# Two elimination scores within this fraction of the mean column energy are
# treated as tied (ties go to the smallest original index).  Wide enough to
# absorb the ridge-induced slack on exact-duplicate columns.
TIE_SLACK = 1e-6


class SingularGramError(np.linalg.LinAlgError):
    """Gram matrix numerically singular even after ridge regularization."""


class ConsistencyError(ValueError):
    """Inputs that disagree with each other (shapes, index sets, blocks)."""


@dataclass(frozen=True)
class FilterMatrix:
    """Filters of one layer as matrix columns.

    direction "output": column j is filter j flattened over
    (in_channels, K, K), so the matrix is (K*K*m, n).  direction "input"
    mirrors this across the channel axes: column i collects the kernel slices
    that read input channel i, giving (K*K*n, m).
    """

    matrix: np.ndarray
    col_norms: np.ndarray
    direction: str = "output"

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]


def flatten_filters(layer: ConvLayer, direction: str = "output") -> FilterMatrix:
    """Flatten a layer's K x K weights into a column-per-filter matrix."""
    if direction == "output":
        mat = layer.weights.reshape(layer.out_channels, -1).T
    elif direction == "input":
        mat = layer.weights.transpose(1, 0, 2, 3).reshape(layer.in_channels, -1).T
    else:
        raise ValueError(f"unknown direction {direction!r}")
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=0)
    if np.any(norms <= 1e-300):
        dead = int(np.argmin(norms))
        raise ConsistencyError(f"filter column {dead} has zero norm")
    return FilterMatrix(mat, norms, direction)


def default_ridge(a: np.ndarray) -> float:
    """Regularizer used for every Gram inversion: scaled mean column energy."""
    n = a.shape[1]
    return RIDGE_SCALE * float(np.einsum("ij,ij->", a, a)) / n


def least_squares_coeffs(
    a_sub: np.ndarray, b: np.ndarray, ridge: float | None = None
) -> np.ndarray:
    """Solve min ||b_j - a_sub @ coeffs_j||^2 for every column of b.

    Returns coeffs of shape (a_sub cols, b cols) via the normal equations
    with a ridge term on the diagonal (default: scaled mean column energy of
    a_sub; pass 0.0 for the unregularized solve).
    """
    if a_sub.ndim != 2 or b.ndim != 2 or a_sub.shape[0] != b.shape[0]:
        raise ConsistencyError(
            f"incompatible shapes {a_sub.shape} and {b.shape} for least squares"
        )
    if ridge is None:
        ridge = default_ridge(a_sub)
    gram = a_sub.T @ a_sub
    gram[np.diag_indices_from(gram)] += ridge
    try:
        coeffs = np.linalg.solve(gram, a_sub.T @ b)
    except np.linalg.LinAlgError:
        raise SingularGramError(
            f"Gram matrix singular at ridge {ridge:.3e} "
            f"(condition ~ {np.linalg.cond(gram):.3e})"
        ) from None
    if not np.all(np.isfinite(coeffs)):
        raise SingularGramError(f"non-finite solve at ridge {ridge:.3e}")
    return coeffs


def reconstruction_error(
    a_sub: np.ndarray, b: np.ndarray, coeffs: np.ndarray
) -> tuple[float, np.ndarray]:
    """Total and per-column squared reconstruction error of b by a_sub @ coeffs."""
    resid = b - a_sub @ coeffs
    per_target = np.einsum("ij,ij->j", resid, resid)
    return float(per_target.sum()), per_target


def retained_count(n: int, beta: float) -> int:
    """Number of filters kept when pruning fraction beta of n: round((1-beta)n),
    clamped to [1, n]."""
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must be in [0, 1), got {beta}")
    t = int(np.floor((1.0 - beta) * n + 0.5))
    return min(max(t, 1), n)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of a filter-subset selection on one layer.

    retained: kept column indices, ascending.
    coeffs: (|retained|, n); column j reconstructs original filter j from the
        retained columns at their original (unnormalized) scale.
    residual_error / per_target_error: squared reconstruction error of all n
        original columns, total and per column.
    order: indices in the order the selector touched them (forward: order of
        addition; backward: order of removal).
    """

    retained: tuple[int, ...]
    coeffs: np.ndarray
    residual_error: float
    per_target_error: np.ndarray
    order: tuple[int, ...]

    @property
    def removed(self) -> tuple[int, ...]:
        kept = set(self.retained)
        n = self.coeffs.shape[1]
        return tuple(i for i in range(n) if i not in kept)


def _finish(a: np.ndarray, retained: list[int], order: list[int]) -> SelectionResult:
    kept = sorted(retained)
    coeffs = least_squares_coeffs(a[:, kept], a)
    total, per_target = reconstruction_error(a[:, kept], a, coeffs)
    return SelectionResult(tuple(kept), coeffs, total, per_target, tuple(order))


def fp_omp(filters: FilterMatrix, beta: float) -> SelectionResult:
    """Greedy forward filter selection.

    Works on unit-normalized filter columns: repeatedly adds the unselected
    column with the largest total absolute correlation against the current
    residuals of all columns, then refits every column on the selected set
    and updates the residuals.  Ties go to the smallest index.  The reported
    coefficients and errors are refit against the original unnormalized
    columns.
    """
    a = filters.matrix
    n = filters.n_cols
    t = retained_count(n, beta)
    ahat = a / filters.col_norms
    residual = ahat.copy()
    selected: list[int] = []
    scores = np.empty(n)
    while len(selected) < t:
        np.abs(ahat.T @ residual).sum(axis=1, out=scores)
        scores[selected] = -np.inf
        pick = int(np.argmax(scores))
        selected.append(pick)
        coeffs_hat = least_squares_coeffs(ahat[:, selected], ahat)
        residual = ahat - ahat[:, selected] @ coeffs_hat
    return _finish(a, selected, selected)


@dataclass(frozen=True)
class GramInverse:
    """Inverse of (A_S^T A_S + ridge I) for the current retained columns.

    gram_diag keeps the (ridged) Gram diagonal alongside the inverse so a
    caller can cheaply verify the pair still describes its columns.
    """

    matrix: np.ndarray
    ridge: float
    gram_diag: np.ndarray

    def blocks(self, k: int) -> tuple[np.ndarray, float]:
        """Off-diagonal column g_k and diagonal entry gamma_k for column k."""
        gamma = float(self.matrix[k, k])
        g = np.delete(self.matrix[:, k], k)
        return g, gamma


def gram_inverse(a_sub: np.ndarray, ridge: float | None = None) -> GramInverse:
    """Freshly inverted regularized Gram of the given columns."""
    if ridge is None:
        ridge = default_ridge(a_sub)
    gram = a_sub.T @ a_sub
    gram[np.diag_indices_from(gram)] += ridge
    diag = np.diag(gram).copy()
    try:
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        raise SingularGramError(
            f"Gram matrix singular at ridge {ridge:.3e} "
            f"(condition ~ {np.linalg.cond(gram):.3e})"
        ) from None
    return GramInverse(inv, ridge, diag)


def _check_blocks(a_sub: np.ndarray, blocks: GramInverse) -> None:
    # Spot-check one Gram entry: the stored diagonal must match the energy
    # of the first column.
    fresh = float(a_sub[:, 0] @ a_sub[:, 0]) + blocks.ridge
    if abs(fresh - blocks.gram_diag[0]) > 1e-8 * max(fresh, 1e-300):
        raise ConsistencyError("inverse Gram does not match the given columns")


def _inverse_drift(a_sub: np.ndarray, blocks: GramInverse) -> float:
    """Relative deviation of one row of Gram @ inverse from the identity.

    Measured against the accumulated product magnitude, so near-singular but
    accurately inverted Grams score near machine precision while a downdate
    that has lost accuracy scores high.
    """
    v = a_sub.T @ a_sub[:, 0]
    v[0] += blocks.ridge
    prod = v * blocks.matrix[:, 0]
    return abs(float(prod.sum()) - 1.0) / (float(np.abs(prod).sum()) + 1.0)


def elimination_scores(
    a_sub: np.ndarray, b: np.ndarray, blocks: GramInverse
) -> np.ndarray:
    """Exact squared-error increase from deleting each retained column.

    For column k with inverse-Gram column (g_k, gamma_k), the direction
    d_k = A_{-k} g_k + a_k gamma_k = A @ G[:, k] satisfies
    increase_k = sum_j (d_k . b_j)^2 / gamma_k; the stacked d_k^T b_j values
    are just G @ (A^T b), i.e. the current least-squares solution matrix.
    """
    if a_sub.shape[1] != blocks.matrix.shape[0]:
        raise ConsistencyError(
            f"{a_sub.shape[1]} columns but inverse Gram is {blocks.matrix.shape}"
        )
    _check_blocks(a_sub, blocks)
    gammas = np.diag(blocks.matrix)
    if np.any(gammas <= 0.0):
        raise SingularGramError("inverse Gram lost positive definiteness")
    proj = blocks.matrix @ (a_sub.T @ b)  # row k = d_k^T b over all targets
    return np.einsum("kj,kj->k", proj, proj) / gammas


def downdate_gram(blocks: GramInverse, k: int) -> GramInverse:
    """Inverse Gram after deleting retained column k, without refactorizing.

    Uses the block-inverse identity: drop row/column k from G and subtract
    g_k g_k^T / gamma_k.
    """
    size = blocks.matrix.shape[0]
    if size < 2:
        raise ConsistencyError("cannot downdate a 1x1 Gram inverse")
    if not 0 <= k < size:
        raise ConsistencyError(f"column {k} out of range for size {size}")
    g, gamma = blocks.blocks(k)
    if gamma <= 0.0:
        raise SingularGramError("inverse Gram lost positive definiteness")
    rest = np.delete(np.delete(blocks.matrix, k, axis=0), k, axis=1)
    return GramInverse(
        rest - np.outer(g, g) / gamma, blocks.ridge, np.delete(blocks.gram_diag, k)
    )


def _argmin_tied(scores: np.ndarray, scale: float) -> int:
    """Smallest index among scores within the tie window of the minimum."""
    tied = scores <= scores.min() + TIE_SLACK * scale
    return int(np.argmax(tied))


def fp_backward(
    filters: FilterMatrix, beta: float, fresh_gram: bool = False
) -> SelectionResult:
    """Backward filter elimination.

    Starts from all columns and repeatedly removes the one whose deletion
    increases the total reconstruction error (against all original columns,
    fixed) the least, per elimination_scores.  Ties go to the smallest
    original index.  After the first fresh inversion the Gram inverse is
    downdated each step; fresh_gram=True refactorizes every step instead.
    No normalization is applied at any point.
    """
    a = filters.matrix
    n = filters.n_cols
    t = retained_count(n, beta)
    scale = float(np.einsum("ij,ij->", a, a)) / n
    keep = list(range(n))
    order: list[int] = []
    blocks = gram_inverse(a) if len(keep) > t else None
    while len(keep) > t:
        a_sub = a[:, keep]
        scores = elimination_scores(a_sub, a, blocks)
        k = _argmin_tied(scores, scale)
        order.append(keep.pop(k))
        if len(keep) > t:
            if fresh_gram:
                blocks = gram_inverse(a[:, keep], ridge=blocks.ridge)
            else:
                blocks = downdate_gram(blocks, k)
                # Downdating a near-singular inverse can lose accuracy;
                # refactorize when the identity check drifts.
                if _inverse_drift(a[:, keep], blocks) > 1e-9:
                    blocks = gram_inverse(a[:, keep], ridge=blocks.ridge)
    return _finish(a, keep, order)
