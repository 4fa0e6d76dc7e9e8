"""Dense linear-algebra primitives and special functions.

Everything here is pure and operates on plain numpy arrays. Matrix
factorizations are delegated to numpy.linalg; the brute-force column
searches (spark, restricted-isometry constants) are capped at desk scale
and raise :class:`BudgetError` beyond that.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

HERMITE_MAX_ORDER = 60
SPARK_MAX_COLS = 20
RIP_MAX_BLOCKS = 20
RIP_MAX_ORDER = 6

__all__ = [
    "BudgetError",
    "ThinSvd",
    "RipReport",
    "thin_svd",
    "pinv",
    "gram_projection_sq_norm",
    "split_gram_projection_sq_norm",
    "hermite_prob",
    "hermite_prob_scaled",
    "spark",
    "coherence",
    "rip_constant",
]


class BudgetError(ValueError):
    """Raised when a brute-force search exceeds its hard size cap."""


def default_rank_rtol(a):
    """Relative singular-value cutoff: max(rows, cols) * eps."""
    a = np.asarray(a, dtype=float)
    return max(a.shape) * np.finfo(float).eps


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD A = U @ diag(s) @ V.T with strictly positive s."""

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.singular_values.size

    def reconstruct(self):
        return (self.U * self.singular_values) @ self.V.T


def _as_matrix(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def thin_svd(a, rank_rtol=None):
    """Thin SVD keeping singular values above rank_rtol * s_max.

    Raises ValueError for the zero matrix (zero rank, no thin SVD).
    """
    a = _as_matrix(a)
    if rank_rtol is None:
        rank_rtol = default_rank_rtol(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("zero-rank matrix has no thin SVD")
    keep = s > rank_rtol * s[0]
    return ThinSvd(U=u[:, keep], singular_values=s[keep], V=vt[keep].T)


def pinv(a, rank_rtol=None):
    """Moore-Penrose pseudo-inverse via the thin SVD; pinv(0) = 0."""
    a = _as_matrix(a)
    if not a.any():
        return np.zeros((a.shape[1], a.shape[0]))
    f = thin_svd(a, rank_rtol)
    return (f.V / f.singular_values) @ f.U.T


def _check_symmetric(g, tol=1e-10, name="G"):
    g = _as_matrix(g)
    if g.shape[0] != g.shape[1]:
        raise ValueError(f"{name} must be square, got shape {g.shape}")
    scale = max(1.0, np.abs(g).max())
    if np.abs(g - g.T).max() > tol * scale:
        raise ValueError(f"{name} is not symmetric within {tol:g}")
    return 0.5 * (g + g.T)


def gram_projection_sq_norm(c, g, rank_rtol=None):
    """Squared norm of an orthogonal projection from Gram data: c.T @ pinv(G) @ c.

    c holds the inner products of the projected element with the spanning
    set, G the Gram matrix of the spanning set. Computed through the
    eigendecomposition of G so the result is nonnegative by construction.
    """
    c = np.asarray(c, dtype=float).ravel()
    g = _check_symmetric(g)
    if c.size != g.shape[0]:
        raise ValueError("c and G dimensions do not match")
    if c.size == 0:
        return 0.0
    if rank_rtol is None:
        rank_rtol = default_rank_rtol(g)
    w, v = np.linalg.eigh(g)
    cutoff = rank_rtol * max(w.max(initial=0.0), 0.0)
    keep = w > cutoff
    if not keep.any():
        return 0.0
    coeff = v.T @ c
    return float(np.sum(coeff[keep] ** 2 / w[keep]))


def split_gram_projection_sq_norm(c1, g1, c2, g2, rank_rtol=None):
    """Projection norm onto the span of two mutually orthogonal blocks."""
    return gram_projection_sq_norm(c1, g1, rank_rtol) + gram_projection_sq_norm(
        c2, g2, rank_rtol
    )


def hermite_prob(order, x):
    """Probabilists' Hermite polynomial He_l(x) by three-term recurrence.

    Accepts scalars or arrays; capped at order 60 (beyond that series
    coefficients of the form m_l**2 sigma**(2 l) / l! are required to be
    negligible anyway).
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order > HERMITE_MAX_ORDER:
        raise BudgetError(f"Hermite order {order} exceeds cap {HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    if order == 0:
        out = np.ones_like(x)
        return out if out.ndim else float(out)
    if order == 1:
        return x if x.ndim else float(x)
    pm2 = np.ones_like(x)
    pm1 = x
    for n in range(2, order + 1):
        pm2, pm1 = pm1, x * pm1 - (n - 1) * pm2
    return pm1 if np.ndim(pm1) else float(pm1)


def hermite_prob_scaled(order, x):
    """He_l(x) / sqrt(l!), computed by the scaled recurrence.

    The scaled values stay O(1) under the Gaussian weight for all orders,
    which keeps high-order expansion sums well conditioned.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order > HERMITE_MAX_ORDER:
        raise BudgetError(f"Hermite order {order} exceeds cap {HERMITE_MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    if order == 0:
        out = np.ones_like(x)
        return out if out.ndim else float(out)
    if order == 1:
        return x if x.ndim else float(x)
    pm2 = np.ones_like(x)
    pm1 = x
    for n in range(2, order + 1):
        pm2, pm1 = pm1, (x * pm1 - math.sqrt(n - 1) * pm2) / math.sqrt(n)
    return pm1 if np.ndim(pm1) else float(pm1)


def spark(a, rank_rtol=None):
    """Minimum number of linearly dependent columns; N for full column rank.

    Brute force over column subsets, capped at 20 columns.
    """
    a = _as_matrix(a)
    n = a.shape[1]
    if n > SPARK_MAX_COLS:
        raise BudgetError(f"spark brute force capped at {SPARK_MAX_COLS} columns")
    if rank_rtol is None:
        rank_rtol = default_rank_rtol(a)
    rank_full = 0 if not a.any() else thin_svd(a, rank_rtol).rank
    if rank_full == n:
        return n
    # rank-deficient: some subset of at most rank_full + 1 columns is dependent
    for k in range(1, rank_full + 2):
        for cols in itertools.combinations(range(n), k):
            sub = a[:, cols]
            if not sub.any():
                return k
            if thin_svd(sub, rank_rtol).rank < k:
                return k
    return n  # unreachable for rank-deficient input


def coherence(a):
    """Largest absolute inner product between two distinct columns."""
    a = _as_matrix(a)
    if a.shape[1] < 2:
        raise ValueError("coherence needs at least two columns")
    gram = np.abs(a.T @ a)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


@dataclass(frozen=True)
class RipReport:
    """Restricted-isometry constant with the convention it was computed under.

    convention is "matrix" (squared norms of K-column submatrices) or
    "factors" (singular values of K-block factor concatenations).
    rank_deficient flags a zero singular value, in which case delta is 1.
    """

    delta: float
    order: int
    convention: str
    rank_deficient: bool = False
    worst_subset: tuple = field(default=())


def rip_constant(factors, order, rank_rtol=None):
    """Smallest delta_K over all K-subsets, by exhaustive search.

    A list of factor blocks is handled under the singular-value convention
    (each block contributes its columns to the concatenation); a single
    matrix under the squared-norm convention on K-column submatrices.
    """
    if order < 1:
        raise ValueError("order must be positive")
    if order > RIP_MAX_ORDER:
        raise BudgetError(f"RIP order capped at {RIP_MAX_ORDER}")
    if isinstance(factors, (list, tuple)):
        blocks = [_as_matrix(b) for b in factors]
        convention = "factors"
        n = len(blocks)
    else:
        mat = _as_matrix(factors)
        convention = "matrix"
        n = mat.shape[1]
    if n > RIP_MAX_BLOCKS:
        raise BudgetError(f"RIP brute force capped at {RIP_MAX_BLOCKS} columns/blocks")
    if order > n:
        raise ValueError("RIP order exceeds number of columns/blocks")

    delta = 0.0
    worst = ()
    deficient = False
    for idx in itertools.combinations(range(n), order):
        if convention == "factors":
            sub = np.hstack([blocks[i] for i in idx])
            s = np.linalg.svd(sub, compute_uv=False)
            ncols = sub.shape[1]
            if s.size < ncols or s[-1] <= (rank_rtol or default_rank_rtol(sub)) * s[0]:
                return RipReport(1.0, order, convention, True, idx)
            dev = max(abs(s[0] - 1.0), abs(1.0 - s[-1]))
        else:
            sub = mat[:, idx]
            w = np.linalg.eigvalsh(sub.T @ sub)
            if w[0] <= 0.0:
                return RipReport(1.0, order, convention, True, idx)
            dev = max(abs(w[-1] - 1.0), abs(1.0 - w[0]))
        if dev > delta:
            delta = dev
            worst = idx
    return RipReport(float(delta), order, convention, deficient, worst)
