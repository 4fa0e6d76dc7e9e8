"""Observation models for sparse Gaussian estimation.

Four problem families share a common surface: a linear model y = H x + n
with S-sparse x (slm; ssnm is the identity-matrix special case) and a
zero-mean Gaussian model whose covariance sum_k x_k C_k + sigma^2 I is
parametrized by a nonnegative S-sparse x (spcm; sdpcm is the special case
where the C_k are orthogonal projectors onto orthogonal subspaces).

Each family exposes sampling, the log-density, and the two-point
correlation kernel R(x1, x2) anchored at x0 that drives every variance
bound downstream. Kernel evaluations outside the restricted parameter
domain raise :class:`DomainError` rather than returning NaN.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import numkit

PD_TOL = 1e-12
ORTHO_TOL = 1e-10

__all__ = [
    "DomainError",
    "SlmProblem",
    "SdpcmProblem",
    "SpcmProblem",
    "support",
    "require_sparse",
    "s_largest_entry",
    "slm_sample",
    "slm_logpdf",
    "slm_kernel",
    "sdpcm_cov",
    "spcm_cov",
    "sdpcm_sample",
    "spcm_sample",
    "sdpcm_kernel",
    "spcm_kernel",
    "restriction_holds",
    "dzero_contains",
    "beta_energies",
]


class DomainError(ValueError):
    """Kernel argument outside the restricted parameter domain."""


def support(x):
    """Indices of exactly-nonzero entries."""
    return np.flatnonzero(np.asarray(x))


def require_sparse(x, s, nonneg=False, name="x"):
    x = np.asarray(x, dtype=float)
    if np.count_nonzero(x) > s:
        raise ValueError(f"{name} has more than S={s} nonzero entries")
    if nonneg and (x < 0).any():
        raise ValueError(f"{name} must be entrywise nonnegative")
    return x


def s_largest_entry(x, s):
    """Value and index of the S-largest (in magnitude) entry of x.

    Ties and absent entries (fewer than S nonzeros) resolve by stable
    magnitude ordering, so the index is deterministic; the value is 0
    whenever x has fewer than S nonzeros.
    """
    x = np.asarray(x, dtype=float)
    order = np.argsort(-np.abs(x), kind="stable")
    j0 = int(order[s - 1])
    return float(x[j0]), j0


@dataclass(frozen=True)
class SlmProblem:
    """y = H x + n with S-sparse x and white Gaussian noise."""

    H: np.ndarray
    sigma2: float
    S: int

    def __post_init__(self):
        H = np.ascontiguousarray(np.asarray(self.H, dtype=float))
        object.__setattr__(self, "H", H)
        if H.ndim != 2:
            raise ValueError("H must be a matrix")
        if not np.isfinite(H).all():
            raise ValueError("H entries must be finite")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not 1 <= self.S <= self.N:
            raise ValueError("S must lie in [1, N]")
        if self.N <= numkit.SPARK_MAX_COLS and numkit.spark(H) <= self.S:
            raise ValueError("spark(H) must exceed S")

    @property
    def M(self):
        return self.H.shape[0]

    @property
    def N(self):
        return self.H.shape[1]

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @property
    def is_identity(self):
        return self.M == self.N and np.array_equal(self.H, np.eye(self.N))

    @classmethod
    def ssnm(cls, n, sigma2, s):
        """Sparse signal in noise: the H = I special case."""
        return cls(np.eye(n), sigma2, s)

    def validate_param(self, x):
        x = require_sparse(x, self.S)
        if x.size != self.N:
            raise ValueError("parameter length must be N")
        return x

    def noise_shape(self, size):
        return (size, self.M)

    def sample_given(self, x, z):
        """Observations from pre-drawn standard normals z of shape (B, M)."""
        return x @ self.H.T + self.sigma * z

    def sample(self, x, rng, size=None):
        x = self.validate_param(x)
        b = 1 if size is None else size
        y = self.sample_given(x, rng.standard_normal((b, self.M)))
        return y[0] if size is None else y


def slm_sample(p, x, rng, size=None):
    """Draw y = H x + n, n ~ N(0, sigma2 I)."""
    return p.sample(x, rng, size)


def slm_logpdf(p, y, x):
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    resid = y - p.H @ x
    return float(
        -0.5 * p.M * math.log(2.0 * math.pi * p.sigma2)
        - resid @ resid / (2.0 * p.sigma2)
    )


def slm_kernel(p, x0, x1, x2):
    """Two-point correlation kernel exp((x1-x0)' H'H (x2-x0) / sigma2)."""
    x0 = np.asarray(x0, dtype=float)
    d1 = p.H @ (np.asarray(x1, dtype=float) - x0)
    d2 = p.H @ (np.asarray(x2, dtype=float) - x0)
    return float(np.exp(d1 @ d2 / p.sigma2))


@dataclass(frozen=True)
class SdpcmProblem:
    """Covariance model whose basis matrices are orthogonal projectors.

    groups[k] is an M x r_k matrix with orthonormal columns; the
    concatenation of all groups must itself have orthonormal columns so
    the projectors C_k = U_k U_k' act on orthogonal subspaces.
    """

    groups: tuple
    sigma2: float
    S: int

    def __post_init__(self):
        groups = tuple(
            np.ascontiguousarray(np.asarray(g, dtype=float)) for g in self.groups
        )
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ValueError("need at least one group")
        m = groups[0].shape[0]
        if any(g.ndim != 2 or g.shape[0] != m or g.shape[1] < 1 for g in groups):
            raise ValueError("groups must be M x r_k matrices with r_k >= 1")
        stacked = np.hstack(groups)
        if stacked.shape[1] > m:
            raise ValueError("sum of group ranks exceeds M")
        gram = stacked.T @ stacked
        if np.abs(gram - np.eye(stacked.shape[1])).max() > ORTHO_TOL:
            raise ValueError("concatenated group columns must be orthonormal")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not 1 <= self.S <= len(groups):
            raise ValueError("S must lie in [1, N]")

    @property
    def M(self):
        return self.groups[0].shape[0]

    @property
    def N(self):
        return len(self.groups)

    @property
    def ranks(self):
        return np.array([g.shape[1] for g in self.groups])

    @property
    def total_rank(self):
        return int(self.ranks.sum())

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @classmethod
    def canonical(cls, n, sigma2, s, ranks=None):
        """Standard-basis groups: C_k built from consecutive unit vectors."""
        ranks = [1] * n if ranks is None else list(ranks)
        m = sum(ranks)
        eye = np.eye(m)
        groups, pos = [], 0
        for r in ranks:
            groups.append(eye[:, pos : pos + r])
            pos += r
        return cls(tuple(groups), sigma2, s)

    def basis_matrix(self, k):
        g = self.groups[k]
        return g @ g.T

    def validate_param(self, x):
        x = require_sparse(x, self.S, nonneg=True)
        if x.size != self.N:
            raise ValueError("parameter length must be N")
        return x

    def noise_shape(self, size):
        return (size, self.M + self.total_rank)

    def sample_given(self, x, z):
        """Observations from pre-drawn standard normals.

        z has shape (B, M + R): the first M columns drive the white-noise
        component, the rest the per-group latent signal amplitudes. Using
        the analytic eigenstructure keeps the draw exact and cheap.
        """
        y = self.sigma * z[:, : self.M]
        pos = self.M
        for k, g in enumerate(self.groups):
            r = g.shape[1]
            if x[k] > 0.0:
                y = y + math.sqrt(x[k]) * z[:, pos : pos + r] @ g.T
            pos += r
        return y

    def sample(self, x, rng, size=None):
        x = self.validate_param(x)
        b = 1 if size is None else size
        y = self.sample_given(x, rng.standard_normal(self.noise_shape(b)))
        return y[0] if size is None else y


@dataclass(frozen=True)
class SpcmProblem:
    """Covariance model with arbitrary symmetric psd basis matrices."""

    basis: tuple
    sigma2: float
    S: int

    def __post_init__(self):
        basis = tuple(
            np.ascontiguousarray(np.asarray(c, dtype=float)) for c in self.basis
        )
        object.__setattr__(self, "basis", basis)
        if not basis:
            raise ValueError("need at least one basis matrix")
        m = basis[0].shape[0]
        for c in basis:
            if c.shape != (m, m):
                raise ValueError("basis matrices must share shape M x M")
            scale = max(1.0, np.abs(c).max())
            if np.abs(c - c.T).max() > ORTHO_TOL * scale:
                raise ValueError("basis matrices must be symmetric")
            if np.linalg.eigvalsh(c)[0] < -ORTHO_TOL * scale:
                raise ValueError("basis matrices must be psd")
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not 1 <= self.S <= len(basis):
            raise ValueError("S must lie in [1, N]")

    @property
    def M(self):
        return self.basis[0].shape[0]

    @property
    def N(self):
        return len(self.basis)

    @property
    def ranks(self):
        return np.array([numkit.thin_svd(c).rank if c.any() else 0 for c in self.basis])

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    def factor_blocks(self):
        """Canonical factors H_k with C_k = H_k H_k' from the thin EVD."""
        blocks = []
        for c in self.basis:
            w, v = np.linalg.eigh(c)
            keep = w > numkit.default_rank_rtol(c) * max(w.max(initial=0.0), 0.0)
            blocks.append(v[:, keep] * np.sqrt(w[keep]))
        return blocks

    def basis_matrix(self, k):
        return self.basis[k]

    def validate_param(self, x):
        x = require_sparse(x, self.S, nonneg=True)
        if x.size != self.N:
            raise ValueError("parameter length must be N")
        return x

    def noise_shape(self, size):
        return (size, self.M)

    def sample_given(self, x, z):
        chol = np.linalg.cholesky(spcm_cov(self, x))
        return z @ chol.T

    def sample(self, x, rng, size=None):
        x = self.validate_param(x)
        b = 1 if size is None else size
        y = self.sample_given(x, rng.standard_normal((b, self.M)))
        return y[0] if size is None else y


def sdpcm_cov(p, x):
    """Observation covariance sum_k x_k C_k + sigma2 I for projector bases."""
    x = p.validate_param(x)
    cov = p.sigma2 * np.eye(p.M)
    for k, g in enumerate(p.groups):
        if x[k] != 0.0:
            cov += x[k] * (g @ g.T)
    return cov


def spcm_cov(p, x):
    x = p.validate_param(x)
    cov = p.sigma2 * np.eye(p.M)
    for k, c in enumerate(p.basis):
        if x[k] != 0.0:
            cov += x[k] * c
    return cov


def sdpcm_sample(p, x, rng, size=None):
    return p.sample(x, rng, size)


def spcm_sample(p, x, rng, size=None):
    return p.sample(x, rng, size)


def _cov_of(p, x):
    return sdpcm_cov(p, x) if isinstance(p, SdpcmProblem) else spcm_cov(p, x)


def restriction_holds(p, x0, x):
    """Whether 2 inv(C(x)) - inv(C(x0)) is positive definite.

    This is the admissibility condition for x relative to the anchor x0;
    kernel values exist exactly on parameter sets where it holds.
    """
    c0 = _cov_of(p, x0)
    cx = _cov_of(p, x)
    mat = 2.0 * np.linalg.inv(cx) - np.linalg.inv(c0)
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    return bool(w[0] > PD_TOL * max(abs(w[0]), abs(w[-1])))


def dzero_contains(p, x0, x):
    """Componentwise form of the restriction condition for projector bases."""
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    return bool(np.all(x < 2.0 * x0 + p.sigma2))


def sdpcm_kernel(p, x0, x1, x2):
    """Product-form correlation kernel of the projector-basis model.

    R(x1, x2) = prod_k (x0k+s2)^{r_k} / [(x0k+s2)^2 - (x1k-x0k)(x2k-x0k)]^{r_k/2},
    anchored at x0. Raises DomainError when any factor base is nonpositive.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    v0 = x0 + p.sigma2
    base = v0**2 - (x1 - x0) * (x2 - x0)
    if np.any(base <= 0.0):
        raise DomainError("kernel argument outside restricted domain")
    r = p.ranks
    return float(np.exp(np.sum(r * (np.log(v0) - 0.5 * np.log(base)))))


def spcm_kernel(p, x0, x1, x2):
    """Determinant-form correlation kernel for arbitrary psd bases.

    Evaluated through the symmetric matrix inv(C1) + inv(C2) - inv(C0),
    which must be positive definite for the defining integral to converge.
    """
    c0 = _cov_of(p, x0)
    c1 = _cov_of(p, x1)
    c2 = _cov_of(p, x2)
    inner = np.linalg.inv(c1) + np.linalg.inv(c2) - np.linalg.inv(c0)
    inner = 0.5 * (inner + inner.T)
    w = np.linalg.eigvalsh(inner)
    if w[0] <= PD_TOL * max(abs(w[0]), abs(w[-1])):
        raise DomainError("kernel argument outside restricted domain")
    logdet = (
        0.5 * np.linalg.slogdet(c0)[1]
        - 0.5 * np.linalg.slogdet(c1)[1]
        - 0.5 * np.linalg.slogdet(c2)[1]
        - 0.5 * np.sum(np.log(w))
    )
    return float(np.exp(logdet))


def beta_energies(p, y):
    """Per-group mean energies beta_k(y) = (1/r_k) sum_i (u_i' y)^2.

    Accepts a single observation or a batch with observations in rows;
    E{beta_k} = x_k + sigma2 and the unbiased energy estimator follows by
    subtracting sigma2.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    out = np.empty((yb.shape[0], p.N))
    for k, g in enumerate(p.groups):
        proj = yb @ g
        out[:, k] = np.mean(proj**2, axis=1)
    return out[0] if single else out


def gaussian_logpdf(p, y, x):
    """Log-density of the zero-mean covariance-model observation."""
    cov = _cov_of(p, x)
    y = np.asarray(y, dtype=float)
    sign, logdet = np.linalg.slogdet(cov)
    quad = y @ np.linalg.solve(cov, y)
    return float(-0.5 * (p.M * math.log(2.0 * math.pi) + logdet + quad))
