"""Estimators for the sparse linear and sparse covariance models.

Classical schemes (least squares, orthogonal matching pursuit, hard
thresholding, sparsity-constrained maximum likelihood) plus the
closed-form locally-minimum-variance constructions: the multiplicative
correction that turns any diagonal estimator into the LMV estimator for
its own bias at an anchor x0, its Hermite-series form, and the unbiased
LMV estimator for the rank-one-support covariance model.

All ties in top-k selections break toward the smaller index, everywhere.
Estimators accept a single observation (1-d) or a batch of observations
in rows (2-d) unless noted; orthogonal matching pursuit is per-row.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import numkit
from .models import beta_energies, s_largest_entry, support

__all__ = [
    "DiagonalEstimator",
    "HermiteSeries",
    "ls",
    "omp",
    "ht_ssnm",
    "ml_ssnm",
    "lmv_factor_t",
    "lmv_correction_h",
    "lmv_from_diagonal",
    "lmv_hermite",
    "sdpcm_unbiased",
    "sdpcm_ht",
    "sdpcm_ml",
    "sdpcm_ml_objective",
    "sdpcm_ml_bruteforce",
    "sdpcm_lmvu_s1",
]


def ls(p, y):
    """Least-squares estimate (H'H)^{-1} H'y; requires full column rank."""
    y = np.asarray(y, dtype=float)
    if np.linalg.matrix_rank(p.H) < p.N:
        raise ValueError("least squares needs a full-column-rank system matrix")
    xhat, *_ = np.linalg.lstsq(p.H, y.T if y.ndim == 2 else y, rcond=None)
    return xhat.T if y.ndim == 2 else xhat


def omp(p, y, iterations):
    """Orthogonal matching pursuit; single observation only.

    Greedy column selection by largest absolute correlation with the
    residual (ties toward the smaller index), least-squares re-solve on
    the selected set after every pick.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("omp takes a single observation")
    if iterations > min(p.M, p.N):
        raise ValueError("iterations must not exceed min(M, N)")
    selected = []
    resid = y.copy()
    coef = np.zeros(0)
    for _ in range(iterations):
        corr = np.abs(p.H.T @ resid)
        corr[selected] = -1.0
        selected.append(int(np.argmax(corr)))
        sub = p.H[:, selected]
        if np.linalg.matrix_rank(sub) < len(selected):
            raise ValueError("selected columns are rank deficient")
        coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
        resid = y - sub @ coef
    xhat = np.zeros(p.N)
    xhat[selected] = coef
    return xhat


def ht_ssnm(y, threshold):
    """Hard thresholding: zero every entry with |y_k| < threshold."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) >= threshold, y, 0.0)


def ml_ssnm(y, s):
    """Keep the s largest-magnitude entries, zero the rest."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    if s > yb.shape[1]:
        raise ValueError("s must not exceed the signal length")
    order = np.argsort(-np.abs(yb), axis=1, kind="stable")
    out = np.zeros_like(yb)
    rows = np.arange(yb.shape[0])[:, None]
    keep = order[:, :s]
    out[rows, keep] = yb[rows, keep]
    return out[0] if single else out


@dataclass(frozen=True)
class DiagonalEstimator:
    """Componentwise estimator acting on a single observation entry.

    kind "ls" passes the entry through; kind "ht" applies hard
    thresholding with the given threshold. HT with threshold 0 equals LS.
    """

    kind: str
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ls", "ht"):
            raise ValueError("kind must be 'ls' or 'ht'")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")

    @classmethod
    def least_squares(cls):
        return cls("ls")

    @classmethod
    def hard_threshold(cls, threshold):
        return cls("ht", float(threshold))

    def __call__(self, yk):
        yk = np.asarray(yk, dtype=float)
        if self.kind == "ls":
            return yk if yk.ndim else float(yk)
        out = np.where(np.abs(yk) >= self.threshold, yk, 0.0)
        return out if out.ndim else float(out)


def _correction_index_set(x0, k, s):
    """Deterministic index set I with |I| = S, k not in I, supp(x0)\\{k} in I.

    When k is outside a full support this is just supp(x0); otherwise the
    support (minus k) is padded with the smallest indices different from
    k. Padded entries of x0 are zero, so any admissible choice gives the
    same correction values.
    """
    x0 = np.asarray(x0, dtype=float)
    supp = [int(i) for i in support(x0) if i != k]
    for idx in range(x0.size):
        if len(supp) >= s:
            break
        if idx != k and idx not in supp:
            supp.append(idx)
    return sorted(supp[:s])


def _case_split(x0, k, s):
    """True for the shrinkage case |supp(x0) U {k}| = S + 1."""
    x0 = np.asarray(x0, dtype=float)
    return len(set(support(x0)) | {k}) == s + 1


def lmv_factor_t(x0, k, s, sigma):
    """Variance shrinkage factor of the anchored LMV construction.

    Equals 1 unless adjoining component k to supp(x0) would exceed the
    sparsity budget; in that case it is
    sum_j exp(-x_{i_j}^2/sigma^2) prod_{j'<j} [1 - exp(-x_{i_j'}^2/sigma^2)]
    over an index set I with |I| = S, k not in I, supp(x0)\\{k} in I,
    which always lies in (0, 1].
    """
    if not _case_split(x0, k, s):
        return 1.0
    x0 = np.asarray(x0, dtype=float)
    idx = _correction_index_set(x0, k, s)
    alpha = np.exp(-x0[idx] ** 2 / sigma**2)
    total = 0.0
    carry = 1.0
    for a in alpha:
        total += a * carry
        carry *= 1.0 - a
    return float(total)


def lmv_correction_h(y, x0, k, s, sigma):
    """Multiplicative LMV correction; independent of y_k.

    Returns exactly 1 outside the shrinkage case. Batched over leading
    axes of y.
    """
    y = np.asarray(y, dtype=float)
    if not _case_split(x0, k, s):
        return np.ones(y.shape[:-1]) if y.ndim > 1 else 1.0
    x0 = np.asarray(x0, dtype=float)
    idx = _correction_index_set(x0, k, s)
    total = np.zeros(y.shape[:-1])
    carry = np.ones(y.shape[:-1])
    for i in idx:
        a = np.exp(-(x0[i] ** 2 + 2.0 * y[..., i] * x0[i]) / (2.0 * sigma**2))
        total = total + a * carry
        carry = carry * (1.0 - a)
    return total if y.ndim > 1 else float(total)


def lmv_from_diagonal(base, y, x0, k, s, sigma):
    """LMV estimator at x0 for the bias of a diagonal base estimator.

    base(y_k) times the correction factor; outside the shrinkage case the
    base value is returned unchanged.
    """
    y = np.asarray(y, dtype=float)
    val = base(y[..., k])
    if not _case_split(x0, k, s):
        return val
    return val * lmv_correction_h(y, x0, k, s, sigma)


@dataclass(frozen=True)
class HermiteSeries:
    """Coefficients m_0..m_L of a prescribed mean expanded at a reference point.

    The mean is gamma(x) = sum_l m_l / l! (x_k - center)^l; the series is
    admissible iff sum_l m_l^2 sigma^(2l) / l! converges, which the
    truncated form tracks through validity_sum().
    """

    m: np.ndarray
    sigma: float
    center: float = 0.0

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        object.__setattr__(self, "m", m)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("coefficients must form a nonempty 1-d sequence")
        if m.size - 1 > numkit.HERMITE_MAX_ORDER:
            raise numkit.BudgetError(
                f"series order capped at {numkit.HERMITE_MAX_ORDER}"
            )
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not np.isfinite(self.terms()).all():
            raise ValueError("series terms must be finite")

    @classmethod
    def unbiased(cls, sigma, center=0.0):
        """Series of the identity mean gamma(x) = x_k."""
        return cls(np.array([center, 1.0]), sigma, center)

    @property
    def order(self):
        return self.m.size - 1

    def terms(self):
        """The summands m_l^2 sigma^(2l) / l!."""
        l = np.arange(self.m.size)
        fact = np.cumprod(np.concatenate([[1.0], np.arange(1, self.m.size)]))
        return self.m**2 * self.sigma ** (2 * l) / fact

    def validity_sum(self):
        return float(self.terms().sum())

    def truncated(self, rtol=1e-12):
        """Drop the tail once terms fall below rtol times the running sum."""
        terms = self.terms()
        running = np.cumsum(terms)
        keep = self.m.size
        while keep > 1 and terms[keep - 1] < rtol * running[keep - 1]:
            keep -= 1
        return HermiteSeries(self.m[:keep], self.sigma, self.center)


def lmv_hermite(series, y, x0, k, s):
    """LMV estimator from a Hermite-coefficient expansion of the mean.

    Outside the shrinkage case this is
    sum_l (m_l / l!) sigma^l He_l((y_k - center)/sigma); in the shrinkage
    case the expansion is centered at 0 (the anchor entry is zero there)
    and multiplied by the correction factor.
    """
    y = np.asarray(y, dtype=float)
    sigma = series.sigma
    shrink = _case_split(x0, k, s)
    center = 0.0 if shrink else series.center
    z = (y[..., k] - center) / sigma
    acc = np.zeros_like(np.asarray(z, dtype=float))
    # sum c_l He_l(z)/sqrt(l!) with c_l = m_l sigma^l / sqrt(l!); the scaled
    # polynomial values stay O(1) so high orders do not wash out the sum
    root_fact = 1.0
    for l, ml in enumerate(series.m):
        if l > 0:
            root_fact *= math.sqrt(l)
        if ml != 0.0:
            c = ml * sigma**l / root_fact
            acc = acc + c * numkit.hermite_prob_scaled(l, z)
    if shrink:
        acc = acc * lmv_correction_h(y, x0, k, s, sigma)
    return acc if np.ndim(acc) else float(acc)


def sdpcm_unbiased(p, y):
    """Unbiased energy estimator beta_k(y) - sigma2 per component."""
    return beta_energies(p, y) - p.sigma2


def sdpcm_ht(p, y, threshold):
    """Energy estimator with hard thresholding inside each group."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    out = np.empty((yb.shape[0], p.N))
    for k, g in enumerate(p.groups):
        proj = yb @ g
        proj = np.where(np.abs(proj) >= threshold, proj, 0.0)
        out[:, k] = np.mean(proj**2, axis=1)
    out -= p.sigma2
    return out[0] if single else out


def sdpcm_ml_objective(p, y, x):
    """Log-likelihood objective -sum_k r_k [beta_k/(x_k+s2) + log(x_k+s2)]."""
    beta = beta_energies(p, y)
    x = np.asarray(x, dtype=float)
    r = p.ranks
    return float(-np.sum(r * (beta / (x + p.sigma2) + np.log(x + p.sigma2))))


def _ml_scores(p, beta):
    """Support scores r_k [b/s2 - log(b/s2) - 1], -inf below the noise floor."""
    ratio = beta / p.sigma2
    scores = np.full_like(beta, -np.inf)
    mask = ratio >= 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = p.ranks * (ratio - np.log(ratio) - 1.0)
    scores[mask] = vals[mask]
    return scores, mask


def sdpcm_ml(p, y, s=None):
    """Sparsity-constrained maximum-likelihood estimate.

    Keeps beta_k - sigma2 on the (up to) s components above the noise
    floor with the largest scores r_k [beta_k/s2 - log(beta_k/s2) - 1],
    zeros everywhere else.
    """
    s = p.S if s is None else s
    if s > p.N:
        raise ValueError("s must not exceed N")
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    beta = beta_energies(p, yb)
    scores, mask = _ml_scores(p, beta)
    order = np.argsort(-scores, axis=1, kind="stable")
    out = np.zeros_like(beta)
    rows = np.arange(beta.shape[0])[:, None]
    chosen = order[:, :s]
    keep = mask[rows, chosen]
    vals = beta[rows, chosen] - p.sigma2
    out[rows, chosen] = np.where(keep, vals, 0.0)
    return out[0] if single else out


def sdpcm_ml_bruteforce(p, y, s=None):
    """Exhaustive maximization of the likelihood over supports of size <= s.

    Per support the interior optimum is x_k = max(beta_k - sigma2, 0).
    Returns (maximizer, objective value); desk-scale budget N <= 12,
    s <= 4. This is the oracle the closed-form selection is checked
    against.
    """
    s = p.S if s is None else s
    if p.N > 12 or s > 4:
        raise numkit.BudgetError("brute-force ML capped at N <= 12, S <= 4")
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("brute-force ML takes a single observation")
    beta = beta_energies(p, y)
    best_x = np.zeros(p.N)
    best_val = sdpcm_ml_objective(p, y, best_x)
    for size in range(1, s + 1):
        for supp in itertools.combinations(range(p.N), size):
            x = np.zeros(p.N)
            for k in supp:
                x[k] = max(beta[k] - p.sigma2, 0.0)
            val = sdpcm_ml_objective(p, y, x)
            if val > best_val:
                best_val = val
                best_x = x
    return best_x, best_val


def sdpcm_lmvu_s1(p, y, x0, k):
    """Unbiased LMV estimator of x_k for sparsity degree 1.

    Equals the plain energy estimator on the anchored component; off the
    anchor it is reweighted by alpha(y) = a exp(-r_j0 b beta_j0(y)) with
    a = [(2 xi0 + s2)/(xi0 + s2)]^{r_j0/2}, b = (1/s2 - 1/(xi0+s2))/2,
    where (xi0, j0) identify the single nonzero entry of x0.
    """
    if p.S != 1:
        raise ValueError("closed-form LMVU estimator requires S = 1")
    x0 = p.validate_param(x0)
    beta = beta_energies(p, y)
    xi0, j0 = s_largest_entry(x0, 1)
    if k == j0:
        return beta[..., k] - p.sigma2
    s2 = p.sigma2
    r_j0 = int(p.ranks[j0])
    a = ((2.0 * xi0 + s2) / (xi0 + s2)) ** (r_j0 / 2.0)
    b = 0.5 * (1.0 / s2 - 1.0 / (xi0 + s2))
    alpha = a * np.exp(-r_j0 * b * beta[..., j0])
    return alpha * (beta[..., k] - s2)
