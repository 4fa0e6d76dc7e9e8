"""Variance lower bounds for the sparse models, on a shared projection engine.

Every bound is the squared norm of an orthogonal projection of the
prescribed mean function onto a finite-dimensional subspace of the
model's correlation-kernel Hilbert space, minus the squared mean at the
anchor. The generic engines (projection_bound, generic_hcrb,
generic_bhattacharyya) expose that machinery directly; the named bounds
evaluate closed forms derived from it for the linear and covariance
models.

All bounds return a :class:`BoundReport` carrying the value, the
component it applies to, and enough parameters to re-run them
deterministically. Values that come out negative within -1e-9 are floored
to 0 and flagged; anything more negative raises
:class:`NumericalConsistencyError`, since it indicates inconsistent mean
data.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from . import numkit
from .models import s_largest_entry, support
from .estimators import HermiteSeries, lmv_factor_t
from .meanmc import _diag_quad

FLOOR_TOL = 1e-9
Q_CROSS_CHECK_RTOL = 1e-6
MAX_TEST_POINTS = 16
MAX_DERIV_ORDER = 4
FD_STEP = 1e-3

__all__ = [
    "NumericalConsistencyError",
    "BoundReport",
    "MeanModel",
    "projection_bound",
    "crb_slm",
    "hcrb_ssnm",
    "shifted_anchor",
    "rkhs_bound_a",
    "rkhs_bound_b",
    "rip_bound_cs",
    "ssnm_barankin",
    "ssnm_barankin_from_estimator",
    "ssnm_barankin_numeric",
    "ssnm_bound_for_transformed",
    "hermite_coeffs_of_diagonal",
    "generic_hcrb",
    "generic_bhattacharyya",
    "spcm_fisher_bound",
    "spcm_rip_bound",
    "sdpcm_projection_bound",
    "sdpcm_first_order_bound",
    "spectrum_bound",
    "sum_components",
]


class NumericalConsistencyError(ArithmeticError):
    """A mandatory numerical cross-check failed or a bound is badly negative."""


@dataclass(frozen=True)
class BoundReport:
    """A single evaluated lower bound: kind, value, component, inputs used."""

    kind: str
    value: float
    component: object = "sum"
    params: dict = field(default_factory=dict)


def _finalize(kind, value, component, params):
    value = float(value)
    if value < -FLOOR_TOL:
        raise NumericalConsistencyError(
            f"{kind} evaluated to {value:.3e}; mean data is inconsistent"
        )
    if value < 0.0:
        params = dict(params)
        params["floored"] = True
        value = 0.0
    if not math.isfinite(value):
        raise NumericalConsistencyError(f"{kind} evaluated to a non-finite value")
    return BoundReport(kind=kind, value=value, component=component, params=params)


@dataclass(frozen=True)
class MeanModel:
    """Local data of a prescribed mean function gamma.

    gamma0 is gamma(x0); grad holds the partial derivatives of gamma at
    `anchor` (x0 itself when anchor is None); gamma_anchor is
    gamma(anchor). value_fn optionally evaluates gamma at arbitrary
    points for test-point bounds.
    """

    gamma0: float
    grad: np.ndarray
    anchor: np.ndarray = None
    gamma_anchor: float = None
    value_fn: object = None

    def __post_init__(self):
        grad = np.asarray(self.grad, dtype=float)
        object.__setattr__(self, "grad", grad)
        if self.anchor is not None:
            object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float))
        if self.gamma_anchor is None:
            object.__setattr__(self, "gamma_anchor", float(self.gamma0))

    @classmethod
    def unbiased(cls, k, x0, anchor=None):
        """Mean data of gamma(x) = x_k."""
        x0 = np.asarray(x0, dtype=float)
        grad = np.zeros(x0.size)
        grad[k] = 1.0
        gamma_anchor = None if anchor is None else float(np.asarray(anchor)[k])
        return cls(
            gamma0=float(x0[k]),
            grad=grad,
            anchor=anchor,
            gamma_anchor=gamma_anchor,
            value_fn=lambda x, _k=k: float(np.asarray(x)[_k]),
        )


def projection_bound(c, gram, gamma0, kind="projection", component="sum", params=None):
    """Lower bound from projection data: c' pinv(G) c - gamma0^2."""
    value = numkit.gram_projection_sq_norm(c, gram) - float(gamma0) ** 2
    params = dict(params or {})
    params.setdefault("gamma0", float(gamma0))
    return _finalize(kind, value, component, params)


def crb_slm(p, x0, mean, component="component"):
    """Fisher-information bound for the linear model.

    sigma2 b' pinv(H'H) b with b the mean gradient at x0; on a full
    support the gradient and the system columns restrict to supp(x0).
    """
    x0 = p.validate_param(x0)
    b = np.asarray(mean.grad, dtype=float)
    supp = support(x0)
    if supp.size == p.S:
        h = p.H[:, supp]
        b = b[supp]
        restricted = True
    else:
        h = p.H
        restricted = False
    value = p.sigma2 * numkit.gram_projection_sq_norm(b, h.T @ h)
    return _finalize(
        "crb_slm",
        value,
        component,
        {"restricted": restricted, "x0": x0.tolist()},
    )


def hcrb_ssnm(p, x0, k):
    """Closed-form two-case test-point bound for unbiased H = I estimation.

    sigma2 when component k fits inside the sparsity budget at x0;
    otherwise sigma2 (N-S-1)/(N-S) exp(-xi0^2/sigma2) with xi0 the
    S-largest entry magnitude of x0.
    """
    if not p.is_identity:
        raise ValueError("closed-form bound requires the identity system matrix")
    x0 = p.validate_param(x0)
    shrink = len(set(support(x0)) | {k}) == p.S + 1
    if not shrink:
        value = p.sigma2
        case = "direct"
    else:
        xi0, _ = s_largest_entry(x0, p.S)
        value = (
            p.sigma2
            * (p.N - p.S - 1)
            / (p.N - p.S)
            * math.exp(-(xi0**2) / p.sigma2)
        )
        case = "shrink"
    return _finalize("hcrb_ssnm", value, k, {"case": case, "x0": x0.tolist()})


def shifted_anchor(p, x0, indices):
    """The unique vector supported on `indices` whose image under H matches
    the orthogonal projection of H x0 onto the span of those columns."""
    x0 = np.asarray(x0, dtype=float)
    idx = sorted(int(i) for i in indices)
    hk = p.H[:, idx]
    coef, *_ = np.linalg.lstsq(hk, p.H @ x0, rcond=None)
    anchor = np.zeros(p.N)
    anchor[idx] = coef
    return anchor


def _rkhs_common(p, x0, indices, mean):
    x0 = p.validate_param(x0)
    idx = sorted(int(i) for i in indices)
    if not 1 <= len(idx) <= p.S:
        raise ValueError("index set size must lie in [1, S]")
    hk = p.H[:, idx]
    gram = hk.T @ hk
    if np.linalg.matrix_rank(hk) < len(idx):
        raise ValueError("selected columns are rank deficient")
    anchor = shifted_anchor(p, x0, idx)
    if mean.anchor is not None and not np.allclose(mean.anchor, anchor, atol=1e-8):
        raise ValueError("mean gradient anchor does not match the shifted anchor")
    resid = p.H @ (x0 - anchor)
    expo = math.exp(-(resid @ resid) / p.sigma2)
    r = np.asarray(mean.grad, dtype=float)[idx]
    quad = p.sigma2 * r @ np.linalg.solve(gram, r)
    return idx, anchor, expo, quad


def rkhs_bound_a(p, x0, indices, mean, component="component"):
    """Anchored projection bound with the normalization functional included.

    exp(-||(I-P_K) H x0||^2 / s2) [s2 r' (H_K'H_K)^{-1} r + gamma(anchor)^2]
    - gamma(x0)^2, with r the mean gradient at the shifted anchor
    restricted to the index set.
    """
    idx, anchor, expo, quad = _rkhs_common(p, x0, indices, mean)
    value = expo * (quad + mean.gamma_anchor**2) - mean.gamma0**2
    return _finalize(
        "rkhs_bound_a",
        value,
        component,
        {"indices": idx, "anchor": anchor.tolist(), "exp_factor": expo},
    )


def rkhs_bound_b(p, x0, indices, mean, component="component"):
    """Anchored projection bound without the mean-value terms:
    exp(-||(I-P_K) H x0||^2 / s2) s2 r' (H_K'H_K)^{-1} r."""
    idx, anchor, expo, quad = _rkhs_common(p, x0, indices, mean)
    return _finalize(
        "rkhs_bound_b",
        expo * quad,
        component,
        {"indices": idx, "anchor": anchor.tolist(), "exp_factor": expo},
    )


def rip_bound_cs(p, x0, indices, mean, delta_s, component="component"):
    """Measurement-matrix-agnostic relaxation of the anchored bound.

    Replaces the projection residual with the restricted-isometry upper
    estimate: exp(-(1+delta_S) ||x0 off the index set||^2 / s2)
    s2 r' (H_K'H_K)^{-1} r. Never exceeds rkhs_bound_b for the same set.
    """
    if not 0.0 <= delta_s < 1.0:
        raise ValueError("delta_S must lie in [0, 1)")
    idx, anchor, _, quad = _rkhs_common(p, x0, indices, mean)
    x0 = np.asarray(x0, dtype=float)
    off = [i for i in support(x0) if i not in idx]
    tail = float(np.sum(x0[off] ** 2))
    value = math.exp(-(1.0 + delta_s) * tail / p.sigma2) * quad
    return _finalize(
        "rip_bound_cs",
        value,
        component,
        {"indices": idx, "delta_s": float(delta_s), "tail_norm_sq": tail},
    )


def ssnm_barankin(series, x0, k, s):
    """Exact minimum achievable variance for a diagonal mean, H = I.

    t(x0) sum_l m_l^2 sigma^(2l) / l!  -  gamma(x0)^2, with the shrinkage
    factor t from the anchored LMV construction. The series must be
    centered at x0_k so that gamma(x0) = m_0.
    """
    x0 = np.asarray(x0, dtype=float)
    if not math.isfinite(series.validity_sum()):
        raise ValueError("series validity sum diverges")
    if abs(series.center - x0[k]) > 1e-12 * max(1.0, abs(x0[k])):
        raise ValueError("series must be centered at the anchored component")
    t = lmv_factor_t(x0, k, s, series.sigma)
    gamma0 = float(series.m[0])
    value = t * series.validity_sum() - gamma0**2
    return _finalize(
        "ssnm_barankin",
        value,
        k,
        {"t_factor": t, "order": series.order, "gamma0": gamma0},
    )


def ssnm_barankin_from_estimator(base_var_at_x0, gamma0, x0, k, s, sigma):
    """Minimum achievable variance from the base estimator's own moments:
    v t + (t - 1) gamma(x0)^2. Reduces to v when component k fits the
    sparsity budget (the base estimator is already locally optimal)."""
    t = lmv_factor_t(x0, k, s, sigma)
    value = base_var_at_x0 * t + (t - 1.0) * float(gamma0) ** 2
    return _finalize(
        "ssnm_barankin_from_estimator",
        value,
        k,
        {"t_factor": t, "base_var": float(base_var_at_x0), "gamma0": float(gamma0)},
    )


def ssnm_bound_for_transformed(series, x0, k, s, system_matrix=None):
    """Variance bound for observations of the form y' = H (x + n).

    Any estimator that sees only the transformed observation obeys the
    untransformed bound with its own mean data, so this delegates to
    ssnm_barankin and records the transformation.
    """
    report = ssnm_barankin(series, x0, k, s)
    params = dict(report.params)
    params["pre_measurement_noise"] = True
    if system_matrix is not None:
        params["system_shape"] = list(np.asarray(system_matrix).shape)
    return BoundReport("ssnm_barankin_transformed", report.value, k, params)


def hermite_coeffs_of_diagonal(base, x0k, sigma, order):
    """Hermite expansion coefficients of a diagonal estimator's mean.

    m_l = sigma^{-l} E{ base(y) He_l((y - x0k)/sigma) } under
    y ~ N(x0k, sigma^2), by adaptive quadrature split at the thresholds.
    """
    if order > numkit.HERMITE_MAX_ORDER:
        raise numkit.BudgetError(
            f"expansion order capped at {numkit.HERMITE_MAX_ORDER}"
        )
    m = np.empty(order + 1)
    root_fact = 1.0
    for l in range(order + 1):
        if l > 0:
            root_fact *= math.sqrt(l)
        # scaled-polynomial integrand keeps the quadrature well conditioned
        val = _diag_quad(
            lambda y, _l=l: base(y) * numkit.hermite_prob_scaled(_l, (y - x0k) / sigma),
            base,
            x0k,
            sigma,
        )
        m[l] = val * root_fact / sigma**l
    return HermiteSeries(m, sigma, center=float(x0k))


# --------------------------------------------------------------------------
# numerical differentiation backends
# --------------------------------------------------------------------------


def _cheb_derivative_1d(fn, t0, order, radius, degree=None):
    """order-th derivative at t0 via a local Chebyshev fit of fn."""
    degree = order + 8 if degree is None else degree
    nodes = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    ts = t0 + radius * nodes
    vals = np.array([fn(t) for t in ts])
    coeffs = _cheb.chebfit(nodes, vals, degree)
    der = _cheb.chebder(coeffs, order)
    return float(_cheb.chebval(0.0, der)) / radius**order


def _cheb_nested_partial(fn, point, orders, radii):
    """Mixed partial of fn at point via nested local Chebyshev fits."""
    point = np.asarray(point, dtype=float)
    active = [i for i in range(point.size) if orders[i] > 0]
    if not active:
        return float(fn(point))
    i = active[0]
    rest = np.array(orders)
    rest[i] = 0

    def slice_fn(t):
        xt = point.copy()
        xt[i] = t
        return _cheb_nested_partial(fn, xt, rest, radii)

    return _cheb_derivative_1d(slice_fn, point[i], int(orders[i]), radii[i])


def _central_derivative_1d(fn, t0, order, h):
    """Classical (order+1)-point central binomial stencil."""
    total = 0.0
    for i in range(order + 1):
        total += (-1.0) ** i * math.comb(order, i) * fn(
            t0 + (order / 2.0 - i) * h
        )
    return total / h**order


def _central_nested_partial(fn, point, orders, step):
    point = np.asarray(point, dtype=float)
    active = [i for i in range(point.size) if orders[i] > 0]
    if not active:
        return float(fn(point))
    i = active[0]
    rest = np.array(orders)
    rest[i] = 0

    def slice_fn(t):
        xt = point.copy()
        xt[i] = t
        return _central_nested_partial(fn, xt, rest, step)

    h = step * max(1.0, abs(point[i]))
    return _central_derivative_1d(slice_fn, point[i], int(orders[i]), h)


def _sparse_multi_indices(n, s, max_total):
    """All multi-indices in Z_+^n with at most s nonzero entries and
    total order between 1 and max_total, in lexicographic order."""
    out = []

    def rec(prefix, remaining, nnz):
        if len(prefix) == n:
            if any(prefix):
                out.append(np.array(prefix))
            return
        for v in range(0, remaining + 1):
            if v > 0 and nnz + 1 > s:
                break
            rec(prefix + [v], remaining - v, nnz + (v > 0))

    rec([], max_total, 0)
    return out


def ssnm_barankin_numeric(mean_fn, x0, s, sigma, order, method="cheb"):
    """Series-coefficient approximation of the minimum achievable variance.

    Expands the weighted mean F(x) = gamma(sigma x) nu_x0(x), with
    nu_x0(x) = exp(-||x0||^2/(2 sigma^2) + x'x0/sigma), into the sparse
    orthonormal monomial basis: a[p] = (1/sqrt(p!)) d^p F(0) over sparse
    multi-indices with |p| <= order, and returns sum_p a[p]^2 - gamma(x0)^2
    (a lower approximation of the exact value).

    Budget: length <= 3, s <= 2, order <= 6. The partial derivatives use
    local Chebyshev fits by default; method="central" switches to central
    differences with one Richardson level at base step 1e-3, which loses
    accuracy beyond second order.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if n > 3 or s > 2 or order > 6:
        raise numkit.BudgetError(
            "series-coefficient search capped at length 3, sparsity 2, order 6"
        )
    norm_sq = float(x0 @ x0)

    def weighted(xs):
        xs = np.asarray(xs, dtype=float)
        nu = math.exp(-norm_sq / (2.0 * sigma**2) + float(xs @ x0) / sigma)
        return float(mean_fn(sigma * xs)) * nu

    gamma0 = float(mean_fn(x0))
    total = weighted(np.zeros(n)) ** 2  # p = 0 term
    radii = np.full(n, 0.5)
    for p in _sparse_multi_indices(n, s, order):
        if method == "cheb":
            der = _cheb_nested_partial(weighted, np.zeros(n), p, radii)
        elif method == "central":
            d1 = _central_nested_partial(weighted, np.zeros(n), p, FD_STEP)
            d2 = _central_nested_partial(weighted, np.zeros(n), p, FD_STEP / 2.0)
            der = (4.0 * d2 - d1) / 3.0
        else:
            raise ValueError("method must be 'cheb' or 'central'")
        fact = math.prod(math.factorial(int(v)) for v in p)
        total += der**2 / fact
    value = total - gamma0**2
    return _finalize(
        "ssnm_barankin_numeric",
        value,
        "component",
        {"order": int(order), "method": method, "gamma0": gamma0},
    )


def generic_hcrb(kernel, test_points, mean_values, gamma0, component="component"):
    """Test-point bound m' pinv(V) m from kernel and mean evaluations.

    m_l = gamma(x_l) - gamma(x0) and V_{l,l'} = R(x_l, x_l') - 1; the
    kernel callable is already anchored at x0.
    """
    pts = [np.asarray(x, dtype=float) for x in test_points]
    if len(pts) > MAX_TEST_POINTS:
        raise numkit.BudgetError(f"test-point count capped at {MAX_TEST_POINTS}")
    m = np.asarray(mean_values, dtype=float) - float(gamma0)
    if m.size != len(pts):
        raise ValueError("one mean value per test point required")
    v = np.empty((len(pts), len(pts)))
    for i, xi in enumerate(pts):
        for j in range(i, len(pts)):
            v[i, j] = v[j, i] = kernel(xi, pts[j]) - 1.0
    value = numkit.gram_projection_sq_norm(m, v)
    return _finalize("generic_hcrb", value, component, {"test_points": len(pts)})


def generic_bhattacharyya(kernel, x0, multi_indices, mean_derivs, step=FD_STEP, component="component"):
    """Derivative bound b' pinv(B) b with B from kernel mixed partials.

    B_{k,l} is the mixed partial of R(x1, x2) of orders p_k in x1 and p_l
    in x2, evaluated at (x0, x0) by nested central differences; b holds
    the matching mean derivatives at x0. Total order per index capped at 4.
    """
    x0 = np.asarray(x0, dtype=float)
    ps = [np.asarray(p, dtype=int) for p in multi_indices]
    if len(ps) > MAX_TEST_POINTS:
        raise numkit.BudgetError(f"index count capped at {MAX_TEST_POINTS}")
    if any(p.sum() > MAX_DERIV_ORDER for p in ps):
        raise numkit.BudgetError(f"derivative order capped at {MAX_DERIV_ORDER}")
    b = np.asarray(mean_derivs, dtype=float)
    if b.size != len(ps):
        raise ValueError("one mean derivative per multi-index required")
    if not ps:
        return _finalize("generic_bhattacharyya", 0.0, component, {"indices": 0})
    n = x0.size

    def super_fn(u):
        return kernel(u[:n], u[n:])

    u0 = np.concatenate([x0, x0])
    bmat = np.empty((len(ps), len(ps)))
    for i, pi in enumerate(ps):
        for j in range(i, len(ps)):
            orders = np.concatenate([pi, ps[j]])
            bmat[i, j] = bmat[j, i] = _central_nested_partial(
                super_fn, u0, orders, step
            )
    value = numkit.gram_projection_sq_norm(b, bmat)
    return _finalize(
        "generic_bhattacharyya",
        value,
        component,
        {"indices": len(ps), "step": step},
    )


# --------------------------------------------------------------------------
# covariance-model bounds
# --------------------------------------------------------------------------


def spcm_fisher_bound(p, x0, grad, component="component"):
    """Fisher-information bound for the covariance model.

    J_{mn} = Tr{inv(C) C_m inv(C) C_n} / 2 at x0; on a full support both
    the information matrix and the mean gradient restrict to supp(x0).
    """
    x0 = p.validate_param(x0)
    grad = np.asarray(grad, dtype=float)
    supp = support(x0)
    idx = list(supp) if supp.size == p.S else list(range(p.N))
    from .models import SdpcmProblem, sdpcm_cov, spcm_cov

    cov = sdpcm_cov(p, x0) if isinstance(p, SdpcmProblem) else spcm_cov(p, x0)
    inv = np.linalg.inv(cov)
    mats = [inv @ p.basis_matrix(k) for k in idx]
    j = np.empty((len(idx), len(idx)))
    for a, ma in enumerate(mats):
        for b_ in range(a, len(idx)):
            j[a, b_] = j[b_, a] = 0.5 * np.trace(ma @ mats[b_])
    value = numkit.gram_projection_sq_norm(grad[idx], j)
    return _finalize(
        "spcm_fisher_bound",
        value,
        component,
        {"restricted": supp.size == p.S, "x0": x0.tolist()},
    )


def spcm_rip_bound(p, x0, l, b_l, delta):
    """Isometry-constant bound for one off-support component.

    Closed form in delta (the order-S+1 restricted-isometry constant of
    the basis factors, required below 1/32), continuous in x0 and in
    general lower than the Fisher bound for projector bases.
    """
    if not 0.0 <= delta < 1.0 / 32.0:
        raise ValueError("delta must lie in [0, 1/32)")
    x0 = p.validate_param(x0)
    supp = support(x0)
    if l in supp:
        raise ValueError("component must lie outside supp(x0)")
    ranks = p.ranks
    s2 = p.sigma2
    beta = (2.0 - (1.0 + delta) ** 4 / (1.0 - delta) ** 4) / (1.0 + delta) ** 2
    if beta <= 0.0:
        raise ValueError("delta too large: bracket coefficient not positive")
    q_total = int(ranks[supp].sum() + ranks[l])
    num = (s2 * beta) ** (q_total / 2.0) * (s2 * (1.0 + 5.0 * delta)) ** (
        -ranks[l] / 2.0
    )
    den = float(
        np.prod((x0[supp] + s2 * (1.0 + 5.0 * delta)) ** (ranks[supp] / 2.0))
    )
    bracket = (
        ranks[l] * (12.0 * delta) ** 2 / 2.0
        + (12.0 * delta) ** 2
        + beta * (6.0 * delta + 1.0)
    )
    value = (
        2.0 * s2**2 * float(b_l) ** 2 / ranks[l] * (num / den) * beta**2 / bracket
    )
    return _finalize(
        "spcm_rip_bound", value, int(l), {"delta": float(delta), "beta": beta}
    )


def _sdpcm_q_closed(p, x0, indices, pvec):
    """Closed-form squared norm of the anchored kernel-derivative functional."""
    x0 = np.asarray(x0, dtype=float)
    ranks = p.ranks
    s2 = p.sigma2
    val = 1.0
    for k in np.flatnonzero(pvec):
        pk = int(pvec[k])
        ck = math.prod(ranks[k] / 2.0 + j for j in range(pk))
        val *= ck * math.factorial(pk) / (x0[k] + s2) ** (2 * pk)
    for k in support(x0):
        if k not in indices:
            v = x0[k] + s2
            val *= v ** ranks[k] / (v**2 - x0[k] ** 2) ** (ranks[k] / 2.0)
    return val


def _sdpcm_q_numeric(p, x0, indices, pvec, anchor):
    """The same norm via mixed kernel differentiation (local Chebyshev fits)."""
    from .models import sdpcm_kernel

    n = p.N

    def super_fn(u):
        return sdpcm_kernel(p, x0, u[:n], u[n:])

    orders = np.concatenate([pvec, pvec])
    u0 = np.concatenate([anchor, anchor])
    radii = np.concatenate([0.2 * (x0 + p.sigma2)] * 2)
    return _cheb_nested_partial(super_fn, u0, orders, radii)


def sdpcm_projection_bound(p, x0, indices, multi_indices, mean_partials, gamma0, component="component"):
    """Multi-index projection bound for the projector-basis model.

    sum_l (d^{p_l} gamma at the restricted anchor)^2 / q_l - gamma(x0)^2,
    where q_l is the squared norm of the anchored kernel-derivative
    functional. q_l is evaluated both in closed form and by numerical
    kernel differentiation; disagreement beyond 1e-6 relative raises
    NumericalConsistencyError.
    """
    x0 = p.validate_param(x0)
    idx = sorted(int(i) for i in indices)
    if len(idx) != p.S:
        raise ValueError("index set must have exactly S entries")
    ps = [np.asarray(q, dtype=int) for q in multi_indices]
    seen = {tuple(q) for q in ps}
    if len(seen) != len(ps):
        raise ValueError("multi-indices must be distinct")
    for q in ps:
        if set(np.flatnonzero(q)) - set(idx):
            raise ValueError("multi-index support must lie inside the index set")
    partials = np.asarray(mean_partials, dtype=float)
    if partials.size != len(ps):
        raise ValueError("one mean partial per multi-index required")
    anchor = x0.copy()
    anchor[[k for k in support(x0) if k not in idx]] = 0.0
    total = 0.0
    qs = []
    for q, d in zip(ps, partials):
        q_closed = _sdpcm_q_closed(p, x0, idx, q)
        q_num = _sdpcm_q_numeric(p, x0, idx, q, anchor)
        if abs(q_num - q_closed) > Q_CROSS_CHECK_RTOL * abs(q_closed):
            raise NumericalConsistencyError(
                f"squared-norm cross-check failed for multi-index {q.tolist()}: "
                f"closed {q_closed:.12e} vs numeric {q_num:.12e}"
            )
        qs.append(q_closed)
        total += d**2 / q_closed
    value = total - float(gamma0) ** 2
    return _finalize(
        "sdpcm_projection_bound",
        value,
        component,
        {
            "indices": idx,
            "multi_indices": [q.tolist() for q in ps],
            "norms": qs,
            "anchor": anchor.tolist(),
        },
    )


def sdpcm_first_order_bound(p, x0, grad, component="component"):
    """First-order projection bound for the projector-basis model.

    2 sum_{l in supp} (x0_l + s2)^2 b_l^2 / r_l
    + 2 s2^2 [1 - xi0^2/(xi0 + s2)^2]^{r_j0 / 2} sum_{l off supp} b_l^2 / r_l,
    with b_l the mean partials at the per-component restricted anchors.
    Continuous in x0 and never below the Fisher bound.
    """
    x0 = p.validate_param(x0)
    grad = np.asarray(grad, dtype=float)
    ranks = p.ranks
    s2 = p.sigma2
    xi0, j0 = s_largest_entry(x0, p.S)
    supp = set(support(x0))
    bracket = (1.0 - xi0**2 / (xi0 + s2) ** 2) ** (ranks[j0] / 2.0)
    on = sum(
        2.0 * (x0[l] + s2) ** 2 * grad[l] ** 2 / ranks[l] for l in range(p.N) if l in supp
    )
    off = sum(grad[l] ** 2 / ranks[l] for l in range(p.N) if l not in supp)
    value = on + 2.0 * s2**2 * bracket * off
    return _finalize(
        "sdpcm_first_order_bound",
        value,
        component,
        {"xi0": xi0, "j0": int(j0), "bracket": bracket},
    )


def spectrum_bound(p, x0, k):
    """Unbiased per-component bound for the projector-basis model.

    2 (x0_k + s2)^2 / r_k on the support; off the support the same noise
    floor shrunk by [1 - xi0^2/(xi0+s2)^2]^{r_j0/2}, a polynomial decay in
    the smallest retained power.
    """
    x0 = p.validate_param(x0)
    ranks = p.ranks
    s2 = p.sigma2
    if k in support(x0):
        value = 2.0 * (x0[k] + s2) ** 2 / ranks[k]
        case = "support"
    else:
        xi0, j0 = s_largest_entry(x0, p.S)
        value = (
            2.0
            / ranks[k]
            * s2**2
            * (1.0 - xi0**2 / (xi0 + s2) ** 2) ** (ranks[j0] / 2.0)
        )
        case = "off-support"
    return _finalize("spectrum_bound", value, int(k), {"case": case})


def sum_components(reports):
    """Total bound over disjoint components; parameters are kept per part."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    seen = set()
    for r in reports:
        if r.component in seen:
            raise ValueError(f"duplicate component {r.component!r}")
        seen.add(r.component)
    if len(reports) == 1:
        return reports[0]
    value = sum(r.value for r in reports)
    kinds = sorted({r.kind for r in reports})
    return BoundReport(
        kind="sum:" + "+".join(kinds),
        value=float(value),
        component="sum",
        params={"components": {str(r.component): r.params for r in reports}},
    )
