"""Monte Carlo moments and mean-function gradients; quadrature for diagonals.

Trials are processed in fixed-size blocks. Block b draws its noise from
numpy's default_rng seeded with [seed, b], so the stream attached to a
trial never depends on how blocks are distributed over workers and the
accumulated results are bit-identical for any worker count. Accumulation
uses numpy's pairwise summation over per-block partials combined in block
order.

Estimators are callables taking a batch of observations in rows (B, M)
and returning per-trial component values (B, K); wrap per-observation
functions with :func:`rowwise`.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

BLOCK_TRIALS = 2048
QUAD_ABS_TOL = 1e-10
QUAD_HALF_WIDTH = 10.0

__all__ = [
    "McConfig",
    "McResult",
    "rowwise",
    "mc_moments",
    "mean_grad_slm_mc",
    "mean_grad_sdpcm_mc",
    "mean_grad_fd",
    "fd_step",
    "diag_mean_var_quadrature",
    "diag_mean_grad_quadrature",
]


@dataclass(frozen=True)
class McConfig:
    trials: int
    seed: int
    workers: int = 1

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError("need at least two trials")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class McResult:
    """Sample moments of an estimator at a fixed parameter.

    stderr is the standard error of the mean; var_stderr the (large-n)
    standard error of the per-component variance estimate, from the
    fourth central moment.
    """

    mean: np.ndarray
    variance_total: float
    per_component_variance: np.ndarray
    stderr: np.ndarray
    var_stderr: np.ndarray
    trials: int
    seed: int


def rowwise(fn, out_dim=None):
    """Adapt a single-observation estimator to the batched interface."""

    def batched(y):
        y = np.asarray(y, dtype=float)
        rows = [np.atleast_1d(fn(row)) for row in y]
        return np.stack(rows)

    return batched


def _block_ranges(trials):
    for b, start in enumerate(range(0, trials, BLOCK_TRIALS)):
        yield b, start, min(BLOCK_TRIALS, trials - start)


def _run_blocks(cfg, work):
    """Evaluate work(block_index, block_size) for all blocks, combine in order."""
    blocks = list(_block_ranges(cfg.trials))
    if cfg.workers == 1:
        partials = [work(b, size) for b, _, size in blocks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {b: pool.submit(work, b, size) for b, _, size in blocks}
        partials = [futures[b].result() for b, _, _ in blocks]
    return [np.sum(np.stack(parts), axis=0) for parts in zip(*partials)]


def _block_noise(model, x, seed, block, size):
    rng = np.random.default_rng([seed, block])
    return rng.standard_normal(model.noise_shape(size))


def mc_moments(estimator, model, x, cfg):
    """Sample mean and (n-1)-normalized variance of an estimator at x."""
    x = model.validate_param(x)

    def work(block, size):
        y = model.sample_given(x, _block_noise(model, x, cfg.seed, block, size))
        v = np.atleast_2d(np.asarray(estimator(y), dtype=float))
        return v.sum(axis=0), (v**2).sum(axis=0), (v**3).sum(axis=0), (v**4).sum(axis=0)

    s1, s2, s3, s4 = _run_blocks(cfg, work)
    n = cfg.trials
    mean = s1 / n
    m2 = np.maximum(s2 / n - mean**2, 0.0)
    var = m2 * n / (n - 1)
    m4 = s4 / n - 4 * mean * s3 / n + 6 * mean**2 * s2 / n - 3 * mean**4
    var_stderr = np.sqrt(np.maximum(m4 - m2**2, 0.0) / n)
    return McResult(
        mean=mean,
        variance_total=float(var.sum()),
        per_component_variance=var,
        stderr=np.sqrt(var / n),
        var_stderr=var_stderr,
        trials=n,
        seed=cfg.seed,
    )


def _grad_from_products(cfg, model, x, weight_fn, estimator):
    """MC average of the separable product estimator_k(y) * weight_l(y)."""

    def work(block, size):
        y = model.sample_given(x, _block_noise(model, x, cfg.seed, block, size))
        v = np.atleast_2d(np.asarray(estimator(y), dtype=float))
        w = weight_fn(y)
        return (
            np.einsum("bk,bl->kl", v, w),
            np.einsum("bk,bl->kl", v**2, w**2),
        )

    s1, s2 = _run_blocks(cfg, work)
    n = cfg.trials
    grad = s1 / n
    sample_var = np.maximum(s2 / n - grad**2, 0.0) * n / (n - 1)
    return grad, np.sqrt(sample_var / n)


def mean_grad_slm_mc(estimator, p, x, cfg):
    """Score-weighted gradient of the mean for the linear model.

    grad[k, l] estimates d E{estimator_k} / d x_l at x via
    (1/sigma2) E{estimator_k(y) (y - H x)' H e_l}; the matching standard
    errors are returned alongside.
    """
    x = p.validate_param(x)
    mean_y = p.H @ x

    def weights(y):
        return (y - mean_y) @ p.H / p.sigma2

    return _grad_from_products(cfg, p, x, weights, estimator)


def mean_grad_sdpcm_mc(estimator, p, x, cfg):
    """Score-weighted gradient of the mean for the projector-basis model.

    grad[k, l] estimates -r_l m_k / (2 (x_l + s2)) +
    E{y' C_l y estimator_k(y)} / (2 (x_l + s2)^2).
    """
    x = p.validate_param(x)
    denom = x + p.sigma2
    r = p.ranks

    def weights(y):
        from .models import beta_energies

        q = beta_energies(p, y) * r  # y' C_l y per component
        return -r / (2.0 * denom) + q / (2.0 * denom**2)

    return _grad_from_products(cfg, p, x, weights, estimator)


def fd_step(xl, base=1e-3):
    """Default forward-difference step 1e-3 * max(1, |x_l|)."""
    return base * max(1.0, abs(xl))


def mean_grad_fd(estimator, model, x, cfg, delta=None, directions=None):
    """Forward-difference gradient of the mean with common random numbers.

    Both evaluation points of every quotient reuse the same noise draws,
    which cancels most of the MC variance. Perturbations that leave the
    valid parameter set (e.g. growing the support beyond S) raise, with
    the advice to restrict directions to supp(x) plus the single index
    the bound consumes.
    """
    x = model.validate_param(x)
    if directions is None:
        directions = list(range(x.size))
    steps = []
    for l in directions:
        h = fd_step(x[l]) if delta is None else float(delta)
        xp = x.copy()
        xp[l] += h
        try:
            model.validate_param(xp)
        except ValueError as exc:
            raise ValueError(
                f"perturbing component {l} leaves the valid parameter set "
                f"({exc}); restrict directions to supp(x) and the component "
                "under study, evaluated at the bound's anchor"
            ) from None
        steps.append((l, h, xp))

    def work(block, size):
        z = _block_noise(model, x, cfg.seed, block, size)
        v0 = np.atleast_2d(np.asarray(estimator(model.sample_given(x, z)), dtype=float))
        sums = []
        sumsqs = []
        for _, h, xp in steps:
            vp = np.atleast_2d(
                np.asarray(estimator(model.sample_given(xp, z)), dtype=float)
            )
            d = (vp - v0) / h
            sums.append(d.sum(axis=0))
            sumsqs.append((d**2).sum(axis=0))
        return np.stack(sums, axis=-1), np.stack(sumsqs, axis=-1)

    s1, s2 = _run_blocks(cfg, work)
    n = cfg.trials
    grad = s1 / n
    sample_var = np.maximum(s2 / n - grad**2, 0.0) * n / (n - 1)
    return grad, np.sqrt(sample_var / n)


def _gauss_weight(y, center, sigma):
    return np.exp(-0.5 * ((y - center) / sigma) ** 2) / (
        sigma * math.sqrt(2.0 * math.pi)
    )


def _diag_quad(fn, base, x_k, sigma):
    lo = x_k - QUAD_HALF_WIDTH * sigma
    hi = x_k + QUAD_HALF_WIDTH * sigma
    breaks = None
    if base.kind == "ht" and base.threshold > 0:
        breaks = [t for t in (-base.threshold, base.threshold) if lo < t < hi]
        breaks = breaks or None
    val, err = quad(
        lambda y: fn(y) * _gauss_weight(y, x_k, sigma),
        lo,
        hi,
        points=breaks,
        epsabs=QUAD_ABS_TOL,
        limit=200,
    )
    if not np.isfinite(val) or err > max(1e-6, 1e-6 * abs(val)):
        raise ArithmeticError("quadrature did not converge")
    return val


def diag_mean_var_quadrature(base, x_k, sigma):
    """Mean and variance of a diagonal estimator under Gaussian noise at x_k."""
    mean = _diag_quad(lambda y: base(y), base, x_k, sigma)
    second = _diag_quad(lambda y: base(y) ** 2, base, x_k, sigma)
    return mean, max(second - mean**2, 0.0)


def diag_mean_grad_quadrature(base, x_k, sigma):
    """d/dx_k of the diagonal-estimator mean, by the Gaussian score identity."""
    return _diag_quad(
        lambda y: base(y) * (y - x_k) / sigma**2, base, x_k, sigma
    )
