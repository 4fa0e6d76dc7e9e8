"""Observation-model, sampling, and kernel tests."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from sparsevar import models
from sparsevar.meanmc import McConfig, mc_moments
from sparsevar.models import (
    DomainError,
    SdpcmProblem,
    SlmProblem,
    SpcmProblem,
    beta_energies,
    dzero_contains,
    restriction_holds,
    sdpcm_cov,
    sdpcm_kernel,
    slm_kernel,
    slm_logpdf,
    slm_sample,
    spcm_kernel,
)


def random_sparse(rng, n, s, nonneg=False, scale=2.0):
    x = np.zeros(n)
    supp = rng.choice(n, size=rng.integers(1, s + 1), replace=False)
    vals = rng.uniform(0.3, scale, size=supp.size)
    if not nonneg:
        vals *= rng.choice([-1.0, 1.0], size=supp.size)
    x[supp] = vals
    return x


def random_sdpcm(rng, n=4, s=2, sigma2=1.0, m_extra=1):
    ranks = rng.integers(1, 3, size=n)
    m = int(ranks.sum()) + m_extra
    q, _ = np.linalg.qr(rng.normal(size=(m, int(ranks.sum()))))
    groups, pos = [], 0
    for r in ranks:
        groups.append(q[:, pos : pos + r])
        pos += r
    return SdpcmProblem(tuple(groups), sigma2, s)


class TestSlmProblem:
    def test_spark_guard(self):
        h = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])  # spark 2
        with pytest.raises(ValueError, match="spark"):
            SlmProblem(h, 1.0, 2)

    def test_parameter_validation(self):
        p = SlmProblem.ssnm(4, 1.0, 2)
        with pytest.raises(ValueError, match="nonzero"):
            p.validate_param([1.0, 1.0, 1.0, 0.0])

    def test_noiseless_limit(self):
        p = SlmProblem(np.vstack([np.eye(3), np.ones((1, 3))]), 1e-18, 2)
        x = np.array([1.0, 0.0, -2.0])
        y = slm_sample(p, x, np.random.default_rng(0))
        np.testing.assert_allclose(y, p.H @ x, atol=1e-6)

    def test_sample_moments(self):
        p = SlmProblem.ssnm(4, 0.7, 2)
        x = np.zeros(4)
        res = mc_moments(lambda y: y, p, x, McConfig(trials=60000, seed=1))
        assert np.all(np.abs(res.mean) < 4 * res.stderr)
        assert np.all(
            np.abs(res.per_component_variance - 0.7) < 4 * res.var_stderr
        )

    def test_sample_covariance_diagonal(self):
        p = SlmProblem.ssnm(3, 1.3, 1)
        x = np.array([2.0, 0.0, 0.0])
        y = p.sample(x, np.random.default_rng(2), size=40000)
        cov = np.cov(y.T)
        np.testing.assert_allclose(cov, 1.3 * np.eye(3), atol=0.05)


class TestSlmLogpdf:
    def test_peak_value(self):
        p = SlmProblem.ssnm(3, 0.5, 2)
        x = np.array([1.0, -1.0, 0.0])
        expected = -0.5 * 3 * math.log(2 * math.pi * 0.5)
        assert slm_logpdf(p, p.H @ x, x) == pytest.approx(expected)

    def test_translation_invariance(self):
        p = SlmProblem.ssnm(3, 1.0, 3)
        rng = np.random.default_rng(3)
        x, xp, y = rng.normal(size=3), rng.normal(size=3), rng.normal(size=3)
        assert slm_logpdf(p, y, x) == pytest.approx(
            slm_logpdf(p, y + p.H @ xp, x + xp)
        )

    def test_density_normalizes(self):
        p = SlmProblem(np.array([[1.0]]), 0.8, 1)
        x = np.array([0.4])
        val, _ = quad(
            lambda y: math.exp(slm_logpdf(p, np.array([y]), x)), -12.0, 12.0
        )
        assert val == pytest.approx(1.0, abs=1e-6)


class TestSlmKernel:
    def test_anchor_normalization(self):
        p = SlmProblem.ssnm(3, 1.0, 2)
        rng = np.random.default_rng(4)
        x0 = random_sparse(rng, 3, 2)
        for _ in range(50):
            x = random_sparse(rng, 3, 2)
            assert slm_kernel(p, x0, x0, x) == pytest.approx(1.0, abs=1e-12)

    def test_unit_shift_value(self):
        p = SlmProblem.ssnm(3, 1.0, 1)
        e1 = np.eye(3)[0]
        val = slm_kernel(p, np.zeros(3), e1, e1)
        assert val == pytest.approx(math.e, rel=1e-12)

    def test_symmetry_and_psd(self):
        rng = np.random.default_rng(5)
        h = rng.normal(size=(6, 4))
        p = SlmProblem(h, 1.5, 2)
        x0 = random_sparse(rng, 4, 2)
        pts = [random_sparse(rng, 4, 2) for _ in range(5)]
        gram = np.array([[slm_kernel(p, x0, a, b) for b in pts] for a in pts])
        np.testing.assert_allclose(gram, gram.T, rtol=1e-12)
        w = np.linalg.eigvalsh(gram)
        assert w[0] >= -1e-10 * w[-1]

    def test_null_space_invariance(self):
        rng = np.random.default_rng(6)
        h = rng.normal(size=(3, 5))
        h[:, 4] = h[:, 0]  # null vector e0 - e4... spark check needs S=1
        p = SlmProblem(h, 1.0, 1)
        null = np.zeros(5)
        null[0], null[4] = 1.0, -1.0
        assert np.allclose(h @ null, 0.0)
        x0 = np.zeros(5)
        x1 = rng.normal(size=5)
        x2 = rng.normal(size=5)
        assert slm_kernel(p, x0, x1, x2) == pytest.approx(
            slm_kernel(p, x0, x1 + null, x2), rel=1e-12
        )


class TestSdpcmCov:
    def test_zero_parameter(self):
        p = SdpcmProblem.canonical(3, 0.9, 2)
        np.testing.assert_allclose(sdpcm_cov(p, np.zeros(3)), 0.9 * np.eye(3))

    def test_negative_rejected(self):
        p = SdpcmProblem.canonical(3, 1.0, 2)
        with pytest.raises(ValueError, match="nonnegative"):
            sdpcm_cov(p, np.array([-0.1, 0.0, 0.0]))

    def test_inverse_norm_bound(self):
        rng = np.random.default_rng(7)
        p = random_sdpcm(rng, sigma2=0.6)
        x = random_sparse(rng, p.N, p.S, nonneg=True)
        inv_norm = np.linalg.norm(np.linalg.inv(sdpcm_cov(p, x)), 2)
        assert inv_norm <= 1.0 / 0.6 + 1e-12

    def test_grouped_eigenvalues(self):
        rng = np.random.default_rng(8)
        p = random_sdpcm(rng, n=3, s=2, sigma2=1.1, m_extra=2)
        x = np.zeros(p.N)
        x[0], x[2] = 2.0, 0.5
        w = np.sort(np.linalg.eigvalsh(sdpcm_cov(p, x)))
        expected = sorted(
            [x[k] + 1.1 for k in range(p.N) for _ in range(p.ranks[k])]
            + [1.1] * (p.M - p.total_rank)
        )
        np.testing.assert_allclose(w, expected, rtol=1e-10)


class TestCovarianceSampling:
    def test_white_noise_at_zero(self):
        p = SdpcmProblem.canonical(3, 1.0, 1)
        y = p.sample(np.zeros(3), np.random.default_rng(9), size=30000)
        np.testing.assert_allclose(np.cov(y.T), np.eye(3), atol=0.04)

    def test_mc_covariance(self):
        rng = np.random.default_rng(10)
        p = random_sdpcm(rng, n=3, s=2, sigma2=0.8)
        x = np.zeros(p.N)
        x[1] = 1.7
        y = p.sample(x, np.random.default_rng(11), size=60000)
        np.testing.assert_allclose(np.cov(y.T), sdpcm_cov(p, x), atol=0.07)

    def test_beta_energy_mean(self):
        rng = np.random.default_rng(12)
        p = random_sdpcm(rng, n=4, s=2, sigma2=1.0)
        x = np.zeros(p.N)
        x[0] = 2.5
        res = mc_moments(
            lambda y: beta_energies(p, y), p, x, McConfig(trials=100000, seed=13)
        )
        assert np.all(np.abs(res.mean - (x + 1.0)) < 4 * res.stderr)

    def test_spcm_sampling_matches_cholesky_cov(self):
        rng = np.random.default_rng(14)
        b = rng.normal(size=(3, 3))
        c1 = b @ b.T
        p = SpcmProblem((c1, np.eye(3)), 1.0, 1)
        x = np.array([0.7, 0.0])
        y = p.sample(x, np.random.default_rng(15), size=60000)
        np.testing.assert_allclose(np.cov(y.T), 0.7 * c1 + np.eye(3), atol=0.1)


class TestRestriction:
    def test_anchor_and_origin_admissible(self):
        rng = np.random.default_rng(16)
        p = random_sdpcm(rng)
        x0 = random_sparse(rng, p.N, p.S, nonneg=True)
        assert restriction_holds(p, x0, x0)
        assert restriction_holds(p, x0, np.zeros(p.N))

    def test_componentwise_form_agrees(self):
        rng = np.random.default_rng(17)
        p = random_sdpcm(rng, n=3, s=3)
        for _ in range(100):
            x0 = random_sparse(rng, 3, 3, nonneg=True, scale=1.5)
            x = random_sparse(rng, 3, 3, nonneg=True, scale=4.0)
            assert restriction_holds(p, x0, x) == dzero_contains(p, x0, x)


class TestCovarianceKernels:
    def test_normalization(self):
        rng = np.random.default_rng(18)
        p = random_sdpcm(rng)
        x0 = random_sparse(rng, p.N, p.S, nonneg=True)
        for _ in range(50):
            x = random_sparse(rng, p.N, p.S, nonneg=True)
            if not restriction_holds(p, x0, x):
                continue
            assert sdpcm_kernel(p, x0, x0, x) == pytest.approx(1.0, abs=1e-12)

    def test_single_group_value(self):
        p = SdpcmProblem.canonical(1, 1.0, 1)
        val = sdpcm_kernel(p, np.zeros(1), np.array([0.5]), np.array([0.5]))
        assert val == pytest.approx(1.0 / math.sqrt(1.0 - 0.25), rel=1e-12)

    def test_domain_error(self):
        p = SdpcmProblem.canonical(2, 1.0, 1)
        x0 = np.zeros(2)
        with pytest.raises(DomainError):
            sdpcm_kernel(p, x0, np.array([3.0, 0.0]), np.array([3.0, 0.0]))

    def test_det_form_matches_product_form(self):
        rng = np.random.default_rng(19)
        sd = random_sdpcm(rng, n=3, s=2, sigma2=1.2)
        sp = SpcmProblem(
            tuple(sd.basis_matrix(k) for k in range(sd.N)), 1.2, sd.S
        )
        x0 = random_sparse(rng, 3, 2, nonneg=True, scale=1.0)
        for _ in range(20):
            x1 = random_sparse(rng, 3, 2, nonneg=True, scale=1.0)
            x2 = random_sparse(rng, 3, 2, nonneg=True, scale=1.0)
            if not (restriction_holds(sd, x0, x1) and restriction_holds(sd, x0, x2)):
                continue
            np.testing.assert_allclose(
                spcm_kernel(sp, x0, x1, x2),
                sdpcm_kernel(sd, x0, x1, x2),
                rtol=1e-10,
            )

    def test_spcm_kernel_symmetry_and_psd(self):
        rng = np.random.default_rng(20)
        bs = []
        for _ in range(3):
            b = rng.normal(size=(4, 2))
            bs.append(b @ b.T / 4.0)
        p = SpcmProblem(tuple(bs), 1.0, 2)
        x0 = random_sparse(rng, 3, 2, nonneg=True, scale=0.5)
        pts = []
        while len(pts) < 4:
            x = random_sparse(rng, 3, 2, nonneg=True, scale=0.5)
            if restriction_holds(p, x0, x):
                pts.append(x)
        gram = np.array([[spcm_kernel(p, x0, a, b) for b in pts] for a in pts])
        np.testing.assert_allclose(gram, gram.T, rtol=1e-10)
        w = np.linalg.eigvalsh(gram)
        assert w[0] >= -1e-9 * w[-1]

    def test_spcm_anchor_outside_domain_allowed(self):
        # the anchor may sit outside the sampled set as long as the
        # restriction condition holds for the evaluated pair
        p = SdpcmProblem.canonical(3, 1.0, 1)
        x0 = np.array([0.4, 0.0, 0.0])
        x = np.array([0.0, 0.3, 0.0])
        assert restriction_holds(p, x0, x)
        assert sdpcm_kernel(p, x0, x, x) > 0


class TestBetaEnergies:
    def test_single_basis_vector(self):
        p = SdpcmProblem.canonical(3, 1.0, 1)
        y = np.eye(3)[0]
        np.testing.assert_allclose(beta_energies(p, y), [1.0, 0.0, 0.0])

    def test_zero_observation(self):
        p = SdpcmProblem.canonical(3, 1.0, 1)
        np.testing.assert_allclose(beta_energies(p, np.zeros(3)), np.zeros(3))

    def test_batch_shape(self):
        rng = np.random.default_rng(21)
        p = random_sdpcm(rng)
        y = rng.normal(size=(7, p.M))
        assert beta_energies(p, y).shape == (7, p.N)
