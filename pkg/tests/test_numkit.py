"""Linear-algebra primitive and special-function tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsevar import numkit


class TestThinSvd:
    def test_identity(self):
        f = numkit.thin_svd(np.eye(3))
        np.testing.assert_allclose(f.singular_values, [1.0, 1.0, 1.0])

    def test_rank_deficient_diagonal(self):
        f = numkit.thin_svd(np.diag([2.0, 0.0]))
        assert f.rank == 1
        np.testing.assert_allclose(f.singular_values, [2.0])

    def test_random_reconstruction(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(5, 3))
        f = numkit.thin_svd(a)
        err = np.linalg.norm(f.reconstruct() - a) / np.linalg.norm(a)
        assert err < 1e-10

    def test_orthonormal_factors(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(6, 4))
        f = numkit.thin_svd(a)
        np.testing.assert_allclose(f.U.T @ f.U, np.eye(f.rank), atol=1e-10)
        np.testing.assert_allclose(f.V.T @ f.V, np.eye(f.rank), atol=1e-10)
        assert np.all(np.diff(f.singular_values) <= 0)
        assert np.all(f.singular_values > 0)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError, match="zero-rank"):
            numkit.thin_svd(np.zeros((2, 2)))


class TestPinv:
    def test_identity(self):
        np.testing.assert_allclose(numkit.pinv(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        np.testing.assert_allclose(
            numkit.pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0])
        )

    def test_zero_matrix(self):
        np.testing.assert_allclose(numkit.pinv(np.zeros((3, 2))), np.zeros((2, 3)))

    @pytest.mark.parametrize("shape", [(4, 4), (6, 3), (3, 6)])
    def test_penrose_identities(self, shape):
        rng = np.random.default_rng(hash(shape) % 2**32)
        a = rng.normal(size=shape)
        ap = numkit.pinv(a)
        scale = np.linalg.norm(a)
        assert np.linalg.norm(a @ ap @ a - a) < 1e-8 * scale
        assert np.linalg.norm(ap @ a @ ap - ap) < 1e-8 * np.linalg.norm(ap)
        assert np.linalg.norm((a @ ap).T - a @ ap) < 1e-8
        assert np.linalg.norm((ap @ a).T - ap @ a) < 1e-8


class TestGramProjection:
    def test_diagonal_case(self):
        assert numkit.gram_projection_sq_norm([1.0, 0.0], np.diag([2.0, 3.0])) == 0.5

    def test_zero_vector(self):
        assert numkit.gram_projection_sq_norm(np.zeros(3), np.eye(3)) == 0.0

    def test_null_space_component_dropped(self):
        # G = v v' is singular; a c orthogonal to v projects to nothing
        v = np.array([1.0, 2.0, -1.0])
        g = np.outer(v, v)
        c = np.array([2.0, 0.0, 2.0])  # orthogonal to v
        assert abs(c @ v) < 1e-12
        assert numkit.gram_projection_sq_norm(c, g) == 0.0

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            numkit.gram_projection_sq_norm([1.0, 0.0], np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_matches_pinv_quadratic_form(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            b = rng.normal(size=(4, 3))
            g = b @ b.T  # psd, rank 3
            c = rng.normal(size=4)
            val = numkit.gram_projection_sq_norm(c, g)
            ref = c @ numkit.pinv(g) @ c
            assert val >= 0.0
            np.testing.assert_allclose(val, ref, rtol=1e-8, atol=1e-12)
            # consistency with the coefficient form d' G d, d = pinv(G) c
            d = numkit.pinv(g) @ c
            np.testing.assert_allclose(val, d @ g @ d, rtol=1e-8, atol=1e-12)

    def test_split_blocks_match_block_diagonal(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            b1 = rng.normal(size=(3, 3))
            b2 = rng.normal(size=(2, 4))
            g1, g2 = b1 @ b1.T, b2 @ b2.T
            c1, c2 = rng.normal(size=3), rng.normal(size=2)
            split = numkit.split_gram_projection_sq_norm(c1, g1, c2, g2)
            big = np.zeros((5, 5))
            big[:3, :3] = g1
            big[3:, 3:] = g2
            whole = numkit.gram_projection_sq_norm(np.concatenate([c1, c2]), big)
            np.testing.assert_allclose(split, whole, rtol=1e-9, atol=1e-12)

    def test_single_block_reduction(self):
        rng = np.random.default_rng(4)
        b = rng.normal(size=(3, 3))
        g = b @ b.T
        c = rng.normal(size=3)
        lone = numkit.gram_projection_sq_norm(c, g)
        with_zero = numkit.split_gram_projection_sq_norm(c, g, np.zeros(2), np.eye(2))
        np.testing.assert_allclose(with_zero, lone, rtol=1e-12)


class TestHermite:
    def test_base_cases(self):
        assert numkit.hermite_prob(0, 7.3) == 1.0
        assert numkit.hermite_prob(1, -2.5) == -2.5

    def test_symbolic_values(self):
        # expansions: He_2 = x^2 - 1, He_3 = x^3 - 3x
        assert numkit.hermite_prob(2, 0.0) == -1.0
        assert numkit.hermite_prob(3, 2.0) == 2.0

    @given(
        st.integers(min_value=2, max_value=20),
        st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_recurrence(self, order, x):
        lhs = numkit.hermite_prob(order + 1, x)
        rhs = x * numkit.hermite_prob(order, x) - order * numkit.hermite_prob(
            order - 1, x
        )
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)

    def test_against_direct_polynomial(self):
        # per-order coefficient build-up, independent of the evaluation path
        coeffs = {0: [1.0], 1: [0.0, 1.0]}
        for n in range(1, 20):
            prev = coeffs[n]
            prev2 = coeffs[n - 1]
            nxt = [0.0] * (n + 2)
            for i, c in enumerate(prev):
                nxt[i + 1] += c
            for i, c in enumerate(prev2):
                nxt[i] -= n * c
            coeffs[n + 1] = nxt
        xs = np.linspace(-3, 3, 11)
        for n in range(21):
            direct = np.polyval(list(reversed(coeffs[n])), xs)
            np.testing.assert_allclose(
                numkit.hermite_prob(n, xs), direct, rtol=1e-12, atol=1e-9
            )

    def test_scaled_variant(self):
        xs = np.linspace(-4, 4, 9)
        for n in (0, 1, 5, 12):
            np.testing.assert_allclose(
                numkit.hermite_prob_scaled(n, xs),
                numkit.hermite_prob(n, xs) / math.sqrt(math.factorial(n)),
                rtol=1e-10,
            )

    def test_order_cap(self):
        with pytest.raises(numkit.BudgetError):
            numkit.hermite_prob(61, 0.0)


class TestSpark:
    def test_identity_full_rank_convention(self):
        for n in (2, 4, 6):
            assert numkit.spark(np.eye(n)) == n

    def test_duplicated_column(self):
        a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
        assert numkit.spark(a) == 2

    def test_zero_column(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert numkit.spark(a) == 1

    def test_random_full_column_rank(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(8, 6))
        assert np.linalg.matrix_rank(a) == 6
        assert numkit.spark(a) == 6

    def test_planted_dependency(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(6, 5))
        a[:, 4] = a[:, 0] + a[:, 1] + a[:, 2]  # 4 dependent columns, no fewer
        assert numkit.spark(a) == 4

    def test_budget(self):
        with pytest.raises(numkit.BudgetError):
            numkit.spark(np.ones((2, 21)))


class TestCoherence:
    def test_identity(self):
        assert numkit.coherence(np.eye(4)) == 0.0

    def test_identical_unit_columns(self):
        v = np.array([[0.6], [0.8]])
        assert numkit.coherence(np.hstack([v, v])) == pytest.approx(1.0)

    def test_matches_pair_scan(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 6))
        best = max(
            abs(a[:, i] @ a[:, j]) for i in range(6) for j in range(6) if i != j
        )
        assert numkit.coherence(a) == pytest.approx(best, rel=1e-12)

    def test_single_column_rejected(self):
        with pytest.raises(ValueError):
            numkit.coherence(np.ones((3, 1)))


class TestRipConstant:
    def test_orthonormal_columns(self):
        rep = numkit.rip_constant(np.eye(5), 3)
        assert rep.delta == pytest.approx(0.0, abs=1e-12)
        assert rep.convention == "matrix"

    def test_coherence_relation(self):
        # delta_2 <= (2-1) * coherence on unit-column matrices
        rng = np.random.default_rng(8)
        for _ in range(10):
            a = rng.normal(size=(12, 6))
            a /= np.linalg.norm(a, axis=0)
            rep = numkit.rip_constant(a, 2)
            assert rep.delta <= numkit.coherence(a) + 1e-12

    def test_coherence_relation_higher_order(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            a = rng.normal(size=(16, 6))
            a /= np.linalg.norm(a, axis=0)
            for k in (2, 3, 4):
                rep = numkit.rip_constant(a, k)
                assert rep.delta <= (k - 1) * numkit.coherence(a) + 1e-12

    def test_duplicated_column_flags(self):
        a = np.eye(4)[:, :3]
        a = np.hstack([a, a[:, :1]])
        rep = numkit.rip_constant(a, 2)
        assert rep.rank_deficient
        assert rep.delta == 1.0

    def test_factor_blocks_convention(self):
        # orthonormal disjoint blocks have delta 0 under the factor convention
        eye = np.eye(6)
        blocks = [eye[:, :2], eye[:, 2:3], eye[:, 3:6]]
        rep = numkit.rip_constant(blocks, 2)
        assert rep.convention == "factors"
        assert rep.delta == pytest.approx(0.0, abs=1e-12)

    def test_factor_blocks_deviation(self):
        eye = np.eye(4)
        blocks = [1.2 * eye[:, :1], eye[:, 1:2]]
        rep = numkit.rip_constant(blocks, 2)
        assert rep.delta == pytest.approx(0.2, abs=1e-12)

    def test_budgets(self):
        with pytest.raises(numkit.BudgetError):
            numkit.rip_constant(np.eye(8), 7)
        with pytest.raises(numkit.BudgetError):
            numkit.rip_constant(np.eye(21), 2)
