import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aocov.errors import DimensionError, NumericError
from aocov.estimators import (
    apply_rie,
    floor_eigenvalues,
    nls_cv_eigenvalues,
    oracle_eigenvalues,
    oracle_rie_optimality_check,
    rescale_to_covariance,
)
from aocov.linalg import sample_covariance

from conftest import random_orthogonal, random_spd


class TestOracle:
    def test_shared_basis_returns_spectrum(self, rng):
        V = random_orthogonal(rng, 5)
        lam = np.array([0.1, 0.5, 1.0, 2.0, 4.0])
        np.testing.assert_allclose(oracle_eigenvalues(V, (V * lam) @ V.T), lam, atol=1e-12)

    def test_identity_test_matrix(self, rng):
        np.testing.assert_allclose(oracle_eigenvalues(random_orthogonal(rng, 4), np.eye(4)), 1.0)

    def test_quadratic_forms(self, rng):
        V, S = random_orthogonal(rng, 4), random_spd(rng, 4)
        expected = [V[:, k] @ S @ V[:, k] for k in range(4)]
        np.testing.assert_allclose(oracle_eigenvalues(V, S), expected, rtol=1e-12)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            oracle_eigenvalues(random_orthogonal(rng, 3), np.eye(4))

    def test_gap_zero_at_oracle(self, rng):
        V, S = random_orthogonal(rng, 5), random_spd(rng, 5)
        assert oracle_rie_optimality_check(V, S, oracle_eigenvalues(V, S)) == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("k", range(4))
    def test_unit_perturbation_adds_one_to_squared_norm(self, rng, k):
        V, S = random_orthogonal(rng, 4), random_spd(rng, 4)
        trial = oracle_eigenvalues(V, S) + np.eye(4)[k]
        assert oracle_rie_optimality_check(V, S, trial, squared=True) == pytest.approx(1.0, abs=1e-10)
        assert oracle_rie_optimality_check(V, S, trial) > 0

    def test_random_trials_never_beat_oracle(self, rng):
        V, S = random_orthogonal(rng, 5), random_spd(rng, 5)
        gaps = [oracle_rie_optimality_check(V, S, rng.uniform(0, 5, 5)) for _ in range(1000)]
        assert min(gaps) >= 0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_trace_identity(self, n, seed):
        r = np.random.default_rng(seed)
        S = random_spd(r, n)
        lam = oracle_eigenvalues(random_orthogonal(r, n), S)
        assert lam.sum() == pytest.approx(np.trace(S), rel=1e-10)


class TestRie:
    def test_ones_give_identity(self, rng):
        np.testing.assert_allclose(apply_rie(random_orthogonal(rng, 4), np.ones(4)).matrix, np.eye(4), atol=1e-12)

    def test_train_eigenvalues_reconstruct(self, rng):
        S = random_spd(rng, 5)
        lam, V = np.linalg.eigh(S)
        assert np.linalg.norm(apply_rie(V, lam).matrix - S) < 1e-8 * np.linalg.norm(S)

    def test_rank_one(self, rng):
        V = random_orthogonal(rng, 4)
        out = apply_rie(V, np.array([0.0, 0.0, 3.0, 0.0])).matrix
        np.testing.assert_allclose(out, 3.0 * np.outer(V[:, 2], V[:, 2]), atol=1e-14)

    def test_negative_rejected(self, rng):
        with pytest.raises(NumericError):
            apply_rie(random_orthogonal(rng, 3), np.array([-0.5, 1.0, 2.0]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 2**32 - 1))
    def test_psd_and_trace(self, n, seed):
        r = np.random.default_rng(seed)
        lam = r.uniform(0, 3, n)
        M = apply_rie(random_orthogonal(r, n), lam).matrix
        assert np.linalg.eigvalsh(M).min() >= -1e-10 * max(lam.sum(), 1e-300) / n
        assert np.trace(M) == pytest.approx(lam.sum(), rel=1e-10, abs=1e-14)

    def test_floor(self):
        out = floor_eigenvalues(np.array([0.0, 1.0, 3.0]))
        assert out[0] == pytest.approx(1e-12 * 4 / 3)
        np.testing.assert_array_equal(out[1:], [1.0, 3.0])


class TestNls:
    def test_two_fold_by_hand(self):
        X = np.array([[1.0, 2.0], [3.0, 1.0], [0.0, 1.0], [2.0, 4.0]])
        # fold 1 tested on rows {2, 3}'s basis, fold 2 on rows {0, 1}'s basis
        expected = np.sort([(32 / 13 + 32 / 5) / 2, (0.5 / 13 + 0.1) / 2])
        np.testing.assert_allclose(nls_cv_eigenvalues(X, k=2), expected, rtol=1e-12)

    def test_isotropic_limit(self, rng):
        lam = nls_cv_eigenvalues(rng.standard_normal((20_000, 4)), k=10)
        np.testing.assert_allclose(lam, 1.0, atol=0.05)

    def test_fold_order_irrelevant(self, rng):
        X = rng.standard_normal((60, 5))
        blocks = np.split(X, 10)
        permuted = np.vstack([blocks[i] for i in rng.permutation(10)])
        np.testing.assert_allclose(nls_cv_eigenvalues(permuted, 10), nls_cv_eigenvalues(X, 10), rtol=1e-12)

    def test_random_folds_deterministic_given_seed(self, rng):
        X = rng.standard_normal((50, 4))
        a = nls_cv_eigenvalues(X, 5, seed=3, contiguous=False)
        assert np.array_equal(a, nls_cv_eigenvalues(X, 5, seed=3, contiguous=False))

    def test_fold_too_small(self, rng):
        with pytest.raises(DimensionError):
            nls_cv_eigenvalues(rng.standard_normal((15, 3)), k=10)

    def test_output_sorted_and_floored(self, rng):
        lam = nls_cv_eigenvalues(rng.standard_normal((20, 8)), k=10)
        assert np.all(np.diff(lam) >= 0) and lam.min() > 0

    def test_trace_matches_mean_fold_trace(self, rng):
        X = rng.standard_normal((40, 3))
        folds = np.array_split(np.arange(40), 4)
        mean_trace = np.mean([np.trace(sample_covariance(X[f])) for f in folds])
        assert nls_cv_eigenvalues(X, 4).sum() == pytest.approx(mean_trace, rel=1e-10)


class TestRescale:
    def test_unit_variances_unchanged(self, rng):
        C = random_spd(rng, 3)
        np.testing.assert_allclose(rescale_to_covariance(C, np.ones(3)).matrix, C)

    def test_identity(self):
        np.testing.assert_allclose(rescale_to_covariance(np.eye(2), [4.0, 9.0]).matrix, np.diag([4.0, 9.0]))

    def test_off_diagonal(self):
        rho = 0.3
        out = rescale_to_covariance(np.array([[1.0, rho], [rho, 1.0]]), [4.0, 9.0]).matrix
        assert out[0, 1] == pytest.approx(6 * rho)

    def test_non_positive_variance(self):
        with pytest.raises(NumericError):
            rescale_to_covariance(np.eye(2), [1.0, 0.0])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 7), st.integers(0, 2**32 - 1))
    def test_preserves_psd(self, n, seed):
        r = np.random.default_rng(seed)
        out = rescale_to_covariance(random_spd(r, n), r.uniform(0.01, 10, n)).matrix
        assert np.linalg.eigvalsh(out).min() > 0
