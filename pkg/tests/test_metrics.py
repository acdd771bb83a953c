import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aocov.errors import DimensionError, NotPositiveDefiniteError
from aocov.metrics import eigenvalue_deviation, frobenius, kl_divergence, overlap_entropy

from conftest import random_orthogonal, random_spd


def test_frobenius_examples(rng):
    A = rng.standard_normal((3, 3))
    assert frobenius(A, A) == 0
    assert frobenius(np.eye(2), np.zeros((2, 2))) == pytest.approx(math.sqrt(2))
    B = rng.standard_normal((3, 3))
    loop = math.sqrt(sum((A[i, j] - B[i, j]) ** 2 for i in range(3) for j in range(3)))
    assert frobenius(A, B) == pytest.approx(loop, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_frobenius_metric_axioms(seed):
    r = np.random.default_rng(seed)
    A, B, C = (r.standard_normal((4, 4)) for _ in range(3))
    assert frobenius(A, B) == pytest.approx(frobenius(B, A), abs=1e-10)
    assert frobenius(A, C) <= frobenius(A, B) + frobenius(B, C) + 1e-10


def test_kl_hand_value():
    assert kl_divergence(2 * np.eye(2), np.eye(2)) == pytest.approx(1 - math.log(2), abs=1e-14)


def test_kl_base_n():
    S, E = 2 * np.eye(3), np.eye(3)
    assert kl_divergence(S, E, base_n=True) == pytest.approx(kl_divergence(S, E) / math.log(3))


def test_kl_self_zero(rng):
    A = random_spd(rng, 5)
    assert abs(kl_divergence(A, A)) < 1e-10


def test_kl_closed_form_against_inverse(rng):
    S, E = random_spd(rng, 4), random_spd(rng, 4)
    direct = 0.5 * (np.trace(np.linalg.solve(E, S)) - 4 + math.log(np.linalg.det(E) / np.linalg.det(S)))
    assert kl_divergence(S, E) == pytest.approx(direct, rel=1e-10)


def test_kl_skip_signal():
    with pytest.raises(NotPositiveDefiniteError):
        kl_divergence(np.diag([1.0, 0.0]), np.eye(2))
    with pytest.raises(NotPositiveDefiniteError):
        kl_divergence(np.eye(2), np.diag([1.0, 0.0]))


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_kl_nonnegative(n, seed):
    r = np.random.default_rng(seed)
    assert kl_divergence(random_spd(r, n), random_spd(r, n)) >= -1e-10


def test_entropy_extremes():
    np.testing.assert_array_equal(overlap_entropy(np.eye(4)), 0.0)
    np.testing.assert_allclose(overlap_entropy(np.full((4, 4), 0.25)), 1.0)


def test_entropy_two_rows():
    H2 = np.array([[0.5, 0.5], [0.9, 0.1]])
    expected = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
    np.testing.assert_allclose(overlap_entropy(H2), [1.0, expected])


def test_entropy_row_sum_violation():
    with pytest.raises(ValueError):
        overlap_entropy(np.array([[0.5, 0.6], [0.5, 0.4]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_entropy_bounds_and_permutation(n, seed):
    r = np.random.default_rng(seed)
    H2 = (random_orthogonal(r, n).T @ random_orthogonal(r, n)) ** 2
    E = overlap_entropy(H2)
    assert np.all((E >= 0) & (E <= 1))
    shuffled = np.array([row[r.permutation(n)] for row in H2])
    np.testing.assert_allclose(overlap_entropy(shuffled), E, atol=1e-12)


def test_deviation_examples():
    assert eigenvalue_deviation([1, 2], [1, 2], "L1") == 0 == eigenvalue_deviation([1, 2], [1, 2], "L2")
    assert eigenvalue_deviation([1, 2], [2, 4], "L1") == pytest.approx(3.0)
    assert eigenvalue_deviation([1, 2], [2, 4], "L2") == pytest.approx(math.sqrt(5))
    with pytest.raises(DimensionError):
        eigenvalue_deviation([1, 2], [1, 2, 3])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["L1", "L2"]))
def test_deviation_triangle(seed, norm):
    r = np.random.default_rng(seed)
    a, b, c = (np.sort(r.uniform(0, 5, 6)) for _ in range(3))
    assert eigenvalue_deviation(a, c, norm) <= eigenvalue_deviation(a, b, norm) + eigenvalue_deviation(b, c, norm) + 1e-12
