import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aocov.errors import DimensionError, NumericError
from aocov.portfolio import gmv_weights, realized_volatility

from conftest import random_spd


def test_identity_equal_weights():
    np.testing.assert_allclose(gmv_weights(np.eye(5)), 0.2)


def test_inverse_variance_weighting():
    np.testing.assert_allclose(gmv_weights(np.diag([1.0, 4.0])), [0.8, 0.2])


def test_beats_random_budget_vectors(rng):
    S = random_spd(rng, 5)
    w = gmv_weights(S)
    best = w @ S @ w
    v = rng.standard_normal((1000, 5))
    v /= v.sum(axis=1, keepdims=True)
    assert np.all(np.einsum("ki,ij,kj->k", v, S, v) >= best - 1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_budget_and_scale_invariance(n, seed, c):
    S = random_spd(np.random.default_rng(seed), n)
    w = gmv_weights(S)
    assert w.sum() == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(gmv_weights(c * S), w, atol=1e-10)


def test_singular_input_is_floored():
    w = gmv_weights(np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert np.all(np.isfinite(w)) and w.sum() == pytest.approx(1.0)


def test_indefinite_rejected():
    with pytest.raises(NumericError):
        gmv_weights(np.diag([1.0, -1.0]))


def test_volatility_examples(rng):
    assert realized_volatility(np.full(4, 0.25), np.eye(4)) == pytest.approx(1 / math.sqrt(4))
    S = random_spd(rng, 3)
    assert realized_volatility([0, 1, 0], S) == pytest.approx(math.sqrt(S[1, 1]))
    w = rng.standard_normal(3)
    loop = sum(w[i] * S[i, j] * w[j] for i in range(3) for j in range(3))
    assert realized_volatility(w, S) == pytest.approx(math.sqrt(loop), rel=1e-12)


def test_volatility_null_space():
    assert realized_volatility([1.0, -1.0], np.ones((2, 2))) == 0.0


def test_volatility_dimension_mismatch():
    with pytest.raises(DimensionError):
        realized_volatility([0.5, 0.5], np.eye(3))
