"""Global minimum variance portfolios."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError
from .linalg import eigenvalue_floor, symmetrize

__all__ = ["gmv_weights", "realized_volatility"]


def gmv_weights(Sigma) -> np.ndarray:
    """Budget-constrained minimum variance weights ``S^-1 1 / (1^T S^-1 1)``.

    The solve goes through the eigendecomposition with eigenvalues floored
    at ``1e-12 * trace / n``, so near-singular inputs stay well conditioned.
    Weights may be negative.
    """
    S = symmetrize(getattr(Sigma, "matrix", Sigma))
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got {S.shape}")
    n = S.shape[0]
    w, V = np.linalg.eigh(S)
    floor = eigenvalue_floor(np.trace(S), n)
    if not np.isfinite(w).all() or floor <= 0 or w[0] < -1e-10 * abs(np.trace(S)) / n:
        raise NumericError("GMV needs a positive semi-definite matrix with positive trace")
    w = np.maximum(w, floor)
    x = V @ (V.sum(axis=0) / w)
    total = x.sum()
    if not np.isfinite(total) or total == 0:
        raise NumericError("singular system in GMV weights")
    return x / total


def realized_volatility(weights, Sigma_test) -> float:
    """Portfolio standard deviation ``sqrt(w^T S w)`` under the realized covariance."""
    w = np.asarray(weights, dtype=float)
    S = np.asarray(getattr(Sigma_test, "matrix", Sigma_test), dtype=float)
    if S.shape != (w.size, w.size):
        raise DimensionError(f"{w.size} weights for a {S.shape} matrix")
    return float(np.sqrt(max(w @ S @ w, 0.0)))
