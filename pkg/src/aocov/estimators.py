"""Rotationally invariant estimators built on the train eigenbasis.

An RIE keeps the eigenvectors ``V`` of the train matrix and swaps the
eigenvalues: ``Xi(lambdas) = V diag(lambdas) V^T``.  The estimators differ
only in where the eigenvalues come from:

* ``sample``          the train eigenvalues themselves;
* ``oracle``          ``diag(V^T Sigma_test V)``, needs the future;
* ``average_oracle``  a calibrated, time-independent vector (see
  :mod:`aocov.calibration`);
* ``nls_cv``          k-fold cross-validated oracle eigenvalues computed
  inside the train window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import as_generator
from .errors import DimensionError, NumericError
from .linalg import eigenvalue_floor, sample_covariance, symmetrize

__all__ = [
    "ESTIMATORS",
    "FilteredCovariance",
    "oracle_eigenvalues",
    "apply_rie",
    "oracle_rie_optimality_check",
    "nls_cv_eigenvalues",
    "rescale_to_covariance",
    "floor_eigenvalues",
]

ESTIMATORS = ("sample", "oracle", "average_oracle", "nls_cv")
DEFAULT_FOLDS = 10


@dataclass(frozen=True)
class FilteredCovariance:
    matrix: np.ndarray
    estimator: str
    provenance: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def floor_eigenvalues(lambdas, trace=None) -> np.ndarray:
    """Clip eigenvalues from below at ``1e-12 * trace / n``."""
    lambdas = np.asarray(lambdas, dtype=float)
    trace = lambdas.sum() if trace is None else trace
    return np.maximum(lambdas, eigenvalue_floor(trace, lambdas.size))


def _check_basis(V, S=None):
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise DimensionError(f"eigenvector matrix must be square, got {V.shape}")
    if S is not None and np.shape(S) != V.shape:
        raise DimensionError(f"matrix shape {np.shape(S)} does not match basis {V.shape}")
    return V


def oracle_eigenvalues(V_train, Sigma_test) -> np.ndarray:
    """Eigenvalues minimizing ``||V diag(l) V^T - Sigma_test||_F`` over ``l``.

    The k-th value is the quadratic form ``v_k^T Sigma_test v_k``; the result
    sums to ``trace(Sigma_test)``.
    """
    V = _check_basis(V_train, Sigma_test)
    S = np.asarray(Sigma_test, dtype=float)
    values = np.einsum("ik,ij,jk->k", V, S, V)
    return floor_eigenvalues(values, np.trace(S))


def apply_rie(V_train, lambdas, estimator: str = "rie", provenance=None) -> FilteredCovariance:
    """Build ``V diag(lambdas) V^T``.

    Raises
    ------
    NumericError
        If any eigenvalue is negative.
    """
    V = _check_basis(V_train)
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.shape != (V.shape[0],):
        raise DimensionError(f"{lambdas.size} eigenvalues for a basis of size {V.shape[0]}")
    tol = 1e-12 * max(1.0, float(np.abs(lambdas).max(initial=0.0)))
    if np.any(lambdas < -tol):
        raise NumericError(f"negative eigenvalue {lambdas.min():.3g} in RIE")
    matrix = symmetrize((V * np.maximum(lambdas, 0.0)) @ V.T)
    return FilteredCovariance(matrix, estimator, dict(provenance or {}))


def oracle_rie_optimality_check(V_train, Sigma_test, trial, squared: bool = False) -> float:
    """How much worse a trial spectrum is than the oracle one on the same basis.

    Returns ``||Xi(trial) - S||_F - ||Xi(oracle) - S||_F``, or the difference
    of the squared norms when ``squared`` is set.  Never negative beyond
    rounding.
    """
    S = np.asarray(Sigma_test, dtype=float)
    best = np.linalg.norm(apply_rie(V_train, oracle_eigenvalues(V_train, S)).matrix - S)
    other = np.linalg.norm(apply_rie(V_train, trial).matrix - S)
    if squared:
        return float(other**2 - best**2)
    return float(other - best)


def nls_cv_eigenvalues(X_train, k: int = DEFAULT_FOLDS, seed=None, contiguous: bool = True) -> np.ndarray:
    """Cross-validated oracle eigenvalues from a single train window.

    The rows are cut into ``k`` folds.  For each fold, the covariance of the
    remaining rows supplies an eigenbasis and the fold's own covariance plays
    the part of the future: the oracle eigenvalues on that basis are
    recorded.  The ``k`` vectors are averaged rank by rank, floored and
    sorted ascending.

    Parameters
    ----------
    X_train : ndarray of shape (T, n)
        Usually standardized returns.
    k : int
        Number of folds, at least 2.
    seed : optional
        Only used when ``contiguous`` is False, to assign rows to folds at
        random rather than in time order.
    """
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X_train must be 2-D")
    T = X.shape[0]
    if k < 2:
        raise ValueError("need at least 2 folds")
    rows = np.arange(T) if contiguous else as_generator(seed).permutation(T)
    folds = np.array_split(rows, k)
    if min(f.size for f in folds) < 2:
        raise DimensionError(f"{T} rows cannot make {k} folds of at least 2 rows")
    samples = np.empty((k, X.shape[1]))
    keep = np.ones(T, dtype=bool)
    for i, fold in enumerate(folds):
        keep[:] = True
        keep[fold] = False
        _, V = np.linalg.eigh(sample_covariance(X[keep]))
        S = sample_covariance(X[fold])
        samples[i] = np.einsum("ik,ij,jk->k", V, S, V)
    lambdas = samples.mean(axis=0)
    return np.sort(floor_eigenvalues(lambdas))


def rescale_to_covariance(filtered, train_variances) -> FilteredCovariance:
    """Turn a filtered correlation matrix into a covariance: ``D Xi D`` with ``D = diag(sd)``."""
    var = np.asarray(train_variances, dtype=float)
    if np.any(~np.isfinite(var)) or np.any(var <= 0):
        raise NumericError("train variances must be strictly positive")
    matrix = getattr(filtered, "matrix", filtered)
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (var.size, var.size):
        raise DimensionError(f"{var.size} variances for a {matrix.shape} matrix")
    sd = np.sqrt(var)
    out = symmetrize(sd[:, None] * matrix * sd[None, :])
    if isinstance(filtered, FilteredCovariance):
        prov = dict(filtered.provenance, scale="covariance")
        return FilteredCovariance(out, filtered.estimator, prov)
    return FilteredCovariance(out, "rie", {"scale": "covariance"})
