"""Symmetric-matrix primitives.

All eigen-quantities follow one convention: eigenvalues ascending, column
``k`` of the eigenvector matrix paired with eigenvalue ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError

__all__ = [
    "EigenSystem",
    "sample_covariance",
    "eigendecompose",
    "overlap",
    "cov_to_corr",
    "symmetrize",
    "eigenvalue_floor",
]

DEGENERACY_GAP = 1e-10


def symmetrize(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.swapaxes(-1, -2))


def eigenvalue_floor(trace: float, n: int) -> float:
    """Smallest eigenvalue allowed in a filtered spectrum."""
    return 1e-12 * abs(trace) / n


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def degenerate(self) -> bool:
        """True when two eigenvalues are closer than the degeneracy gap."""
        if self.n < 2:
            return False
        scale = max(1.0, float(np.max(np.abs(self.eigenvalues))))
        return bool(np.min(np.diff(self.eigenvalues)) < DEGENERACY_GAP * scale)

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return symmetrize((V * self.eigenvalues) @ V.T)


def sample_covariance(X) -> np.ndarray:
    """Unbiased sample covariance of the columns of ``X`` (rows are observations).

    On standardized input this is the sample correlation matrix.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DimensionError("sample_covariance needs a 2-D array with at least 2 rows")
    Xc = X - X.mean(axis=0)
    return symmetrize(Xc.T @ Xc / (X.shape[0] - 1))


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-|entry| of each column made positive; argmax breaks ties at lowest index
    idx = np.argmax(np.abs(V), axis=-2)
    pivot = np.take_along_axis(V, idx[..., None, :], axis=-2)
    return V * np.where(pivot < 0, -1.0, 1.0)


def eigendecompose(A) -> EigenSystem:
    """Eigen-decomposition of a symmetric matrix with a deterministic sign convention.

    Raises
    ------
    NumericError
        If the input is not finite or the LAPACK driver fails to converge;
        the message carries basic conditioning diagnostics.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise NumericError(f"matrix has {int((~np.isfinite(A)).sum())} non-finite entries")
    try:
        w, V = np.linalg.eigh(symmetrize(A))
    except np.linalg.LinAlgError as exc:
        finite = np.isfinite(A).all()
        norm = np.linalg.norm(A) if finite else float("nan")
        raise NumericError(
            f"eigendecomposition failed ({exc}); finite={finite}, frobenius={norm:.3g}"
        ) from exc
    return EigenSystem(w, _fix_signs(V))


def overlap(V_prev, V_next) -> np.ndarray:
    """Squared overlaps ``(V_prev^T V_next) ** 2`` between two eigenbases.

    Entry ``(i, j)`` is the squared projection of column ``i`` of ``V_prev``
    on column ``j`` of ``V_next``.  Works on stacked bases as well.
    """
    V_prev = np.asarray(V_prev, dtype=float)
    V_next = np.asarray(V_next, dtype=float)
    if V_prev.shape != V_next.shape or V_prev.shape[-1] != V_prev.shape[-2]:
        raise DimensionError(f"incompatible bases {V_prev.shape} and {V_next.shape}")
    return (V_prev.swapaxes(-1, -2) @ V_next) ** 2


def cov_to_corr(cov) -> tuple[np.ndarray, np.ndarray]:
    """Split a covariance matrix into (correlation, standard deviations)."""
    cov = np.asarray(cov, dtype=float)
    sd = np.sqrt(np.diag(cov))
    if np.any(sd <= 0):
        raise NumericError("covariance has a non-positive diagonal entry")
    return symmetrize(cov / np.outer(sd, sd)), sd
