"""Distances between matrices and spectra."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError
from .linalg import symmetrize

__all__ = ["frobenius", "kl_divergence", "overlap_entropy", "eigenvalue_deviation"]


def _pair(A, B):
    A = np.asarray(getattr(A, "matrix", A), dtype=float)
    B = np.asarray(getattr(B, "matrix", B), dtype=float)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    return A, B


def frobenius(A, B) -> float:
    """Frobenius distance ``sqrt(sum((A - B)**2))``."""
    A, B = _pair(A, B)
    return float(np.sqrt(np.sum((A - B) ** 2)))


def _pd_spectrum(M, label):
    w, V = np.linalg.eigh(symmetrize(M))
    n = w.size
    if w[0] <= 1e-12 * abs(np.trace(M)) / n:
        raise NotPositiveDefiniteError(f"{label} matrix is not positive definite (min eig {w[0]:.3g})")
    return w, V


def kl_divergence(Sigma_test, Sigma_est, base_n: bool = False) -> float:
    """KL divergence between centred Gaussians, ``KL(N(0, Sigma_test) || N(0, Sigma_est))``.

    ``0.5 * (tr(Sigma_est^-1 Sigma_test) - n + log det Sigma_est - log det Sigma_test)``,
    with log-determinants taken from the spectra.  Divided by ``log(n)``
    when ``base_n`` is set.

    Raises
    ------
    NotPositiveDefiniteError
        Skip signal: one of the matrices has a (numerically) null eigenvalue
        and the divergence is undefined.
    """
    S, E = _pair(Sigma_test, Sigma_est)
    n = S.shape[0]
    w_test, _ = _pd_spectrum(S, "test")
    w_est, V = _pd_spectrum(E, "estimated")
    quad = np.einsum("ik,ij,jk->k", V, S, V)
    kl = 0.5 * (np.sum(quad / w_est) - n + np.sum(np.log(w_est)) - np.sum(np.log(w_test)))
    if base_n:
        kl /= np.log(n)
    return float(kl)


def overlap_entropy(H2) -> np.ndarray:
    """Normalized Shannon entropy of each row of a squared-overlap matrix.

    ``E_i = -sum_j h_ij log_n h_ij`` with ``0 log 0 = 0``: 0 for a perfect
    one-to-one overlap, 1 for a uniform row.  Accepts stacked matrices.
    """
    H2 = np.asarray(H2, dtype=float)
    n = H2.shape[-1]
    if H2.shape[-2] != n or n < 2:
        raise DimensionError(f"expected square matrices of size >= 2, got {H2.shape}")
    if np.any(np.abs(H2.sum(axis=-1) - 1.0) > 1e-6):
        raise ValueError("overlap rows must sum to 1")
    h = np.clip(H2, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(h > 0, h * np.log(h), 0.0)
    E = -terms.sum(axis=-1) / np.log(n)
    return np.clip(E, 0.0, 1.0)


def eigenvalue_deviation(lhs, rhs, norm: str = "L2") -> float:
    """Rank-paired L1 or L2 distance between two ascending spectra."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.shape != rhs.shape:
        raise DimensionError(f"length mismatch {lhs.shape} vs {rhs.shape}")
    diff = lhs - rhs
    if norm.upper() == "L1":
        return float(np.abs(diff).sum())
    if norm.upper() == "L2":
        return float(np.sqrt(np.sum(diff**2)))
    raise ValueError(f"unknown norm {norm!r}")
