"""Synthetic factor model with fixed eigenvalues and a rotating eigenbasis.

``V_{t+1} = V_t H_t`` where ``H_t`` is a product of plane rotations, one per
coordinate pair, with i.i.d. ``N(0, s^2)`` angles.  Observations are
``X_t = V_t diag(sqrt(lambda_true)) A_t`` with unit-variance i.i.d. factors
``A_t`` (Gaussian or rescaled Student-t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ReturnsPanel, as_generator
from .errors import DimensionError

__all__ = [
    "SynthConfig",
    "SynthPath",
    "euler_rotation",
    "haar_rotation",
    "generate",
    "ao_from_true",
    "to_panel",
]

_CHUNK = 1024


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic path.

    Eigenvalues are ``smallest * ratio**k`` for ``k = 0..n-1``.  ``nu`` is
    only read when ``law == "student_t"``.  ``store_every`` controls how
    many bases are kept: every basis when 1, every k-th plus the end points
    otherwise; ``None`` keeps all of them for ``n <= 50`` and about one
    hundred otherwise.
    """

    n: int = 10
    T: int = 10_000
    s: float = 0.0
    smallest: float = 1.0
    ratio: float = 1.5
    law: str = "normal"
    nu: float = 5.0
    seed: int = 0
    store_every: int | None = None

    def __post_init__(self):
        if self.n < 2 or self.T < 2:
            raise ValueError("need n >= 2 and T >= 2")
        if self.s < 0:
            raise ValueError("rotation scale s must be non-negative")
        if self.smallest <= 0 or self.ratio <= 0:
            raise ValueError("eigenvalues must be positive")
        if self.law not in ("normal", "student_t"):
            raise ValueError(f"unknown factor law {self.law!r}")
        if self.law == "student_t" and not self.nu > 2:
            raise ValueError("Student-t factors need nu > 2 for a finite variance")

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.smallest * self.ratio ** np.arange(self.n, dtype=float)


@dataclass(frozen=True)
class SynthPath:
    data: np.ndarray
    bases: np.ndarray
    basis_times: np.ndarray
    lambda_true: np.ndarray

    def population_covariance(self, i: int) -> np.ndarray:
        """True covariance at stored basis ``i`` (time ``basis_times[i]``)."""
        V = self.bases[i]
        return (V * self.lambda_true) @ V.T


def _pairs(n):
    return [(i, j) for i in range(n - 1) for j in range(i + 1, n)]


def _rotate_columns(M, i, j, c, s):
    # M <- M @ G where G is the (i, j) plane rotation; M may be stacked
    mi, mj = M[..., :, i].copy(), M[..., :, j]
    M[..., :, i] = mi * c[..., None] + mj * s[..., None]
    M[..., :, j] = mj * c[..., None] - mi * s[..., None]


def euler_rotation(angles, n: int | None = None) -> np.ndarray:
    """Product of plane rotations ``H(a_1) H(a_2) ... H(a_m)``, ``m = n(n-1)/2``.

    Planes are visited in lexicographic order (0,1), (0,2), ..., (n-2,n-1).
    ``H(a)`` on plane (i, j) is the identity except ``[[cos a, -sin a],
    [sin a, cos a]]`` on rows/columns i, j.  A leading batch axis on
    ``angles`` yields a stack of rotations.
    """
    angles = np.asarray(angles, dtype=float)
    m = angles.shape[-1]
    if n is None:
        n = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if n * (n - 1) // 2 != m:
        raise DimensionError(f"{m} angles do not match any dimension n(n-1)/2")
    H = np.broadcast_to(np.eye(n), angles.shape[:-1] + (n, n)).copy()
    c, s = np.cos(angles), np.sin(angles)
    for p, (i, j) in enumerate(_pairs(n)):
        _rotate_columns(H, i, j, c[..., p], s[..., p])
    return H


def haar_rotation(n: int, rng) -> np.ndarray:
    """Uniform draw from SO(n): QR of a Gaussian matrix with sign corrections."""
    rng = as_generator(rng)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def _factors(cfg: SynthConfig, rng, size):
    if cfg.law == "normal":
        return rng.standard_normal(size)
    return rng.standard_t(cfg.nu, size) / np.sqrt(cfg.nu / (cfg.nu - 2.0))


def generate(cfg: SynthConfig) -> SynthPath:
    """Simulate ``cfg.T`` observations of the rotating factor model."""
    rng = np.random.default_rng(cfg.seed)
    n, T = cfg.n, cfg.T
    every = cfg.store_every or (1 if n <= 50 else max(1, T // 100))
    lam_sqrt = np.sqrt(cfg.eigenvalues)
    V = haar_rotation(n, rng)
    X = np.empty((T, n))
    stored, times = [], []
    for start in range(0, T, _CHUNK):
        stop = min(start + _CHUNK, T)
        m = stop - start
        # H for every step in the chunk; the last step of the path needs none
        angles = rng.normal(0.0, cfg.s, size=(m, n * (n - 1) // 2)) if cfg.s > 0 else None
        H = euler_rotation(angles, n) if angles is not None else None
        A = _factors(cfg, rng, (m, n))
        Vs = np.empty((m, n, n))
        for k in range(m):
            Vs[k] = V
            if H is not None:
                V = V @ H[k]
        X[start:stop] = (Vs @ (A * lam_sqrt)[:, :, None])[:, :, 0]
        for k in range(m):
            t = start + k
            if t % every == 0 or t == T - 1:
                stored.append(Vs[k])
                times.append(t)
    return SynthPath(X, np.array(stored), np.array(times), cfg.eigenvalues)


def ao_from_true(avg_overlap, lambda_true) -> np.ndarray:
    """Average-oracle eigenvalues implied by an average overlap and the true spectrum."""
    H2 = np.asarray(avg_overlap, dtype=float)
    lam = np.asarray(lambda_true, dtype=float)
    if H2.shape != (lam.size, lam.size):
        raise DimensionError(f"overlap {H2.shape} does not match {lam.size} eigenvalues")
    return H2 @ lam


def to_panel(data, start="2000-01-01", prefix="A") -> ReturnsPanel:
    """Wrap a synthetic data matrix as a panel with consecutive daily dates."""
    data = np.asarray(data, dtype=float)
    dates = np.datetime64(start, "D") + np.arange(data.shape[0])
    width = len(str(data.shape[1] - 1))
    assets = [f"{prefix}{i:0{width}d}" for i in range(data.shape[1])]
    return ReturnsPanel(dates, assets, data)
