"""Average Oracle calibration over bootstrapped window pairs.

A calibration draws ``B`` consecutive (prev, next) window pairs from a long
historical range, computes the oracle eigenvalues of the next-window
correlation in the prev-window eigenbasis for each, and averages them rank
by rank.  The resulting vector is time independent and replaces the train
eigenvalues of any later correlation matrix with the same ``n`` and
``delta_train``.

Every sample ``b`` has its own random stream derived from ``(seed, b)``, so
results do not depend on the worker count.

Calibration file layout (all integers little endian)::

    offset   size   content
    0        8      magic b"AOCALIB\\0"
    8        2      uint16 format version (currently 1)
    10       4      uint32 header length L
    14       L      UTF-8 JSON header, keys sorted
    14+L     8n     float64 eigenvalues, ascending rank order
    ...      8n^2   float64 average overlap, row major (only if has_overlap)
    end-32   32     SHA-256 of every preceding byte
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ReturnsPanel, sample_window
from .errors import ChecksumError, CalibrationFormatError, DimensionError, VersionError
from .estimators import FilteredCovariance, apply_rie, floor_eigenvalues
from .linalg import sample_covariance

__all__ = [
    "AOCalibration",
    "WindowSample",
    "calibrate_ao",
    "apply_ao",
    "average_overlap",
    "separability_diagnostic",
    "separability_from_samples",
    "Separability",
    "save_calibration",
    "load_calibration",
    "draw_samples",
    "resolve_workers",
]

MAGIC = b"AOCALIB\0"
FORMAT_VERSION = 1
DEFAULT_DELTA = 252
DEFAULT_B = 10_000
CHUNK = 64


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get("AOCOV_WORKERS", "1"))
    return max(1, int(workers))


@dataclass(frozen=True)
class WindowSample:
    """Spectra of one standardized (prev, next) pair."""

    split: int
    cols: np.ndarray
    lam_prev: np.ndarray
    V_prev: np.ndarray
    lam_next: np.ndarray
    V_next: np.ndarray
    oracle: np.ndarray


def _one_sample(panel, cal, delta_train, delta, n, seed, b, assets, shuffle, standardized, filters):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
    pair, cols, z_prev, z_next = sample_window(
        panel, cal, delta_train, delta, n, rng, assets=assets, shuffle=shuffle,
        standardized=standardized, **filters,
    )
    C_next = sample_covariance(z_next)
    lam_prev, V_prev = np.linalg.eigh(sample_covariance(z_prev))
    lam_next, V_next = np.linalg.eigh(C_next)
    oracle = np.einsum("ik,ij,jk->k", V_prev, C_next, V_prev)
    return WindowSample(pair.split, cols, lam_prev, V_prev, lam_next, V_next, oracle)


def draw_samples(
    panel: ReturnsPanel,
    cal: range,
    delta_train: int,
    delta: int,
    B: int,
    n: int,
    seed: int,
    reducer,
    assets=None,
    shuffle: bool = False,
    standardized: bool = True,
    workers=None,
    filters=None,
):
    """Draw ``B`` window samples and reduce them chunk by chunk.

    ``reducer`` maps a list of :class:`WindowSample` (one fixed-size chunk)
    to any value; the list of chunk results is returned in sample order.
    Chunk boundaries never depend on ``workers``.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    filters = dict(filters or {})
    bounds = [(lo, min(lo + CHUNK, B)) for lo in range(0, B, CHUNK)]

    def run(bound):
        lo, hi = bound
        chunk = [
            _one_sample(panel, cal, delta_train, delta, n, seed, b, assets, shuffle, standardized, filters)
            for b in range(lo, hi)
        ]
        return reducer(chunk)

    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) == 1:
        return [run(b) for b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, bounds))


@dataclass(frozen=True, eq=False)
class AOCalibration:
    """Average Oracle eigenvalues plus the settings that produced them."""

    lambdas: np.ndarray
    n: int
    delta_train: int
    delta: int
    B: int
    seed: int
    mode: str = "random"
    assets: tuple | None = None
    cal_range: tuple = (0, 0)
    date_range: tuple = ("", "")
    scale: str = "correlation"
    overlap: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.shape != (self.n,):
            raise DimensionError(f"{lam.size} eigenvalues for n={self.n}")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        object.__setattr__(self, "lambdas", lam)
        if self.overlap is not None:
            object.__setattr__(self, "overlap", np.asarray(self.overlap, dtype=float))

    def header(self) -> dict:
        return {
            "n": int(self.n),
            "delta_train": int(self.delta_train),
            "delta": int(self.delta),
            "B": int(self.B),
            "seed": int(self.seed),
            "mode": self.mode,
            "assets": None if self.assets is None else list(self.assets),
            "cal_range": [int(x) for x in self.cal_range],
            "date_range": [str(x) for x in self.date_range],
            "scale": self.scale,
            "has_overlap": self.overlap is not None,
            "extra": self.extra,
        }

    def __eq__(self, other):
        if not isinstance(other, AOCalibration):
            return NotImplemented
        if self.header() != other.header():
            return False
        if self.lambdas.tobytes() != other.lambdas.tobytes():
            return False
        if self.overlap is None:
            return other.overlap is None
        return other.overlap is not None and self.overlap.tobytes() == other.overlap.tobytes()

    __hash__ = None


def _date_range(panel, cal):
    if len(cal) == 0:
        return ("", "")
    return (str(panel.dates[cal.start]), str(panel.dates[cal.stop - 1]))


def calibrate_ao(
    panel: ReturnsPanel,
    cal: range,
    delta_train: int,
    delta: int = DEFAULT_DELTA,
    B: int = DEFAULT_B,
    n: int | None = None,
    seed: int = 0,
    assets=None,
    with_overlap: bool = False,
    standardized: bool = True,
    shuffle: bool = False,
    workers=None,
    filters=None,
) -> AOCalibration:
    """Rank-wise mean of oracle eigenvalues over ``B`` random window pairs.

    For each pair, ``n`` eligible assets are drawn afresh (or the fixed
    ``assets`` are used), both halves are standardized separately, and the
    next-window correlation is projected on the prev-window eigenbasis.

    Parameters
    ----------
    cal : range
        Rows of the calibration window; every pair lies inside it.
    with_overlap : bool
        Also store the average squared-overlap matrix.
    standardized : bool
        Work on correlation (default) or on demeaned covariance.
    shuffle : bool
        Route every pair through the shuffling procedure first.
    """
    if assets is not None:
        assets = tuple(assets)
        n = len(assets)
    if n is None:
        raise ValueError("give either n or a fixed asset list")

    def reduce(chunk):
        out = {"oracle": np.stack([s.oracle for s in chunk])}
        if with_overlap:
            out["overlap"] = np.sum([(s.V_prev.T @ s.V_next) ** 2 for s in chunk], axis=0)
        return out

    parts = draw_samples(panel, cal, delta_train, delta, B, n, seed, reduce, assets, shuffle,
                         standardized, workers, filters)
    oracles = np.concatenate([p["oracle"] for p in parts])
    lambdas = floor_eigenvalues(oracles.mean(axis=0))
    H2 = None
    if with_overlap:
        H2 = np.sum([p["overlap"] for p in parts], axis=0) / B
    return AOCalibration(
        lambdas=lambdas,
        n=n,
        delta_train=delta_train,
        delta=delta,
        B=B,
        seed=seed,
        mode="random" if assets is None else "fixed",
        assets=assets,
        cal_range=(cal.start, cal.stop),
        date_range=_date_range(panel, cal),
        scale="correlation" if standardized else "covariance",
        overlap=H2,
        extra={"shuffle": True} if shuffle else {},
    )


def apply_ao(calibration: AOCalibration, X_train) -> FilteredCovariance:
    """Swap the train eigenvalues for the calibrated ones.

    ``X_train`` is the standardized train window (or demeaned returns for a
    covariance-scale calibration).
    """
    X = np.asarray(X_train, dtype=float)
    if X.ndim != 2 or X.shape[1] != calibration.n:
        raise DimensionError(f"train window has {X.shape[-1]} columns, calibration n={calibration.n}")
    _, V = np.linalg.eigh(sample_covariance(X))
    prov = {"delta_train": calibration.delta_train, "delta": calibration.delta, "B": calibration.B}
    return apply_rie(V, calibration.lambdas, "average_oracle", prov)


def average_overlap(
    panel: ReturnsPanel,
    cal: range,
    delta_train: int,
    delta: int,
    B: int,
    n: int | None = None,
    seed: int = 0,
    shuffle: bool = False,
    assets=None,
    standardized: bool = True,
    workers=None,
    filters=None,
) -> np.ndarray:
    """Element-wise mean of the squared overlap between prev and next eigenbases."""
    if assets is not None:
        n = len(assets)

    def reduce(chunk):
        return np.sum([(s.V_prev.T @ s.V_next) ** 2 for s in chunk], axis=0)

    parts = draw_samples(panel, cal, delta_train, delta, B, n, seed, reduce, assets, shuffle,
                         standardized, workers, filters)
    return np.sum(parts, axis=0) / B


@dataclass(frozen=True)
class Separability:
    """Both sides of ``<H2 lam_next> ~ <H2> <lam_next>``, ranked ascending."""

    joint: np.ndarray
    factorized: np.ndarray
    correlation: float
    max_rel_deviation: float


def separability_from_samples(H2, lam_next) -> Separability:
    """Compare the average of ``H2 @ lam`` with ``mean(H2) @ mean(lam)``.

    ``H2`` has shape (B, n, n) and ``lam_next`` (B, n).
    """
    H2 = np.asarray(H2, dtype=float)
    lam = np.asarray(lam_next, dtype=float)
    joint = np.einsum("bij,bj->i", H2, lam) / H2.shape[0]
    factorized = H2.mean(axis=0) @ lam.mean(axis=0)
    return _separability(joint, factorized)


def _separability(joint, factorized):
    if np.ptp(joint) > 0 and np.ptp(factorized) > 0:
        corr = float(np.corrcoef(joint, factorized)[0, 1])
    else:
        corr = 1.0 if np.allclose(joint, factorized) else float("nan")
    denom = np.maximum(np.abs(joint), np.finfo(float).tiny)
    return Separability(joint, factorized, corr, float(np.max(np.abs(factorized - joint) / denom)))


def separability_diagnostic(
    panel: ReturnsPanel,
    cal: range,
    delta_train: int,
    delta: int,
    B: int,
    n: int | None = None,
    seed: int = 0,
    assets=None,
    workers=None,
    filters=None,
) -> Separability:
    """Check whether overlaps and next-window eigenvalues average independently."""
    if assets is not None:
        n = len(assets)

    def reduce(chunk):
        H2 = np.stack([(s.V_prev.T @ s.V_next) ** 2 for s in chunk])
        lam = np.stack([s.lam_next for s in chunk])
        return (np.einsum("bij,bj->i", H2, lam), H2.sum(axis=0), lam.sum(axis=0))

    parts = draw_samples(panel, cal, delta_train, delta, B, n, seed, reduce, assets,
                         workers=workers, filters=filters)
    joint = np.sum([p[0] for p in parts], axis=0) / B
    H2 = np.sum([p[1] for p in parts], axis=0) / B
    lam = np.sum([p[2] for p in parts], axis=0) / B
    return _separability(joint, H2 @ lam)


# -- persistence -------------------------------------------------------------

def _encode(cal: AOCalibration, version: int = FORMAT_VERSION) -> bytes:
    header = json.dumps(cal.header(), sort_keys=True, separators=(",", ":")).encode()
    body = MAGIC + struct.pack("<HI", version, len(header)) + header
    body += cal.lambdas.astype("<f8").tobytes()
    if cal.overlap is not None:
        body += cal.overlap.astype("<f8").tobytes()
    return body + hashlib.sha256(body).digest()


def save_calibration(cal: AOCalibration, path) -> None:
    Path(path).write_bytes(_encode(cal))


def load_calibration(path) -> AOCalibration:
    """Read a calibration file, verifying magic, version and checksum.

    Raises
    ------
    VersionError
        The file declares a format version this reader does not know.
    ChecksumError
        The trailing digest does not match (e.g. a truncated file).
    CalibrationFormatError
        Anything else malformed.
    """
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 6 or raw[: len(MAGIC)] != MAGIC:
        raise CalibrationFormatError(f"{path}: not a calibration file")
    version, hlen = struct.unpack_from("<HI", raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, this reader supports {FORMAT_VERSION}")
    if len(raw) < 32 or hashlib.sha256(raw[:-32]).digest() != raw[-32:]:
        raise ChecksumError(f"{path}: checksum mismatch (truncated or corrupted)")
    pos = len(MAGIC) + 6
    try:
        header = json.loads(raw[pos:pos + hlen].decode())
        n = header["n"]
        pos += hlen
        lambdas = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).astype(float)
        pos += 8 * n
        overlap = None
        if header["has_overlap"]:
            overlap = np.frombuffer(raw, dtype="<f8", count=n * n, offset=pos).astype(float).reshape(n, n)
            pos += 8 * n * n
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise CalibrationFormatError(f"{path}: bad payload ({exc})") from None
    if pos != len(raw) - 32:
        raise CalibrationFormatError(f"{path}: trailing bytes in payload")
    return AOCalibration(
        lambdas=lambdas,
        n=n,
        delta_train=header["delta_train"],
        delta=header["delta"],
        B=header["B"],
        seed=header["seed"],
        mode=header["mode"],
        assets=None if header["assets"] is None else tuple(header["assets"]),
        cal_range=tuple(header["cal_range"]),
        date_range=tuple(header["date_range"]),
        scale=header["scale"],
        overlap=overlap,
        extra=header["extra"],
    )
