"""Return panels: loading, window slicing, asset filters, standardization, shuffling.

Rows are time, columns are assets.  Missing cells are stored as NaN in
``values`` and flagged in ``mask`` (True = missing).
"""

from __future__ import annotations

import csv
import datetime as _dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateColumnError,
    DimensionError,
    DuplicateDateError,
    EmptySelectionError,
    InfeasibleWindowError,
    InsufficientAssetsError,
    ParseError,
)

__all__ = [
    "ReturnsPanel",
    "IntervalPair",
    "load_panel",
    "save_panel",
    "filter_assets",
    "eligible_columns",
    "standardize",
    "shuffle_pair",
    "sample_interval_pairs",
    "sample_window",
    "as_generator",
]

MAX_MISSING_FRAC = 0.20
MAX_PAIR_CORR = 0.95
RETRY_CAP = 100


def as_generator(seed) -> np.random.Generator:
    """Accept an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class ReturnsPanel:
    """Dated T x N matrix of simple returns.

    Parameters
    ----------
    dates : array of datetime64[D]
        Strictly increasing observation dates.
    assets : sequence of str
        Asset identifiers, one per column.
    values : ndarray of shape (T, N)
        Returns; missing cells are NaN.
    mask : ndarray of bool, optional
        True where a value is missing.  Derived from NaNs when omitted.
    """

    dates: np.ndarray
    assets: tuple
    values: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"values must be 2-D, got shape {values.shape}")
        assets = tuple(str(a) for a in self.assets)
        T, N = values.shape
        if len(dates) != T:
            raise DimensionError(f"{len(dates)} dates for {T} rows")
        if len(assets) != N:
            raise DimensionError(f"{len(assets)} asset ids for {N} columns")
        if len(set(assets)) != N:
            raise DimensionError("asset ids must be unique")
        if T > 1 and not np.all(dates[1:] > dates[:-1]):
            if np.any(dates[1:] == dates[:-1]):
                raise DuplicateDateError("dates must be unique")
            raise DimensionError("dates must be strictly increasing")
        mask = np.isnan(values) if self.mask is None else np.array(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise DimensionError("mask shape differs from values shape")
        if not np.all(np.isfinite(values[~mask])):
            raise ParseError("non-finite value in a cell marked present")
        values[mask] = np.nan
        for arr in (dates, values, mask):
            arr.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "assets", assets)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def window(self, rows: range, cols=None) -> np.ndarray:
        """Copy of the values in ``rows`` (and optionally ``cols``)."""
        _check_range(rows, self.T)
        block = self.values[rows.start:rows.stop]
        if cols is not None:
            block = block[:, np.asarray(cols, dtype=int)]
        return block.copy()

    def column_index(self, assets: Sequence[str]) -> np.ndarray:
        lookup = {a: i for i, a in enumerate(self.assets)}
        try:
            return np.array([lookup[a] for a in assets], dtype=int)
        except KeyError as exc:
            raise DimensionError(f"unknown asset {exc.args[0]!r}") from None

    def row_range(self, start=None, stop=None) -> range:
        """Half-open row range covering dates in [start, stop)."""
        lo = 0 if start is None else int(np.searchsorted(self.dates, np.datetime64(start, "D")))
        hi = self.T if stop is None else int(np.searchsorted(self.dates, np.datetime64(stop, "D")))
        return range(lo, hi)


@dataclass(frozen=True)
class IntervalPair:
    """Two contiguous half-open row ranges: ``prev`` immediately followed by ``next``."""

    prev: range
    next: range

    def __post_init__(self):
        if self.prev.step != 1 or self.next.step != 1:
            raise ValueError("interval ranges must have unit step")
        if self.prev.stop != self.next.start:
            raise ValueError(f"prev {self.prev} and next {self.next} are not contiguous")
        if len(self.prev) < 2 or len(self.next) < 2:
            raise ValueError("both intervals need at least 2 rows")

    @property
    def split(self) -> int:
        """The boundary time between the two intervals."""
        return self.prev.stop

    @property
    def union(self) -> range:
        return range(self.prev.start, self.next.stop)


def _check_range(rows: range, T: int) -> None:
    if rows.step != 1 or rows.start < 0 or rows.stop > T or rows.start > rows.stop:
        raise InfeasibleWindowError(f"row range {rows} outside panel of {T} rows")


# -- I/O ---------------------------------------------------------------------

def _parse_date(text: str, lineno: int) -> np.datetime64:
    try:
        return np.datetime64(_dt.date.fromisoformat(text.strip()), "D")
    except ValueError:
        raise ParseError(f"line {lineno}: bad ISO-8601 date {text!r}") from None


def load_panel(path) -> ReturnsPanel:
    """Read a return panel from CSV.

    The first header cell must be ``date``; the remaining headers are asset
    ids.  Empty cells (or ``NaN``) are missing.  Rows may come in any order.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "date":
            raise ParseError(f"{path}: first header cell must be 'date'")
        assets = [h.strip() for h in header[1:]]
        if not assets:
            raise DimensionError(f"{path}: no asset columns")
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DimensionError(
                    f"{path}:{lineno}: {len(row)} cells, expected {len(header)}"
                )
            dates.append(_parse_date(row[0], lineno))
            vals = []
            for cell in row[1:]:
                cell = cell.strip()
                if not cell:
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad number {cell!r}") from None
            rows.append(vals)
    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(rows, dtype=float).reshape(len(rows), len(assets))
    order = np.argsort(dates, kind="stable")
    dates, values = dates[order], values[order]
    if len(dates) > 1:
        dup = np.flatnonzero(dates[1:] == dates[:-1])
        if dup.size:
            raise DuplicateDateError(f"{path}: duplicate date {dates[dup[0]]}")
    # unparseable infinities are data errors too
    if np.isinf(values).any():
        raise ParseError(f"{path}: infinite value")
    return ReturnsPanel(dates, assets, values)


def save_panel(panel: ReturnsPanel, path) -> None:
    """Write ``panel`` in the CSV layout read by :func:`load_panel`."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *panel.assets])
        for d, row, miss in zip(panel.dates, panel.values, panel.mask):
            writer.writerow([str(d)] + ["" if m else repr(float(v)) for v, m in zip(row, miss)])


# -- filters -----------------------------------------------------------------

def _zero_or_missing_frac(block: np.ndarray) -> np.ndarray:
    bad = np.isnan(block) | (block == 0.0)
    return bad.mean(axis=0)


def eligible_columns(
    panel: ReturnsPanel,
    train: range,
    max_missing_frac: float = MAX_MISSING_FRAC,
    max_pair_corr: float = MAX_PAIR_CORR,
    candidates=None,
) -> np.ndarray:
    """Column indices passing both selection filters on the ``train`` rows.

    Columns with zero variance over their present values are dropped along
    with the sparse ones, since they cannot be standardized.
    """
    if not 0 < max_missing_frac < 1:
        raise ValueError("max_missing_frac must lie in (0, 1)")
    if not 0 < max_pair_corr <= 1:
        raise ValueError("max_pair_corr must lie in (0, 1]")
    cols = np.arange(panel.N) if candidates is None else np.asarray(candidates, dtype=int)
    block = panel.window(train, cols)
    keep = _zero_or_missing_frac(block) < max_missing_frac
    present = ~np.isnan(block)
    with np.errstate(invalid="ignore", divide="ignore"):
        sd = np.nanstd(block, axis=0, ddof=1)
        scale = np.nanmax(np.abs(block), axis=0) if block.size else sd
    keep &= (present.sum(axis=0) >= 2) & (sd > 1e-12 * np.where(scale > 0, scale, 1.0))
    cols, block = cols[keep], block[:, keep]
    if cols.size == 0:
        raise EmptySelectionError(f"no asset passes the filters in rows {train}")
    z = standardize(block)
    cov = z.T @ z
    d = np.sqrt(np.diag(cov))
    corr = cov / np.outer(d, d)
    kept: list[int] = []
    for i in range(cols.size):
        if all(corr[i, j] <= max_pair_corr for j in kept):
            kept.append(i)
    return cols[kept]


def filter_assets(
    panel: ReturnsPanel,
    train: range,
    max_missing_frac: float = MAX_MISSING_FRAC,
    max_pair_corr: float = MAX_PAIR_CORR,
) -> list[str]:
    """Asset ids eligible for a window whose train part is ``train``.

    Keeps assets with a fraction of zero-or-missing returns strictly below
    ``max_missing_frac``, then walks the survivors in listing order and drops
    any asset whose correlation with an already kept one exceeds
    ``max_pair_corr``.  Only rows in ``train`` are read.

    Raises
    ------
    EmptySelectionError
        If no asset survives.
    """
    cols = eligible_columns(panel, train, max_missing_frac, max_pair_corr)
    return [panel.assets[c] for c in cols]


# -- transforms --------------------------------------------------------------

def standardize(X, names=None) -> np.ndarray:
    """Z-score every column over its present values, then impute missing as 0.

    Uses the unbiased (ddof=1) standard deviation.

    Raises
    ------
    DegenerateColumnError
        If a column has fewer than two present values or zero spread.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("standardize expects a 2-D array")
    present = ~np.isnan(X)
    counts = present.sum(axis=0)
    bad = np.flatnonzero(counts < 2)
    if bad.size:
        raise DegenerateColumnError(
            f"column {_name(names, bad[0])} has fewer than 2 present values", _name(names, bad[0])
        )
    mean = np.nanmean(X, axis=0)
    centered = X - mean
    sd = np.sqrt(np.nansum(centered**2, axis=0) / (counts - 1))
    scale = np.nanmax(np.abs(X), axis=0)
    bad = np.flatnonzero(sd <= 1e-12 * np.where(scale > 0, scale, 1.0))
    if bad.size:
        raise DegenerateColumnError(
            f"column {_name(names, bad[0])} has zero variance", _name(names, bad[0])
        )
    Z = centered / sd
    Z[~present] = 0.0
    return Z


def _demean(X):
    out = X - np.nanmean(X, axis=0)
    out[np.isnan(out)] = 0.0
    return out


def _name(names, i):
    return names[i] if names is not None else int(i)


def shuffle_pair(union, seed, delta_train: int, delta: int):
    """Permute the rows of a prev+next block and split it again.

    Returns ``(prev, next)`` with ``delta_train`` and ``delta`` rows; both are
    random mixtures of the original two intervals.
    """
    union = np.asarray(union)
    if union.shape[0] != delta_train + delta:
        raise DimensionError(
            f"union has {union.shape[0]} rows, expected {delta_train} + {delta}"
        )
    perm = as_generator(seed).permutation(union.shape[0])
    mixed = union[perm]
    return mixed[:delta_train], mixed[delta_train:]


# -- sampling ----------------------------------------------------------------

def _split_bounds(cal: range, delta_train: int, delta: int) -> tuple[int, int]:
    if delta_train < 2 or delta < 2:
        raise InfeasibleWindowError("window lengths must be at least 2")
    lo, hi = cal.start + delta_train, cal.stop - delta
    if hi < lo:
        raise InfeasibleWindowError(
            f"range {cal} of length {len(cal)} cannot hold {delta_train} + {delta} rows"
        )
    return lo, hi


def sample_interval_pairs(cal: range, delta_train: int, delta: int, B: int, seed) -> list[IntervalPair]:
    """Draw ``B`` consecutive (prev, next) pairs inside ``cal``, with replacement.

    The split time is uniform over every position where both intervals fit.
    """
    lo, hi = _split_bounds(cal, delta_train, delta)
    splits = as_generator(seed).integers(lo, hi + 1, size=B)
    return [
        IntervalPair(range(int(t) - delta_train, int(t)), range(int(t), int(t) + delta))
        for t in splits
    ]


def sample_window(
    panel: ReturnsPanel,
    cal: range,
    delta_train: int,
    delta: int,
    n: int,
    rng: np.random.Generator,
    assets=None,
    shuffle: bool = False,
    standardized: bool = True,
    max_missing_frac: float = MAX_MISSING_FRAC,
    max_pair_corr: float = MAX_PAIR_CORR,
    max_tries: int = RETRY_CAP,
):
    """Draw one usable window pair and standardize both halves.

    A pair is usable when at least ``n`` assets pass the filters on its
    ``prev`` part and every chosen asset can be standardized in both halves.
    Unusable draws are repeated up to ``max_tries`` times.

    Parameters
    ----------
    assets : sequence of str, optional
        Fixed asset set.  When omitted, ``n`` eligible assets are drawn at
        random (without replacement) for every pair.
    standardized : bool
        When False the halves are only demeaned (missing cells set to 0),
        for covariance-scale work.

    Returns
    -------
    pair : IntervalPair
    cols : ndarray of int
    z_prev, z_next : ndarray
        Standardized data of the two halves (after shuffling, if requested).
    """
    lo, hi = _split_bounds(cal, delta_train, delta)
    fixed = None if assets is None else panel.column_index(assets)
    if fixed is not None:
        n = fixed.size
    for _ in range(max_tries):
        t = int(rng.integers(lo, hi + 1))
        pair = IntervalPair(range(t - delta_train, t), range(t, t + delta))
        try:
            ok = eligible_columns(panel, pair.prev, max_missing_frac, max_pair_corr, fixed)
        except EmptySelectionError:
            continue
        if fixed is not None:
            if ok.size != fixed.size:
                continue
            cols = fixed
        else:
            if ok.size < n:
                continue
            cols = np.sort(rng.choice(ok, size=n, replace=False))
        block = panel.window(pair.union, cols)
        if shuffle:
            prev, nxt = shuffle_pair(block, rng, delta_train, delta)
        else:
            prev, nxt = block[:delta_train], block[delta_train:]
        try:
            z_prev, z_next = standardize(prev), standardize(nxt)
        except DegenerateColumnError:
            continue
        if not standardized:
            z_prev, z_next = _demean(prev), _demean(nxt)
        return pair, cols, z_prev, z_next
    raise InsufficientAssetsError(
        f"no usable window with {n} assets after {max_tries} draws in rows {cal}"
    )
