"""Experiment harness: rolling backtests, the synthetic rotation benchmark and
the stationarity diagnostics.

All randomness is keyed by ``(seed, job coordinates)`` through
``numpy.random.SeedSequence`` so that every estimator inside one job sees
the same window and asset draw, and results do not depend on the number of
workers.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .calibration import AOCalibration, draw_samples, resolve_workers
from .data import (
    ReturnsPanel,
    eligible_columns,
    shuffle_pair,
    standardize,
)
from .errors import DegenerateColumnError, EmptySelectionError, InfeasibleWindowError, NotPositiveDefiniteError, NumericError
from .estimators import (
    ESTIMATORS,
    DEFAULT_FOLDS,
    apply_rie,
    nls_cv_eigenvalues,
    oracle_eigenvalues,
    rescale_to_covariance,
)
from .linalg import cov_to_corr, sample_covariance
from .metrics import eigenvalue_deviation, frobenius, kl_divergence, overlap_entropy
from .portfolio import gmv_weights, realized_volatility
from .synth import SynthConfig, ao_from_true, generate

__all__ = [
    "BenchmarkRecord",
    "SweepSpec",
    "METRICS",
    "run_backtest",
    "summarize",
    "write_records_csv",
    "write_summary_jsonl",
    "SynthSummary",
    "synth_replication",
    "run_synth_benchmark",
    "EntropyResult",
    "entropy_experiment",
    "StabilityResult",
    "eigenvalue_stability_experiment",
    "bootstrap_mean_band",
    "bootstrap_p_value",
]

METRICS = ("frobenius", "kl", "volatility")
LOOK_AHEAD = ("oracle",)
DEFAULT_BOOT = 10_000


@dataclass(frozen=True)
class BenchmarkRecord:
    estimator: str
    date_index: int
    date: str
    delta_train: int
    delta_test: int
    n: int
    replication: int
    metric: str
    value: float
    skipped: bool = False
    reason: str = ""
    shuffle: bool = False
    look_ahead: bool = False


@dataclass(frozen=True)
class SweepSpec:
    """Grid and options for :func:`run_backtest`.

    ``oos`` is the half-open range of rows in which test windows must lie;
    evaluation dates are every ``stride``-th feasible start.  ``scale``
    selects whether Frobenius and KL compare correlation matrices or
    rescaled covariances; GMV volatility always uses covariances.
    ``nls_scale`` runs the cross-validated shrinkage on z-scores or on raw
    demeaned returns.
    """

    delta_train: tuple = (252,)
    delta_test: tuple = (252,)
    n: tuple = (100,)
    estimators: tuple = ESTIMATORS
    metrics: tuple = METRICS
    replications: int = 1
    seed: int = 0
    shuffle: bool = False
    oos: range | None = None
    stride: int = 5
    folds: int = DEFAULT_FOLDS
    scale: str = "correlation"
    nls_scale: str = "zscore"
    filters: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("delta_train", "delta_test", "n", "estimators", "metrics"):
            value = getattr(self, name)
            value = (value,) if isinstance(value, (int, str)) else tuple(value)
            if not value:
                raise ValueError(f"empty grid axis {name!r}")
            object.__setattr__(self, name, value)
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if min(self.delta_train) < 2 or min(self.delta_test) < 2:
            raise ValueError("window lengths must be at least 2")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise ValueError(f"unknown estimators {sorted(bad)}")
        bad = set(self.metrics) - set(METRICS)
        if bad:
            raise ValueError(f"unknown metrics {sorted(bad)}")
        if self.scale not in ("correlation", "covariance"):
            raise ValueError(f"unknown scale {self.scale!r}")
        if self.nls_scale not in ("zscore", "returns"):
            raise ValueError(f"unknown nls_scale {self.nls_scale!r}")
        if self.stride < 1:
            raise ValueError("stride must be positive")

    @property
    def grid(self):
        return list(product(self.delta_train, self.delta_test, self.n))


def _calibration_lookup(calibrations):
    if calibrations is None:
        return {}
    if isinstance(calibrations, AOCalibration):
        calibrations = [calibrations]
    if isinstance(calibrations, Mapping):
        calibrations = list(calibrations.values())
    return {(c.n, c.delta_train): c for c in calibrations}


def _eval_dates(panel, oos, delta_train, delta_test, stride):
    lo = max(oos.start, delta_train)
    hi = oos.stop - delta_test
    return list(range(lo, hi + 1, stride))


def _demeaned_cov(block):
    centered = block - np.nanmean(block, axis=0)
    centered[np.isnan(centered)] = 0.0
    return sample_covariance(centered)


def _window_estimates(z_train, z_test, raw_train, spec, calibration):
    """Correlation- and covariance-scale estimates for one train/test pair.

    Only the look-ahead oracle reads ``z_test``.
    """
    C_train = sample_covariance(z_train)
    _, V = np.linalg.eigh(C_train)
    train_var = np.nanvar(raw_train, axis=0, ddof=1)
    out = {}
    for name in spec.estimators:
        if name == "sample":
            corr = C_train
        elif name == "oracle":
            corr = apply_rie(V, oracle_eigenvalues(V, sample_covariance(z_test)), name).matrix
        elif name == "average_oracle":
            corr = apply_rie(V, calibration.lambdas, name).matrix
        elif spec.nls_scale == "zscore":
            corr = apply_rie(V, nls_cv_eigenvalues(z_train, spec.folds), name).matrix
        else:
            centered = raw_train - np.nanmean(raw_train, axis=0)
            centered[np.isnan(centered)] = 0.0
            _, Vr = np.linalg.eigh(sample_covariance(centered))
            cov = apply_rie(Vr, nls_cv_eigenvalues(centered, spec.folds), name).matrix
            out[name] = (cov_to_corr(cov)[0], cov)
            continue
        out[name] = (corr, rescale_to_covariance(corr, train_var).matrix)
    return out


def _job(panel, spec, calibration, g, d_idx, t, rep, delta_train, delta_test, n):
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(g, d_idx, rep)))
    date = str(panel.dates[t]) if t < panel.T else ""
    common = dict(date_index=t, date=date, delta_train=delta_train, delta_test=delta_test,
                  n=n, replication=rep, shuffle=spec.shuffle)

    def skip_all(reason):
        return [BenchmarkRecord(estimator=e, metric=m, value=float("nan"), skipped=True,
                                reason=reason, look_ahead=e in LOOK_AHEAD, **common)
                for e in spec.estimators for m in spec.metrics]

    if t - delta_train < 0 or t + delta_test > panel.T:
        return skip_all("infeasible window")
    try:
        ok = eligible_columns(panel, range(t - delta_train, t), **spec.filters)
    except EmptySelectionError:
        return skip_all("no eligible assets")
    if ok.size < n:
        return skip_all(f"only {ok.size} eligible assets")
    cols = np.sort(rng.choice(ok, size=n, replace=False))
    block = panel.window(range(t - delta_train, t + delta_test), cols)
    if spec.shuffle:
        raw_train, raw_test = shuffle_pair(block, rng, delta_train, delta_test)
    else:
        raw_train, raw_test = block[:delta_train], block[delta_train:]
    try:
        z_train, z_test = standardize(raw_train), standardize(raw_test)
    except DegenerateColumnError as exc:
        return skip_all(f"degenerate column {exc.column}")
    try:
        estimates = _window_estimates(z_train, z_test, raw_train, spec, calibration)
    except NumericError as exc:
        return skip_all(f"numeric error: {exc}")
    C_test = sample_covariance(z_test)
    S_test = _demeaned_cov(raw_test)
    records = []
    for name in spec.estimators:
        corr, cov = estimates[name]
        est, target = (corr, C_test) if spec.scale == "correlation" else (cov, S_test)
        for metric in spec.metrics:
            value, skipped, reason = float("nan"), False, ""
            try:
                if metric == "frobenius":
                    value = frobenius(est, target)
                elif metric == "kl":
                    value = kl_divergence(target, est, base_n=True)
                else:
                    value = realized_volatility(gmv_weights(cov), S_test)
            except NotPositiveDefiniteError as exc:
                skipped, reason = True, str(exc)
            except NumericError as exc:
                skipped, reason = True, f"numeric error: {exc}"
            records.append(BenchmarkRecord(estimator=name, metric=metric, value=value,
                                           skipped=skipped, reason=reason,
                                           look_ahead=name in LOOK_AHEAD, **common))
    return records


def run_backtest(panel: ReturnsPanel, calibrations, spec: SweepSpec, workers=None) -> list[BenchmarkRecord]:
    """Rolling out-of-sample comparison of the estimators in ``spec``.

    For every grid point ``(delta_train, delta_test, n)``, replication and
    evaluation date ``t``: draw ``n`` assets eligible on the train window
    ``[t - delta_train, t)``, optionally shuffle train and test rows
    together, standardize both halves, build each estimator from the train
    half and score it against the test half.  The oracle is the only
    estimator that looks at the test window and is flagged ``look_ahead``.

    ``calibrations`` is one :class:`AOCalibration` or several, matched to
    grid points by ``(n, delta_train)``.  Window problems become skipped
    records, never exceptions, so the record count is always
    ``|grid| * replications * dates * estimators * metrics``.
    """
    oos = spec.oos if spec.oos is not None else range(0, panel.T)
    lookup = _calibration_lookup(calibrations)
    jobs = []
    for g, (dtr, dte, n) in enumerate(spec.grid):
        cal = None
        if "average_oracle" in spec.estimators:
            cal = lookup.get((n, dtr))
            if cal is None:
                raise ValueError(f"no calibration for n={n}, delta_train={dtr}")
            if cal.cal_range[1] > oos.start:
                raise InfeasibleWindowError(
                    f"out-of-sample rows start at {oos.start}, before the calibration end {cal.cal_range[1]}"
                )
        dates = _eval_dates(panel, oos, dtr, dte, spec.stride)
        for rep in range(spec.replications):
            for d_idx, t in enumerate(dates):
                jobs.append((g, d_idx, t, rep, dtr, dte, n, cal))

    def run(job):
        g, d_idx, t, rep, dtr, dte, n, cal = job
        return _job(panel, spec, cal, g, d_idx, t, rep, dtr, dte, n)

    workers = resolve_workers(workers)
    if workers == 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs, chunksize=16))
    return [r for chunk in results for r in chunk]


# -- output ------------------------------------------------------------------

RECORD_FIELDS = [f.name for f in fields(BenchmarkRecord)]


def write_records_csv(records: Sequence[BenchmarkRecord], path) -> None:
    """One row per record, columns in :class:`BenchmarkRecord` field order."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in records:
            row = asdict(r)
            row["value"] = "" if math.isnan(r.value) else repr(r.value)
            writer.writerow([row[k] for k in RECORD_FIELDS])


def summarize(records: Sequence[BenchmarkRecord]) -> list[dict]:
    """Mean, standard error and skip count per (grid point, estimator, metric)."""
    groups: dict = {}
    for r in records:
        key = (r.delta_train, r.delta_test, r.n, r.shuffle, r.estimator, r.metric)
        groups.setdefault(key, []).append(r)
    rows = []
    for key, recs in groups.items():
        vals = np.array([r.value for r in recs if not r.skipped])
        count = int(vals.size)
        mean = float(vals.mean()) if count else None
        se = float(vals.std(ddof=1) / np.sqrt(count)) if count > 1 else None
        dtr, dte, n, shuffle, est, metric = key
        rows.append({
            "delta_train": dtr, "delta_test": dte, "n": n, "shuffle": shuffle,
            "estimator": est, "metric": metric, "count": count, "mean": mean, "se": se,
            "skipped": len(recs) - count, "look_ahead": est in LOOK_AHEAD,
        })
    return rows


def write_summary_jsonl(records: Sequence[BenchmarkRecord], path) -> None:
    with Path(path).open("w") as fh:
        for row in summarize(records):
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# -- synthetic rotation benchmark -----------------------------------------------

def _batch_cov(windows):
    centered = windows - windows.mean(axis=1, keepdims=True)
    return centered.swapaxes(1, 2) @ centered / (windows.shape[1] - 1)


def _mean_overlap(X, splits, delta_train, delta, shuffle_rng=None):
    offsets = np.arange(-delta_train, delta)
    idx = splits[:, None] + offsets[None, :]
    if shuffle_rng is not None:
        idx = shuffle_rng.permuted(idx, axis=1)
    windows = X[idx]
    _, Vp = np.linalg.eigh(_batch_cov(windows[:, :delta_train]))
    _, Vn = np.linalg.eigh(_batch_cov(windows[:, delta_train:]))
    return ((Vp.swapaxes(1, 2) @ Vn) ** 2).mean(axis=0)


def synth_replication(cfg: SynthConfig, delta_train: int, delta_test: int, B: int, sample_seed) -> tuple:
    """One replication of the time-dependent versus time-invariant comparison.

    The last ``delta_test`` rows are the test window, the rest is the
    calibration window.  Two average overlaps are estimated from ``B``
    random consecutive pairs inside the calibration window: one on the data
    in time order, one with the rows of every pair shuffled.  Each yields
    eigenvalues ``<H2> lambda_true`` placed on the eigenbasis of the last
    ``delta_train`` calibration rows.

    Returns
    -------
    (frobenius_time_dependent, frobenius_time_invariant)
    """
    X = generate(cfg).data
    cal_len = cfg.T - delta_test
    if cal_len < 2 * delta_train + delta_test:
        raise InfeasibleWindowError("calibration window too short")
    rng = np.random.default_rng(sample_seed)
    splits = rng.integers(delta_train, cal_len - delta_test + 1, size=B)
    ordered = _mean_overlap(X, splits, delta_train, delta_test)
    shuffled = _mean_overlap(X, splits, delta_train, delta_test, rng)
    _, V = np.linalg.eigh(sample_covariance(X[cal_len - delta_train:cal_len]))
    S_test = sample_covariance(X[cal_len:])
    lam = cfg.eigenvalues
    dep = frobenius(apply_rie(V, ao_from_true(ordered, lam)).matrix, S_test)
    inv = frobenius(apply_rie(V, ao_from_true(shuffled, lam)).matrix, S_test)
    return dep, inv


@dataclass(frozen=True)
class SynthSummary:
    law: str
    nu: float | None
    s: float
    mean: float
    se: float
    replications: int
    mean_time_dependent: float
    mean_time_invariant: float
    diffs: np.ndarray = field(repr=False, compare=False)

    @property
    def z(self) -> float:
        return self.mean / self.se if self.se > 0 else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("diffs")
        return d


def run_synth_benchmark(
    s_values: Sequence[float],
    laws: Sequence = ("normal",),
    replications: int = 1000,
    n: int = 10,
    T: int = 10_000,
    delta_train: int = 50,
    delta_test: int = 50,
    B: int = 10_000,
    seed: int = 0,
    smallest: float = 1.0,
    ratio: float = 1.5,
    workers=None,
) -> list[SynthSummary]:
    """Sweep the rotation scale ``s`` and the factor law.

    ``laws`` items are ``"normal"`` or ``("student_t", nu)``.  Replication
    ``r`` uses the same seeds for every ``s`` and law, so the per-replication
    differences are paired across the sweep.
    """
    workers = resolve_workers(workers)
    out = []
    for law in laws:
        name, nu = (law, None) if isinstance(law, str) else (law[0], float(law[1]))
        for s in s_values:
            def one(r, s=s, name=name, nu=nu):
                path_seed = np.random.SeedSequence(seed, spawn_key=(r, 0)).generate_state(1)[0]
                cfg = SynthConfig(n=n, T=T, s=float(s), smallest=smallest, ratio=ratio, law=name,
                                  nu=nu if nu is not None else 5.0, seed=int(path_seed))
                return synth_replication(cfg, delta_train, delta_test, B,
                                         np.random.SeedSequence(seed, spawn_key=(r, 1)))
            if workers == 1:
                pairs = [one(r) for r in range(replications)]
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    pairs = list(pool.map(one, range(replications)))
            pairs = np.array(pairs)
            diffs = pairs[:, 0] - pairs[:, 1]
            se = float(diffs.std(ddof=1) / np.sqrt(len(diffs))) if len(diffs) > 1 else float("nan")
            out.append(SynthSummary(name, nu, float(s), float(diffs.mean()), se, replications,
                                    float(pairs[:, 0].mean()), float(pairs[:, 1].mean()), diffs))
    return out


# -- bootstrap helpers -------------------------------------------------------------

def bootstrap_means(samples, n_boot: int, rng) -> np.ndarray:
    """Bootstrap distribution of the mean of ``samples`` along axis 0."""
    samples = np.asarray(samples, dtype=float)
    B = samples.shape[0]
    flat = samples.reshape(B, -1)
    out = np.empty((n_boot, flat.shape[1]))
    step = 256
    for lo in range(0, n_boot, step):
        hi = min(lo + step, n_boot)
        counts = rng.multinomial(B, np.full(B, 1.0 / B), size=hi - lo)
        out[lo:hi] = counts @ flat / B
    return out.reshape((n_boot,) + samples.shape[1:])


def bootstrap_mean_band(samples, n_boot: int = DEFAULT_BOOT, level: float = 0.95, seed=0):
    """Percentile bootstrap band of the mean; NaN when fewer than 2 samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 2:
        nan = np.full(samples.shape[1:], np.nan)
        return nan, nan.copy()
    boots = bootstrap_means(samples, n_boot, np.random.default_rng(seed))
    a = (1 - level) / 2
    return np.quantile(boots, a, axis=0), np.quantile(boots, 1 - a, axis=0)


def bootstrap_p_value(samples, n_boot: int = DEFAULT_BOOT, seed=0) -> float:
    """Two-sided percentile bootstrap p-value for a zero mean."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return float("nan")
    boots = bootstrap_means(samples, n_boot, np.random.default_rng(seed))
    p = 2 * min(np.mean(boots <= 0), np.mean(boots >= 0))
    return float(min(p, 1.0))


# -- diagnostics ---------------------------------------------------------------

@dataclass(frozen=True)
class EntropyResult:
    """Rank-wise mean overlap entropy, ordered versus shuffled windows.

    Bands are 95% percentile bootstrap bands of the means; ``diff_band``
    refers to ordered minus shuffled, computed on paired draws.  All bands
    are NaN and ``degenerate`` is True when ``B == 1``.
    """

    ordered: np.ndarray
    shuffled: np.ndarray
    ordered_band: tuple
    shuffled_band: tuple
    diff_band: tuple
    B: int
    degenerate: bool

    @property
    def difference(self) -> np.ndarray:
        return self.ordered - self.shuffled


def _entropy_profiles(chunk):
    H2 = np.stack([(s.V_prev.T @ s.V_next) ** 2 for s in chunk])
    return overlap_entropy(H2)


def entropy_experiment(
    panel: ReturnsPanel,
    cal: range,
    n: int,
    B: int,
    seed: int = 0,
    delta_train: int = 252,
    delta: int = 252,
    n_boot: int = DEFAULT_BOOT,
    workers=None,
    filters=None,
) -> EntropyResult:
    """Overlap entropy of ordered and shuffled window pairs.

    Both variants use the same windows and asset subsets (same per-sample
    seeds); only the shuffling differs.
    """
    kw = dict(workers=workers, filters=filters)
    ordered = np.concatenate(draw_samples(panel, cal, delta_train, delta, B, n, seed,
                                          _entropy_profiles, **kw))
    shuffled = np.concatenate(draw_samples(panel, cal, delta_train, delta, B, n, seed,
                                           _entropy_profiles, shuffle=True, **kw))
    band_seed = np.random.SeedSequence(seed, spawn_key=(2**32 - 1,))
    return EntropyResult(
        ordered=ordered.mean(axis=0),
        shuffled=shuffled.mean(axis=0),
        ordered_band=bootstrap_mean_band(ordered, n_boot, seed=band_seed),
        shuffled_band=bootstrap_mean_band(shuffled, n_boot, seed=band_seed),
        diff_band=bootstrap_mean_band(ordered - shuffled, n_boot, seed=band_seed),
        B=B,
        degenerate=B < 2,
    )


@dataclass(frozen=True)
class StabilityResult:
    """Average past spectrum versus most recent spectrum as predictors.

    ``d1`` / ``d2`` hold one value per test-range window:
    ``D(<lam_next>, lam_next) - D(lam_prev, lam_next)`` under L1 / L2.
    """

    mean_next: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    mean_d1: float
    mean_d2: float
    p_d1: float
    p_d2: float
    degenerate: bool


def eigenvalue_stability_experiment(
    panel: ReturnsPanel,
    cal: range,
    test: range,
    n: int,
    B: int,
    seed: int = 0,
    delta_train: int = 252,
    delta: int = 252,
    n_boot: int = DEFAULT_BOOT,
    workers=None,
    filters=None,
) -> StabilityResult:
    """Is ``<lam_next>`` from the calibration range a better guess than ``lam_prev``?"""
    if cal.stop > test.start:
        raise InfeasibleWindowError("calibration range must end before the test range")
    kw = dict(workers=workers, filters=filters)
    lam_next = np.concatenate(draw_samples(
        panel, cal, delta_train, delta, B, n, seed,
        lambda chunk: np.stack([s.lam_next for s in chunk]), **kw))
    mean_next = lam_next.mean(axis=0)
    test_seed = np.random.SeedSequence(seed, spawn_key=(2**32 - 2,)).generate_state(1)[0]
    pairs = np.concatenate(draw_samples(
        panel, test, delta_train, delta, B, n, int(test_seed),
        lambda chunk: np.stack([np.stack([s.lam_prev, s.lam_next]) for s in chunk]), **kw))
    d1 = np.array([eigenvalue_deviation(mean_next, nx, "L1") - eigenvalue_deviation(pv, nx, "L1")
                   for pv, nx in pairs])
    d2 = np.array([eigenvalue_deviation(mean_next, nx, "L2") - eigenvalue_deviation(pv, nx, "L2")
                   for pv, nx in pairs])
    boot_seed = np.random.SeedSequence(seed, spawn_key=(2**32 - 3,))
    return StabilityResult(
        mean_next=mean_next,
        d1=d1,
        d2=d2,
        mean_d1=float(d1.mean()),
        mean_d2=float(d2.mean()),
        p_d1=bootstrap_p_value(d1, n_boot, boot_seed),
        p_d2=bootstrap_p_value(d2, n_boot, boot_seed),
        degenerate=B < 2,
    )
