import csv
import json

import numpy as np
import pytest

from aocov import bench
from aocov.bench import (
    SweepSpec,
    bootstrap_mean_band,
    bootstrap_means,
    bootstrap_p_value,
    eigenvalue_stability_experiment,
    entropy_experiment,
    run_backtest,
    run_synth_benchmark,
    summarize,
    synth_replication,
    write_records_csv,
    write_summary_jsonl,
)
from aocov.calibration import calibrate_ao
from aocov.data import ReturnsPanel
from aocov.errors import InfeasibleWindowError
from aocov.synth import SynthConfig, generate, to_panel


@pytest.fixture(scope="module")
def panel():
    return to_panel(generate(SynthConfig(n=8, T=1500, s=0.05, seed=12)).data)


@pytest.fixture(scope="module")
def calib(panel):
    return calibrate_ao(panel, range(0, 900), 40, 40, B=200, n=5, seed=3)


def spec(**kw):
    base = dict(delta_train=(40,), delta_test=(40,), n=(5,), replications=2, seed=1,
                oos=range(900, 1500), stride=25)
    base.update(kw)
    return SweepSpec(**base)


def test_record_count(panel, calib):
    s = spec()
    records = run_backtest(panel, calib, s)
    dates = len(range(900, 1500 - 40 + 1, 25))
    assert len(records) == 1 * 2 * dates * len(s.estimators) * len(s.metrics)
    assert {r.estimator for r in records} == set(s.estimators)
    assert all(r.look_ahead == (r.estimator == "oracle") for r in records)
    assert all(np.isfinite(r.value) for r in records if not r.skipped)


def test_oracle_dominates_on_shared_windows(panel, calib):
    records = run_backtest(panel, calib, spec(metrics=("frobenius",)))
    by_key = {}
    for r in records:
        by_key.setdefault((r.date_index, r.replication), {})[r.estimator] = r.value
    for vals in by_key.values():
        assert all(vals["oracle"] <= v + 1e-10 for v in vals.values())


def test_skips_are_counted_not_raised(panel, calib):
    vals = np.array(panel.values)
    vals[1000:1100, :5] = 0.0
    sparse = ReturnsPanel(panel.dates, panel.assets, vals)
    records = run_backtest(sparse, calib, spec(replications=1))
    skipped = [r for r in records if r.skipped]
    assert skipped and all(r.reason for r in skipped)
    assert len(records) == len(run_backtest(panel, calib, spec(replications=1)))


def test_calibration_must_precede_oos(panel, calib):
    with pytest.raises(InfeasibleWindowError):
        run_backtest(panel, calib, spec(oos=range(800, 1500)))


def test_missing_calibration(panel):
    with pytest.raises(ValueError):
        run_backtest(panel, None, spec())
    records = run_backtest(panel, None, spec(estimators=("sample", "nls_cv"), replications=1))
    assert {r.estimator for r in records} == {"sample", "nls_cv"}


def test_shuffle_flag_marks_records(panel, calib):
    records = run_backtest(panel, calib, spec(shuffle=True, replications=1))
    assert all(r.shuffle for r in records)
    ordered = run_backtest(panel, calib, spec(replications=1))
    assert [r.value for r in ordered] != [r.value for r in records]


def test_covariance_scale_and_raw_nls(panel, calib):
    records = run_backtest(panel, calib, spec(scale="covariance", nls_scale="returns", replications=1))
    assert all(np.isfinite(r.value) for r in records if not r.skipped)


class Tripwire:
    """Stands in for the test window; any use raises."""

    def __getattr__(self, name):
        raise AssertionError(f"test window accessed via {name}")

    def __array__(self, *args, **kwargs):
        raise AssertionError("test window converted to an array")


def test_causality_tripwire(panel, calib, rng):
    s = spec(estimators=("sample", "average_oracle", "nls_cv"))
    z = rng.standard_normal((40, 5))
    raw = rng.standard_normal((40, 5))
    out = bench._window_estimates(z, Tripwire(), raw, s, calib)
    assert set(out) == set(s.estimators)
    with pytest.raises(AssertionError):
        bench._window_estimates(z, Tripwire(), raw, spec(estimators=("oracle",)), calib)


def test_causality_perturbation(panel, calib, monkeypatch):
    seen = []
    real = bench._window_estimates

    def spy(z_train, z_test, raw_train, s, c):
        out = real(z_train, z_test, raw_train, s, c)
        seen.append({k: v[0].copy() for k, v in out.items()})
        return out

    monkeypatch.setattr(bench, "_window_estimates", spy)
    s = spec(replications=1, stride=50)
    run_backtest(panel, calib, s)
    before, seen[:] = list(seen), []
    vals = np.array(panel.values)
    t = 950
    vals[t:t + 40] = np.random.default_rng(0).standard_normal((40, vals.shape[1])) * 5
    run_backtest(ReturnsPanel(panel.dates, panel.assets, vals), calib, s)
    dates = list(range(900, 1500 - 40 + 1, 50))
    idx = dates.index(t)
    for name in ("sample", "average_oracle", "nls_cv"):
        np.testing.assert_array_equal(seen[idx][name], before[idx][name])
    assert not np.array_equal(seen[idx]["oracle"], before[idx]["oracle"])


def test_worker_count_does_not_change_records(panel, calib):
    a = run_backtest(panel, calib, spec(), workers=1)
    b = run_backtest(panel, calib, spec(), workers=4)
    assert a == b


def test_outputs(panel, calib, tmp_path):
    records = run_backtest(panel, calib, spec(replications=1))
    write_records_csv(records, tmp_path / "r.csv")
    with open(tmp_path / "r.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(records)
    assert rows[0]["estimator"] == records[0].estimator
    write_summary_jsonl(records, tmp_path / "s.jsonl")
    lines = [json.loads(x) for x in (tmp_path / "s.jsonl").read_text().splitlines()]
    assert lines == json.loads(json.dumps(summarize(records)))
    assert sum(x["count"] + x["skipped"] for x in lines) == len(records)


class TestBootstrap:
    def test_means_shape_and_determinism(self):
        x = np.arange(10.0)
        a = bootstrap_means(x, 50, np.random.default_rng(1))
        assert a.shape == (50,)
        assert np.array_equal(a, bootstrap_means(x, 50, np.random.default_rng(1)))

    def test_band_covers_mean(self, rng):
        x = rng.normal(2.0, 1.0, 400)
        lo, hi = bootstrap_mean_band(x, 2000, seed=0)
        assert lo < x.mean() < hi
        assert hi - lo == pytest.approx(2 * 1.96 * x.std() / 20, rel=0.15)

    def test_p_value(self, rng):
        assert bootstrap_p_value(rng.normal(1.0, 1.0, 300), 2000, seed=0) < 0.01
        assert bootstrap_p_value(rng.normal(0.0, 1.0, 300), 2000, seed=0) > 0.01

    def test_single_sample_band_undefined(self):
        lo, hi = bootstrap_mean_band(np.array([1.0]), 100)
        assert np.isnan(lo) and np.isnan(hi)


class TestDiagnostics:
    def test_entropy_profiles(self, panel):
        res = entropy_experiment(panel, range(0, 1500), 5, 60, seed=1, delta_train=40, delta=40, n_boot=300)
        for prof in (res.ordered, res.shuffled):
            assert prof.shape == (5,) and np.all((prof >= 0) & (prof <= 1))
        assert np.all(res.ordered_band[0] <= res.ordered) and np.all(res.ordered <= res.ordered_band[1])
        assert not res.degenerate

    def test_entropy_single_draw_flagged(self, panel):
        res = entropy_experiment(panel, range(0, 1500), 5, 1, seed=1, delta_train=40, delta=40, n_boot=100)
        assert res.degenerate and np.all(np.isnan(res.diff_band[0]))

    def test_entropy_stationary_within_bands(self):
        flat = to_panel(generate(SynthConfig(n=5, T=4000, s=0.0, seed=2)).data)
        res = entropy_experiment(flat, range(0, 4000), 5, 400, seed=2, delta_train=50, delta=50, n_boot=2000)
        lo, hi = res.diff_band
        assert np.mean((lo <= 0) & (0 <= hi)) >= 0.6

    def test_stability_stationary(self):
        flat = to_panel(generate(SynthConfig(n=5, T=6000, s=0.0, seed=5)).data)
        res = eigenvalue_stability_experiment(flat, range(0, 3000), range(3000, 6000), 5, 300, seed=1,
                                              delta_train=50, delta=50, n_boot=2000)
        assert res.d1.shape == res.d2.shape == (300,)
        # averaging past spectra cannot be worse than a single noisy past spectrum
        assert res.mean_d2 < 0

    def test_stability_needs_ordered_ranges(self, panel):
        with pytest.raises(InfeasibleWindowError):
            eigenvalue_stability_experiment(panel, range(0, 1000), range(900, 1500), 5, 10, seed=1,
                                            delta_train=40, delta=40)

    def test_stability_single_draw_flagged(self, panel):
        res = eigenvalue_stability_experiment(panel, range(0, 900), range(900, 1500), 5, 1, seed=1,
                                              delta_train=40, delta=40, n_boot=50)
        assert res.degenerate


def test_synth_replication_null_at_zero_rotation():
    cfg = SynthConfig(n=4, T=800, s=0.0, seed=3)
    dep, inv = synth_replication(cfg, 30, 30, 100, np.random.SeedSequence(1))
    assert dep > 0 and inv > 0


def test_synth_benchmark_summary_and_workers():
    kw = dict(replications=4, n=4, T=600, delta_train=30, delta_test=30, B=50, seed=2)
    a = run_synth_benchmark([0.0, 0.1], **kw)
    b = run_synth_benchmark([0.0, 0.1], workers=3, **kw)
    assert [x.as_dict() for x in a] == [x.as_dict() for x in b]
    assert [x.s for x in a] == [0.0, 0.1] and all(x.replications == 4 for x in a)
    assert a[0].diffs.shape == (4,)
    assert a[1].mean == pytest.approx(a[1].mean_time_dependent - a[1].mean_time_invariant)


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(replications=0)
    with pytest.raises(ValueError):
        SweepSpec(estimators=("bogus",))
    assert len(SweepSpec(delta_train=(40, 60), delta_test=(20,), n=(5, 6)).grid) == 4
