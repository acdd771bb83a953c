"""Command line entry point: ``aocov {calibrate,filter,backtest,synth,diagnose}``.

Settings are resolved as command-line flags > ``--config`` file > defaults.
The config file is flat ``key = value`` text using :class:`RunConfig` field
names; ``#`` starts a comment.

Exit codes: 0 success, 1 usage, 2 data error, 3 numeric error,
4 infeasible windows.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import bench, calibration, data, estimators, synth
from .errors import AOCovError, DataError, DimensionError, InfeasibleWindowError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 1, 2, 3, 4
STOCHASTIC = ("calibrate", "backtest", "synth", "diagnose")
ALIASES = {"ao": "average_oracle", "nls": "nls_cv", "sample": "sample", "oracle": "oracle"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str = ""
    input: str | None = None
    output: str | None = None
    calibration: str | None = None
    config: str | None = None
    summary: str | None = None
    lambda_out: str | None = None
    delta_train: int = 252
    delta: int = 252
    delta_test: int = 252
    n: int = 100
    B: int = 10_000
    k: int = estimators.DEFAULT_FOLDS
    seed: int | None = None
    estimators: str = ",".join(estimators.ESTIMATORS)
    metrics: str = ",".join(bench.METRICS)
    shuffle: bool = False
    mode: str = "correlation"
    nls_scale: str = "zscore"
    assets: str | None = None
    variances: str | None = None
    cal_start: str | None = None
    cal_end: str | None = None
    oos_start: str | None = None
    oos_end: str | None = None
    train_end: str | None = None
    stride: int = 5
    replications: int = 1
    with_overlap: bool = False
    max_missing_frac: float = data.MAX_MISSING_FRAC
    max_pair_corr: float = data.MAX_PAIR_CORR
    workers: int | None = None
    n_boot: int = bench.DEFAULT_BOOT
    kind: str = "entropy"
    s: float = 0.0
    T: int = 10_000
    law: str = "normal"
    nu: float = 5.0
    smallest: float = 1.0
    ratio: float = 1.5
    sweep: str | None = None


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
# flags that appear on every subcommand
COMMON = ("config", "seed", "workers", "output")
SUBCOMMAND_FLAGS = {
    "calibrate": ("input", "delta_train", "delta", "n", "B", "assets", "cal_start", "cal_end",
                  "with_overlap", "shuffle", "mode", "max_missing_frac", "max_pair_corr"),
    "filter": ("input", "calibration", "assets", "train_end", "mode", "variances",
               "max_missing_frac", "max_pair_corr"),
    "backtest": ("input", "calibration", "summary", "delta_train", "delta_test", "n", "k",
                 "estimators", "metrics", "shuffle", "mode", "nls_scale", "oos_start", "oos_end",
                 "stride", "replications", "max_missing_frac", "max_pair_corr"),
    "synth": ("n", "T", "s", "law", "nu", "smallest", "ratio", "lambda_out", "sweep",
              "replications", "delta_train", "delta_test", "B"),
    "diagnose": ("kind", "input", "delta_train", "delta", "n", "B", "shuffle", "cal_start",
                 "cal_end", "oos_start", "oos_end", "n_boot", "max_missing_frac", "max_pair_corr"),
}

HELP = {
    "input": "input panel CSV (date column + one column per asset)",
    "output": "output file",
    "calibration": "calibration file written by 'calibrate'",
    "config": "flat key=value config file; CLI flags override it",
    "summary": "JSON-lines summary path (default: OUTPUT.summary.jsonl)",
    "lambda_out": "sidecar CSV for the true eigenvalues",
    "delta_train": "train / prev window length (rows)",
    "delta": "next window length used for calibration (rows)",
    "delta_test": "test window length (rows)",
    "n": "number of assets per window",
    "B": "number of bootstrap window pairs",
    "k": "folds of the cross-validated shrinkage",
    "seed": "random seed (mandatory for stochastic subcommands)",
    "estimators": "comma list from: " + ",".join(estimators.ESTIMATORS) + " (aliases ao, nls)",
    "metrics": "comma list from: " + ",".join(bench.METRICS),
    "shuffle": "shuffle rows within each window pair",
    "mode": "correlation (default) or covariance scale",
    "nls_scale": "run the shrinkage on z-scores (zscore) or raw returns (returns)",
    "assets": "comma list of asset ids (fixed asset set)",
    "variances": "comma list of variances used to rescale the filtered correlation",
    "cal_start": "first date of the calibration range (inclusive)",
    "cal_end": "end date of the calibration range (exclusive)",
    "oos_start": "first date of the out-of-sample / test range",
    "oos_end": "end date of the out-of-sample / test range (exclusive)",
    "train_end": "end date (exclusive) of the train window to filter",
    "stride": "rows between evaluation dates",
    "replications": "random asset draws per date, or synthetic replications",
    "with_overlap": "also store the average overlap matrix",
    "max_missing_frac": "maximum fraction of zero-or-missing train returns",
    "max_pair_corr": "maximum pairwise train correlation",
    "workers": "worker threads (default: $AOCOV_WORKERS or 1)",
    "n_boot": "bootstrap resamples for bands and p-values",
    "kind": "diagnostic: entropy, overlap, separability or stability",
    "s": "rotation angle standard deviation",
    "T": "number of synthetic records",
    "law": "factor law: normal or student_t",
    "nu": "Student-t degrees of freedom",
    "smallest": "smallest true eigenvalue",
    "ratio": "ratio of the geometric eigenvalue progression",
    "sweep": "comma list of s values: run the synthetic benchmark instead",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aocov", description="Average Oracle covariance filtering toolkit")
    subs = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for cmd, own in SUBCOMMAND_FLAGS.items():
        sp = subs.add_parser(cmd, argument_default=argparse.SUPPRESS, help=f"{cmd} subcommand")
        for name in COMMON + own:
            if name == "kind":
                sp.add_argument("kind", choices=("entropy", "overlap", "separability", "stability"),
                                help=HELP["kind"])
                continue
            kind = FIELD_TYPES[name]
            if kind == "bool":
                sp.add_argument(_flag(name), action="store_true", help=HELP[name])
            else:
                conv = {"int": int, "int | None": int, "float": float}.get(kind, str)
                sp.add_argument(_flag(name), type=conv, help=HELP[name])
    return parser


def _read_config_file(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in FIELD_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        kind = FIELD_TYPES[key]
        if kind == "bool":
            out[key] = value.lower() in ("1", "true", "yes", "on")
        elif kind.startswith("int"):
            out[key] = int(value)
        elif kind == "float":
            out[key] = float(value)
        else:
            out[key] = value
    return out


def resolve_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    if not ns.get("subcommand"):
        raise UsageError("aocov: a subcommand is required (calibrate, filter, backtest, synth, diagnose)")
    merged = {}
    if ns.get("config"):
        if not Path(ns["config"]).is_file():
            raise UsageError(f"config file {ns['config']} not found")
        merged.update(_read_config_file(ns["config"]))
    merged.update(ns)
    cfg = RunConfig(**merged)
    for name in ("delta_train", "delta", "delta_test"):
        if getattr(cfg, name) < 2:
            raise UsageError(f"{_flag(name)} must be at least 2")
    if cfg.subcommand in STOCHASTIC and cfg.seed is None:
        raise UsageError(f"{cfg.subcommand}: --seed is required")
    if cfg.mode not in ("correlation", "covariance"):
        raise UsageError("--mode must be correlation or covariance")
    return cfg


def _need_file(cfg, name):
    value = getattr(cfg, name)
    if not value:
        raise UsageError(f"{cfg.subcommand}: {_flag(name)} is required")
    if not Path(value).is_file():
        raise UsageError(f"{cfg.subcommand}: {value} does not exist")
    return value


def _need_output(cfg):
    if not cfg.output:
        raise UsageError(f"{cfg.subcommand}: --output is required")
    return cfg.output


def _filters(cfg):
    return {"max_missing_frac": cfg.max_missing_frac, "max_pair_corr": cfg.max_pair_corr}


def _split(text):
    return [x.strip() for x in text.split(",") if x.strip()] if text else []


def write_matrix_csv(matrix, assets, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["asset", *assets])
        for a, row in zip(assets, np.asarray(matrix)):
            writer.writerow([a] + [repr(float(v)) for v in row])


def read_matrix_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    assets = rows[0][1:]
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return values, assets


# -- subcommands -------------------------------------------------------------

def cmd_calibrate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    panel = data.load_panel(_need_file(cfg, "input"))
    path = _need_output(cfg)
    cal = panel.row_range(cfg.cal_start, cfg.cal_end)
    assets = _split(cfg.assets) or None
    result = calibration.calibrate_ao(
        panel, cal, cfg.delta_train, cfg.delta, cfg.B, cfg.n, cfg.seed, assets=assets,
        with_overlap=cfg.with_overlap, standardized=cfg.mode == "correlation",
        shuffle=cfg.shuffle, workers=cfg.workers, filters=_filters(cfg),
    )
    calibration.save_calibration(result, path)
    print("rank\teigenvalue\tinverse", file=out)
    for i, lam in enumerate(result.lambdas):
        print(f"{i}\t{lam:.10g}\t{1.0 / lam:.10g}", file=out)
    return EXIT_OK


def cmd_filter(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    panel = data.load_panel(_need_file(cfg, "input"))
    cal = calibration.load_calibration(_need_file(cfg, "calibration"))
    path = _need_output(cfg)
    stop = panel.row_range(None, cfg.train_end).stop
    train = range(stop - cal.delta_train, stop)
    if train.start < 0:
        raise InfeasibleWindowError(f"train window of {cal.delta_train} rows does not fit before row {stop}")
    assets = _split(cfg.assets) or (list(cal.assets) if cal.assets else None)
    if assets is None:
        eligible = data.filter_assets(panel, train, cfg.max_missing_frac, cfg.max_pair_corr)
        if len(eligible) < cal.n:
            raise DimensionError(f"only {len(eligible)} eligible assets, calibration needs {cal.n}")
        assets = eligible[: cal.n]
    if len(assets) != cal.n:
        raise DimensionError(f"{len(assets)} assets given, calibration n={cal.n}")
    raw = panel.window(train, panel.column_index(assets))
    z = data.standardize(raw, names=assets)
    filtered = calibration.apply_ao(cal, z)
    matrix = filtered.matrix
    if cfg.mode == "covariance":
        var = np.array([float(v) for v in _split(cfg.variances)]) if cfg.variances else \
            np.nanvar(raw, axis=0, ddof=1)
        matrix = estimators.rescale_to_covariance(filtered, var).matrix
    write_matrix_csv(matrix, assets, path)
    print(f"wrote {len(assets)}x{len(assets)} {cfg.mode} matrix to {path}", file=out)
    return EXIT_OK


def cmd_backtest(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    panel = data.load_panel(_need_file(cfg, "input"))
    path = _need_output(cfg)
    names = [ALIASES.get(e, e) for e in _split(cfg.estimators)]
    unknown = [e for e in names if e not in estimators.ESTIMATORS]
    if unknown:
        raise UsageError(f"unknown estimator(s) {', '.join(unknown)}")
    cals = None
    if "average_oracle" in names:
        cals = [calibration.load_calibration(p) for p in _split(_need_file(cfg, "calibration"))]
    spec = bench.SweepSpec(
        delta_train=(cfg.delta_train,), delta_test=(cfg.delta_test,), n=(cfg.n,),
        estimators=tuple(names), metrics=tuple(_split(cfg.metrics)),
        replications=cfg.replications, seed=cfg.seed, shuffle=cfg.shuffle,
        oos=panel.row_range(cfg.oos_start, cfg.oos_end), stride=cfg.stride, folds=cfg.k,
        scale=cfg.mode, nls_scale=cfg.nls_scale, filters=_filters(cfg),
    )
    records = bench.run_backtest(panel, cals, spec, workers=cfg.workers)
    bench.write_records_csv(records, path)
    bench.write_summary_jsonl(records, cfg.summary or f"{path}.summary.jsonl")
    print(f"wrote {len(records)} records to {path}", file=out)
    return EXIT_OK


def cmd_synth(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    path = _need_output(cfg)
    if cfg.sweep:
        laws = [cfg.law] if cfg.law == "normal" else [(cfg.law, cfg.nu)]
        rows = bench.run_synth_benchmark(
            [float(s) for s in _split(cfg.sweep)], laws, cfg.replications, cfg.n, cfg.T,
            cfg.delta_train, cfg.delta_test, cfg.B, cfg.seed, cfg.smallest, cfg.ratio, cfg.workers,
        )
        with Path(path).open("w") as fh:
            for r in rows:
                fh.write(json.dumps(r.as_dict(), sort_keys=True) + "\n")
        print(f"wrote {len(rows)} summary rows to {path}", file=out)
        return EXIT_OK
    config = synth.SynthConfig(n=cfg.n, T=cfg.T, s=cfg.s, smallest=cfg.smallest, ratio=cfg.ratio,
                               law=cfg.law, nu=cfg.nu, seed=cfg.seed)
    result = synth.generate(config)
    panel = synth.to_panel(result.data)
    data.save_panel(panel, path)
    if cfg.lambda_out:
        with Path(cfg.lambda_out).open("w") as fh:
            fh.write("rank,eigenvalue\n")
            for i, lam in enumerate(result.lambda_true):
                fh.write(f"{i},{float(lam)!r}\n")
    print(f"wrote {panel.T}x{panel.N} synthetic panel to {path}", file=out)
    return EXIT_OK


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def cmd_diagnose(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    panel = data.load_panel(_need_file(cfg, "input"))
    path = _need_output(cfg)
    cal = panel.row_range(cfg.cal_start, cfg.cal_end)
    kw = dict(workers=cfg.workers, filters=_filters(cfg))
    if cfg.kind == "entropy":
        res = bench.entropy_experiment(panel, cal, cfg.n, cfg.B, cfg.seed, cfg.delta_train, cfg.delta,
                                       cfg.n_boot, **kw)
        rows = [("ordered", i, res.ordered[i], res.ordered_band[0][i], res.ordered_band[1][i])
                for i in range(cfg.n)]
        if cfg.shuffle:
            rows += [("shuffled", i, res.shuffled[i], res.shuffled_band[0][i], res.shuffled_band[1][i])
                     for i in range(cfg.n)]
            rows += [("difference", i, res.difference[i], res.diff_band[0][i], res.diff_band[1][i])
                     for i in range(cfg.n)]
        _write_rows(path, ["variant", "rank", "entropy", "lo95", "hi95"], rows)
        if res.degenerate:
            print("warning: B < 2, bootstrap bands undefined", file=out)
    elif cfg.kind == "overlap":
        H2 = calibration.average_overlap(panel, cal, cfg.delta_train, cfg.delta, cfg.B, cfg.n,
                                         cfg.seed, shuffle=cfg.shuffle, **kw)
        write_matrix_csv(H2, [str(i) for i in range(cfg.n)], path)
    elif cfg.kind == "separability":
        res = calibration.separability_diagnostic(panel, cal, cfg.delta_train, cfg.delta, cfg.B,
                                                  cfg.n, cfg.seed, **kw)
        _write_rows(path, ["rank", "joint", "factorized"],
                    [(i, a, b) for i, (a, b) in enumerate(zip(res.joint, res.factorized))])
        print(f"correlation {res.correlation:.6f}  max relative deviation {res.max_rel_deviation:.4g}",
              file=out)
    else:
        test = panel.row_range(cfg.oos_start, cfg.oos_end)
        res = bench.eigenvalue_stability_experiment(panel, cal, test, cfg.n, cfg.B, cfg.seed,
                                                    cfg.delta_train, cfg.delta, cfg.n_boot, **kw)
        _write_rows(path, ["sample", "d1", "d2"], [(i, a, b) for i, (a, b) in enumerate(zip(res.d1, res.d2))])
        print(f"mean D1 diff {res.mean_d1:.6g} (p={res.p_d1:.4g})  "
              f"mean D2 diff {res.mean_d2:.6g} (p={res.p_d2:.4g})", file=out)
    print(f"wrote {cfg.kind} diagnostic to {path}", file=out)
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "filter": cmd_filter,
    "backtest": cmd_backtest,
    "synth": cmd_synth,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleWindowError,) as exc:
        print(f"infeasible window: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValueError, AOCovError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
