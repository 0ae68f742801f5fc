"""Command line entry point: ``htdbench <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 calibration failure,
4 I/O error.
"""

import argparse
from collections import Counter
from dataclasses import replace
import json
import logging
from pathlib import Path
import sys

from .config import dump_config, load_config
from .exceptions import CalibrationFailure, ConfigurationError, FormatError
from .harness import (
    CONFIG_NAMES,
    aggregate_rows,
    calibrate,
    collect_runs,
    cumulative_configs,
    emit_report,
    load_runs,
    run_ablation,
    run_seeds,
    run_sensitivity,
    save_runs,
    sensitivity_from_runs,
)
from .telemetry import generate_dataset, load_dataset, save_dataset

EXIT_OK, EXIT_CONFIG, EXIT_CALIBRATION, EXIT_IO = 0, 2, 3, 4
FORMATS = ("markdown", "csv", "json")

log = logging.getLogger("htdbench")


def _formats(value):
    if value == "all":
        return FORMATS
    out = tuple(v.strip() for v in value.split(",") if v.strip())
    bad = [v for v in out if v not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"format must be 'all' or a comma list of {', '.join(FORMATS)}")
    return out


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML config file (see configs/example.yaml)")
    common.add_argument("--seed", type=int, help="master seed; overrides the config")
    common.add_argument("--out-dir", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--format", type=_formats, default=FORMATS,
                        help="report formats: 'all' or comma list of markdown,csv,json")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="htdbench", description="Spiking anomaly-detector defense benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="generate or inspect synthetic telemetry datasets")
    ds_sub = ds.add_subparsers(dest="action", required=True)
    gen = ds_sub.add_parser("generate", parents=[common], help="write a dataset file")
    gen.add_argument("--name", default="dataset.jsonl", help="file name inside --out-dir")
    ins = ds_sub.add_parser("inspect", parents=[common], help="summarize a dataset file")
    ins.add_argument("path", type=Path)

    sub.add_parser("calibrate", parents=[common], help="tune generator noise to the target baseline F1")

    bench = sub.add_parser("bench", help="run the benchmark protocol")
    bench_sub = bench.add_subparsers(dest="action", required=True)
    bench_sub.add_parser("ablation", parents=[common], help="four cumulative configurations (Table I)")
    bench_sub.add_parser("sweep", parents=[common], help="attack-strength sensitivity (Table II)")

    rep = sub.add_parser("report", parents=[common], help="re-render reports from saved runs")
    rep.add_argument("runs", type=Path, nargs="?", help="runs.json (default: <out-dir>/runs.json)")
    return parser


def _bench(args):
    bench = load_config(args.config)
    if args.seed is not None:
        bench = replace(bench, master_seed=int(args.seed))
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be >= 1")
    return bench


def _cmd_dataset(args):
    if args.action == "inspect":
        windows, cfg = load_dataset(args.path, with_config=True)
        summary = {
            "path": str(args.path),
            "n_windows": len(windows),
            "labels": dict(sorted(Counter(w.label for w in windows).items())),
            "kinds": dict(sorted(Counter(w.anomaly_kind for w in windows).items())),
            "shape": list(windows[0].channels.shape) if windows else None,
            "config": cfg.to_dict() if cfg is not None else None,
        }
        if args.format == ("json",):
            print(json.dumps(summary, indent=2, sort_keys=True))
        else:
            for key in ("path", "n_windows", "labels", "kinds", "shape"):
                print(f"{key}: {summary[key]}")
        return EXIT_OK
    bench = _bench(args)
    cfg = bench.dataset if args.seed is None else replace(bench.dataset, seed=int(args.seed))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    path = args.out_dir / args.name
    save_dataset(path, generate_dataset(cfg), cfg)
    print(path)
    return EXIT_OK


def _cmd_calibrate(args):
    bench = _bench(args)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    try:
        tuned, history = calibrate(bench)
    except CalibrationFailure as exc:
        print(f"calibration failed: {exc}; proceeding with the closest sigma", file=sys.stderr)
        tuned, history, status = exc.best, exc.log, EXIT_CALIBRATION
    (args.out_dir / "calibration.json").write_text(json.dumps({
        "target_f1": bench.calibration.target_f1, "tolerance": bench.calibration.tolerance,
        "converged": status == EXIT_OK, "noise_sigma": tuned.dataset.noise_sigma,
        "log": [{"sigma": s, "f1": f} for s, f in history],
    }, indent=2, sort_keys=True) + "\n")
    dump_config(tuned, args.out_dir / "calibrated.yaml")
    print(f"noise_sigma = {tuned.dataset.noise_sigma:.6g} after {len(history)} evaluation(s)")
    return status


def _cmd_bench(args):
    bench = _bench(args)
    if args.action == "ablation":
        rows, runs = run_ablation(bench, jobs=args.jobs)
        cells = None
    else:
        cells = run_sensitivity(bench, jobs=args.jobs)
        rows, runs = None, _sweep_runs(bench)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_runs(args.out_dir / "runs.json", runs)
    dump_config(bench, args.out_dir / "config.yaml")
    for path in emit_report(args.out_dir, bench, rows, cells, runs, args.format):
        print(path)
    return EXIT_OK


def _sweep_runs(bench):
    configs = cumulative_configs(run_seeds(bench.master_seed, bench.n_seeds))
    return collect_runs(bench, [configs[0], configs[-1]], (), ())


def _cmd_report(args):
    bench = _bench(args)
    path = args.runs or args.out_dir / "runs.json"
    runs = load_runs(path)
    names = {r.config for r in runs}
    seeds = sorted({r.seed for r in runs}, key=[r.seed for r in runs].index)
    rows = cells = None
    if names >= set(CONFIG_NAMES):
        rows = aggregate_rows(bench, cumulative_configs(tuple(seeds)), runs)
    if {CONFIG_NAMES[0], CONFIG_NAMES[-1]} <= names:
        try:
            cells = sensitivity_from_runs(runs, bench.eps_grid, bench.jitter_grid)
        except ConfigurationError:
            cells = None
    if rows is None and cells is None:
        raise ConfigurationError(f"{path} holds neither a complete ablation nor a sweep")
    for out in emit_report(args.out_dir, bench, rows, cells, runs, args.format):
        print(out)
    return EXIT_OK


COMMANDS = {"dataset": _cmd_dataset, "calibrate": _cmd_calibrate, "bench": _cmd_bench, "report": _cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
