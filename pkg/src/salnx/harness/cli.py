"""Command-line interface: ``salnx {run,sweep-alpha,theory,report}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .config import STRATEGIES, ConfigError, ExperimentConfig, load_config

__all__ = ["main", "build_parser"]

log = logging.getLogger("salnx")

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_CHECKS = 0, 1, 2, 3


def _budget(text: str) -> dict:
    try:
        delta, n = text.split(":")
        return {"delta": float(delta), "n": int(n)}
    except ValueError:
        raise argparse.ArgumentTypeError("budget must look like DELTA:N, e.g. 0.05:50") from None


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None


def _add_run_options(p):
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--alpha", type=float, help="per-trajectory unsafe-probability threshold")
    p.add_argument("--budget", type=_budget, metavar="DELTA:N",
                   help="total failure probability over N trajectories; sets alpha = DELTA/N")
    p.add_argument("--iterations", type=int, help="number of planned trajectories N")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--theory", action="store_true", help="bounded-kernel mode for the theory checks")
    p.add_argument("--noiseless", action="store_true", help="disable measurement noise")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="salnx", description="Safe active learning of NX Gaussian-process models")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment and write its logs")
    _add_run_options(run)

    sweep = sub.add_parser("sweep-alpha", help="unsafe fraction and RMSE over an alpha grid and seeds")
    _add_run_options(sweep)
    sweep.add_argument("--alphas", type=_float_list, default=[0.01, 0.1, 0.3, 0.6])
    sweep.add_argument("--seeds", type=_int_list, help="seed list (default: config seeds)")
    sweep.add_argument("--jobs", type=int, default=1)

    theory = sub.add_parser("theory", help="run the theory checks on a log")
    theory.add_argument("log", type=Path, help="log.jsonl or a run directory")
    theory.add_argument("--n-early", type=int, default=10)
    theory.add_argument("--n-late", type=int, default=100)

    report = sub.add_parser("report", help="summary table and per-iteration series of logs")
    report.add_argument("logs", type=Path, nargs="+", help="log.jsonl files or directories containing them")
    report.add_argument("--at", type=int, help="also report coverage/RMSE at this iteration")
    report.add_argument("--out", type=Path, help="directory for summary.csv and series.csv")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.strategy:
        changes["strategy"] = args.strategy
    if args.alpha is not None:
        changes["alpha"] = args.alpha
    if args.budget is not None:
        changes["budget"] = args.budget
    if args.iterations is not None:
        changes["n_iterations"] = args.iterations
    if args.theory:
        changes["theory"] = True
    if args.noiseless:
        changes["noiseless"] = True
    if args.out is not None:
        changes["out_dir"] = str(args.out)
    return config.with_(**changes) if changes else config


def _find_logs(paths) -> list:
    found = []
    for path in paths:
        if path.is_dir():
            found.extend(sorted(path.rglob("log.jsonl")))
        elif path.exists():
            found.append(path)
        else:
            raise FileNotFoundError(f"no such log: {path}")
    if not found:
        raise FileNotFoundError("no log.jsonl found")
    return found


def _cmd_run(args) -> int:
    from .runner import run_config, summarize

    config = _config_from_args(args)
    out = Path(config.out_dir)
    run_log = run_config(config, config.seed, out)
    print(json.dumps(summarize(run_log), indent=2))
    print(f"wrote {out / 'log.jsonl'} and {out / 'log.csv'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .runner import summarize, sweep_alpha

    config = _config_from_args(args)
    out = Path(config.out_dir)
    seeds = args.seeds or list(config.seeds)
    results = sweep_alpha(config, args.alphas, seeds, out, args.jobs)
    rows = [summarize(lg) for runs in results.values() for lg in runs.values()]
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(rows, out / "sweep.csv")
    for alpha, runs in results.items():
        fractions = sorted(summarize(lg)["unsafe_fraction"] for lg in runs.values())
        print(f"alpha={alpha:g} unsafe fractions {fractions}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def _cmd_theory(args) -> int:
    from .io import read_jsonl
    from .theory import run_theory

    path = _find_logs([args.log])[0]
    report = run_theory(read_jsonl(path), args.n_early, args.n_late)
    print(json.dumps(report.summary(), indent=2, default=str))
    for name, ok in report.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if report.passed else EXIT_CHECKS


def _write_rows(rows, path):
    if not rows:
        return
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _cmd_report(args) -> int:
    from .io import read_jsonl
    from .runner import series, summarize

    logs = [(p, read_jsonl(p)) for p in _find_logs(args.logs)]
    rows = [dict(summarize(lg, args.at), path=str(p)) for p, lg in logs]
    series_rows = []
    for p, lg in logs:
        it_r, rmse = series(lg, "rmse")
        it_c, cov = series(lg, "coverage")
        cov_at = dict(zip(it_c.tolist(), cov.tolist()))
        for it, value in zip(it_r.tolist(), rmse.tolist()):
            series_rows.append({"path": str(p), "iter": it, "rmse": value, "coverage": cov_at.get(it)})
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        _write_rows(rows, args.out / "summary.csv")
        _write_rows(series_rows, args.out / "series.csv")
    writer = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep-alpha": _cmd_sweep, "theory": _cmd_theory, "report": _cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    from ..learner.loop import ExperimentAborted

    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"salnx: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError) as exc:
        print(f"salnx: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentAborted as exc:
        print(f"salnx: run aborted, partial log kept: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
