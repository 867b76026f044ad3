"""Run configs, seed lists and alpha sweeps; summarize logs."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..benchmarks import make_benchmark
from ..learner.loop import ExperimentAborted, run_experiment
from .config import ExperimentConfig, save_config
from .io import JsonlWriter, write_csv
from .metrics import unsafe_fraction
from .records import ExperimentLog

__all__ = ["build_system", "run_config", "run_seeds", "sweep_alpha", "summarize", "series"]


def build_system(config: ExperimentConfig, seed: int):
    """The benchmark system for one run; its noise stream is derived from ``seed``."""
    return make_benchmark(config.benchmark, seed=[int(seed), 0], noiseless=config.noiseless,
                          m=config.m, interrupt_on_violation=config.interrupt)


def run_config(config: ExperimentConfig, seed: int | None = None, out_dir=None) -> ExperimentLog:
    """Run one seed; with ``out_dir`` the config, JSONL log and CSV are written there.

    The JSONL log is streamed, so an aborted run leaves every finished
    record on disk (and a CSV of them).
    """
    seed = config.seed if seed is None else int(seed)
    system = build_system(config, seed)
    if out_dir is None:
        return run_experiment(system, config, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(config.with_(seed=seed, budget=config.budget), out / "config.yaml")
    writer: list[JsonlWriter] = []
    try:
        run_log = run_experiment(
            system, config, seed,
            on_header=lambda header: writer.append(JsonlWriter(out / "log.jsonl", header)),
            on_record=lambda record: writer[0](record),
        )
    except ExperimentAborted as exc:
        write_csv(exc.log, out / "log.csv")
        raise
    finally:
        for w in writer:
            w.close()
    write_csv(run_log, out / "log.csv")
    return run_log


def _run_one(args):
    config, seed, out_dir = args
    return run_config(config, seed, out_dir)


def run_seeds(config: ExperimentConfig, seeds=None, out_dir=None, jobs: int = 1) -> dict:
    """Independent runs for every seed (``config.seeds`` by default)."""
    seeds = list(config.seeds if seeds is None else seeds)
    tasks = [(config, s, None if out_dir is None else Path(out_dir) / f"seed_{s}") for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            logs = list(pool.map(_run_one, tasks))
    else:
        logs = [_run_one(t) for t in tasks]
    return dict(zip(seeds, logs))


def sweep_alpha(config: ExperimentConfig, alphas, seeds=None, out_dir=None, jobs: int = 1) -> dict:
    """``{alpha: {seed: log}}`` over an alpha grid."""
    out = {}
    for alpha in alphas:
        sub = None if out_dir is None else Path(out_dir) / f"alpha_{alpha:g}"
        out[float(alpha)] = run_seeds(config.with_(alpha=float(alpha)), seeds, sub, jobs)
    return out


def _final(log: ExperimentLog, name: str):
    values = log.series(name)
    values = values[~np.isnan(values)]
    return float(values[-1]) if values.size else None


def summarize(log: ExperimentLog, at: int | None = None) -> dict:
    """Headline numbers of one run; ``at`` picks the iteration for coverage."""
    row = {
        "seed": log.header.get("master_seed"),
        "strategy": log.header.get("config", {}).get("strategy"),
        "alpha": log.header.get("config", {}).get("alpha"),
        "n_active": len(log.active),
        "final_rmse": _final(log, "rmse"),
        "final_coverage": _final(log, "coverage"),
        "unsafe_fraction": unsafe_fraction(log),
        "flagged": sum(bool(r.flagged) for r in log.active),
    }
    if at is not None:
        row[f"coverage_at_{at}"] = log.at_iteration(at).coverage
        row[f"rmse_at_{at}"] = log.at_iteration(at).rmse
    return row


def series(log: ExperimentLog, name: str) -> tuple[np.ndarray, np.ndarray]:
    """Plot-ready ``(iterations, values)`` for a record field, skipping gaps."""
    it = np.array([r.iteration for r in log.records if r.iteration >= 0])
    values = np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                       for r in log.records if r.iteration >= 0], dtype=float)
    keep = ~np.isnan(values)
    return it[keep], values[keep]
