"""Experiment configuration and its YAML representation.

A config file is a flat YAML mapping whose keys are the fields of
``ExperimentConfig``; unknown keys are rejected. ``budget`` is written as
``{delta: 0.05, n: 50}`` and overrides ``alpha``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..benchmarks import BENCHMARKS
from ..learner.criteria import Criterion, SafetyBudget, alpha_for_budget

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "save_config", "STRATEGIES"]

STRATEGIES = ("sal", "random_safe", "fisher")
HYPER_MODES = ("fixed", "trained")


class ConfigError(ValueError):
    pass


def _tuple_or_none(value):
    return None if value is None else tuple(float(v) for v in value)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run (or a seed list of runs).

    ``theta_f`` / ``theta_g`` are ``(P_1..P_d, signal_variance,
    noise_variance)`` in standardized units; None takes the benchmark's
    values. ``bounds_*`` are ``[lower, upper]`` vectors in the same order and
    are only used when ``hyper_mode == "trained"``.
    """

    benchmark: str = "exp2"
    strategy: str = "sal"
    criterion: str = "determinant"
    alpha: float = 0.2
    budget: dict | None = None
    n_iterations: int = 100
    n_initial: int = 10
    m: int = 5
    hyper_mode: str = "fixed"
    theta_f: tuple | None = None
    theta_g: tuple | None = None
    bounds_f: tuple | None = None
    bounds_g: tuple | None = None
    retrain_every: int = 1
    train_restarts: int = 5
    seed: int = 1
    seeds: tuple = (1, 2, 3, 4, 5)
    n_mc: int = 1000
    n_mc_report: int = 10000
    n_starts: int = 20
    local_steps: int = 50
    n_alternatives: int = 10
    init_box_fraction: float = 0.05
    drop_initial: bool = False
    interrupt: bool = False
    noiseless: bool = False
    theory: bool = False
    metrics_every: int = 1
    rmse_trajectories: int = 200
    coverage_trajectories: int = 1000
    metric_seed: int = 12345
    out_dir: str = "runs"
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}; choose from {sorted(BENCHMARKS)}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}")
        if self.hyper_mode not in HYPER_MODES:
            raise ConfigError(f"hyper_mode must be one of {HYPER_MODES}")
        try:
            Criterion(self.criterion)
        except ValueError:
            raise ConfigError(f"unknown criterion {self.criterion!r}") from None
        if self.budget is not None:
            try:
                budget = SafetyBudget(float(self.budget["delta"]), int(self.budget["n"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"bad budget {self.budget!r}: {exc}") from None
            object.__setattr__(self, "budget", {"delta": budget.delta, "n": budget.n_trajectories})
            object.__setattr__(self, "alpha", alpha_for_budget(budget))
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        for name in ("n_iterations", "n_initial", "retrain_every", "metrics_every"):
            if getattr(self, name) < (0 if name == "n_iterations" else 1):
                raise ConfigError(f"{name} out of range")
        if self.m < 1 or self.n_mc < 1 or self.n_starts < 1:
            raise ConfigError("m, n_mc and n_starts must be positive")
        d = BENCHMARKS[self.benchmark]["nx"].d
        for name in ("theta_f", "theta_g"):
            value = _tuple_or_none(getattr(self, name))
            if value is not None and (len(value) != d + 2 or min(value) <= 0):
                raise ConfigError(f"{name} needs {d + 2} positive entries")
            object.__setattr__(self, name, value)
        for name in ("bounds_f", "bounds_g"):
            value = getattr(self, name)
            if value is not None:
                lo, hi = _tuple_or_none(value[0]), _tuple_or_none(value[1])
                if len(lo) != d + 2 or len(hi) != d + 2:
                    raise ConfigError(f"{name} vectors need {d + 2} entries")
                value = (lo, hi)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def criterion_kind(self) -> Criterion:
        return Criterion(self.criterion)

    def with_(self, **changes) -> "ExperimentConfig":
        if "alpha" in changes and "budget" not in changes:
            changes["budget"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("extra")
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = [list(v) if isinstance(v, tuple) else v for v in value]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)} - {"extra"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def save_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
    return path


def load_config(path) -> ExperimentConfig:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return ExperimentConfig.from_dict(data or {})
