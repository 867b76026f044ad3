"""Per-trajectory records and the experiment log.

Records hold plain Python values (floats, ints, nested lists, None) so they
serialize losslessly to JSON and compare with ``==`` after a round trip.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

__all__ = ["Record", "ExperimentLog", "to_plain"]


def to_plain(value):
    """Convert numpy scalars/arrays (possibly nested) into JSON-ready values."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    return value


@dataclass
class Record:
    """One executed trajectory.

    ``iteration`` is ``index - n_initial``: initialization trajectories have
    ``iteration <= 0`` and actively planned ones start at 1. ``criterion`` is
    the strategy's own objective at the chosen endpoint; ``logdet`` is the
    log-determinant of the regression GP's (standardized) predictive
    covariance along the executed trajectory before it was observed.
    """

    index: int
    iteration: int
    phase: str
    strategy: str
    eta: list
    start: list
    context: list
    tau: list
    rho: list
    zeta: list
    criterion: float | None = None
    logdet: float | None = None
    xi_hat: float | None = None
    xi_seed: int | None = None
    n_mc: int | None = None
    xi_report: float | None = None
    flagged: bool = False
    unsafe: bool = False
    violation_index: int | None = None
    interrupted: bool = False
    rmse: float | None = None
    coverage: float | None = None
    seed: int | None = None
    n_candidates: int = 0
    alternatives: dict | None = None
    wall_time: float = field(default=0.0, compare=False)

    def __post_init__(self):
        for f in fields(self):
            setattr(self, f.name, to_plain(getattr(self, f.name)))

    @property
    def active(self) -> bool:
        return self.iteration > 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Record":
        return cls(**data)


@dataclass
class ExperimentLog:
    """Header (config, version, seed, model settings) plus ordered records."""

    header: dict
    records: list = field(default_factory=list)

    def append(self, record: Record):
        self.records.append(record)

    @property
    def active(self) -> list:
        return [r for r in self.records if r.active]

    @property
    def initial(self) -> list:
        return [r for r in self.records if not r.active]

    def series(self, name: str, active_only: bool = True) -> np.ndarray:
        """A record field as a float array (None becomes NaN)."""
        rows = self.active if active_only else self.records
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in rows],
                        dtype=float)

    def at_iteration(self, n: int) -> Record:
        for r in self.records:
            if r.iteration == n:
                return r
        raise KeyError(f"no record for iteration {n}")

    def __eq__(self, other):
        if not isinstance(other, ExperimentLog):
            return NotImplemented
        return self.header == other.header and self.records == other.records
