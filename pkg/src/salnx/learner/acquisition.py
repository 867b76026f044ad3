"""Safe trajectory acquisition.

The next ramp endpoint maximizes an information criterion of the regression
GP's predictive covariance along the ramp, subject to the safety GP's Monte-
Carlo estimate ``xi > 1 - alpha``. The search is a seeded multistart of
coordinate pattern searches that reject infeasible moves. All candidates of
one proposal share the same base normal draws so the constraint surface does
not jitter between neighbouring candidates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gp import GPModel, predict_batch
from ..safety import SafetyEstimate, base_normals, xi_mc_batch
from ..trajectory import Box, History, NxConfig, plan_points
from .criteria import Criterion, criterion_batch

__all__ = [
    "AcquisitionConfig",
    "Candidates",
    "Proposal",
    "ORIGIN_START",
    "ORIGIN_POLL",
    "ORIGIN_ALTERNATIVE",
    "ORIGIN_FALLBACK",
    "ORIGIN_DRAW",
    "propose_sal",
    "propose_random_safe",
    "multistart_pattern_search",
]

ORIGIN_START, ORIGIN_POLL, ORIGIN_ALTERNATIVE, ORIGIN_FALLBACK, ORIGIN_DRAW = range(5)


@dataclass(frozen=True)
class AcquisitionConfig:
    alpha: float = 0.2
    n_restarts: int = 20
    n_mc: int = 1000
    local_steps: int = 50
    seed: int = 0
    criterion: Criterion = Criterion.DETERMINANT
    initial_step: float = 0.1
    min_step: float = 1e-3
    perturb_width: float = 0.1
    n_alternatives: int = 10
    max_draws: int = 1000

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.n_restarts < 1 or self.n_mc < 1 or self.local_steps < 0:
            raise ValueError("n_restarts and n_mc must be positive")
        object.__setattr__(self, "criterion", Criterion(self.criterion))

    @property
    def constrained(self) -> bool:
        # threshold 1 - alpha = 0 is vacuous for a Gaussian with full support
        return self.alpha < 1.0


@dataclass
class Candidates:
    """Every endpoint evaluated during one proposal, in evaluation order."""

    etas: np.ndarray
    criteria: np.ndarray
    p_hat: np.ndarray
    feasible: np.ndarray
    origin: np.ndarray

    @classmethod
    def empty(cls, d1: int) -> "Candidates":
        return cls(np.zeros((0, d1)), np.zeros(0), np.zeros(0), np.zeros(0, bool), np.zeros(0, int))

    def extend(self, etas, criteria, p_hat, feasible, origin):
        n = len(etas)
        self.etas = np.vstack([self.etas, etas])
        self.criteria = np.concatenate([self.criteria, criteria])
        self.p_hat = np.concatenate([self.p_hat, p_hat])
        self.feasible = np.concatenate([self.feasible, feasible])
        self.origin = np.concatenate([self.origin, np.full(n, origin)])

    def __len__(self):
        return len(self.criteria)

    def best(self) -> int | None:
        """Index of the first feasible candidate with maximal criterion."""
        if not self.feasible.any():
            return None
        masked = np.where(self.feasible, self.criteria, -np.inf)
        top = masked.max()
        if top == -np.inf:
            return int(np.flatnonzero(self.feasible)[0])
        return int(np.flatnonzero(masked == top)[0])


@dataclass
class Proposal:
    eta: np.ndarray
    criterion: float
    xi: SafetyEstimate | None
    flagged: bool
    seed: int
    candidates: Candidates = field(repr=False)


class _SafeObjective:
    """Batched criterion + Monte-Carlo safety for candidate endpoints."""

    def __init__(self, f_model, g_model, history, cfg, acq, normals):
        self.f_model = f_model
        self.g_model = g_model
        self.history = history
        self.cfg = cfg
        self.acq = acq
        self.normals = normals

    def __call__(self, etas):
        pts = plan_points(etas, self.history, self.cfg, self.f_model)
        if self.f_model is not None:
            _, covs = predict_batch(self.f_model, pts, standardized=True)
            crit = criterion_batch(covs, self.acq.criterion)
        else:
            crit = np.zeros(len(etas))
        if self.acq.constrained and self.g_model is not None:
            mu_g, cov_g = predict_batch(self.g_model, pts)
            p = xi_mc_batch(mu_g, cov_g, self.normals)
            feasible = p > 1.0 - self.acq.alpha
        else:
            p = np.full(len(etas), np.nan)
            feasible = np.ones(len(etas), bool)
        return crit, p, feasible


def multistart_pattern_search(objective, starts, domain: Box, acq: AcquisitionConfig,
                              candidates: Candidates) -> None:
    """Coordinate pattern search from every feasible start, run in lockstep.

    Each round polls ``+-step`` along every coordinate; the best strictly
    improving feasible poll is accepted, otherwise the step is halved. A start
    stops after ``acq.local_steps`` evaluations or when its step falls below
    ``acq.min_step`` (both relative to the domain width). Every evaluation
    is appended to ``candidates``.
    """
    starts = np.atleast_2d(starts)
    crit, p, feas = objective(starts)
    candidates.extend(starts, crit, p, feas, ORIGIN_START)
    x = starts.copy()
    fx = crit.copy()
    d1 = domain.dim
    frac = np.full(len(x), acq.initial_step)
    evals = np.zeros(len(x), int)
    active = feas.copy() & (acq.local_steps > 0)
    directions = np.vstack([np.eye(d1), -np.eye(d1)])
    while active.any():
        idx = np.flatnonzero(active)
        polls = x[idx, None, :] + frac[idx, None, None] * directions[None] * domain.width
        polls = domain.clip(polls).reshape(-1, d1)
        c, pp, ff = objective(polls)
        candidates.extend(polls, c, pp, ff, ORIGIN_POLL)
        c = c.reshape(len(idx), -1)
        ok = ff.reshape(len(idx), -1) & (c > fx[idx, None])
        for r, s in enumerate(idx):
            if ok[r].any():
                j = int(np.argmax(np.where(ok[r], c[r], -np.inf)))
                x[s] = polls.reshape(len(idx), -1, d1)[r, j]
                fx[s] = c[r, j]
            else:
                frac[s] *= 0.5
        evals[idx] += len(directions)
        active[idx] &= (evals[idx] < acq.local_steps) & (frac[idx] >= acq.min_step)


def _start_points(rng, history: History, domain: Box, acq: AcquisitionConfig) -> np.ndarray:
    n_uniform = acq.n_restarts - acq.n_restarts // 2
    uniform = domain.sample(rng, n_uniform)
    half = acq.perturb_width * domain.width
    near = domain.clip(history.last + rng.uniform(-half, half, size=(acq.n_restarts - n_uniform, domain.dim)))
    if len(near):
        # the constant ramp at the current point is usually feasible, so the
        # search can always climb out of it
        near[0] = domain.clip(history.last)
    return np.vstack([uniform, near])


def _finish(objective, candidates, history, acq, seed) -> Proposal:
    best = candidates.best()
    flagged = best is None
    if flagged:
        stay = history.last[None]
        crit, p, feas = objective(stay)
        candidates.extend(stay, crit, p, feas, ORIGIN_FALLBACK)
        best = len(candidates) - 1
    eta = candidates.etas[best].copy()
    p = candidates.p_hat[best]
    xi = None if np.isnan(p) else SafetyEstimate.from_count(int(round(p * acq.n_mc)), acq.n_mc, seed)
    return Proposal(eta, float(candidates.criteria[best]), xi, flagged, seed, candidates)


def propose_sal(f_model: GPModel, g_model: GPModel | None, history: History, cfg: NxConfig,
                acq: AcquisitionConfig, domain: Box) -> Proposal:
    """Most informative endpoint whose ramp passes the safety constraint.

    If no evaluated candidate is feasible the current point is re-issued
    (a constant trajectory) and the proposal is flagged.
    """
    normals = base_normals(acq.n_mc, cfg.m, acq.seed)
    rng = np.random.default_rng([acq.seed, 1])
    objective = _SafeObjective(f_model, g_model, history, cfg, acq, normals)
    candidates = Candidates.empty(cfg.d1)
    starts = _start_points(rng, history, domain, acq)
    if acq.n_alternatives:
        alt = domain.sample(rng, acq.n_alternatives)
        crit, p, feas = objective(alt)
        candidates.extend(alt, crit, p, feas, ORIGIN_ALTERNATIVE)
    multistart_pattern_search(objective, starts, domain, acq, candidates)
    return _finish(objective, candidates, history, acq, acq.seed)


def propose_random_safe(g_model: GPModel | None, history: History, cfg: NxConfig,
                        acq: AcquisitionConfig, domain: Box, f_model: GPModel | None = None,
                        batch: int = 50) -> Proposal:
    """First uniform endpoint (in seeded order) that passes the safety constraint."""
    normals = base_normals(acq.n_mc, cfg.m, acq.seed)
    rng = np.random.default_rng([acq.seed, 2])
    objective = _SafeObjective(f_model, g_model, history, cfg, acq, normals)
    candidates = Candidates.empty(cfg.d1)
    drawn = 0
    while drawn < acq.max_draws:
        etas = domain.sample(rng, min(batch, acq.max_draws - drawn))
        drawn += len(etas)
        crit, p, feas = objective(etas)
        if feas.any():
            first = int(np.argmax(feas)) + 1
            candidates.extend(etas[:first], crit[:first], p[:first], feas[:first], ORIGIN_DRAW)
            break
        candidates.extend(etas, crit, p, feas, ORIGIN_DRAW)
    if candidates.feasible.any():
        best = int(np.flatnonzero(candidates.feasible)[0])
        eta = candidates.etas[best].copy()
        p = candidates.p_hat[best]
        xi = None if np.isnan(p) else SafetyEstimate.from_count(int(round(p * acq.n_mc)), acq.n_mc, acq.seed)
        return Proposal(eta, float(candidates.criteria[best]), xi, False, acq.seed, candidates)
    return _finish(objective, candidates, history, acq, acq.seed)
