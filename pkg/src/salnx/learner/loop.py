"""The outer active-learning loop.

Collect ``n_initial`` safe ramps near the known safe point, then repeatedly
(re)fit the regression and safety GPs, plan the next ramp with the chosen
strategy, execute it on the system and append the measurements.
"""

from __future__ import annotations

import logging
import time
from typing import TYPE_CHECKING

import numpy as np

from .. import __version__
from ..benchmarks import BENCHMARKS
from ..gp import (
    GPModel,
    HyperBounds,
    KernelParams,
    Standardizer,
    block_update,
    fit,
    predict,
    predict_batch,
    train_hyperparams,
)
from ..harness.metrics import coverage, rmse, sample_trajectories
from ..harness.records import ExperimentLog, Record
from ..safety import SAFETY_PRIOR_MEAN, SafetyEstimate, xi_mc
from ..trajectory import Box, History, NxConfig, embed_tail, input_standardizer, plan_points, ramp_inputs
from .acquisition import ORIGIN_ALTERNATIVE, AcquisitionConfig, propose_random_safe, propose_sal
from .criteria import criterion_value
from .fisher import propose_fisher

if TYPE_CHECKING:
    from ..harness.config import ExperimentConfig

__all__ = ["ExperimentAborted", "LearnerState", "run_experiment", "iteration_seed", "default_bounds"]

log = logging.getLogger(__name__)


class ExperimentAborted(RuntimeError):
    """The system adapter failed; ``log`` holds every record collected so far."""

    def __init__(self, message, log: ExperimentLog):
        super().__init__(message)
        self.log = log


def iteration_seed(master_seed: int, index: int) -> int:
    """Integer seed for trajectory ``index`` of a run, independent across indices."""
    return int(np.random.SeedSequence([int(master_seed), 7, int(index)]).generate_state(1)[0])


def default_bounds(d: int, safety: bool = False) -> HyperBounds:
    """Training box ``(P_1..P_d, signal_variance, noise_variance)`` in standardized units."""
    if safety:
        return HyperBounds(np.r_[np.full(d, 0.25), 0.25, 1e-5], np.r_[np.full(d, 25.0), 25.0, 0.0625])
    return HyperBounds(np.r_[np.full(d, 0.25), 0.25, 2.5e-3], np.r_[np.full(d, 25.0), 6.25, 0.25])


def _hyper_tuple(theta) -> tuple[KernelParams, float]:
    return KernelParams.from_vector(np.asarray(theta, dtype=float))


class LearnerState:
    """Data and GP snapshots of one run.

    Both GPs share the input standardizer derived from the domain box. The
    regression targets are re-standardized from the data at every refit and
    frozen in between; safety targets stay in raw units.
    """

    def __init__(self, cfg: NxConfig, domain: Box, theta_f, theta_g, theory: bool = False):
        self.cfg = cfg
        self.domain = domain
        self.input_stats = input_standardizer(cfg, domain)
        self.kern_f, self.noise_f = _hyper_tuple(theta_f)
        self.kern_g, self.noise_g = _hyper_tuple(theta_g)
        if theory and self.kern_f.signal_variance > 1.0:
            # bounded kernel k <= 1 for the variance-decay inequalities
            self.kern_f = KernelParams(1.0, self.kern_f.inverse_lengthscales)
        self.taus: list[np.ndarray] = []
        self.rhos: list[np.ndarray] = []
        self.zetas: list[np.ndarray] = []
        self.initial_count = 0
        self.f_model = self._empty(self.kern_f, self.noise_f, 0.0)
        self.g_model = self._empty(self.kern_g, self.noise_g, SAFETY_PRIOR_MEAN)

    def _empty(self, kern, noise, prior):
        return fit(np.zeros((0, self.cfg.d)), np.zeros(0), kern, noise, prior, self.input_stats)

    def arrays(self, skip_initial: bool = False):
        start = self.initial_count if skip_initial else 0
        if len(self.taus) <= start:
            return np.zeros((0, self.cfg.d)), np.zeros(0), np.zeros(0)
        return (np.vstack(self.taus[start:]), np.concatenate(self.rhos[start:]),
                np.concatenate(self.zetas[start:]))

    def refit(self):
        x, y, z = self.arrays()
        stats = Standardizer.from_data(y) if y.size > 1 else Standardizer.identity(1)
        self.f_model = fit(x, y, self.kern_f, self.noise_f, 0.0, self.input_stats, stats)
        self.g_model = fit(x, z, self.kern_g, self.noise_g, SAFETY_PRIOR_MEAN, self.input_stats)

    def train(self, bounds_f, bounds_g, restarts, seed, skip_initial):
        x, y, z = self.arrays(skip_initial)
        if x.shape[0] < 2:
            x, y, z = self.arrays()
        stats = Standardizer.from_data(y)
        fit_f = train_hyperparams(x, y, bounds_f, (self.kern_f, self.noise_f), restarts, seed,
                                  0.0, self.input_stats, stats)
        fit_g = train_hyperparams(x, z, bounds_g, (self.kern_g, self.noise_g), restarts, seed + 1,
                                  SAFETY_PRIOR_MEAN, self.input_stats, None)
        self.kern_f, self.noise_f = fit_f.kernel, fit_f.noise_variance
        self.kern_g, self.noise_g = fit_g.kernel, fit_g.noise_variance

    def add(self, tau, rho, zeta, refit: bool):
        self.taus.append(np.asarray(tau, dtype=float))
        self.rhos.append(np.asarray(rho, dtype=float))
        self.zetas.append(np.asarray(zeta, dtype=float))
        if refit:
            self.refit()
        else:
            self.f_model = block_update(self.f_model, tau, rho)
            self.g_model = block_update(self.g_model, tau, zeta)


def _logdet(model: GPModel, tau) -> float:
    cov = predict(model, tau, standardized=True).covariance
    return criterion_value(cov)


def _alternatives(candidates):
    mask = candidates.origin == ORIGIN_ALTERNATIVE
    if not mask.any():
        return None
    return {
        "etas": candidates.etas[mask],
        "criteria": candidates.criteria[mask],
        "feasible": candidates.feasible[mask],
    }


class _Metrics:
    """Fixed random test ramps scored against the noiseless system."""

    def __init__(self, system, config: ExperimentConfig):
        self.f_true = getattr(system, "f_true", None)
        self.z_true = getattr(system, "z_true", None)
        cfg, domain = system.nx, system.domain()
        self.enabled = cfg.q == 0 and self.f_true is not None
        if not self.enabled:
            return
        self.rmse_points = sample_trajectories(domain, cfg, config.rmse_trajectories,
                                               [config.metric_seed, 0])
        self.coverage_points = sample_trajectories(domain, cfg, config.coverage_trajectories,
                                                   [config.metric_seed, 1])

    def __call__(self, state: LearnerState):
        if not self.enabled:
            return None, None
        r = rmse(state.f_model, self.f_true, self.rmse_points)
        c = coverage(state.g_model, self.z_true, self.coverage_points) if self.z_true else None
        return r, c


def _header(config, system, state, seed):
    return {
        "version": __version__,
        "master_seed": int(seed),
        "config": config.to_dict(),
        "system": getattr(system, "name", type(system).__name__),
        "nx": {"d1": state.cfg.d1, "d2": state.cfg.d2, "q": state.cfg.q, "m": state.cfg.m,
               "lags": None if state.cfg.lags is None else [list(s) for s in state.cfg.lags]},
        "theta_f": state.kern_f.to_vector(state.noise_f).tolist(),
        "theta_g": state.kern_g.to_vector(state.noise_g).tolist(),
        "input_mean": state.input_stats.mean.tolist(),
        "input_scale": state.input_stats.scale.tolist(),
        "domain": [state.domain.lower.tolist(), state.domain.upper.tolist()],
    }


def run_experiment(system, config: ExperimentConfig, seed: int | None = None,
                   on_record=None, on_header=None) -> ExperimentLog:
    """Run the safe active-learning loop on ``system``.

    ``system`` follows the adapter protocol and additionally exposes ``nx``;
    ``f_true`` / ``z_true`` enable the RMSE and coverage metrics. Everything
    random is derived from ``seed`` (default ``config.seed``), so equal seeds
    give identical logs. ``on_header`` receives the log header before the first
    trajectory and ``on_record`` each finished record.
    """
    seed = config.seed if seed is None else int(seed)
    cfg: NxConfig = system.nx
    domain = system.domain()
    spec = BENCHMARKS.get(config.benchmark, {})
    theta_f = config.theta_f or spec.get("theta_f")
    theta_g = config.theta_g or spec.get("theta_g")
    if theta_f is None or theta_g is None:
        raise ValueError("hyperparameters must be given for a custom system")
    state = LearnerState(cfg, domain, theta_f, theta_g, theory=config.theory)
    bounds_f = HyperBounds(*config.bounds_f) if config.bounds_f else default_bounds(cfg.d)
    bounds_g = HyperBounds(*config.bounds_g) if config.bounds_g else default_bounds(cfg.d, True)
    trained = config.hyper_mode == "trained"
    metrics = _Metrics(system, config)

    history = History.seeded(system.initial_safe_point(), cfg.required_history + 1)
    run_log = ExperimentLog(_header(config, system, state, seed))
    if on_header is not None:
        on_header(run_log.header)
    past = []

    init_rng = np.random.default_rng([seed, 11])
    half = config.init_box_fraction * domain.width
    safe = system.initial_safe_point()
    total = config.n_initial + config.n_iterations
    n_trained = 0

    for index in range(1, total + 1):
        tic = time.perf_counter()
        iteration = index - config.n_initial
        it_seed = iteration_seed(seed, index)
        context = history.tail(cfg.required_history)
        proposal = None
        if iteration <= 0:
            eta = domain.clip(safe + init_rng.uniform(-half, half))
            strategy = "init"
        else:
            if trained and (iteration - 1) % config.retrain_every == 0:
                state.train(bounds_f, bounds_g, config.train_restarts, it_seed,
                            config.drop_initial and n_trained > 0)
                state.refit()
                n_trained += 1
            acq = AcquisitionConfig(alpha=config.alpha, n_restarts=config.n_starts, n_mc=config.n_mc,
                                    local_steps=config.local_steps, seed=it_seed,
                                    criterion=config.criterion_kind,
                                    n_alternatives=config.n_alternatives)
            if config.strategy == "sal":
                proposal = propose_sal(state.f_model, state.g_model, history, cfg, acq, domain)
            elif config.strategy == "random_safe":
                proposal = propose_random_safe(state.g_model, history, cfg, acq, domain, state.f_model)
            else:
                proposal = propose_fisher(state.f_model, history, cfg, acq, domain, past)
            eta = proposal.eta
            strategy = config.strategy

        planned = plan_points(eta[None], history, cfg, state.f_model)[0]
        logdet = _logdet(state.f_model, planned)
        mu_g, cov_g = predict_batch(state.g_model, planned[None])
        report = xi_mc(mu_g[0], cov_g[0], config.n_mc_report, seed=[it_seed, 4])

        u = ramp_inputs(eta, history.last, cfg.m)
        u[-1] = eta
        try:
            result = system.step(u)
        except Exception as exc:
            raise ExperimentAborted(f"system step failed at trajectory {index}: {exc}", run_log) from exc
        n_exec = len(result.y)
        history.append(u[:n_exec], result.y)
        tau = embed_tail(history, cfg, n_exec)
        past.append((np.asarray(eta, dtype=float), context))

        refit = iteration == 0 or (iteration > 0 and not trained and iteration % config.retrain_every == 0)
        state.add(tau, result.y, result.z, refit=refit)
        if iteration <= 0:
            state.initial_count = len(state.taus)

        r = c = None
        if iteration >= 0 and iteration % config.metrics_every == 0:
            r, c = metrics(state)

        xi: SafetyEstimate | None = proposal.xi if proposal else None
        record = Record(
            index=index,
            iteration=iteration,
            phase="init" if iteration <= 0 else "active",
            strategy=strategy,
            eta=eta,
            start=context.last,
            context=context.u,
            tau=tau,
            rho=result.y,
            zeta=result.z,
            criterion=None if proposal is None else proposal.criterion,
            logdet=logdet,
            xi_hat=None if xi is None else xi.p_hat,
            xi_seed=None if xi is None else it_seed,
            n_mc=None if xi is None else xi.n_samples,
            xi_report=report.p_hat,
            flagged=bool(proposal.flagged) if proposal else False,
            unsafe=result.violation_index is not None,
            violation_index=result.violation_index,
            interrupted=bool(result.interrupted),
            rmse=r,
            coverage=c,
            seed=it_seed,
            n_candidates=0 if proposal is None else len(proposal.candidates),
            alternatives=None if proposal is None else _alternatives(proposal.candidates),
            wall_time=time.perf_counter() - tic,
        )
        run_log.append(record)
        if on_record is not None:
            on_record(record)
        if iteration > 0 and iteration % 10 == 0:
            log.debug("seed %s iteration %d rmse %s", seed, iteration, r)
    return run_log
