"""Fisher-information exploration baseline (no safety constraint).

The information of a ramp endpoint is the Gram matrix of the Jacobian of the
regression GP's mean along the ramp with respect to the endpoint, plus the
same quantity for every previously executed ramp.
"""

from __future__ import annotations

import numpy as np

from ..gp import GPModel, predict_batch
from ..trajectory import Box, History, NxConfig, plan_points
from .acquisition import AcquisitionConfig, Candidates, Proposal, _start_points, multistart_pattern_search
from .criteria import Criterion, criterion_batch

__all__ = ["mean_jacobians", "fisher_matrix", "propose_fisher"]

FD_RELATIVE_STEP = 1e-4


def _mean_fn(f_model):
    if callable(f_model) and not isinstance(f_model, GPModel):
        return f_model

    def mean(points):
        return predict_batch(f_model, points, standardized=True, full_cov=False)[0]

    return mean


def _shifted(etas):
    b, d1 = etas.shape
    h = FD_RELATIVE_STEP * np.maximum(1.0, np.abs(etas))
    shifted = np.empty((b, 2, d1, d1))
    for j in range(d1):
        for s, sign in enumerate((1.0, -1.0)):
            e = etas.copy()
            e[:, j] += sign * h[:, j]
            shifted[:, s, j] = e
    return shifted.reshape(-1, d1), h


def _jacobians_from_means(mu, h, m):
    b, d1 = h.shape
    mu = mu.reshape(b, 2, d1, m)
    jac = (mu[:, 0] - mu[:, 1]) / (2.0 * h[:, :, None])
    return np.swapaxes(jac, 1, 2)


def mean_jacobians(etas, history: History, cfg: NxConfig, f_model) -> np.ndarray:
    """Central-difference Jacobians ``d mu(tau(eta)) / d eta``, shape ``(B, m, d1)``.

    ``f_model`` is a GPModel or any callable mapping ``(B, m, d)`` points to
    ``(B, m)`` means.
    """
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    shifted, h = _shifted(etas)
    gp = f_model if isinstance(f_model, GPModel) else None
    pts = plan_points(shifted, history, cfg, gp)
    return _jacobians_from_means(_mean_fn(f_model)(pts), h, cfg.m)


def _gram(jac):
    return np.einsum("bmi,bmj->bij", jac, jac)


def past_information(f_model, past, cfg: NxConfig) -> np.ndarray:
    """Summed Jacobian Gram matrices of already executed ramps.

    ``past`` is a sequence of ``(eta_i, history_before_i)`` pairs.
    """
    if not len(past):
        return np.zeros((cfg.d1, cfg.d1))
    gp = f_model if isinstance(f_model, GPModel) else None
    pts, steps = [], []
    for eta_i, hist_i in past:
        shifted, h = _shifted(np.atleast_2d(np.asarray(eta_i, dtype=float)))
        pts.append(plan_points(shifted, hist_i, cfg, gp))
        steps.append(h)
    mu = _mean_fn(f_model)(np.concatenate(pts))
    jac = _jacobians_from_means(mu, np.concatenate(steps), cfg.m)
    return _gram(jac).sum(axis=0)


def fisher_matrix(eta, f_model, past, cfg: NxConfig, history: History) -> np.ndarray:
    """``J(eta)^T J(eta) + sum_i J(eta_i)^T J(eta_i)`` for the ramp from ``history``."""
    jac = mean_jacobians(np.asarray(eta, dtype=float)[None], history, cfg, f_model)
    return _gram(jac)[0] + past_information(f_model, past, cfg)


def propose_fisher(f_model, history: History, cfg: NxConfig, acq: AcquisitionConfig,
                   domain: Box, past=()) -> Proposal:
    """Maximize the log-determinant of the Fisher matrix over the domain."""
    base = past_information(f_model, past, cfg)

    def objective(etas):
        info = base[None] + _gram(mean_jacobians(etas, history, cfg, f_model))
        crit = criterion_batch(info, Criterion.DETERMINANT)
        return crit, np.full(len(etas), np.nan), np.ones(len(etas), bool)

    rng = np.random.default_rng([acq.seed, 3])
    candidates = Candidates.empty(cfg.d1)
    multistart_pattern_search(objective, _start_points(rng, history, domain, acq), domain, acq, candidates)
    best = candidates.best()
    return Proposal(candidates.etas[best].copy(), float(candidates.criteria[best]), None, False,
                    acq.seed, candidates)
