"""Model-quality and safety metrics."""

from __future__ import annotations

import numpy as np

from ..gp import GPModel, predict_mean
from ..safety import xi_analytic_1d
from ..trajectory import Box, History, NxConfig, ramp_points_batch

__all__ = ["sample_trajectories", "rmse", "coverage", "system_coverage", "unsafe_fraction"]


def sample_trajectories(domain: Box, cfg: NxConfig, n_traj: int, seed) -> np.ndarray:
    """Random ramps with random executed histories, shape ``(n_traj, m, d)``.

    Each trajectory starts from its own uniformly drawn history (so lagged
    slots see realistic jumps) and ramps to a uniform endpoint.
    """
    if cfg.q:
        raise ValueError("test trajectories with output feedback need a simulator")
    rng = np.random.default_rng(seed)
    depth = cfg.required_history
    hist_u = domain.sample(rng, n_traj * depth).reshape(n_traj, depth, cfg.d1)
    etas = domain.sample(rng, n_traj)
    out = np.empty((n_traj, cfg.m, cfg.d))
    for t in range(n_traj):
        out[t] = ramp_points_batch(etas[t][None], History(hist_u[t]), cfg)[0]
    return out


def _flat(points, dim):
    return np.asarray(points, dtype=float).reshape(-1, dim)


def rmse(model, ground_truth, test_points) -> float:
    """Root-mean-square error of the predictive mean against a noiseless truth.

    ``model`` is a GPModel or a callable returning predictions at ``(n, d)``
    points; ``ground_truth`` is a callable on the same points.
    """
    dim = model.dim if isinstance(model, GPModel) else np.shape(test_points)[-1]
    pts = _flat(test_points, dim)
    if pts.shape[0] == 0:
        raise ValueError("test grid is empty")
    pred = predict_mean(model, pts) if isinstance(model, GPModel) else np.asarray(model(pts), float)
    err = pred - np.asarray(ground_truth(pts), dtype=float)
    return float(np.sqrt(np.mean(err * err)))


def coverage(g_model, z_true, test_points, method: str = "mean", alpha: float = 0.5) -> float:
    """Fraction of points whose model safety classification matches the truth.

    Truth is ``z_true(x) >= 0``. With ``method="mean"`` the model calls a
    point safe when the safety GP's mean is ``>= 0``; with ``method="xi"``
    when the pointwise probability of ``z >= 0`` exceeds ``1 - alpha``.
    """
    pts = _flat(test_points, g_model.dim)
    if pts.shape[0] == 0:
        raise ValueError("test grid is empty")
    truth = np.asarray(z_true(pts)) >= 0
    if method == "mean":
        model_safe = predict_mean(g_model, pts) >= 0
    elif method == "xi":
        from ..gp import predict_batch

        mu, cov = predict_batch(g_model, pts[:, None, :])
        p = xi_analytic_1d(mu[:, 0], np.sqrt(np.maximum(cov[:, 0, 0], 1e-300)))
        model_safe = p > 1.0 - alpha
    else:
        raise ValueError("method must be 'mean' or 'xi'")
    return float(np.mean(truth == model_safe))


def unsafe_fraction(log) -> float:
    """Share of actively planned trajectories flagged unsafe."""
    active = log.active if hasattr(log, "active") else [r for r in log if r.iteration > 0]
    if not active:
        return 0.0
    return sum(bool(r.unsafe) for r in active) / len(active)


def system_coverage(g_model, system, n_traj: int = 1000, seed=0, method: str = "mean") -> float:
    """``coverage`` on ``n_traj`` random ramps through ``system``'s domain."""
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    pts = sample_trajectories(system.domain(), system.nx, n_traj, seed)
    return coverage(g_model, system.z_true, pts, method)
