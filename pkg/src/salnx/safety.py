"""Safety indicator, safety GP helpers and Monte-Carlo trajectory safety."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .gp import GPModel, KernelParams, Standardizer, fit, robust_cholesky

__all__ = [
    "SAFETY_PRIOR_MEAN",
    "SafetyEstimate",
    "pressure_indicator",
    "fit_safety_model",
    "base_normals",
    "xi_mc",
    "xi_mc_batch",
    "xi_analytic_1d",
    "is_safe",
]

# unexplored regions default to unsafe
SAFETY_PRIOR_MEAN = -2.0


@dataclass(frozen=True)
class SafetyEstimate:
    p_hat: float
    n_samples: int
    std_err: float
    seed: int | None

    @classmethod
    def from_count(cls, n_safe: int, n_samples: int, seed=None) -> "SafetyEstimate":
        p = n_safe / n_samples
        return cls(p, n_samples, float(np.sqrt(p * (1.0 - p) / n_samples)), seed)


def pressure_indicator(psi, psi_max, lambda_p):
    """Safety value ``1 - exp((psi - psi_max) / lambda_p)``; zero at the limit."""
    if not np.all(np.asarray(lambda_p) > 0):
        raise ValueError("lambda_p must be positive")
    return 1.0 - np.exp((np.asarray(psi, dtype=float) - psi_max) / lambda_p)


def fit_safety_model(inputs, z, kernel: KernelParams, noise_variance: float,
                     input_stats: Standardizer | None = None,
                     prior_mean: float = SAFETY_PRIOR_MEAN) -> GPModel:
    """Safety GP on raw indicator values so the ``z >= 0`` threshold is kept."""
    return fit(inputs, z, kernel, noise_variance, prior_mean, input_stats, None)


def base_normals(n_samples: int, m: int, seed) -> np.ndarray:
    """Standard normal draws shared by every candidate of one acquisition."""
    return np.random.default_rng(seed).standard_normal((n_samples, m))


def _chol_stack(covs):
    covs = np.asarray(covs, dtype=float)
    try:
        return np.linalg.cholesky(covs)
    except np.linalg.LinAlgError:
        out = np.empty_like(covs)
        for b, cov in enumerate(covs):
            scale = max(float(np.max(np.diag(cov))), 1e-300)
            out[b] = robust_cholesky(cov, scale)[0]
        return out


def xi_mc_batch(means, covs, normals) -> np.ndarray:
    """Fraction of correlated draws with every component non-negative.

    ``means`` is ``(B, m)``, ``covs`` ``(B, m, m)``; ``normals`` is a fixed
    ``(S, m)`` standard-normal array reused for every candidate.
    """
    means = np.atleast_2d(np.asarray(means, dtype=float))
    chol = _chol_stack(np.reshape(covs, (means.shape[0], means.shape[1], means.shape[1])))
    samples = means[:, None, :] + np.einsum("sk,bmk->bsm", normals, chol)
    return np.mean(np.all(samples >= 0.0, axis=2), axis=1)


def xi_mc(mu_g, sigma_g, n_samples: int = 1000, seed=0, normals=None) -> SafetyEstimate:
    """Monte-Carlo estimate of ``P(all z_j >= 0)`` for ``z ~ N(mu_g, sigma_g)``."""
    mu = np.atleast_1d(np.asarray(mu_g, dtype=float))
    cov = np.atleast_2d(np.asarray(sigma_g, dtype=float))
    if cov.shape != (mu.size, mu.size):
        raise ValueError("covariance shape does not match mean")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if normals is None:
        normals = base_normals(n_samples, mu.size, seed)
    p = xi_mc_batch(mu[None], cov[None], normals)[0]
    n = normals.shape[0]
    return SafetyEstimate.from_count(int(round(p * n)), n, seed)


def xi_analytic_1d(mu, sigma):
    if not np.all(np.asarray(sigma) > 0):
        raise ValueError("sigma must be positive")
    return norm.cdf(np.asarray(mu, dtype=float) / sigma)


def is_safe(estimate, alpha: float) -> bool:
    """``p_hat > 1 - alpha``; accepts a SafetyEstimate or a bare probability."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    p = getattr(estimate, "p_hat", estimate)
    return bool(p > 1.0 - alpha)
