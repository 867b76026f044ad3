"""Optimality criteria mapping a covariance matrix to a scalar."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["Criterion", "SafetyBudget", "criterion_value", "criterion_batch", "alpha_for_budget"]

PSD_SLACK = 1e-8


class Criterion(str, Enum):
    DETERMINANT = "determinant"
    TRACE = "trace"
    MAX_EIGENVALUE = "max_eigenvalue"


def _logdet_psd(cov) -> float:
    try:
        chol = np.linalg.cholesky(cov)
        return float(2.0 * np.sum(np.log(np.diag(chol))))
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(cov)
        scale = max(1.0, float(np.max(np.abs(eig))))
        if eig[0] < -PSD_SLACK * scale:
            raise ValueError(f"matrix is not PSD (min eigenvalue {eig[0]:.3g})") from None
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(np.clip(eig, 0.0, None))))


def criterion_value(sigma, kind: Criterion | str = Criterion.DETERMINANT) -> float:
    """Scalar information measure of a covariance matrix.

    The determinant criterion is reported as a log-determinant (same argmax,
    better range); singular PSD matrices give ``-inf``.
    """
    kind = Criterion(kind)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    if kind is Criterion.DETERMINANT:
        return _logdet_psd(sigma)
    if kind is Criterion.TRACE:
        return float(np.trace(sigma))
    return float(np.linalg.eigvalsh(0.5 * (sigma + sigma.T))[-1])


def criterion_batch(sigmas, kind: Criterion | str = Criterion.DETERMINANT) -> np.ndarray:
    """Vectorized ``criterion_value`` over a ``(B, m, m)`` stack."""
    kind = Criterion(kind)
    sigmas = np.asarray(sigmas, dtype=float)
    if kind is Criterion.TRACE:
        return np.trace(sigmas, axis1=1, axis2=2)
    if kind is Criterion.MAX_EIGENVALUE:
        return np.linalg.eigvalsh(sigmas)[:, -1]
    try:
        chol = np.linalg.cholesky(sigmas)
        return 2.0 * np.sum(np.log(np.diagonal(chol, axis1=1, axis2=2)), axis=1)
    except np.linalg.LinAlgError:
        return np.array([_logdet_psd(s) for s in sigmas])


@dataclass(frozen=True)
class SafetyBudget:
    """Total failure probability ``delta`` spread over ``n_trajectories`` plans."""

    delta: float
    n_trajectories: int

    def __post_init__(self):
        if not 0 < self.delta <= 1 or self.n_trajectories < 1:
            raise ValueError("need 0 < delta <= 1 and at least one trajectory")


def alpha_for_budget(budget: SafetyBudget) -> float:
    """Per-trajectory threshold keeping the union bound at ``delta``."""
    return budget.delta / budget.n_trajectories
