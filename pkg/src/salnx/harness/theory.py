"""Numerical checks of the information-gain identities and variance bounds.

All quantities are recomputed from the logged trajectories and the header's
regression-GP hyperparameters (standardized units):

* mutual information two ways: the running sum of
  ``0.5 log|I + s^-2 Sigma_{i-1}(tau_i)|`` from sequential posterior updates,
  and ``0.5 (log|K + s^2 I| - n log s^2)`` from the full kernel matrix;
* the per-trajectory bound ``det Sigma <= C1 log(1 + det(s^-2 Sigma))`` with
  ``C1 = sf^{2m} / log(1 + s^{-2m} sf^{2m})`` and the cumulative bound
  ``sum det Sigma <= 2 C1 I``;
* the decay of the running mean of ``det Sigma_{i-1}(tau_i)`` and greedy
  dominance of the chosen ramp over the logged same-start alternatives.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import kendalltau

from ..gp import KernelParams, Standardizer, block_update, fit, kernel_matrix, predict

__all__ = [
    "TheoryReport",
    "MARGIN_SLACK",
    "bound_constants",
    "sequential_terms",
    "theory_mutual_info",
    "theory_det_bounds",
    "decay_ratio",
    "theory_decay",
    "run_theory",
]

MARGIN_SLACK = -1e-8
MI_RTOL = 1e-7


@dataclass
class TheoryReport:
    logdets: list = field(default_factory=list)
    mutual_info_sequential: float | None = None
    mutual_info_direct: float | None = None
    mutual_info_rel_error: float | None = None
    c1: float | None = None
    c: float | None = None
    det_bound_margin: float | None = None
    cumulative_margin: float | None = None
    decay_ratio: float | None = None
    trend: float | None = None
    dominance_margin: float | None = None
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def merge(self, other: "TheoryReport") -> "TheoryReport":
        for key, value in asdict(other).items():
            if key == "checks":
                self.checks.update(value)
            elif value not in (None, []):
                setattr(self, key, value)
        return self

    def summary(self) -> dict:
        out = asdict(self)
        out.pop("logdets")
        out["passed"] = self.passed
        return out


def bound_constants(signal_variance: float, noise_variance: float, m: int) -> tuple[float, float]:
    """``(C1, C)`` with ``C1 = sf^{2m} / log(1 + s^{-2m} sf^{2m})`` and ``C = 2 C1``."""
    top = signal_variance ** m
    c1 = top / np.log1p(top / noise_variance ** m)
    return float(c1), float(2.0 * c1)


def _model_setup(header):
    kern, noise = KernelParams.from_vector(np.asarray(header["theta_f"], dtype=float))
    stats = Standardizer(np.asarray(header["input_mean"]), np.asarray(header["input_scale"]))
    return kern, noise, stats


def _taus(log):
    return [np.asarray(r.tau, dtype=float) for r in log.records]


def sequential_terms(taus, kernel: KernelParams, noise_variance: float, input_stats=None):
    """Posterior covariances ``Sigma_{i-1}(tau_i)`` (standardized) along a design sequence."""
    dim = kernel.dim
    model = fit(np.zeros((0, dim)), np.zeros(0), kernel, noise_variance, 0.0, input_stats)
    covs = []
    for tau in taus:
        covs.append(predict(model, tau, standardized=True).covariance)
        model = block_update(model, tau, np.zeros(len(tau)))
    return covs


def _logdet_plus_identity(cov, noise):
    sign, val = np.linalg.slogdet(np.eye(len(cov)) + cov / noise)
    return float(val)


def _direct_mutual_info(taus, kernel, noise, input_stats):
    pts = np.vstack(taus)
    if input_stats is not None:
        pts = input_stats.transform(pts)
    gram = kernel_matrix(pts, pts, kernel)
    gram[np.diag_indices_from(gram)] += noise
    _, logdet = np.linalg.slogdet(gram)
    return 0.5 * (logdet - pts.shape[0] * np.log(noise))


def theory_mutual_info(log=None, taus=None, kernel=None, noise_variance=None,
                       input_stats=None) -> TheoryReport:
    """Mutual information by sequential updates and by the joint kernel matrix."""
    if log is not None:
        kernel, noise_variance, input_stats = _model_setup(log.header)
        taus = _taus(log)
    covs = sequential_terms(taus, kernel, noise_variance, input_stats)
    seq = 0.5 * sum(_logdet_plus_identity(c, noise_variance) for c in covs)
    direct = _direct_mutual_info(taus, kernel, noise_variance, input_stats)
    rel = abs(seq - direct) / max(abs(direct), 1e-300)
    return TheoryReport(mutual_info_sequential=float(seq), mutual_info_direct=float(direct),
                        mutual_info_rel_error=float(rel), checks={"mutual_info": bool(rel <= MI_RTOL)})


def theory_det_bounds(log=None, taus=None, kernel=None, noise_variance=None,
                      input_stats=None) -> TheoryReport:
    """Per-trajectory and cumulative determinant bounds (needs ``k <= 1``)."""
    if log is not None:
        kernel, noise_variance, input_stats = _model_setup(log.header)
        taus = _taus(log)
    covs = sequential_terms(taus, kernel, noise_variance, input_stats)
    sf2, s2 = kernel.signal_variance, noise_variance
    margins, dets, info, c_max = [], [], 0.0, 0.0
    for cov in covs:
        m = len(cov)
        c1, c = bound_constants(sf2, s2, m)
        c_max = max(c_max, c)
        det = max(float(np.linalg.det(cov)), 0.0)
        dets.append(det)
        margins.append(c1 * np.log1p(det / s2 ** m) - det)
        info += 0.5 * _logdet_plus_identity(cov, s2)
    m = len(covs[0]) if covs else 1
    c1, c = bound_constants(sf2, s2, m)
    # with trajectories of unequal length the largest constant is the valid one
    cumulative = max(c, c_max) * info - sum(dets)
    det_margin = float(min(margins)) if margins else 0.0
    return TheoryReport(
        logdets=[float(np.log(d)) if d > 0 else float("-inf") for d in dets],
        c1=c1, c=c, det_bound_margin=det_margin, cumulative_margin=float(cumulative),
        checks={"det_bound": det_margin >= MARGIN_SLACK,
                "cumulative_bound": cumulative >= MARGIN_SLACK,
                "bounded_kernel": sf2 <= 1.0},
    )


def decay_ratio(dets, n_early: int = 10, n_late: int = 100) -> float:
    """``mean(dets[:n_late]) / mean(dets[:n_early])``."""
    dets = np.asarray(dets, dtype=float)
    if dets.size < n_late or n_early < 1:
        raise ValueError(f"need at least {n_late} values")
    return float(np.mean(dets[:n_late]) / np.mean(dets[:n_early]))


def _running_mean(values, window):
    kernel = np.ones(window) / window
    return np.convolve(values, kernel, mode="valid")


def theory_decay(log, n_early: int = 10, n_late: int = 100, threshold: float = 0.3,
                 window: int = 10) -> TheoryReport:
    """Decay of the chosen ramps' determinants plus greedy dominance.

    Dominance compares each chosen criterion with every feasible logged
    alternative drawn for the same start point.
    """
    active = log.active
    dets = np.exp(np.array([r.logdet for r in active], dtype=float))
    report = TheoryReport()
    if len(dets) >= n_late:
        report.decay_ratio = decay_ratio(dets, n_early, n_late)
        report.checks["decay"] = report.decay_ratio < threshold
    if len(dets) >= 2 * window:
        smooth = _running_mean(dets, window)
        report.trend = float(kendalltau(np.arange(smooth.size), smooth).statistic)
        report.checks["decreasing_trend"] = report.trend < 0
    margins = []
    for r in active:
        alt = r.alternatives
        if not alt or r.criterion is None:
            continue
        feasible = np.asarray(alt["feasible"], dtype=bool)
        if feasible.any():
            margins.append(r.criterion - float(np.max(np.asarray(alt["criteria"])[feasible])))
    if margins:
        report.dominance_margin = float(min(margins))
        report.checks["dominance"] = report.dominance_margin >= MARGIN_SLACK
    return report


def run_theory(log, n_early: int = 10, n_late: int = 100) -> TheoryReport:
    report = theory_mutual_info(log)
    report.merge(theory_det_bounds(log))
    report.merge(theory_decay(log, n_early, n_late))
    return report
