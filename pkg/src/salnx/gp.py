"""Exact Gaussian-process regression over trajectory-structured data.

Trajectories are stacked row-wise: a model trained on ``n`` trajectories of
``m`` points each holds an ``(n*m, d)`` input matrix. All linear algebra goes
through a lower Cholesky factor of ``K + noise * I`` (plus jitter when needed).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

__all__ = [
    "NotPositiveDefiniteError",
    "KernelParams",
    "HyperBounds",
    "Standardizer",
    "GPModel",
    "Prediction",
    "HyperFit",
    "kernel_eval",
    "kernel_matrix",
    "robust_cholesky",
    "fit",
    "predict",
    "predict_batch",
    "predict_mean",
    "block_update",
    "log_marginal_likelihood",
    "lml_and_grad",
    "train_hyperparams",
]

JITTER_START = 1e-8
JITTER_MAX = 1e-2
_LOG_2PI = np.log(2.0 * np.pi)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky failed even after the maximal diagonal jitter."""


@dataclass(frozen=True)
class KernelParams:
    """Gaussian kernel ``s2 * exp(-0.5 * (a-b)^T diag(P) (a-b))``.

    ``inverse_lengthscales`` holds the diagonal precision ``P`` (one entry per
    input dimension), i.e. inverse squared lengthscales.
    """

    signal_variance: float
    inverse_lengthscales: np.ndarray

    def __post_init__(self):
        prec = np.atleast_1d(np.asarray(self.inverse_lengthscales, dtype=float))
        object.__setattr__(self, "inverse_lengthscales", prec)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        if prec.ndim != 1 or prec.size == 0:
            raise ValueError("inverse_lengthscales must be a non-empty vector")
        if not (self.signal_variance > 0 and np.all(prec > 0)):
            raise ValueError("kernel parameters must be strictly positive")

    @property
    def dim(self) -> int:
        return self.inverse_lengthscales.size

    @classmethod
    def from_vector(cls, theta) -> tuple["KernelParams", float]:
        """Split ``(P_1..P_d, signal_variance, noise_variance)``."""
        theta = np.asarray(theta, dtype=float)
        if theta.size < 3:
            raise ValueError("hyperparameter vector needs >= 3 entries")
        return cls(theta[-2], theta[:-2]), float(theta[-1])

    def to_vector(self, noise_variance: float) -> np.ndarray:
        return np.r_[self.inverse_lengthscales, self.signal_variance, noise_variance]

    def __eq__(self, other):
        if not isinstance(other, KernelParams):
            return NotImplemented
        return self.signal_variance == other.signal_variance and np.array_equal(
            self.inverse_lengthscales, other.inverse_lengthscales
        )

    __hash__ = None


@dataclass(frozen=True)
class HyperBounds:
    """Box bounds on ``(P_1..P_d, signal_variance, noise_variance)``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.shape != up.shape or lo.ndim != 1 or lo.size < 3:
            raise ValueError("bounds must be equal-length vectors of size >= 3")
        if np.any(lo <= 0) or np.any(lo > up):
            raise ValueError("bounds must satisfy 0 < lower <= upper")


@dataclass(frozen=True)
class Standardizer:
    """Affine map ``(x - mean) / scale`` applied column-wise."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(1))
    scale: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        object.__setattr__(self, "scale", np.atleast_1d(np.asarray(self.scale, dtype=float)))
        if np.any(self.scale <= 0):
            raise ValueError("scale must be positive")

    @classmethod
    def identity(cls, dim: int = 1) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def from_data(cls, data, min_scale: float = 1e-12) -> "Standardizer":
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.shape[0] == 0:
            return cls.identity(data.shape[1])
        std = data.std(axis=0)
        return cls(data.mean(axis=0), np.where(std > min_scale, std, 1.0))

    def transform(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def inverse(self, x):
        return np.asarray(x, dtype=float) * self.scale + self.mean

    def __eq__(self, other):
        if not isinstance(other, Standardizer):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.scale, other.scale)

    __hash__ = None


def kernel_eval(x_i, x_j, params: KernelParams) -> float:
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != (params.dim,) or x_j.shape != (params.dim,):
        raise ValueError(f"expected vectors of dimension {params.dim}")
    diff = x_i - x_j
    return params.signal_variance * float(np.exp(-0.5 * np.sum(params.inverse_lengthscales * diff * diff)))


def kernel_matrix(a, b, params: KernelParams) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != params.dim or b.shape[1] != params.dim:
        raise ValueError(f"inputs must have {params.dim} columns")
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    w = np.sqrt(params.inverse_lengthscales)
    sq = cdist(a * w, b * w, "sqeuclidean")
    return params.signal_variance * np.exp(-0.5 * sq)


def _block_kernels(points, params: KernelParams) -> np.ndarray:
    """Within-trajectory kernel matrices for a ``(B, m, d)`` stack."""
    scaled = points * np.sqrt(params.inverse_lengthscales)
    diff = scaled[:, :, None, :] - scaled[:, None, :, :]
    return params.signal_variance * np.exp(-0.5 * np.einsum("bijd,bijd->bij", diff, diff))


def robust_cholesky(matrix, scale: float = 1.0):
    """Lower Cholesky factor with escalating diagonal jitter.

    Tries the bare matrix first, then ``1e-8 * scale`` growing by 10x up to
    ``1e-2 * scale``. Returns ``(L, jitter)``.
    """
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    levels = [0.0] + [JITTER_START * scale * 10.0**k for k in range(7)]
    eye = np.eye(n)
    for jitter in levels:
        try:
            chol = np.linalg.cholesky(matrix + jitter * eye if jitter else matrix)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(chol)):
            return chol, jitter
    raise NotPositiveDefiniteError(
        f"matrix not positive definite with jitter up to {JITTER_MAX * scale:g}"
    )


@dataclass(frozen=True, eq=False)
class GPModel:
    """Immutable fitted GP posterior.

    ``inputs`` and ``targets`` are stored in raw units; ``input_stats`` and
    ``target_stats`` map them into the standardized space where the kernel,
    noise and ``prior_mean`` live.
    """

    inputs: np.ndarray
    targets: np.ndarray
    kernel: KernelParams
    noise_variance: float
    prior_mean: float
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float
    input_stats: Standardizer
    target_stats: Standardizer

    @property
    def n_points(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def std_inputs(self, x=None) -> np.ndarray:
        return self.input_stats.transform(self.inputs if x is None else x)

    def std_targets(self) -> np.ndarray:
        return self.target_stats.transform(self.targets[:, None])[:, 0]


@dataclass(frozen=True)
class Prediction:
    mean: np.ndarray
    covariance: np.ndarray


def _check_stats(stats, dim):
    if stats is None:
        return Standardizer.identity(dim)
    if stats.mean.size not in (1, dim):
        raise ValueError("standardizer dimension mismatch")
    return stats


def _assemble(inputs, targets, kernel, noise_variance, prior_mean, chol, jitter, xs, ts):
    resid = ts.transform(targets[:, None])[:, 0] - prior_mean
    if resid.size:
        alpha = solve_triangular(chol, resid, lower=True, check_finite=False)
        alpha = solve_triangular(chol.T, alpha, lower=False, check_finite=False)
    else:
        alpha = np.zeros(0)
    return GPModel(inputs, targets, kernel, float(noise_variance), float(prior_mean),
                   chol, alpha, float(jitter), xs, ts)


def fit(inputs, targets, kernel: KernelParams, noise_variance: float, prior_mean: float = 0.0,
        input_stats: Standardizer | None = None, target_stats: Standardizer | None = None) -> GPModel:
    """Fit an exact GP posterior; an empty dataset yields the prior."""
    inputs = np.asarray(inputs, dtype=float).reshape(-1, kernel.dim)
    targets = np.asarray(targets, dtype=float).ravel()
    if inputs.shape[0] != targets.size:
        raise ValueError("inputs row count must equal number of targets")
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    xs = _check_stats(input_stats, kernel.dim)
    ts = _check_stats(target_stats, 1)
    gram = kernel_matrix(xs.transform(inputs), xs.transform(inputs), kernel)
    gram[np.diag_indices_from(gram)] += noise_variance
    chol, jitter = robust_cholesky(gram, kernel.signal_variance)
    return _assemble(inputs, targets, kernel, noise_variance, prior_mean, chol, jitter, xs, ts)


def _as_points(model: GPModel, tau) -> np.ndarray:
    pts = getattr(tau, "points", tau)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != model.dim:
        raise ValueError(f"trajectory points must have {model.dim} columns")
    return pts


def predict(model: GPModel, tau, standardized: bool = False) -> Prediction:
    """Joint predictive distribution of the latent function along ``tau``.

    With ``standardized=True`` the result stays in the model's standardized
    target units (where ``signal_variance`` and ``noise_variance`` apply).
    """
    pts = _as_points(model, tau)
    mean, cov = predict_batch(model, pts[None], standardized=standardized)
    return Prediction(mean[0], cov[0])


def predict_batch(model: GPModel, points, standardized: bool = False, full_cov: bool = True):
    """Predict ``B`` trajectories at once; ``points`` has shape ``(B, m, d)``.

    Returns ``(means (B, m), covs (B, m, m))``; covs is None when
    ``full_cov`` is false.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 3 or points.shape[2] != model.dim:
        raise ValueError(f"points must have shape (B, m, {model.dim})")
    b, m, _ = points.shape
    xs = model.input_stats.transform(points.reshape(b * m, -1))
    ktest = kernel_matrix(model.std_inputs(), xs, model.kernel)
    mean = model.prior_mean + ktest.T @ model.alpha
    covs = None
    if full_cov:
        covs = _block_kernels(xs.reshape(b, m, -1), model.kernel)
        if model.n_points:
            v = solve_triangular(model.chol, ktest, lower=True, check_finite=False)
            v = v.reshape(model.n_points, b, m)
            covs = covs - np.einsum("nbi,nbj->bij", v, v)
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    mean = mean.reshape(b, m)
    if not standardized:
        scale = float(model.target_stats.scale[0])
        mean = model.target_stats.inverse(mean)
        if covs is not None:
            covs = covs * scale * scale
    return mean, covs


def predict_mean(model: GPModel, x) -> np.ndarray:
    """Predictive mean (raw target units) at individual points ``(n, d)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ktest = kernel_matrix(model.std_inputs(), model.input_stats.transform(x), model.kernel)
    return model.target_stats.inverse(model.prior_mean + ktest.T @ model.alpha)


def block_update(model: GPModel, tau_new, targets_new) -> GPModel:
    """Condition on one more trajectory by extending the Cholesky factor."""
    pts = _as_points(model, tau_new)
    y_new = np.asarray(targets_new, dtype=float).ravel()
    if y_new.size != pts.shape[0]:
        raise ValueError("need one target per trajectory point")
    inputs = np.vstack([model.inputs, pts])
    targets = np.concatenate([model.targets, y_new])
    xs_new = model.input_stats.transform(pts)
    k22 = kernel_matrix(xs_new, xs_new, model.kernel)
    k22[np.diag_indices_from(k22)] += model.noise_variance + model.jitter
    if model.n_points == 0:
        cross = np.zeros((0, pts.shape[0]))
        schur = k22
    else:
        k12 = kernel_matrix(model.std_inputs(), xs_new, model.kernel)
        cross = solve_triangular(model.chol, k12, lower=True, check_finite=False)
        schur = k22 - cross.T @ cross
    try:
        l22 = np.linalg.cholesky(schur)
    except np.linalg.LinAlgError:
        return fit(inputs, targets, model.kernel, model.noise_variance, model.prior_mean,
                   model.input_stats, model.target_stats)
    n_old, n_new = model.n_points, pts.shape[0]
    chol = np.zeros((n_old + n_new, n_old + n_new))
    chol[:n_old, :n_old] = model.chol
    chol[n_old:, :n_old] = cross.T
    chol[n_old:, n_old:] = l22
    return _assemble(inputs, targets, model.kernel, model.noise_variance, model.prior_mean,
                     chol, model.jitter, model.input_stats, model.target_stats)


def log_marginal_likelihood(model: GPModel) -> float:
    """Log evidence of the standardized targets under the model's prior."""
    if model.n_points == 0:
        raise ValueError("log marginal likelihood needs at least one data point")
    resid = model.std_targets() - model.prior_mean
    n = model.n_points
    return float(-0.5 * resid @ model.alpha - np.sum(np.log(np.diag(model.chol))) - 0.5 * n * _LOG_2PI)


def lml_and_grad(log_theta, x_std, y_centered):
    """Log marginal likelihood and its gradient in log-hyperparameter space.

    ``log_theta`` is ``log(P_1..P_d, signal_variance, noise_variance)``; the
    inputs are already standardized and the targets already centered.
    """
    theta = np.exp(log_theta)
    prec, sf2, noise = theta[:-2], theta[-2], theta[-1]
    n = x_std.shape[0]
    sqd = (x_std[:, None, :] - x_std[None, :, :]) ** 2
    kf = sf2 * np.exp(-0.5 * np.einsum("ijd,d->ij", sqd, prec))
    gram = kf + noise * np.eye(n)
    chol, _ = robust_cholesky(gram, sf2)
    alpha = solve_triangular(chol, y_centered, lower=True, check_finite=False)
    alpha = solve_triangular(chol.T, alpha, lower=False, check_finite=False)
    lml = -0.5 * y_centered @ alpha - np.sum(np.log(np.diag(chol))) - 0.5 * n * _LOG_2PI
    chol_inv = solve_triangular(chol, np.eye(n), lower=True, check_finite=False)
    inner = np.outer(alpha, alpha) - chol_inv.T @ chol_inv
    grad = np.empty_like(theta)
    for j in range(prec.size):
        grad[j] = 0.5 * np.sum(inner * kf * (-0.5 * prec[j] * sqd[:, :, j]))
    grad[-2] = 0.5 * np.sum(inner * kf)
    grad[-1] = 0.5 * noise * np.trace(inner)
    return float(lml), grad


@dataclass(frozen=True)
class HyperFit:
    kernel: KernelParams
    noise_variance: float
    log_likelihood: float
    success: bool


def train_hyperparams(inputs, targets, bounds: HyperBounds, init=None, restarts: int = 5,
                      seed: int = 0, prior_mean: float = 0.0,
                      input_stats: Standardizer | None = None,
                      target_stats: Standardizer | None = None) -> HyperFit:
    """Maximize the log marginal likelihood inside a box.

    Seeded multistart of L-BFGS-B in log space with analytic gradients; the
    first start is ``init`` (a ``(KernelParams, noise)`` pair or a vector,
    clipped into the box), the rest are uniform in the log box. If every
    restart fails, ``init`` is returned with ``success=False``.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float).ravel()
    d = bounds.lower.size - 2
    inputs = inputs.reshape(-1, d)
    xs = _check_stats(input_stats, d)
    ts = _check_stats(target_stats, 1)
    x_std = xs.transform(inputs)
    y_c = ts.transform(targets[:, None])[:, 0] - prior_mean

    lo, hi = np.log(bounds.lower), np.log(bounds.upper)
    if init is None:
        theta0 = np.sqrt(bounds.lower * bounds.upper)
    elif isinstance(init, tuple):
        theta0 = init[0].to_vector(init[1])
    else:
        theta0 = np.asarray(init, dtype=float)
    start0 = np.clip(np.log(theta0), lo, hi)

    def negative(lt):
        val, grad = lml_and_grad(lt, x_std, y_c)
        return -val, -grad

    def unpack(lt, value, ok):
        kern, noise = KernelParams.from_vector(np.exp(lt))
        return HyperFit(kern, noise, value, ok)

    try:
        base_value = -negative(start0)[0]
    except np.linalg.LinAlgError:
        base_value = -np.inf
    if np.all(lo == hi) or inputs.shape[0] == 0:
        return unpack(start0, base_value, True)

    rng = np.random.default_rng(seed)
    starts = [start0] + [rng.uniform(lo, hi) for _ in range(max(restarts, 1) - 1)]
    best_x, best_val, any_ok = start0, base_value, False
    for x0 in starts:
        try:
            res = minimize(negative, x0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)))
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
            continue
        any_ok = any_ok or bool(res.success)
        if -res.fun > best_val:
            best_x, best_val = np.clip(res.x, lo, hi), -float(res.fun)
    if not any_ok:
        warnings.warn("hyperparameter training failed on every restart; keeping init", RuntimeWarning)
        return unpack(start0, base_value, False)
    return unpack(best_x, best_val, True)


def with_kernel(model: GPModel, kernel: KernelParams, noise_variance: float) -> GPModel:
    """Refit ``model``'s data under new hyperparameters."""
    return fit(model.inputs, model.targets, kernel, noise_variance, model.prior_mean,
               model.input_stats, model.target_stats)


def restandardized(model: GPModel, target_stats: Standardizer) -> GPModel:
    """Same posterior factor, new target standardization."""
    return _assemble(model.inputs, model.targets, model.kernel, model.noise_variance,
                     model.prior_mean, model.chol, model.jitter, model.input_stats, target_stats)

