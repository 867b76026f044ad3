"""NX/NARX input embedding and ramp trajectory parametrization.

An embedded input point stacks lagged manipulated variables, newest first::

    x_k = (y_{k-1}, ..., y_{k-q}, u_k, u_{k-1}, ..., u_{k-d2+1})

where each ``u`` is a ``d1``-vector and the ``q`` output-feedback slots are
only present for NARX models. Points are stored row-wise, so a trajectory of
``m`` points is an ``(m, d)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "NxConfig",
    "History",
    "Trajectory",
    "ramp_points",
    "ramp_points_batch",
    "ramp_inputs",
    "nx_embed",
    "narx_embed_with_surrogate",
    "plan_points",
    "embed_tail",
    "input_standardizer",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower, upper]`` (the ramp endpoint domain)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != up.shape or np.any(lo >= up):
            raise ValueError("box needs lower < upper with matching shapes")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, self.dim))

    def clip(self, x) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    __hash__ = None


@dataclass(frozen=True)
class NxConfig:
    """Embedding layout.

    ``lags`` optionally overrides the contiguous ``d2`` structure with an
    explicit list of ``(dimension, lag)`` slots, e.g. to skip a lag for one
    manipulated variable. Without it the slots are ordered lag-major:
    ``(u_k^(1), .., u_k^(d1), u_{k-1}^(1), ..)``.
    """

    d1: int
    d2: int = 1
    q: int = 0
    m: int = 5
    lags: tuple | None = None

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1 or self.m < 1 or self.q < 0:
            raise ValueError("need d1 >= 1, d2 >= 1, m >= 1, q >= 0")
        if self.lags is not None:
            lags = tuple((int(j), int(i)) for j, i in self.lags)
            if not lags or any(not 0 <= j < self.d1 or i < 0 for j, i in lags):
                raise ValueError("lag slots must be (dim < d1, lag >= 0) pairs")
            object.__setattr__(self, "lags", lags)

    @property
    def slots(self) -> tuple:
        if self.lags is not None:
            return self.lags
        return tuple((j, i) for i in range(self.d2) for j in range(self.d1))

    @property
    def max_lag(self) -> int:
        return max(i for _, i in self.slots)

    @property
    def d(self) -> int:
        return self.q + len(self.slots)

    @property
    def required_history(self) -> int:
        """Executed rows (including the ramp start) a ramp plan reads."""
        return max(1, self.max_lag, self.q)


class History:
    """Append-only record of executed manipulated inputs (and outputs).

    Row ``-1`` is the most recent executed input ``u_0`` (the next ramp's
    start). Outputs are only read by NARX embeddings.
    """

    def __init__(self, u, y=None):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        self._u = [row.copy() for row in u]
        y = np.zeros(len(self._u)) if y is None else np.asarray(y, dtype=float).ravel()
        if y.size != len(self._u):
            raise ValueError("need one output per executed input")
        self._y = list(y)

    @classmethod
    def seeded(cls, u0, depth: int, y0: float = 0.0) -> "History":
        """Replicate the initial safe point ``depth`` times backwards."""
        u0 = np.asarray(u0, dtype=float).ravel()
        return cls(np.tile(u0, (max(depth, 1), 1)), np.full(max(depth, 1), y0))

    def append(self, u_rows, y_rows=None):
        u_rows = np.atleast_2d(np.asarray(u_rows, dtype=float))
        if u_rows.shape[1] != self.d1:
            raise ValueError("input dimension mismatch")
        y_rows = np.zeros(len(u_rows)) if y_rows is None else np.asarray(y_rows, dtype=float).ravel()
        if y_rows.size != len(u_rows):
            raise ValueError("need one output per executed input")
        self._u.extend(row.copy() for row in u_rows)
        self._y.extend(float(v) for v in y_rows)

    def set_last_output(self, y: float):
        self._y[-1] = float(y)

    def __len__(self):
        return len(self._u)

    @property
    def d1(self) -> int:
        return self._u[0].size

    @property
    def u(self) -> np.ndarray:
        return np.array(self._u)

    @property
    def y(self) -> np.ndarray:
        return np.array(self._y)

    @property
    def last(self) -> np.ndarray:
        return self._u[-1].copy()

    def tail(self, n: int) -> "History":
        n = max(1, min(n, len(self)))
        return History(self._u[-n:], self._y[-n:])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One piecewise trajectory.

    ``points`` is the ``(m, d)`` embedded model input; ``inputs`` is the
    ``(m, d1)`` manipulated-variable sequence sent to the system.
    """

    points: np.ndarray
    inputs: np.ndarray

    @property
    def m(self) -> int:
        return self.points.shape[0]


def ramp_inputs(eta, u0, m: int) -> np.ndarray:
    """Manipulated values ``u0 + (k/m)(eta - u0)`` for ``k = 1..m``."""
    eta = np.asarray(eta, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    k = np.arange(1, m + 1)[:, None]
    return u0 + (k / m) * (eta - u0)


def _ramp_layout(history: History, cfg: NxConfig):
    """Affine layout of the u-slots: ``points = base + coef * (eta - u0)[dims]``."""
    if history.d1 != cfg.d1:
        raise ValueError("history dimension does not match d1")
    if len(history) < cfg.required_history:
        raise RuntimeError(
            f"history has {len(history)} rows; ramp needs {cfg.required_history}"
        )
    u_hist = history.u
    last = len(u_hist) - 1
    u0 = u_hist[last]
    slots = cfg.slots
    base = np.empty((cfg.m, len(slots)))
    coef = np.zeros((cfg.m, len(slots)))
    dims = np.array([j for j, _ in slots])
    for k in range(1, cfg.m + 1):
        for s, (j, i) in enumerate(slots):
            off = k - i
            if off >= 0:
                base[k - 1, s] = u0[j]
                coef[k - 1, s] = off / cfg.m
            else:
                base[k - 1, s] = u_hist[last + off, j]
    return u0, base, coef, dims


def ramp_points_batch(etas, history: History, cfg: NxConfig) -> np.ndarray:
    """u-slot embeddings for many ramp endpoints at once, shape ``(B, m, len(slots))``."""
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    if etas.shape[1] != cfg.d1:
        raise ValueError(f"ramp endpoints must have {cfg.d1} entries")
    u0, base, coef, dims = _ramp_layout(history, cfg)
    delta = (etas - u0)[:, dims]
    pts = base[None] + coef[None] * delta[:, None, :]
    # the newest slot of the last point is eta itself, not a rounded product
    for s, (j, i) in enumerate(cfg.slots):
        if i == 0:
            pts[:, -1, s] = etas[:, j]
    return pts


def ramp_points(eta, history: History, cfg: NxConfig) -> Trajectory:
    """Embedded NX points of the ramp from ``history.last`` to ``eta``.

    Slot ``(j, i)`` of point ``k`` is ``u0 + ((k-i)/m)(eta-u0)`` when
    ``k - i >= 0`` and the executed value ``i - k`` steps before ``u0``
    otherwise.
    """
    if cfg.q:
        raise ValueError("ramp_points builds NX embeddings; use plan_points for q > 0")
    eta = np.asarray(eta, dtype=float).ravel()
    pts = ramp_points_batch(eta[None], history, cfg)[0]
    inputs = ramp_inputs(eta, history.last, cfg.m)
    inputs[-1] = eta
    return Trajectory(pts, inputs)


def nx_embed(u_sequence, cfg: NxConfig) -> np.ndarray:
    """All valid NX embeddings of a manipulated sequence, oldest first."""
    u = np.asarray(u_sequence, dtype=float)
    if u.ndim == 1:
        u = u[:, None] if cfg.d1 == 1 else u[None, :]
    if u.shape[1] != cfg.d1:
        raise ValueError(f"sequence rows must have {cfg.d1} entries")
    start = cfg.max_lag
    if u.shape[0] <= start:
        raise ValueError(f"sequence needs at least {start + 1} rows")
    ks = np.arange(start, u.shape[0])
    return np.stack([u[ks - i, j] for j, i in cfg.slots], axis=1)


def _feedback(y_seq, ks, q):
    return np.stack([y_seq[ks - l] for l in range(1, q + 1)], axis=1)


def narx_embed_with_surrogate(u_sequence, f_model, cfg: NxConfig, y_init=None) -> np.ndarray:
    """NARX embeddings whose output slots are filled by the GP's predictive mean.

    Rolls forward through the sequence: each embedded point is predicted and
    its mean becomes the feedback for the following points. Outputs before
    the first embedded point are ``y_init`` (default: the model's prior mean).
    """
    if cfg.q < 1:
        raise ValueError("narx embedding needs q >= 1; use nx_embed for q = 0")
    from .gp import predict_mean

    u_part = nx_embed(u_sequence, cfg)
    n_rows = u_part.shape[0] + cfg.max_lag
    if y_init is None:
        y_init = float(f_model.target_stats.inverse(np.array([f_model.prior_mean]))[0])
    y = np.full(n_rows, float(y_init))
    out = np.empty((u_part.shape[0], cfg.d))
    for r, k in enumerate(range(cfg.max_lag, n_rows)):
        fb = [y[k - l] if k - l >= 0 else y_init for l in range(1, cfg.q + 1)]
        out[r, : cfg.q] = fb
        out[r, cfg.q:] = u_part[r]
        y[k] = predict_mean(f_model, out[r][None])[0]
    return out


def plan_points(etas, history: History, cfg: NxConfig, f_model=None) -> np.ndarray:
    """Model inputs ``(B, m, d)`` for candidate ramps.

    NARX feedback slots use recorded outputs for executed steps and the
    regression GP's predictive mean for planned steps.
    """
    u_pts = ramp_points_batch(etas, history, cfg)
    if cfg.q == 0:
        return u_pts
    if f_model is None:
        raise ValueError("planning a NARX trajectory needs the regression model")
    from .gp import predict_mean

    b = u_pts.shape[0]
    y_hist = history.y
    last = len(y_hist) - 1
    pts = np.empty((b, cfg.m, cfg.d))
    pts[:, :, cfg.q:] = u_pts
    planned = np.empty((b, cfg.m))
    for k in range(1, cfg.m + 1):
        for l in range(1, cfg.q + 1):
            off = k - l
            pts[:, k - 1, l - 1] = planned[:, off - 1] if off >= 1 else y_hist[last + off]
        planned[:, k - 1] = predict_mean(f_model, pts[:, k - 1, :])
    return pts


def embed_tail(history: History, cfg: NxConfig, n_points: int) -> np.ndarray:
    """Embeddings of the last ``n_points`` executed steps using recorded outputs."""
    u = history.u
    k = np.arange(len(u) - n_points, len(u))
    if k[0] < max(cfg.max_lag, cfg.q):
        raise RuntimeError("history too short to embed the requested steps")
    cols = [u[k - i, j] for j, i in cfg.slots]
    if cfg.q:
        y = history.y
        cols = [y[k - l] for l in range(1, cfg.q + 1)] + cols
    return np.stack(cols, axis=1)


def input_standardizer(cfg: NxConfig, domain: Box, feedback_data=None):
    """Standardizer for embedded inputs.

    u-slots use the moments of the uniform distribution on the domain box;
    output-feedback slots use the moments of ``feedback_data`` (recorded
    outputs) when given.
    """
    from .gp import Standardizer

    mean = np.empty(cfg.d)
    scale = np.empty(cfg.d)
    if cfg.q:
        fb = Standardizer.from_data(np.asarray(feedback_data if feedback_data is not None else [0.0]))
        mean[: cfg.q] = fb.mean[0]
        scale[: cfg.q] = fb.scale[0]
    for s, (j, _) in enumerate(cfg.slots):
        mean[cfg.q + s] = domain.center[j]
        scale[cfg.q + s] = domain.width[j] / np.sqrt(12.0)
    return Standardizer(mean, scale)
