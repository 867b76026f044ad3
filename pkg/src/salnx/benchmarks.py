"""Synthetic ground-truth systems and the system adapter interface.

Two toy systems are provided:

* ``exp1``: static 2-D quadratic with an elliptic safe region, unit noise on
  both the output and the safety indicator.
* ``exp2``: NX system with input ``x_k = (u_k, u_{k-1})`` whose output and
  safety latent depend on the last step through difference quotients; safety
  noise has standard deviation 0.01.

Adapters execute manipulated-variable sequences and report outputs, safety
indicators and the first ground-truth violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .trajectory import Box, History, NxConfig, embed_tail

__all__ = [
    "StepResult",
    "SystemAdapter",
    "SyntheticSystem",
    "exp1_f",
    "exp1_g",
    "exp1_z",
    "exp2_f",
    "exp2_g",
    "exp2_z",
    "observe_y",
    "observe_z",
    "make_benchmark",
    "BENCHMARKS",
]


@dataclass
class StepResult:
    """Outcome of executing one trajectory.

    ``violation_index`` is the first step whose true safety value is negative
    (None if the whole piece was safe). When the system interrupts, ``y`` and
    ``z`` only cover the executed prefix.
    """

    y: np.ndarray
    z: np.ndarray
    violation_index: int | None = None
    interrupted: bool = False


class SystemAdapter(Protocol):
    def initial_safe_point(self) -> np.ndarray: ...

    def domain(self) -> Box: ...

    def step(self, u_points: np.ndarray) -> StepResult: ...


def _quad(u, center, sign):
    a = u[..., 0] - center
    b = u[..., 1] - center
    return a * a + sign * a * b + b * b


def _quad_grad(u, center, sign, j):
    a = u[..., 0] - center
    b = u[..., 1] - center
    return 2 * a + sign * b if j == 0 else 2 * b + sign * a


def _quotient(u_now, u_prev, j, center, sign, tol=1e-9):
    """``[h(u_now) - h(u_now with coord j from u_prev)] / (u_now_j - u_prev_j)``.

    Falls back to the partial derivative when the step in coordinate j
    vanishes.
    """
    mixed = u_now.copy()
    mixed[..., j] = u_prev[..., j]
    step = u_now[..., j] - u_prev[..., j]
    small = np.abs(step) < tol
    safe_step = np.where(small, 1.0, step)
    q = (_quad(u_now, center, sign) - _quad(mixed, center, sign)) / safe_step
    return np.where(small, _quad_grad(u_now, center, sign, j), q)


def exp1_f(x):
    """``(x1-2)^2 + (x1-2)(x2-2) + (x2-2)^2``; accepts ``(..., 2)`` arrays."""
    return _quad(np.asarray(x, dtype=float), 2.0, 1.0)


def exp1_g(x):
    return _quad(np.asarray(x, dtype=float), 5.0, 1.0)


def exp1_z(x, noise=None):
    """Safety indicator ``1 - 0.005 g(x)`` plus optional additive noise."""
    z = -0.005 * exp1_g(x) + 1.0
    return z if noise is None else z + noise


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0:2], x[..., 2:4]


def exp2_f(x):
    """History-dependent output for ``x = (u_k, u_{k-1})`` (4 columns)."""
    u_now, u_prev = _split(x)
    base = _quad(u_now, 2.0, -1.0)
    return base + _quotient(u_now, u_prev, 0, 2.0, -1.0) + _quotient(u_now, u_prev, 1, 2.0, -1.0)


def exp2_g(x):
    u_now, u_prev = _split(x)
    base = _quad(u_now, 5.0, -1.0)
    return (base - np.abs(_quotient(u_now, u_prev, 0, 5.0, -1.0))
            - np.abs(_quotient(u_now, u_prev, 1, 5.0, -1.0)))


def exp2_z(x, noise=None):
    z = -0.005 * exp2_g(x) + 1.0
    return z if noise is None else z + noise


class SyntheticSystem:
    """Noisy ground-truth system driven through the adapter interface.

    The system keeps its own executed-input history, embeds each new input
    according to ``nx`` and evaluates the true functions there.
    """

    def __init__(self, f_true: Callable, z_true: Callable, nx: NxConfig, domain: Box,
                 safe_point, noise_std_y: float, noise_std_z: float, seed=None,
                 noiseless: bool = False, interrupt_on_violation: bool = False, name: str = "custom"):
        self.f_true = f_true
        self.z_true = z_true
        self.nx = nx
        self._domain = domain
        self._safe_point = np.asarray(safe_point, dtype=float)
        self.noise_std_y = 0.0 if noiseless else float(noise_std_y)
        self.noise_std_z = 0.0 if noiseless else float(noise_std_z)
        self.interrupt_on_violation = interrupt_on_violation
        self.name = name
        self.rng = np.random.default_rng(seed)
        self.history = History.seeded(self._safe_point, nx.required_history + 1)

    def initial_safe_point(self) -> np.ndarray:
        return self._safe_point.copy()

    def domain(self) -> Box:
        return self._domain

    def observe_y(self, x) -> np.ndarray:
        f = np.asarray(self.f_true(x), dtype=float)
        return f + self.noise_std_y * self.rng.standard_normal(f.shape)

    def observe_z(self, x) -> np.ndarray:
        z = np.asarray(self.z_true(x), dtype=float)
        return z + self.noise_std_z * self.rng.standard_normal(z.shape)

    def step(self, u_points) -> StepResult:
        u_points = np.atleast_2d(np.asarray(u_points, dtype=float))
        ys, zs, violation = [], [], None
        for k, u in enumerate(u_points):
            self.history.append(u[None], [0.0])
            x = embed_tail(self.history, self.nx, 1)[0]
            y = float(self.observe_y(x))
            z = float(self.observe_z(x))
            self.history.set_last_output(y)
            ys.append(y)
            zs.append(z)
            if violation is None and self.z_true(x) < 0:
                violation = k
                if self.interrupt_on_violation:
                    return StepResult(np.array(ys), np.array(zs), violation, True)
        return StepResult(np.array(ys), np.array(zs), violation, False)


def observe_y(system: SyntheticSystem, x):
    return system.observe_y(x)


def observe_z(system: SyntheticSystem, x):
    return system.observe_z(x)


# Fixed hyperparameters are given as (P_1..P_d, signal_variance, noise_variance).
BENCHMARKS = {
    "exp1": dict(
        f_true=exp1_f, z_true=exp1_z, nx=NxConfig(d1=2, d2=1, m=5),
        domain=Box([-5.0, -5.0], [45.0, 45.0]), safe_point=[5.0, 5.0],
        noise_std_y=1.0, noise_std_z=1.0,
        theta_f=(2.25, 2.25, 1.0, 0.25), theta_g=(2.25, 2.25, 4.0, 1.0),
    ),
    "exp2": dict(
        f_true=exp2_f, z_true=exp2_z, nx=NxConfig(d1=2, d2=2, m=5),
        domain=Box([-5.0, -5.0], [45.0, 45.0]), safe_point=[5.0, 5.0],
        noise_std_y=1.0, noise_std_z=0.01,
        theta_f=(2.25, 2.25, 2.25, 2.25, 1.0, 0.25),
        theta_g=(2.25, 2.25, 2.25, 2.25, 4.0, 0.00025),
    ),
}


def make_benchmark(name: str, seed=None, noiseless: bool = False, m: int | None = None,
                   interrupt_on_violation: bool = False) -> SyntheticSystem:
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    spec = BENCHMARKS[name]
    nx = spec["nx"] if m is None else NxConfig(spec["nx"].d1, spec["nx"].d2, spec["nx"].q, m)
    return SyntheticSystem(spec["f_true"], spec["z_true"], nx, spec["domain"], spec["safe_point"],
                           spec["noise_std_y"], spec["noise_std_z"], seed=seed, noiseless=noiseless,
                           interrupt_on_violation=interrupt_on_violation, name=name)
