import numpy as np
import pytest

from salnx.benchmarks import (
    BENCHMARKS,
    exp1_f,
    exp1_z,
    exp2_f,
    exp2_g,
    exp2_z,
    make_benchmark,
    observe_y,
    observe_z,
)
from salnx.trajectory import History, NxConfig, embed_tail


def base(u1, u2, c, sign):
    return (u1 - c) ** 2 + sign * (u1 - c) * (u2 - c) + (u2 - c) ** 2


def exp2_oracle(now, prev, c, abs_terms):
    b = base(now[0], now[1], c, -1)
    q1 = (b - base(prev[0], now[1], c, -1)) / (now[0] - prev[0])
    q2 = (b - base(now[0], prev[1], c, -1)) / (now[1] - prev[1])
    return b - abs(q1) - abs(q2) if abs_terms else b + q1 + q2


def test_exp1_values(rng):
    assert exp1_f([2.0, 2.0]) == 0.0
    assert exp1_f([3.0, 3.0]) == 3.0
    assert exp1_z([5.0, 5.0]) == 1.0
    for x in rng.uniform(-5, 45, size=(20, 2)):
        assert exp1_f(x) == pytest.approx(base(x[0], x[1], 2.0, 1), abs=1e-12)
        assert exp1_z(x) == pytest.approx(-0.005 * base(x[0], x[1], 5.0, 1) + 1, abs=1e-12)


def test_exp1_safe_boundary_is_ellipse(rng):
    # points with g = 200 exactly lie on the zero contour
    for angle in rng.uniform(0, 2 * np.pi, size=10):
        d = np.array([np.cos(angle), np.sin(angle)])
        r = np.sqrt(200.0 / base(d[0], d[1], 0.0, 1))
        assert exp1_z(5.0 + r * d) == pytest.approx(0.0, abs=1e-12)


def test_exp1_safe_set_matches_closed_form():
    g1, g2 = np.meshgrid(np.linspace(-5, 45, 100), np.linspace(-5, 45, 100))
    x = np.stack([g1.ravel(), g2.ravel()], axis=1)
    closed = base(x[:, 0], x[:, 1], 5.0, 1) <= 200.0
    np.testing.assert_array_equal(exp1_z(x) >= 0, closed)


def test_exp2_hand_values():
    assert exp2_f([3.0, 3.0, 2.0, 2.0]) == pytest.approx(1.0)
    assert exp2_g([5.0, 5.0, 4.0, 4.0]) == pytest.approx(-2.0)
    assert exp2_z([5.0, 5.0, 4.0, 4.0]) == pytest.approx(1.01)


def test_exp2_matches_formula_oracle(rng):
    for _ in range(30):
        now, prev = rng.uniform(-5, 45, size=2), rng.uniform(-5, 45, size=2)
        x = np.r_[now, prev]
        assert exp2_f(x) == pytest.approx(exp2_oracle(now, prev, 2.0, False), rel=1e-10, abs=1e-10)
        assert exp2_g(x) == pytest.approx(exp2_oracle(now, prev, 5.0, True), rel=1e-10, abs=1e-10)
        assert exp2_z(x) == pytest.approx(-0.005 * exp2_oracle(now, prev, 5.0, True) + 1, abs=1e-10)


def test_exp2_quotient_limit():
    u = np.array([7.0, 3.0])
    grad = np.array([2 * (u[0] - 2) - (u[1] - 2), 2 * (u[1] - 2) - (u[0] - 2)])
    limit = base(u[0], u[1], 2.0, -1) + grad.sum()
    assert exp2_f(np.r_[u, u]) == pytest.approx(limit)
    for h in (1e-3, 1e-5):
        assert exp2_f(np.r_[u, u - h]) == pytest.approx(limit, abs=20 * h)


def test_benchmark_settings():
    assert BENCHMARKS["exp2"]["noise_std_z"] == 0.01
    assert BENCHMARKS["exp1"]["noise_std_z"] == 1.0
    assert BENCHMARKS["exp2"]["nx"].d == 4
    assert BENCHMARKS["exp2"]["theta_g"] == (2.25, 2.25, 2.25, 2.25, 4.0, 0.00025)
    with pytest.raises(ValueError):
        make_benchmark("nope")


def test_noiseless_observations_are_exact():
    system = make_benchmark("exp2", seed=0, noiseless=True)
    x = np.array([[10.0, 12.0, 9.0, 11.0]])
    assert observe_y(system, x) == exp2_f(x)
    assert observe_z(system, x) == exp2_z(x)


def test_seeded_noise_reproducible_and_unbiased():
    a, b = make_benchmark("exp1", seed=4), make_benchmark("exp1", seed=4)
    x = np.tile([[3.0, 6.0]], (100_000, 1))
    ya, yb = observe_y(a, x), observe_y(b, x)
    np.testing.assert_array_equal(ya, yb)
    assert abs(ya.mean() - exp1_f([3.0, 6.0])) < 0.02
    assert abs(observe_z(a, x).mean() - exp1_z([3.0, 6.0])) < 0.02


def test_step_uses_executed_history():
    system = make_benchmark("exp2", seed=1, noiseless=True)
    u = np.array([[6.0, 6.0], [7.0, 7.0], [8.0, 8.0]])
    result = system.step(u)
    hist = History.seeded([5.0, 5.0], 2)
    hist.append(u)
    x = embed_tail(hist, NxConfig(2, 2), 3)
    np.testing.assert_allclose(result.y, exp2_f(x))
    np.testing.assert_allclose(result.z, exp2_z(x))
    assert result.violation_index is None and not result.interrupted


def test_violation_index_and_interruption():
    u = np.array([[10.0, 10.0], [40.0, -5.0], [40.0, -5.0], [10.0, 10.0]])
    free = make_benchmark("exp2", seed=2, noiseless=True)
    res = free.step(u)
    assert res.violation_index == 1 and len(res.y) == 4 and not res.interrupted
    stop = make_benchmark("exp2", seed=2, noiseless=True, interrupt_on_violation=True)
    before = len(stop.history)
    res = stop.step(u)
    assert res.violation_index == 1 and len(res.y) == 2 and res.interrupted
    assert len(stop.history) == before + 2
