import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salnx.gp import KernelParams, fit, predict_mean
from salnx.trajectory import (
    Box,
    History,
    NxConfig,
    embed_tail,
    input_standardizer,
    narx_embed_with_surrogate,
    nx_embed,
    plan_points,
    ramp_inputs,
    ramp_points,
    ramp_points_batch,
)


def oracle_ramp(eta, u_hist, d1, d2, m):
    """Slot-by-slot ramp embedding written directly from index arithmetic."""
    u0 = u_hist[-1]
    points = []
    for k in range(1, m + 1):
        row = []
        for i in range(d2):
            for j in range(d1):
                if k - i >= 0:
                    row.append(u0[j] + (k - i) / m * (eta[j] - u0[j]))
                else:
                    row.append(u_hist[len(u_hist) - 1 + (k - i)][j])
        points.append(row)
    return np.array(points)


def test_nx_config_dimensions():
    cfg = NxConfig(d1=2, d2=3, q=1, m=5)
    assert cfg.d == 7
    assert cfg.slots[:3] == ((0, 0), (1, 0), (0, 1))
    assert cfg.required_history == 2
    with pytest.raises(ValueError):
        NxConfig(d1=0)
    with pytest.raises(ValueError):
        NxConfig(d1=1, lags=[(1, 0)])


def test_box_operations(rng):
    box = Box([-1.0, 0.0], [1.0, 4.0])
    np.testing.assert_allclose(box.center, [0.0, 2.0])
    pts = box.sample(rng, 100)
    assert box.contains(pts).all()
    np.testing.assert_allclose(box.clip([[5.0, -5.0]]), [[1.0, 0.0]])
    with pytest.raises(ValueError):
        Box([1.0], [0.0])


def test_constant_ramp_when_eta_is_start():
    cfg = NxConfig(d1=2, d2=2, m=5)
    hist = History.seeded([3.0, 4.0], 3)
    tau = ramp_points([3.0, 4.0], hist, cfg)
    np.testing.assert_array_equal(tau.points, np.tile([3.0, 4.0, 3.0, 4.0], (5, 1)))


def test_ramp_scalar_spacing():
    cfg = NxConfig(d1=1, d2=1, m=5)
    tau = ramp_points([10.0], History([[0.0]]), cfg)
    np.testing.assert_allclose(tau.points[:, 0], [2, 4, 6, 8, 10])
    np.testing.assert_allclose(tau.inputs[:, 0], [2, 4, 6, 8, 10])


def test_ramp_matches_index_oracle(rng):
    cfg = NxConfig(d1=2, d2=2, m=5)
    u_hist = rng.uniform(-5, 5, size=(4, 2))
    eta = rng.uniform(-5, 5, size=2)
    tau = ramp_points(eta, History(u_hist), cfg)
    np.testing.assert_allclose(tau.points, oracle_ramp(eta, u_hist, 2, 2, 5), atol=1e-14)
    np.testing.assert_array_equal(tau.points[-1, :2], eta)


def test_ramp_longer_history_than_ramp(rng):
    cfg = NxConfig(d1=1, d2=4, m=2)
    u_hist = rng.normal(size=(6, 1))
    eta = np.array([0.7])
    tau = ramp_points(eta, History(u_hist), cfg)
    np.testing.assert_allclose(tau.points, oracle_ramp(eta, u_hist, 1, 4, 2), atol=1e-14)


def test_ramp_needs_history():
    cfg = NxConfig(d1=1, d2=3, m=5)
    with pytest.raises(RuntimeError):
        ramp_points([1.0], History([[0.0]]), cfg)


def test_ramp_inputs_end_at_eta():
    u = ramp_inputs([4.0, -2.0], [0.0, 0.0], 4)
    np.testing.assert_allclose(u, [[1, -0.5], [2, -1], [3, -1.5], [4, -2]])


def test_batch_equals_single(rng):
    cfg = NxConfig(d1=2, d2=3, m=4)
    hist = History(rng.normal(size=(5, 2)))
    etas = rng.normal(size=(7, 2))
    batch = ramp_points_batch(etas, hist, cfg)
    for b in range(7):
        np.testing.assert_array_equal(batch[b], ramp_points(etas[b], hist, cfg).points)


def test_nx_embed_identity_and_lags():
    np.testing.assert_array_equal(nx_embed([[1.0], [2.0], [3.0]], NxConfig(d1=1)), [[1], [2], [3]])
    out = nx_embed([1.0, 2.0, 3.0, 4.0], NxConfig(d1=1, d2=2))
    np.testing.assert_array_equal(out, [[2, 1], [3, 2], [4, 3]])
    with pytest.raises(ValueError):
        nx_embed([1.0], NxConfig(d1=1, d2=2))


def test_nx_embed_matches_index_oracle(rng):
    cfg = NxConfig(d1=2, d2=3)
    u = rng.normal(size=(9, 2))
    expected = np.array([np.concatenate([u[k], u[k - 1], u[k - 2]]) for k in range(2, 9)])
    np.testing.assert_array_equal(nx_embed(u, cfg), expected)


def test_custom_lag_slots(rng):
    cfg = NxConfig(d1=2, lags=((0, 0), (1, 0), (0, 1), (0, 3)))
    u = rng.normal(size=(6, 2))
    out = nx_embed(u, cfg)
    expected = np.array([[u[k, 0], u[k, 1], u[k - 1, 0], u[k - 3, 0]] for k in range(3, 6)])
    np.testing.assert_array_equal(out, expected)


def test_embed_tail_equals_planned_ramp(rng):
    cfg = NxConfig(d1=2, d2=2, m=5)
    hist = History(rng.normal(size=(3, 2)))
    eta = rng.normal(size=2)
    planned = ramp_points(eta, hist, cfg).points
    u = ramp_inputs(eta, hist.last, cfg.m)
    u[-1] = eta
    hist.append(u)
    np.testing.assert_allclose(embed_tail(hist, cfg, 5), planned, atol=1e-14)


def _linear_model(cfg):
    gen = np.random.default_rng(0)
    x = gen.normal(size=(40, cfg.d))
    return fit(x, x @ np.arange(1, cfg.d + 1) * 0.1, KernelParams(1.0, np.full(cfg.d, 0.3)), 1e-3)


def test_narx_surrogate_rolls_forward():
    cfg = NxConfig(d1=1, d2=1, q=1)
    model = _linear_model(cfg)
    u = np.array([[0.1], [0.5], [-0.3]])
    out = narx_embed_with_surrogate(u, model, cfg, y_init=0.2)
    assert out[0, 0] == 0.2
    for r in range(1, 3):
        assert out[r, 0] == pytest.approx(predict_mean(model, out[r - 1][None])[0])
    np.testing.assert_array_equal(out[:, 1], u[:, 0])
    with pytest.raises(ValueError):
        narx_embed_with_surrogate(u, model, NxConfig(d1=1))


def test_plan_points_feedback_uses_history_then_mean():
    cfg = NxConfig(d1=1, d2=1, q=2, m=3)
    model = _linear_model(cfg)
    hist = History([[0.0], [0.2], [0.4]], y=[1.0, 2.0, 3.0])
    pts = plan_points(np.array([[1.0]]), hist, cfg, model)[0]
    assert pts[0, 0] == 3.0 and pts[0, 1] == 2.0
    y1 = predict_mean(model, pts[0][None])[0]
    assert pts[1, 0] == pytest.approx(y1) and pts[1, 1] == 3.0
    assert pts[2, 1] == pytest.approx(y1)
    with pytest.raises(ValueError):
        plan_points(np.array([[1.0]]), hist, cfg)
    with pytest.raises(ValueError):
        ramp_points([1.0], hist, cfg)


def test_input_standardizer_uses_domain_moments():
    cfg = NxConfig(d1=2, d2=2)
    stats = input_standardizer(cfg, Box([-5.0, 0.0], [45.0, 12.0]))
    np.testing.assert_allclose(stats.mean, [20, 6, 20, 6])
    np.testing.assert_allclose(stats.scale, np.array([50, 12, 50, 12]) / np.sqrt(12))


def test_history_append_only():
    hist = History.seeded([1.0, 2.0], 2)
    assert len(hist) == 2
    hist.append([[3.0, 4.0]], [5.0])
    np.testing.assert_array_equal(hist.last, [3.0, 4.0])
    assert hist.y[-1] == 5.0
    assert len(hist.tail(2)) == 2
    with pytest.raises(ValueError):
        hist.append([[1.0]])


@settings(max_examples=50, deadline=None)
@given(
    d1=st.integers(1, 3), d2=st.integers(1, 4), m=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_ramp_property_matches_oracle(d1, d2, m, seed):
    gen = np.random.default_rng(seed)
    u_hist = gen.uniform(-10, 10, size=(d2 + 1, d1))
    eta = gen.uniform(-10, 10, size=d1)
    cfg = NxConfig(d1=d1, d2=d2, m=m)
    tau = ramp_points(eta, History(u_hist), cfg)
    np.testing.assert_allclose(tau.points, oracle_ramp(eta, u_hist, d1, d2, m), atol=1e-12)
    np.testing.assert_array_equal(tau.points[-1, :d1], eta)
