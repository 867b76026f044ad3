"""Headline acceptance criteria, one test per criterion.

Each test prints a PASS/FAIL line (collected again in the terminal summary).
Experiment runs are shared through module-scoped fixtures.
"""

import subprocess
import sys
import time

import numpy as np
import pytest
import yaml
from conftest import naive_posterior, random_kernel, record_criterion

from salnx.gp import block_update, fit, predict
from salnx.harness.config import ExperimentConfig
from salnx.harness.metrics import unsafe_fraction
from salnx.harness.runner import run_config
from salnx.harness.theory import theory_decay, theory_det_bounds, theory_mutual_info
from salnx.safety import xi_analytic_1d, xi_mc

pytestmark = pytest.mark.slow

SEEDS = (1, 2, 3, 4, 5)
ALPHAS = (0.01, 0.1, 0.3, 0.6)


def _runs(config, seeds=SEEDS):
    return {s: run_config(config, s) for s in seeds}


def _final_rmse(log):
    return log.at_iteration(log.active[-1].iteration).rmse


@pytest.fixture(scope="module")
def sal_runs():
    tic = time.perf_counter()
    logs = _runs(ExperimentConfig(strategy="sal", alpha=0.2, n_iterations=100))
    return logs, time.perf_counter() - tic


@pytest.fixture(scope="module")
def random_runs():
    return _runs(ExperimentConfig(strategy="random_safe", alpha=0.2, n_iterations=100))


@pytest.fixture(scope="module")
def short_runs():
    base = ExperimentConfig(n_iterations=20, metrics_every=20)
    return {"plain": _runs(base), "theory": _runs(base.with_(theory=True))}


def test_criterion_1_gp_correctness():
    gen = np.random.default_rng(101)
    tic = time.perf_counter()
    worst_pred = worst_update = 0.0
    for _ in range(50):
        d, m = int(gen.integers(1, 5)), int(gen.integers(1, 6))
        n = int(gen.integers(2, 60 // m + 1))
        kern, noise = random_kernel(gen, d), float(gen.uniform(0.01, 1.0))
        taus = [gen.normal(size=(m, d)) for _ in range(n)]
        ys = [gen.normal(size=m) for _ in range(n)]
        x, y = np.vstack(taus), np.concatenate(ys)
        test = gen.normal(size=(m, d))
        pred = predict(fit(x, y, kern, noise), test)
        mean, cov = naive_posterior(x, y, test, kern, noise)
        worst_pred = max(worst_pred, np.abs(pred.mean - mean).max(), np.abs(pred.covariance - cov).max())
        model = fit(taus[0], ys[0], kern, noise)
        for tau, obs in zip(taus[1:], ys[1:]):
            model = block_update(model, tau, obs)
        batch = fit(x, y, kern, noise)
        a, b = predict(model, test), predict(batch, test)
        worst_update = max(worst_update, np.abs(model.chol - batch.chol).max(),
                           np.abs(a.mean - b.mean).max(), np.abs(a.covariance - b.covariance).max())
    elapsed = time.perf_counter() - tic
    ok = worst_pred <= 1e-9 and worst_update <= 1e-8 and elapsed < 10
    record_criterion(1, ok, f"oracle err {worst_pred:.2e}, update err {worst_update:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_safety_probability():
    gen = np.random.default_rng(202)
    hits = 0
    for i in range(100):
        mu, sd = gen.uniform(-2, 2), gen.uniform(0.2, 3)
        est = xi_mc([mu], [[sd * sd]], n_samples=10_000, seed=i)
        hits += abs(est.p_hat - xi_analytic_1d(mu, sd)) <= 4 * est.std_err
    mu, sd = np.array([0.4, -0.3]), np.array([1.0, 0.7])
    pair = xi_mc(mu, np.diag(sd**2), n_samples=10_000, seed=7)
    product = xi_analytic_1d(mu[0], sd[0]) * xi_analytic_1d(mu[1], sd[1])
    pair_ok = abs(pair.p_hat - product) <= 4 * pair.std_err
    ok = hits >= 95 and pair_ok
    record_criterion(2, ok, f"{hits}/100 within 4 SE; pair {pair.p_hat:.4f} vs {product:.4f}")
    assert ok


def test_criterion_3_mutual_information_identity(short_runs):
    errors = [theory_mutual_info(log).mutual_info_rel_error
              for runs in short_runs.values() for log in runs.values()]
    ok = max(errors) <= 1e-7
    record_criterion(3, ok, f"max relative gap {max(errors):.2e} over {len(errors)} runs")
    assert ok


def test_criterion_4_determinant_bounds(short_runs):
    reports = [theory_det_bounds(log) for log in short_runs["theory"].values()]
    det = min(r.det_bound_margin for r in reports)
    cum = min(r.cumulative_margin for r in reports)
    ok = all(r.passed for r in reports) and det >= -1e-8 and cum >= -1e-8
    record_criterion(4, ok, f"min margins {det:.3e} / {cum:.3e}, C1={reports[0].c1:.4g}, C={reports[0].c:.4g}")
    assert ok


def test_criterion_5_variance_decay(sal_runs):
    logs, elapsed = sal_runs
    reports = [theory_decay(log, 10, 100) for log in logs.values()]
    ratios = [r.decay_ratio for r in reports]
    dominance = all(r.checks.get("dominance", True) for r in reports)
    median = float(np.median(ratios))
    ok = median < 0.3 and dominance and elapsed < 300
    record_criterion(5, ok, f"median ratio {median:.3f} (seeds {np.round(ratios, 3).tolist()}), "
                            f"dominance {dominance}, {elapsed:.0f}s")
    assert ok


def test_criterion_6_sal_beats_random(sal_runs, random_runs):
    sal, _ = sal_runs
    rmse_sal = np.median([_final_rmse(lg) for lg in sal.values()])
    rmse_rnd = np.median([_final_rmse(lg) for lg in random_runs.values()])
    cov_sal = np.median([lg.at_iteration(50).coverage for lg in sal.values()])
    cov_rnd = np.median([lg.at_iteration(50).coverage for lg in random_runs.values()])
    ok = rmse_sal <= rmse_rnd and cov_sal >= cov_rnd
    record_criterion(6, ok, f"RMSE {rmse_sal:.1f} vs {rmse_rnd:.1f}, coverage@50 {cov_sal:.3f} vs {cov_rnd:.3f}")
    assert ok


def test_criterion_7_budget():
    config = ExperimentConfig(budget={"delta": 0.05, "n": 50}, n_iterations=50, metrics_every=1000)
    logs = _runs(config, range(1, 21))
    unsafe = sum(sum(bool(r.unsafe) for r in lg.active) for lg in logs.values())
    ok = unsafe <= 3
    record_criterion(7, ok, f"{unsafe} unsafe trajectories over 20 runs (alpha={config.alpha:g})")
    assert ok


def test_criterion_8_alpha_sweep():
    medians = []
    for alpha in ALPHAS:
        logs = _runs(ExperimentConfig(alpha=alpha, n_iterations=100, metrics_every=1000))
        medians.append(float(np.median([unsafe_fraction(lg) for lg in logs.values()])))
    inversions = sum(b < a for a, b in zip(medians, medians[1:]))
    ok = inversions <= 1
    record_criterion(8, ok, f"median unsafe fractions {dict(zip(ALPHAS, medians))}, {inversions} inversions")
    assert ok


def test_criterion_9_fisher_baseline():
    base = ExperimentConfig(alpha=1.0, n_iterations=100, metrics_every=100)
    rmse_sal = np.median([_final_rmse(lg) for lg in _runs(base.with_(strategy="sal", alpha=1.0)).values()])
    rmse_fim = np.median([_final_rmse(lg) for lg in _runs(base.with_(strategy="fisher", alpha=1.0)).values()])
    ok = rmse_sal <= rmse_fim
    record_criterion(9, ok, f"median final RMSE SAL {rmse_sal:.1f} vs Fisher {rmse_fim:.1f}")
    assert ok


def test_criterion_10_byte_identical_csv(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({"n_iterations": 10, "seed": 3}))
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        subprocess.run([sys.executable, "-m", "salnx.harness.cli", "run", "--config", str(cfg),
                        "--out", str(out)], check=True, capture_output=True)
        outputs.append((out / "log.csv").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    record_criterion(10, ok, f"two processes wrote {len(outputs[0])} identical bytes" if ok else "CSV differs")
    assert ok
