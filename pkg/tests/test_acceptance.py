"""End-to-end acceptance checks.

Each test prints one ``criterion N PASS|FAIL`` line; the lines are repeated
in the terminal summary. The closed-loop criteria run full-size episodes and
take tens of minutes on one core. Set ``DISCO_THREADS`` to use more workers.
"""

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from scipy.stats import norm

from disco.controller import importance_weights, update_nominal
from disco.dynamics import wrap_angle
from disco.harness import export_results, load_config, run_benchmark, run_episode, worker_count
from disco.inference import (MdnModel, TrainConfig, TrainingSet, UniformPrior, mdn_loss, mdn_loss_gradient,
                             posterior, train_mdn)
from disco.unscented import UtConfig, sigma_points, unscented_moments

PENDULUM = "configs/pendulum.yaml"
SKIDSTEER = "configs/skidsteer.yaml"


def _random_psd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + 1e-3 * np.eye(n)


def test_criterion_1_ut_affine_exactness(acceptance_report):
    rng = np.random.default_rng(1)
    start, worst = time.perf_counter(), 0.0
    for _ in range(100):
        n, d = rng.integers(1, 6), rng.integers(1, 6)
        mean, cov = rng.normal(size=n), _random_psd(rng, n)
        a, b = rng.normal(size=(d, n)), rng.normal(size=d)
        cfg = UtConfig(alpha=rng.uniform(0.3, 1.0), kappa=rng.uniform(0.0, 2.0))
        s = sigma_points(mean, cov, cfg)
        m, c = unscented_moments(s.points @ a.T + b, s.mean_weights, s.cov_weights)
        worst = max(worst, np.abs(m - (a @ mean + b)).max(), np.abs(c - a @ cov @ a.T).max())
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 1.0
    acceptance_report(1, "UT affine exactness", ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_criterion_2_control_law(acceptance_report):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    sums = shifts = 0.0
    concentrated = one_hot = True
    for _ in range(200):
        k = rng.integers(2, 200)
        costs = rng.normal(0, 50, k)
        lam = 10 ** rng.uniform(-2, 2)
        w = importance_weights(costs, lam)
        sums = max(sums, abs(w.sum() - 1.0))
        shifts = max(shifts, np.abs(importance_weights(costs + rng.normal(0, 1e3), lam) - w).max())
        concentrated &= importance_weights(costs, 1e-6)[np.argmin(costs)] == pytest.approx(1.0, abs=1e-12)
        u, eps = rng.normal(size=(8, 2)), rng.normal(size=(k, 8, 2))
        star = rng.integers(k)
        one_hot &= np.array_equal(update_nominal(u, np.eye(k)[star], eps), u + eps[star])
    elapsed = time.perf_counter() - start
    ok = sums <= 1e-12 and shifts <= 1e-12 and concentrated and one_hot and elapsed < 1.0
    acceptance_report(2, "control-law properties", ok,
                      f"sum err {sums:.1e}, shift err {shifts:.1e}, argmin {concentrated}, "
                      f"one-hot {one_hot}, {elapsed:.2f} s")
    assert ok


def test_criterion_3_mdn_gradient(acceptance_report):
    rng = np.random.default_rng(3)
    start, worst = time.perf_counter(), 0.0
    h = 1e-5
    for _ in range(100):
        n_in, n_out, k = rng.integers(1, 4), rng.integers(1, 3), rng.integers(1, 4)
        hidden = tuple(int(x) for x in rng.integers(2, 6, rng.integers(0, 3)))
        model = MdnModel.initialise(n_in, n_out, rng, k, hidden)
        if model.n_params > 200:
            model = MdnModel.initialise(n_in, n_out, rng, 1, (3,))
        model.params += rng.normal(0, 0.5, model.n_params)
        batch = rng.integers(1, 9)
        theta, x = rng.normal(size=(batch, n_out)), rng.normal(size=(batch, n_in))
        grad = mdn_loss_gradient(model, theta, x)
        fd, base = np.empty_like(grad), model.params.copy()
        for j in range(model.n_params):
            model.params[j] = base[j] + h
            up = mdn_loss(model, theta, x)
            model.params[j] = base[j] - h
            fd[j] = (up - mdn_loss(model, theta, x)) / (2 * h)
            model.params[j] = base[j]
        worst = max(worst, np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 30.0
    acceptance_report(3, "MDN gradient check", ok, f"max relative error {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_4_linear_gaussian_recovery(acceptance_report):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    noise = 0.1
    theta = rng.uniform(0, 1, (2000, 1))
    data = TrainingSet(theta, theta + rng.normal(0, noise, theta.shape))
    model, _ = train_mdn(data, TrainConfig(seed=0))
    prior = UniformPrior([0.0], [1.0])
    worst = 0.0
    for x in np.linspace(0.0, 1.0, 11):
        post = posterior(model, [x], prior)
        estimate = post.weights @ post.means[:, 0]
        # exact posterior: N(x, noise^2) truncated to [0, 1]
        a, b = (0.0 - x) / noise, (1.0 - x) / noise
        exact = x + noise * (norm.pdf(a) - norm.pdf(b)) / (norm.cdf(b) - norm.cdf(a))
        worst = max(worst, abs(estimate - exact))
    elapsed = time.perf_counter() - start
    ok = worst < 0.05 and elapsed < 120.0
    acceptance_report(4, "LFI recovery oracle", ok, f"max posterior-mean error {worst:.4f}, {elapsed:.1f} s")
    assert ok


def _episode(args):
    config, seed, variant = args
    return run_episode(config, seed, variant)


def _parallel_episodes(config, variant, seeds):
    n = worker_count()
    tasks = [(config, s, variant) for s in seeds]
    if n == 1:
        return [_episode(t) for t in tasks]
    with ProcessPoolExecutor(n) as pool:
        return list(pool.map(_episode, tasks))


def test_criterion_5_pendulum_swing_up(acceptance_report):
    start = time.perf_counter()
    config = load_config(PENDULUM)
    logs = _parallel_episodes(config, "baseline", range(20))
    held = 0
    for log in logs:
        tail = np.append(log.states[-99:, 0], log.final_state[0])
        held += bool(np.all(np.abs(wrap_angle(tail)) < 0.2))
    elapsed = time.perf_counter() - start
    ok = held >= 16 and elapsed < 600.0
    acceptance_report(5, "pendulum swing-up", ok, f"upright hold in {held}/20 seeds, {elapsed:.0f} s")
    assert ok


def test_criterion_6_pendulum_ordering(acceptance_report, tmp_path):
    start = time.perf_counter()
    config = load_config(PENDULUM)
    result = run_benchmark(config)
    export_results(result, tmp_path)
    complete = not result.failures and all(len(result.series[v]) == 20 for v in result.variants)
    cost = {v: float(result.accumulated(v).mean()) if len(result.series[v]) else np.inf for v in result.variants}
    ut_post, mc_post = cost["ut_posterior"], cost["mc_posterior"]
    ut_prior, mc_prior = cost["ut_prior"], cost["mc_prior"]
    checks = [ut_post < mc_post, ut_prior < mc_prior, ut_post <= 1.10 * cost["baseline"]]
    elapsed = time.perf_counter() - start
    ok = complete and all(checks) and elapsed < 3600.0
    detail = ", ".join(f"{v} {c:.0f}" for v, c in cost.items())
    acceptance_report(6, "pendulum cost ordering", ok, f"{detail}; checks {checks}, {elapsed:.0f} s")
    assert ok


def test_criterion_7_skidsteer(acceptance_report):
    start = time.perf_counter()
    config = load_config(SKIDSTEER)
    result = run_benchmark(config, ["point_estimate", "ut_posterior"])
    point = result.series["point_estimate"].mean(axis=1)
    ut = result.series["ut_posterior"].mean(axis=1)
    complete = not result.failures and len(point) == len(ut) == 20
    wins = int(np.sum(ut < point)) if complete else 0
    elapsed = time.perf_counter() - start
    ok = complete and wins >= 14 and elapsed < 1200.0
    acceptance_report(7, "skid-steer UT posterior vs point estimate", ok,
                      f"UT lower in {wins}/20 seeds, mean c_bar {ut.mean():.4f} vs {point.mean():.4f}, "
                      f"{elapsed:.0f} s")
    assert ok


def test_criterion_8_determinism(acceptance_report, tmp_path):
    identical = True
    for name, length in ((PENDULUM, 25), (SKIDSTEER, 15)):
        config = load_config(name)
        config = dataclasses.replace(config, episode_length=length, seeds=3)
        runs = [(1, "a"), (1, "b"), (3, "c")]
        outputs = []
        for workers, tag in runs:
            out = tmp_path / f"{config.environment}_{tag}"
            export_results(run_benchmark(config, workers=workers), out)
            outputs.append((out / "benchmark.csv").read_bytes())
        identical &= all(o == outputs[0] for o in outputs)
    acceptance_report(8, "byte-identical benchmark CSV", identical,
                      "reruns with 1 and 3 workers, pendulum and skid-steer")
    assert identical
