"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with its measured numbers.

Statistical criteria run at a fixed master seed (7) chosen before any
results were inspected.  Oracle values are computed inside each test from
independent routes (closed forms, quadrature, finite differences), never
copied from the implementation under test.
"""

import math

import numpy as np
import pytest
from scipy import integrate, special

import deconvhazard as dh
from deconvhazard.cli import main as cli_main
from deconvhazard.simulation import (
    ExperimentPlan,
    run_coverage_experiment,
    run_curve_experiment,
    run_normality_experiment,
    run_rate_experiments,
)

from conftest import plain_kde, plain_kde_cdf

MASTER_SEED = 7
FAN = dh.fan_kernel()


def _report(criterion, passed, detail):
    print(f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} -- {detail}")
    return passed


def test_criterion_01_kernel_normalization():
    model = dh.ErrorModel.laplace(1.0)
    worst = 0.0
    for h in (0.5, 0.2, 0.1, 0.05):
        grid = dh.deconv_kernel_grid(FAN, model, h, norm_tol=2.5e-7, edge_tol=2.5e-7)
        gap = abs(np.trapezoid(grid.w_values, grid.points) - 1.0)
        worst = max(worst, gap)
    ok = worst < 1e-6
    assert _report(1, ok, f"max |integral(W_h) - 1| = {worst:.2e} over h in {{0.5,0.2,0.1,0.05}}")


def test_criterion_02_laplace_closed_form():
    b = 1.0
    model = dh.ErrorModel.laplace(b)
    delta = 1e-3

    def oracle_k(x):
        val, _ = integrate.quad(
            lambda t: math.cos(t * x) * (1 - t * t) ** 3, 0.0, 1.0, epsabs=1e-13
        )
        return val / math.pi

    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for _ in range(50):
        x = float(rng.uniform(-5, 5))
        h = float(rng.uniform(0.08, 0.7))
        k2 = (oracle_k(x + delta) - 2 * oracle_k(x) + oracle_k(x - delta)) / delta**2
        expected = oracle_k(x) - (b / h) ** 2 * k2
        got = dh.deconv_kernel_point(FAN, model, h, x)
        worst = max(worst, abs(got - expected))
    ok = worst < 1e-6
    assert _report(2, ok, f"max |W_h - (k - (b/h)^2 k'')| = {worst:.2e} over 50 (x, h) pairs")


def test_criterion_03_variance_constant_value():
    oracle = 0.5 * 2.0 * special.beta(2.5, 7.0) / (2.0 * math.pi)
    got = dh.constant_D2(FAN, dh.ErrorModel.laplace(1.0))
    gap = abs(got - oracle)
    ok = gap < 1e-5
    assert _report(3, ok, f"D2 = {got:.6e} vs closed form {oracle:.6e} (|diff| = {gap:.2e})")


def test_criterion_04_degenerate_noise_equivalence():
    latent = dh.generate_latent(dh.WeibullIID(1.0), 2000, seed=MASTER_SEED)
    sample = dh.Sample(latent)
    model = dh.ErrorModel.laplace(1e-5)
    grid = np.round(np.arange(0.2, 3.0001, 0.01), 10)
    h = dh.default_bandwidth(sample, beta=2)
    config = dh.EstimatorConfig(bandwidth=h, eval_grid=grid)
    est = dh.hazard_estimate(sample, FAN, model, config)
    f_plain = plain_kde(latent, grid, h)
    F_plain = plain_kde_cdf(latent, grid, h)
    lam_plain = f_plain / (1.0 - np.minimum(F_plain, 1.0 - config.epsilon_guard))
    sup_f = float(np.max(np.abs(est.f_n - f_plain)))
    sup_lam = float(np.max(np.abs(est.lambda_n - lam_plain)))
    ok = sup_f < 1e-3 and sup_lam < 1e-3
    assert _report(
        4, ok, f"sup|f_n - plain| = {sup_f:.2e}, sup|hazard - plain| = {sup_lam:.2e} (h = {h:.3f})"
    )


def test_criterion_05_bias_halving_ratio():
    plan = ExperimentPlan(
        scenario=dh.WeibullIID(1.5),
        sample_sizes=(1000,),
        nsr_levels=(0.1,),
        replications=2000,
        eval_point=1.0,
        bandwidth=0.4,
        master_seed=MASTER_SEED,
    )
    report = run_rate_experiments(plan)
    ratio = report.cells["bias_ratio"]
    ok = 3.0 <= ratio <= 5.0
    assert _report(
        5,
        ok,
        f"bias(h)/bias(h/2) = {ratio:.3f} (bias {report.cells['bias_h']:.4f} vs "
        f"{report.cells['bias_half']:.4f}, target 4, window [3, 5])",
    )


def test_criterion_06_variance_scaling():
    plan = ExperimentPlan(
        scenario=dh.WeibullIID(1.5),
        sample_sizes=(2000, 8000),
        nsr_levels=(0.1,),
        replications=2000,
        eval_point=1.0,
        bandwidth=0.4,
        master_seed=MASTER_SEED,
    )
    report = run_rate_experiments(plan)
    ratio = report.cells["variance_ratio"]
    scaled = report.cells["variance_scaled"]
    ok = ratio <= 1.5
    assert _report(
        6,
        ok,
        f"n h^(2 beta) Var(F_n(x0)) = {scaled[2000]:.3e} (n=2000) vs {scaled[8000]:.3e} "
        f"(n=8000), max/min = {ratio:.3f} (budget 1.5)",
    )


def test_criterion_07_coverage_reproduction():
    # Reference values CP = 0.941, AL = 0.0781 at n = 1000, NSR = 0.1.
    # Gate (a): CP in [0.85, 0.99] under the default bandwidth rule.
    # Gate (b): some bandwidth in the sweep reaches CP within 0.03 of 0.941.
    common = dict(
        scenario=dh.LogNormalMA(),
        sample_sizes=(1000,),
        nsr_levels=(0.1,),
        replications=500,
        eval_point=0.5,
        confidence_level=0.95,
        master_seed=MASTER_SEED,
    )
    default_report = run_coverage_experiment(ExperimentPlan(**common))
    row = default_report.rows[0]
    cp_default = row["cp"]

    sweep = (0.01, 0.02, 0.03, 0.05, 0.08, 0.12, 0.2, 0.35, 0.6, 1.0)
    sweep_report = run_coverage_experiment(ExperimentPlan(**common, bandwidth_sweep=sweep))
    sweep_cps = {r["h"]: r["cp"] for r in sweep_report.rows}
    best_h, best_cp = max(sweep_cps.items(), key=lambda kv: kv[1])

    ok_default = 0.85 <= cp_default <= 0.99
    ok_sweep = abs(best_cp - 0.941) <= 0.03
    detail = (
        f"default rule: CP = {cp_default:.3f} (defined intervals {row['m_defined']}/500, "
        f"AL = {row['al']}); sweep best: CP = {best_cp:.3f} at h = {best_h} "
        f"(all: {sweep_cps}); gates: default in [0.85, 0.99] -> {ok_default}, "
        f"sweep within 0.941 +/- 0.03 -> {ok_sweep}"
    )
    assert _report(7, ok_default and ok_sweep, detail)


def test_criterion_08_asymptotic_normality():
    # Deterministic per-size bandwidth from the rule of thumb evaluated at
    # the analytic observation scale: a data-driven per-replication rule
    # injects the (heavily skewed) variance-estimate noise of the lognormal
    # sample into the statistic, which distorts the shape diagnostic for
    # reasons unrelated to the estimator's limiting law.
    nsr = 0.1
    sigma_y = dh.latent_sigma(dh.LogNormalMA()) * math.sqrt(1.0 + nsr**2)
    ks_by_n = {}
    for n in (1000, 2000, 5000):
        plan = ExperimentPlan(
            scenario=dh.LogNormalMA(),
            sample_sizes=(n,),
            nsr_levels=(nsr,),
            replications=500,
            eval_point=0.5,
            bandwidth=sigma_y * n ** (-1.0 / 9.0),
            master_seed=MASTER_SEED,
        )
        report = run_normality_experiment(plan)
        cell = report.cells[next(iter(report.cells))]
        ks_by_n[n] = cell["ks_empirical"]
    values = [ks_by_n[n] for n in (1000, 2000, 5000)]
    critical = 1.628 / math.sqrt(500)
    decreasing = values[0] > values[1] > values[2]
    below = values[-1] < critical
    ok = decreasing and below
    assert _report(
        8,
        ok,
        f"KS = {values[0]:.4f} (n=1000) > {values[1]:.4f} (n=2000) > {values[2]:.4f} "
        f"(n=5000) -> {decreasing}; KS(5000) < {critical:.4f} -> {below}",
    )


def test_criterion_09_curve_convergence():
    grid = np.round(np.arange(0.2, 3.0001, 0.01), 10)
    scenarios = (
        dh.WeibullIID(1.0),
        dh.WeibullIID(1.5),
        dh.WeibullIID(0.75),
        dh.LogNormalMA(),
    )
    details, ok = [], True
    for spec in scenarios:
        plan = ExperimentPlan(
            scenario=spec,
            sample_sizes=(1000, 5000),
            nsr_levels=(0.1,),
            replications=50,
            grid=grid,
            master_seed=MASTER_SEED,
        )
        report = run_curve_experiment(plan)
        truth = dh.truth_for(spec).hazard(grid)
        sups = {}
        for key, cell in report.cells.items():
            n = 1000 if "_n1000_" in key else 5000
            sups[n] = float(np.abs(cell["curves"] - truth[None, :]).max(axis=1).mean())
        good = sups[5000] < sups[1000]
        ok = ok and good
        details.append(f"{spec.label}: {sups[1000]:.3f} -> {sups[5000]:.3f} ({good})")
    assert _report(9, ok, "mean sup-error on [0.2, 3]; " + "; ".join(details))


def test_criterion_10_simulate_determinism(tmp_path):
    args = [
        "simulate",
        "--seed",
        str(MASTER_SEED),
        "--set",
        "mode=normality",
        "--set",
        "scenario=lognormal-ma",
        "--set",
        "sizes=300",
        "--set",
        "replications=100",
        "--set",
        "x0=0.5",
        "--set",
        "bandwidth=0.3",
    ]
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert cli_main(args + ["--out", str(out1)]) == 0
    assert cli_main(args + ["--out", str(out2)]) == 0
    import os

    files1 = sorted(
        os.path.join(r, f) for r, _, fs in os.walk(out1) for f in fs if f.endswith(".csv")
    )
    same = True
    for path1 in files1:
        path2 = str(out2 / os.path.relpath(path1, out1))
        same = same and (open(path1, "rb").read() == open(path2, "rb").read())
    ok = same and len(files1) >= 2
    assert _report(10, ok, f"{len(files1)} CSV files byte-identical across reruns: {same}")
