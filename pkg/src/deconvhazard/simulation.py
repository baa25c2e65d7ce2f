"""Monte Carlo experiment engine: curve fits, interval coverage, normality
diagnostics and convergence-rate checks for the hazard estimator.

Every replication is a pure function of a seed derived from the plan's
master seed and the cell key ``(nsr index, replication index)``; the sample
size is deliberately left out of the key so that cells at different ``n``
see nested ("seed-matched") samples, which sharpens cross-``n``
comparisons.  Aggregation runs in replication order, so reports are
byte-identical across reruns regardless of how callers schedule the work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import __version__ as _pkg_version
from .errors import CellFailureError, ConfigurationError, NoAnalyticTruth
from .estimators import EstimatorConfig, Sample, hazard_estimate
from .fourier import ErrorModel, SmoothKernel, fan_kernel
from .processes import NoiseSpec, contaminate, generate_latent, latent_sigma
from .truth import truth_for

__all__ = [
    "ExperimentPlan",
    "SimulationReport",
    "run_curve_experiment",
    "run_coverage_experiment",
    "run_normality_experiment",
    "run_rate_experiments",
    "mise",
    "ks_distance",
    "write_report",
]

FAILURE_BUDGET = 0.10

REPORT_COLUMNS = (
    "scenario",
    "n",
    "nsr",
    "h",
    "cp",
    "al",
    "mean_bias",
    "mise",
    "ks",
    "m_defined",
    "m_flagged",
    "seed",
)


def _default_grid() -> np.ndarray:
    return np.round(np.arange(0, 601) * 0.01, 10)


@dataclass(frozen=True)
class ExperimentPlan:
    """One experiment specification: scenario, cells, replications, seeds.

    ``bandwidth=None`` applies the per-sample rule of thumb; a float fixes
    the bandwidth for every replication; ``bandwidth_sweep`` repeats the
    experiment once per listed bandwidth.
    """

    scenario: object
    sample_sizes: tuple = (1000,)
    nsr_levels: tuple = (0.1,)
    replications: int = 100
    eval_point: float = 0.5
    confidence_level: float = 0.95
    grid: np.ndarray = field(default_factory=_default_grid)
    bandwidth: float | None = None
    bandwidth_sweep: tuple | None = None
    bandwidth_constant: float = 1.0
    epsilon_guard: float = 1e-3
    hazard_mode: str = "regularized"
    master_seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigurationError("need at least one replication")
        if any(n < 10 for n in self.sample_sizes):
            raise ConfigurationError("sample sizes below 10 are not supported")
        if any(nsr < 0 for nsr in self.nsr_levels):
            raise ConfigurationError("noise-to-signal ratios cannot be negative")
        grid = np.asarray(self.grid, dtype=float).ravel()
        object.__setattr__(self, "grid", grid)
        if not grid[0] <= self.eval_point <= grid[-1]:
            raise ConfigurationError("evaluation point lies outside the grid")
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "nsr_levels", tuple(float(v) for v in self.nsr_levels))
        if self.bandwidth_sweep is not None:
            object.__setattr__(
                self, "bandwidth_sweep", tuple(float(h) for h in self.bandwidth_sweep)
            )


@dataclass
class SimulationReport:
    """Per-cell metric rows plus sidecar tables and a run manifest."""

    rows: list
    sidecars: dict
    manifest: str
    failed_cells: list
    cells: dict  # in-memory arrays per cell, for programmatic consumers


def _rep_seed(master_seed: int, nsr_index: int, replication: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(nsr_index, replication))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _error_model(noise: NoiseSpec) -> ErrorModel:
    if noise.nsr == 0.0:
        return ErrorModel.identity()
    return ErrorModel.laplace(noise.scale)


def _bandwidth_labels(plan: ExperimentPlan):
    if plan.bandwidth_sweep is not None:
        return [(h, f"{h:g}") for h in plan.bandwidth_sweep]
    if plan.bandwidth is not None:
        return [(plan.bandwidth, f"{plan.bandwidth:g}")]
    return [(None, "default")]


def _cell_key(scenario_label, n, nsr, h_label):
    slug = scenario_label.replace(" ", "-").replace("=", "")
    return f"{slug}_n{n}_nsr{nsr:g}_h{h_label}"


def _estimate_once(plan, kernel, n, nsr, seed, grid, bandwidth):
    spec = plan.scenario
    noise = NoiseSpec(nsr=nsr, sigma_x=latent_sigma(spec))
    latent = generate_latent(spec, n, seed)
    sample = contaminate(latent, noise, seed)
    model = _error_model(noise)
    config = EstimatorConfig(
        bandwidth=bandwidth,
        epsilon_guard=plan.epsilon_guard,
        hazard_mode=plan.hazard_mode,
        eval_grid=grid,
        confidence_level=plan.confidence_level,
        bandwidth_constant=plan.bandwidth_constant,
    )
    return hazard_estimate(sample, kernel, model, config)


def mise(estimate_curve, truth_curve, grid) -> float:
    """Trapezoid integral of the squared difference between two curves."""
    estimate_curve = np.asarray(estimate_curve, dtype=float)
    truth_curve = np.asarray(truth_curve, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if estimate_curve.shape != truth_curve.shape or estimate_curve.shape != grid.shape:
        raise ConfigurationError("curve and grid lengths differ")
    return float(np.trapezoid((estimate_curve - truth_curve) ** 2, grid))


def ks_distance(values) -> float:
    """Kolmogorov-Smirnov distance of a sample to the standard normal."""
    z = np.sort(np.asarray(values, dtype=float))
    m = z.size
    if m == 0:
        raise ConfigurationError("empty sample")
    cdf = ndtr(z)
    steps = np.arange(1, m + 1) / m
    return float(max(np.max(steps - cdf), np.max(cdf - (steps - 1.0 / m))))


def coverage_summary(lower, upper, truth):
    """Count open-interval coverage of ``truth``; NaN bounds count as undefined.

    Returns ``(cp, al, contained, missed, undefined)`` with the coverage
    probability computed against the full replication count, so
    ``contained + missed + undefined`` always reconciles.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    defined = np.isfinite(lower) & np.isfinite(upper)
    contained = defined & (lower < truth) & (truth < upper)
    n_total = lower.size
    n_contained = int(np.sum(contained))
    n_defined = int(np.sum(defined))
    cp = n_contained / n_total
    al = float(np.mean(upper[defined] - lower[defined])) if n_defined else float("nan")
    return cp, al, n_contained, n_defined - n_contained, n_total - n_defined


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _new_row(plan, n, nsr, h_label):
    return {
        "scenario": plan.scenario.label,
        "n": n,
        "nsr": nsr,
        "h": h_label,
        "cp": None,
        "al": None,
        "mean_bias": None,
        "mise": None,
        "ks": None,
        "m_defined": None,
        "m_flagged": None,
        "seed": plan.master_seed,
    }


def run_curve_experiment(plan: ExperimentPlan, kernel: SmoothKernel | None = None) -> SimulationReport:
    """Estimate hazard curves per cell; export mean, 5/95 band and truth."""
    kernel = kernel or fan_kernel()
    try:
        truth = truth_for(plan.scenario)
        truth_curve = truth.hazard(plan.grid)
    except NoAnalyticTruth:
        truth = None
        truth_curve = None

    rows, sidecars, cells, failed = [], {}, {}, []
    for h_value, h_label in _bandwidth_labels(plan):
        for n in plan.sample_sizes:
            for nsr_index, nsr in enumerate(plan.nsr_levels):
                key = _cell_key(plan.scenario.label, n, nsr, h_label)
                curves, failures = [], 0
                for rep in range(plan.replications):
                    seed = _rep_seed(plan.master_seed, nsr_index, rep)
                    try:
                        est = _estimate_once(plan, kernel, n, nsr, seed, plan.grid, h_value)
                        curves.append(est.lambda_n)
                    except Exception:
                        failures += 1
                if failures > FAILURE_BUDGET * plan.replications:
                    failed.append(key)
                if not curves:
                    raise CellFailureError(
                        f"cell {key}: every replication failed", failed_cells=[key]
                    )
                curves = np.asarray(curves)
                mean_curve = curves.mean(axis=0)
                p05 = np.percentile(curves, 5, axis=0)
                p95 = np.percentile(curves, 95, axis=0)

                row = _new_row(plan, n, nsr, h_label)
                row["m_defined"] = plan.replications - failures
                row["m_flagged"] = failures
                if truth_curve is not None:
                    per_rep_mise = [mise(c, truth_curve, plan.grid) for c in curves]
                    row["mise"] = float(np.mean(per_rep_mise))
                rows.append(row)

                cells[key] = {
                    "grid": plan.grid,
                    "curves": curves,
                    "mean": mean_curve,
                    "p05": p05,
                    "p95": p95,
                    "truth": truth_curve,
                }
                header = "x,truth,mean,p05,p95"
                body = []
                for j, x in enumerate(plan.grid):
                    t = _format(float(truth_curve[j])) if truth_curve is not None else ""
                    body.append(
                        f"{_format(float(x))},{t},{_format(float(mean_curve[j]))},"
                        f"{_format(float(p05[j]))},{_format(float(p95[j]))}"
                    )
                sidecars[f"{key}__curves.csv"] = header + "\n" + "\n".join(body) + "\n"
                rep_lines = ["rep,x,lambda"]
                for r, curve in enumerate(curves):
                    rep_lines.extend(
                        f"{r},{_format(float(x))},{_format(float(v))}"
                        for x, v in zip(plan.grid, curve)
                    )
                sidecars[f"{key}__replications.csv"] = "\n".join(rep_lines) + "\n"

    manifest = _manifest(plan, "curves", list(sidecars))
    return SimulationReport(rows, sidecars, manifest, failed, cells)


def run_coverage_experiment(plan: ExperimentPlan, kernel: SmoothKernel | None = None) -> SimulationReport:
    """Interval coverage and average length at the plan's evaluation point."""
    kernel = kernel or fan_kernel()
    truth = truth_for(plan.scenario)
    x0 = plan.eval_point
    lambda_true = float(truth.hazard(np.array([x0]))[0])
    point_grid = np.array([x0])

    rows, cells, failed = [], {}, []
    for h_value, h_label in _bandwidth_labels(plan):
        for n in plan.sample_sizes:
            for nsr_index, nsr in enumerate(plan.nsr_levels):
                key = _cell_key(plan.scenario.label, n, nsr, h_label)
                lo, hi, lam, failures = [], [], [], 0
                for rep in range(plan.replications):
                    seed = _rep_seed(plan.master_seed, nsr_index, rep)
                    try:
                        est = _estimate_once(plan, kernel, n, nsr, seed, point_grid, h_value)
                    except Exception:
                        failures += 1
                        continue
                    lo.append(float(est.ci_lower[0]))
                    hi.append(float(est.ci_upper[0]))
                    lam.append(float(est.lambda_n[0]))
                if failures > FAILURE_BUDGET * plan.replications:
                    failed.append(key)
                lo += [float("nan")] * failures
                hi += [float("nan")] * failures
                cp, al, contained, missed, undefined = coverage_summary(lo, hi, lambda_true)

                row = _new_row(plan, n, nsr, h_label)
                row["cp"] = cp
                row["al"] = al
                row["mean_bias"] = float(np.mean(lam) - lambda_true) if lam else None
                row["m_defined"] = plan.replications - undefined
                row["m_flagged"] = undefined
                rows.append(row)
                cells[key] = {
                    "cp": cp,
                    "al": al,
                    "lower": np.asarray(lo),
                    "upper": np.asarray(hi),
                    "lambda": np.asarray(lam),
                    "truth": lambda_true,
                    "contained": contained,
                    "missed": missed,
                    "undefined": undefined,
                }

    manifest = _manifest(plan, "coverage", [])
    return SimulationReport(rows, {}, manifest, failed, cells)


def run_normality_experiment(plan: ExperimentPlan, kernel: SmoothKernel | None = None) -> SimulationReport:
    """Standardized estimates at the evaluation point and their KS distances.

    Two studentizations are computed and recorded per cell: ``plugin``
    divides the scaled deviations by the replication average of the plug-in
    sigma, ``empirical`` by their own standard deviation.  The report row
    carries the empirical-mode distance (the scale-free normality
    diagnostic); both appear in the sidecar.
    """
    kernel = kernel or fan_kernel()
    if plan.replications < 100:
        raise ConfigurationError("normality study needs at least 100 replications")
    x0 = plan.eval_point
    point_grid = np.array([x0])

    rows, sidecars, cells, failed = [], {}, {}, []
    for h_value, h_label in _bandwidth_labels(plan):
        for n in plan.sample_sizes:
            for nsr_index, nsr in enumerate(plan.nsr_levels):
                key = _cell_key(plan.scenario.label, n, nsr, h_label)
                lam, sigmas, scales, failures = [], [], [], 0
                for rep in range(plan.replications):
                    seed = _rep_seed(plan.master_seed, nsr_index, rep)
                    try:
                        est = _estimate_once(plan, kernel, n, nsr, seed, point_grid, h_value)
                    except Exception:
                        failures += 1
                        continue
                    lam.append(float(est.lambda_n[0]))
                    var = float(est.sigma_n_sq[0])
                    sigmas.append(math.sqrt(var) if var > 0 else float("nan"))
                    scales.append(math.sqrt(n * est.bandwidth ** (2 * est.beta)))
                if failures > FAILURE_BUDGET * plan.replications:
                    failed.append(key)

                lam = np.asarray(lam)
                scales = np.asarray(scales)
                scaled_dev = scales * (lam - lam.mean())
                sd_emp = float(np.std(scaled_dev, ddof=1))
                if not sd_emp > 0:
                    raise CellFailureError(
                        f"cell {key}: degenerate spread, estimates are constant",
                        failed_cells=[key],
                    )
                finite = np.asarray(sigmas)[np.isfinite(sigmas)]
                sigma_plugin = float(finite.mean()) if finite.size else float("nan")
                s_plugin = scaled_dev / sigma_plugin
                s_empirical = scaled_dev / sd_emp
                ks_plugin = ks_distance(s_plugin) if math.isfinite(sigma_plugin) else float("nan")
                ks_empirical = ks_distance(s_empirical)

                row = _new_row(plan, n, nsr, h_label)
                row["ks"] = ks_empirical
                row["m_defined"] = plan.replications - failures
                row["m_flagged"] = failures
                rows.append(row)
                cells[key] = {
                    "lambda": lam,
                    "standardized_empirical": s_empirical,
                    "standardized_plugin": s_plugin,
                    "ks_empirical": ks_empirical,
                    "ks_plugin": ks_plugin,
                    "sigma_plugin": sigma_plugin,
                    "sigma_empirical": sd_emp,
                }

                m = lam.size
                order_emp = np.sort(s_empirical)
                order_plug = np.sort(s_plugin)
                quantiles = ndtri((np.arange(1, m + 1) - 0.5) / m)
                lines = ["index,normal_quantile,empirical,plugin"]
                lines.extend(
                    f"{i},{_format(float(q))},{_format(float(e))},{_format(float(p))}"
                    for i, (q, e, p) in enumerate(zip(quantiles, order_emp, order_plug))
                )
                sidecars[f"{key}__standardized.csv"] = "\n".join(lines) + "\n"

    manifest = _manifest(plan, "normality", list(sidecars))
    return SimulationReport(rows, sidecars, manifest, failed, cells)


def run_rate_experiments(plan: ExperimentPlan, kernel: SmoothKernel | None = None) -> SimulationReport:
    """Bias-halving ratio and scaled variance stability checks.

    Bias: Monte Carlo mean of the density estimate at the evaluation point
    for ``h`` and ``h/2`` against the analytic density; a second-order bias
    halves the bandwidth into a factor-4 drop.  Variance: the scaled variance
    ``n h^(2 beta) Var(F_n(x0))`` across the plan's sample sizes.
    Requires a fixed plan bandwidth.
    """
    kernel = kernel or fan_kernel()
    if plan.bandwidth is None:
        raise ConfigurationError("rate experiments need a fixed bandwidth")
    truth = truth_for(plan.scenario)
    x0 = plan.eval_point
    f_true = float(truth.density(np.array([x0]))[0])
    point_grid = np.array([x0])
    nsr = plan.nsr_levels[0]
    h = plan.bandwidth

    def mc_values(n, bandwidth):
        fs, Fs = [], []
        for rep in range(plan.replications):
            seed = _rep_seed(plan.master_seed, 0, rep)
            est = _estimate_once(plan, kernel, n, nsr, seed, point_grid, bandwidth)
            fs.append(float(est.f_n[0]))
            Fs.append(float(est.F_n[0]))
        return np.asarray(fs), np.asarray(Fs)

    n_bias = plan.sample_sizes[0]
    fs_h, _ = mc_values(n_bias, h)
    fs_half, _ = mc_values(n_bias, h / 2.0)
    bias_h = float(fs_h.mean() - f_true)
    bias_half = float(fs_half.mean() - f_true)
    bias_ratio = bias_h / bias_half

    noise = NoiseSpec(nsr=nsr, sigma_x=latent_sigma(plan.scenario))
    beta = _error_model(noise).beta
    scaled = {}
    for n in plan.sample_sizes:
        _, Fs = mc_values(n, h)
        scaled[n] = float(n * h ** (2 * beta) * np.var(Fs, ddof=1))
    values = list(scaled.values())
    variance_ratio = max(values) / min(values)

    rows = []
    row = _new_row(plan, n_bias, nsr, f"{h:g}")
    row["mean_bias"] = bias_h
    rows.append(row)
    row = _new_row(plan, n_bias, nsr, f"{h / 2.0:g}")
    row["mean_bias"] = bias_half
    rows.append(row)
    cells = {
        "bias_ratio": bias_ratio,
        "bias_h": bias_h,
        "bias_half": bias_half,
        "variance_scaled": scaled,
        "variance_ratio": variance_ratio,
    }
    manifest = _manifest(plan, "rates", [])
    return SimulationReport(rows, {}, manifest, [], cells)


def _manifest(plan: ExperimentPlan, mode: str, sidecar_names) -> str:
    import numpy
    import scipy

    lines = [
        "deconvhazard run manifest",
        f"mode = {mode}",
        f"package = {_pkg_version}",
        f"numpy = {numpy.__version__}",
        f"scipy = {scipy.__version__}",
        "rng = philox; streams keyed by SeedSequence(master_seed, (nsr_index, replication))",
        f"scenario = {plan.scenario.label}",
        f"sample_sizes = {list(plan.sample_sizes)}",
        f"nsr_levels = {list(plan.nsr_levels)}",
        f"replications = {plan.replications}",
        f"eval_point = {plan.eval_point:g}",
        f"confidence_level = {plan.confidence_level:g}",
        f"bandwidth = {'default' if plan.bandwidth is None else plan.bandwidth}",
        f"bandwidth_sweep = {list(plan.bandwidth_sweep) if plan.bandwidth_sweep else 'none'}",
        f"bandwidth_constant = {plan.bandwidth_constant:g}",
        f"epsilon_guard = {plan.epsilon_guard:g}",
        f"hazard_mode = {plan.hazard_mode}",
        f"master_seed = {plan.master_seed}",
        f"grid = [{plan.grid[0]:g}, {plan.grid[-1]:g}] with {plan.grid.size} points",
    ]
    lines.append("outputs = report.csv" + ("," + ",".join(sorted(sidecar_names)) if sidecar_names else ""))
    return "\n".join(lines) + "\n"


def report_csv(report: SimulationReport) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for row in report.rows:
        lines.append(",".join(_format(row[c]) for c in REPORT_COLUMNS))
    return "\n".join(lines) + "\n"


def write_report(report: SimulationReport, outdir, include_manifest: bool = True) -> list:
    """Write manifest first, then the report and sidecar CSVs; returns paths."""
    import os

    os.makedirs(outdir, exist_ok=True)
    written = []
    if include_manifest:
        manifest_path = os.path.join(outdir, "manifest.txt")
        with open(manifest_path, "w", encoding="ascii") as fh:
            fh.write(report.manifest)
        written.append(manifest_path)
    report_path = os.path.join(outdir, "report.csv")
    with open(report_path, "w", encoding="ascii") as fh:
        fh.write(report_csv(report))
    written.append(report_path)
    if report.sidecars:
        cell_dir = os.path.join(outdir, "cells")
        os.makedirs(cell_dir, exist_ok=True)
        for name in sorted(report.sidecars):
            path = os.path.join(cell_dir, name)
            with open(path, "w", encoding="ascii") as fh:
                fh.write(report.sidecars[name])
            written.append(path)
    return written
