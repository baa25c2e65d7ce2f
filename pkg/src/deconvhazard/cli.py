"""Command-line front end: estimate from a file, generate scenario data,
run the simulation studies.

Configuration is flat ``key = value`` text (``#`` comments); command-line
``--set key=value`` pairs and the ``--seed`` / ``--out`` flags override the
file.  Every command writes ``manifest.txt`` with the fully resolved
configuration before any data file, so an interrupted run still identifies
its partial outputs.

Exit codes: 0 ok, 2 input data, 3 configuration, 4 numerical failure,
5 simulation cell failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    CellFailureError,
    ConfigurationError,
    DeconvError,
    InputDataError,
    NumericalError,
)
from .estimators import EstimatorConfig, hazard_estimate
from .fourier import ErrorModel, fan_kernel
from .processes import (
    AR1,
    LogNormalMA,
    NoiseSpec,
    TruncatedMAInf,
    WeibullIID,
    contaminate,
    generate_latent,
    latent_sigma,
    read_sample,
    write_sample,
)
from .simulation import (
    ExperimentPlan,
    run_coverage_experiment,
    run_curve_experiment,
    run_normality_experiment,
    run_rate_experiments,
    write_report,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_CELLS = 5

_COMMON_KEYS = {"out", "seed"}
_ESTIMATE_KEYS = _COMMON_KEYS | {
    "error_family",
    "error_scale",
    "gamma_shape",
    "gamma_rate",
    "nsr",
    "bandwidth",
    "bandwidth_c",
    "grid_min",
    "grid_max",
    "grid_step",
    "level",
    "epsilon_guard",
    "hazard_mode",
    "kernel_eval",
}
_SCENARIO_KEYS = {
    "scenario",
    "weibull_shape",
    "weibull_scale",
    "ar1_phi1",
    "ma_delta",
    "ma_truncation",
    "lognormal_normalization",
}
_GENERATE_KEYS = _COMMON_KEYS | _SCENARIO_KEYS | {"n", "nsr"}
_SIMULATE_KEYS = (
    _COMMON_KEYS
    | _SCENARIO_KEYS
    | {
        "mode",
        "sizes",
        "nsr_levels",
        "replications",
        "x0",
        "level",
        "bandwidth",
        "sweep",
        "bandwidth_c",
        "grid_min",
        "grid_max",
        "grid_step",
        "epsilon_guard",
        "hazard_mode",
    }
)

_DEFAULTS = {
    "out": ".",
    "seed": "0",
    "nsr": "",
    "error_family": "",
    "error_scale": "",
    "gamma_shape": "",
    "gamma_rate": "",
    "bandwidth": "default",
    "bandwidth_c": "1.0",
    "grid_min": "0.0",
    "grid_max": "6.0",
    "grid_step": "0.01",
    "level": "0.95",
    "epsilon_guard": "1e-3",
    "hazard_mode": "regularized",
    "kernel_eval": "grid",
    "scenario": "weibull",
    "weibull_shape": "1.0",
    "weibull_scale": "1.0",
    "ar1_phi1": "0.5",
    "ma_delta": "2.5",
    "ma_truncation": "",
    "lognormal_normalization": "unit-variance",
    "n": "1000",
    "mode": "coverage",
    "sizes": "1000",
    "nsr_levels": "0.1",
    "replications": "100",
    "x0": "0.5",
    "sweep": "",
}


def _parse_config_file(path):
    pairs = {}
    try:
        with open(path, "r", encoding="ascii") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
                key, _, value = line.partition("=")
                pairs[key.strip()] = value.strip()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
    return pairs


def _resolve_config(args, allowed):
    config = dict(_DEFAULTS)
    file_pairs = _parse_config_file(args.config) if args.config else {}
    set_pairs = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        set_pairs[key.strip()] = value.strip()
    for source in (file_pairs, set_pairs):
        for key in source:
            if key not in allowed:
                raise ConfigurationError(f"unknown configuration key {key!r}")
        config.update(source)
    if args.out is not None:
        config["out"] = args.out
    if args.seed is not None:
        config["seed"] = str(args.seed)
    config["out"] = os.path.abspath(config["out"])
    return config


def _as_float(config, key):
    try:
        return float(config[key])
    except ValueError:
        raise ConfigurationError(f"{key} = {config[key]!r} is not a number") from None


def _as_int(config, key):
    try:
        return int(config[key])
    except ValueError:
        raise ConfigurationError(f"{key} = {config[key]!r} is not an integer") from None


def _grid(config):
    lo = _as_float(config, "grid_min")
    hi = _as_float(config, "grid_max")
    step = _as_float(config, "grid_step")
    if not step > 0 or hi <= lo:
        raise ConfigurationError("grid requires grid_min < grid_max and grid_step > 0")
    count = int(round((hi - lo) / step)) + 1
    return np.round(lo + step * np.arange(count), 12)


def _bandwidth(config):
    raw = config["bandwidth"]
    if raw in ("", "default"):
        return None
    try:
        h = float(raw)
    except ValueError:
        raise ConfigurationError(f"bandwidth = {raw!r} is not a number or 'default'") from None
    if not h > 0:
        raise ConfigurationError("bandwidth must be positive")
    return h


def _scenario(config):
    kind = config["scenario"]
    if kind == "weibull":
        return WeibullIID(_as_float(config, "weibull_shape"), _as_float(config, "weibull_scale"))
    if kind == "lognormal-ma":
        return LogNormalMA(config["lognormal_normalization"])
    if kind == "ar1":
        return AR1(_as_float(config, "ar1_phi1"))
    if kind == "ma-inf":
        truncation = _as_int(config, "ma_truncation") if config["ma_truncation"] else None
        return TruncatedMAInf(_as_float(config, "ma_delta"), truncation)
    raise ConfigurationError(f"unknown scenario {kind!r}")


def _write_manifest(outdir, command, config, outputs, extra=()):
    os.makedirs(outdir, exist_ok=True)
    lines = [f"deconvhazard {__version__} manifest", f"command = {command}"]
    lines.extend(f"{k} = {config[k]}" for k in sorted(config))
    lines.extend(extra)
    lines.append("outputs = " + ",".join(outputs))
    path = os.path.join(outdir, "manifest.txt")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _error_model_for_estimate(config, observations):
    family = config["error_family"]
    notes = []
    if family == "gamma" or (not family and config["gamma_shape"]):
        model = ErrorModel.gamma(_as_float(config, "gamma_shape"), _as_float(config, "gamma_rate"))
        return model, notes
    if config["error_scale"]:
        return ErrorModel.laplace(_as_float(config, "error_scale")), notes
    if config["nsr"]:
        nsr = _as_float(config, "nsr")
        if nsr == 0.0:
            return ErrorModel.identity(), ["resolved error model: identity (nsr = 0)"]
        sd_y = float(np.std(observations, ddof=1))
        sigma_x = sd_y / math.sqrt(1.0 + nsr**2)
        scale = nsr * sigma_x / math.sqrt(2.0)
        notes.append(
            f"resolved error model: laplace scale {scale:.17g} "
            f"(nsr {nsr:g}, sd(Y) {sd_y:.17g})"
        )
        return ErrorModel.laplace(scale), notes
    raise ConfigurationError(
        "error model unspecified: set error_scale, gamma_shape/gamma_rate, or nsr"
    )


def cmd_estimate(args) -> int:
    config = _resolve_config(args, _ESTIMATE_KEYS)
    sample = read_sample(args.input)
    model, notes = _error_model_for_estimate(config, sample.observations)
    grid = _grid(config)
    est_config = EstimatorConfig(
        bandwidth=_bandwidth(config),
        epsilon_guard=_as_float(config, "epsilon_guard"),
        hazard_mode=config["hazard_mode"],
        eval_grid=grid,
        confidence_level=_as_float(config, "level"),
        kernel_eval=config["kernel_eval"],
        bandwidth_constant=_as_float(config, "bandwidth_c"),
    )
    outdir = config["out"]
    _write_manifest(outdir, "estimate", config, ["estimate.csv"], notes)
    est = hazard_estimate(sample, fan_kernel(), model, est_config)

    lines = ["x,f_n,F_n,lambda_n,sigma_n_sq,ci_lower,ci_upper,flag"]
    for j in range(grid.size):
        lines.append(
            ",".join(
                f"{v:.17g}"
                for v in (
                    grid[j],
                    est.f_n[j],
                    est.F_n[j],
                    est.lambda_n[j],
                    est.sigma_n_sq[j],
                    est.ci_lower[j],
                    est.ci_upper[j],
                )
            )
            + f",{est.flags[j]}"
        )
    with open(os.path.join(outdir, "estimate.csv"), "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _resolve_config(args, _GENERATE_KEYS)
    spec = _scenario(config)
    n = _as_int(config, "n")
    nsr = _as_float(config, "nsr") if config["nsr"] else 0.0
    seed = _as_int(config, "seed")
    outdir = config["out"]
    _write_manifest(outdir, "generate", config, ["sample.txt"])
    latent = generate_latent(spec, n, seed)
    noise = NoiseSpec(nsr=nsr, sigma_x=latent_sigma(spec))
    sample = contaminate(latent, noise, seed)
    write_sample(sample, os.path.join(outdir, "sample.txt"), scenario_label=spec.label)
    return EXIT_OK


_SIM_RUNNERS = {
    "curves": run_curve_experiment,
    "coverage": run_coverage_experiment,
    "normality": run_normality_experiment,
    "rates": run_rate_experiments,
}


def cmd_simulate(args) -> int:
    config = _resolve_config(args, _SIMULATE_KEYS)
    mode = config["mode"]
    if mode not in _SIM_RUNNERS:
        raise ConfigurationError(f"unknown simulate mode {mode!r}")
    spec = _scenario(config)
    sweep = None
    if config["sweep"]:
        sweep = tuple(float(v) for v in config["sweep"].split(","))
    plan = ExperimentPlan(
        scenario=spec,
        sample_sizes=tuple(int(v) for v in config["sizes"].split(",")),
        nsr_levels=tuple(float(v) for v in config["nsr_levels"].split(",")),
        replications=_as_int(config, "replications"),
        eval_point=_as_float(config, "x0"),
        confidence_level=_as_float(config, "level"),
        grid=_grid(config),
        bandwidth=_bandwidth(config),
        bandwidth_sweep=sweep,
        bandwidth_constant=_as_float(config, "bandwidth_c"),
        epsilon_guard=_as_float(config, "epsilon_guard"),
        hazard_mode=config["hazard_mode"],
        master_seed=_as_int(config, "seed"),
    )
    outdir = config["out"]
    _write_manifest(outdir, "simulate", config, ["report.csv", "cells/"])
    report = _SIM_RUNNERS[mode](plan)
    write_report(report, outdir, include_manifest=False)
    for row in report.rows:
        print(
            f"cell scenario={row['scenario']} n={row['n']} nsr={row['nsr']:g} "
            f"h={row['h']} done",
            file=sys.stderr,
        )
    if report.failed_cells:
        raise CellFailureError(
            "failure budget exceeded in cells: " + ", ".join(report.failed_cells),
            failed_cells=report.failed_cells,
        )
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(prog="deconvhazard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("estimate", "estimate density, CDF and hazard from a data file"),
        ("generate", "generate a scenario sample file"),
        ("simulate", "run a Monte Carlo study"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name == "estimate":
            p.add_argument("input", help="observation file, one value per line")
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override one configuration key (repeatable)",
        )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"estimate": cmd_estimate, "generate": cmd_generate, "simulate": cmd_simulate}
    try:
        return handlers[args.command](args)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CellFailureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CELLS
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, DeconvError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
