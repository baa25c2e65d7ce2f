"""Analytic target densities, CDFs and hazard rates for the built-in scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .errors import ClassificationError, NoAnalyticTruth
from .processes import AR1, LogNormalMA, TruncatedMAInf, WeibullIID

__all__ = ["TruthFunctions", "truth_for", "classify_shape"]

SHAPE_INCREASING = "IHR"
SHAPE_DECREASING = "DHR"
SHAPE_CONSTANT = "CHR"
SHAPE_NONMONOTONE = "NMHR"


@dataclass(frozen=True)
class TruthFunctions:
    """Closed-form density, CDF and hazard of a latent scenario.

    The three maps satisfy ``hazard * (1 - cdf) = density`` on the support,
    which starts at ``support_left``.
    """

    density: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]
    hazard: Callable[[np.ndarray], np.ndarray]
    shape: str
    support_left: float = 0.0


def _weibull_truth(a: float, b: float) -> TruthFunctions:
    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        z = x[pos] / b
        out[pos] = (a / b) * z ** (a - 1.0) * np.exp(-(z**a))
        return out

    def cdf(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = 1.0 - np.exp(-((x[pos] / b) ** a))
        return out

    def hazard(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = (a / b) * (x[pos] / b) ** (a - 1.0)
        return out

    if a > 1:
        shape = SHAPE_INCREASING
    elif a < 1:
        shape = SHAPE_DECREASING
    else:
        shape = SHAPE_CONSTANT
    return TruthFunctions(density=density, cdf=cdf, hazard=hazard, shape=shape)


def _lognormal_truth(sigma: float) -> TruthFunctions:
    inv = 1.0 / sigma
    norm_const = inv / np.sqrt(2.0 * np.pi)

    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        z = np.log(x[pos]) * inv
        out[pos] = norm_const * np.exp(-0.5 * z**2) / x[pos]
        return out

    def cdf(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = ndtr(np.log(x[pos]) * inv)
        return out

    def hazard(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        pos = x > 0
        z = np.log(x[pos]) * inv
        out[pos] = norm_const * np.exp(-0.5 * z**2) / (x[pos] * ndtr(-z))
        return out

    return TruthFunctions(density=density, cdf=cdf, hazard=hazard, shape=SHAPE_NONMONOTONE)


def truth_for(spec) -> TruthFunctions:
    """Closed-form truth for a scenario, if it has one.

    Autoregressive and moving-average scenarios have no closed-form marginal
    hazard and raise :class:`NoAnalyticTruth`; callers fall back to
    estimator-internal diagnostics in that case.
    """
    if isinstance(spec, WeibullIID):
        return _weibull_truth(spec.shape, spec.scale)
    if isinstance(spec, LogNormalMA):
        return _lognormal_truth(spec.log_sd)
    if isinstance(spec, (AR1, TruncatedMAInf)):
        raise NoAnalyticTruth(f"scenario {spec.label!r} has no closed-form hazard")
    raise TypeError(f"unknown scenario {spec!r}")


def classify_shape(hazard: Callable[[np.ndarray], np.ndarray], probe_grid, tol: float = 1e-9) -> str:
    """Classify a hazard as IHR / DHR / CHR / NMHR from its values on a probe grid."""
    values = np.asarray(hazard(np.asarray(probe_grid, dtype=float)), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ClassificationError("hazard takes non-finite values on the probe grid")
    diffs = np.diff(values)
    nondecreasing = bool(np.all(diffs >= -tol))
    nonincreasing = bool(np.all(diffs <= tol))
    if nondecreasing and nonincreasing:
        return SHAPE_CONSTANT
    if nondecreasing:
        return SHAPE_INCREASING
    if nonincreasing:
        return SHAPE_DECREASING
    return SHAPE_NONMONOTONE
