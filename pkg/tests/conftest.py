"""Shared independent oracles for the test suite.

These helpers deliberately avoid the package's own inversion code paths:
kernels are evaluated by a fixed Gauss-Legendre rule applied directly to the
transform, and the normal quantile comes from bisection on an erfc-based
CDF.  They exist so estimator outputs can be checked against a second,
structurally different computation.
"""

import math

import numpy as np
import pytest


@pytest.fixture(scope="session")
def gl_rule():
    nodes, weights = np.polynomial.legendre.leggauss(300)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    return t, w


def fan_transform(t):
    t = np.asarray(t, dtype=float)
    return np.where(np.abs(t) <= 1.0, (1.0 - t**2) ** 3, 0.0)


def smooth_kernel_values(x, derivative=0, n_nodes=300):
    """Inverse transform of the fan kernel (or a derivative) on an array."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    g = (1.0 - t**2) ** 3 * w
    x = np.atleast_1d(np.asarray(x, dtype=float))
    phase = x[:, None] * t[None, :]
    if derivative == 0:
        return (np.cos(phase) @ g) / np.pi
    if derivative == 1:
        return -(np.sin(phase) @ (t * g)) / np.pi
    if derivative == 2:
        return -(np.cos(phase) @ (t * t * g)) / np.pi
    raise ValueError(derivative)


def smooth_kernel_cdf_values(x, n_nodes=300):
    """Running integral of the fan kernel via the half-line inversion formula."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    t = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    g = (1.0 - t**2) ** 3 * w / t
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return 0.5 + (np.sin(x[:, None] * t[None, :]) @ g) / np.pi


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_quantile(p: float) -> float:
    """Standard normal quantile by bisection on the erfc-based CDF."""
    lo, hi = -10.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if normal_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def plain_kde(observations, x, h):
    """Direct-sum kernel density estimate with the oracle kernel values."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = (x[:, None] - observations[None, :]) / h
    return smooth_kernel_values(u.ravel()).reshape(u.shape).sum(axis=1) / (
        observations.size * h
    )


def plain_kde_cdf(observations, x, h):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = (x[:, None] - observations[None, :]) / h
    return smooth_kernel_cdf_values(u.ravel()).reshape(u.shape).sum(axis=1) / observations.size
