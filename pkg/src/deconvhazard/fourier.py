"""Characteristic-function machinery and Fourier inversion.

This module builds the deconvolving kernel ``W_h`` (the inverse Fourier
transform of ``cf_kernel(t) / cf_error(t / h)``), its running integral
``M_h``, the small-bandwidth limit kernel ``L`` and the two asymptotic
constants ``D1`` and ``D2`` that enter the plug-in variance of the hazard
estimator.

Conventions.  The Fourier transform of a density ``r`` is taken as
``phi_r(t) = int exp(-i t s) r(s) ds``; kernels are specified through their
transform ``cf``, assumed even, equal to 1 at 0 and supported on
``[-support_radius, support_radius]``.  Compact support makes every
inversion integral proper and lets a fixed Gauss-Legendre rule evaluate
whole grids in one pass.

All objects here are immutable and all functions are pure; they can be
shared freely across threads or processes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ConfigurationError, NumericalError

__all__ = [
    "SmoothKernel",
    "ErrorModel",
    "KernelGrid",
    "fan_kernel",
    "char_fn_kernel",
    "char_fn_error",
    "smoothness_params",
    "deconv_kernel_point",
    "deconv_kernel_grid",
    "limit_kernel_L",
    "constant_D1",
    "constant_D2",
]

# Default tolerances for inversion quadrature and grid diagnostics.
QUAD_ABS_TOL = 1e-10
IMAG_GUARD_TOL = 1e-9
GRID_NORM_TOL = 1e-4
GRID_EDGE_TOL = 1e-4
GRID_SPACING = 0.02


@dataclass(frozen=True)
class SmoothKernel:
    """A smoothing kernel given through its compactly supported transform.

    Parameters
    ----------
    cf : callable
        Even real function of a float array, the Fourier transform of the
        kernel.  Must satisfy ``cf(0) = 1`` and vanish outside
        ``[-support_radius, support_radius]``.
    support_radius : float
        Half-width of the transform's support.
    description : str
        Free-text label used in manifests.
    """

    cf: Callable[[np.ndarray], np.ndarray]
    support_radius: float = 1.0
    description: str = ""

    def __post_init__(self):
        if not self.support_radius > 0:
            raise ConfigurationError("support_radius must be positive")
        probe = np.array([0.3, 0.77, 0.5 * self.support_radius])
        c0 = float(np.asarray(self.cf(np.array([0.0])))[0])
        if abs(c0 - 1.0) > 1e-12:
            raise ConfigurationError(f"kernel cf(0) = {c0!r}, expected 1")
        left = np.asarray(self.cf(-probe), dtype=float)
        right = np.asarray(self.cf(probe), dtype=float)
        if not np.allclose(left, right, atol=1e-12):
            raise ConfigurationError("kernel cf must be even")
        outside = np.asarray(
            self.cf(np.array([1.0001, 2.0, 10.0]) * self.support_radius), dtype=float
        )
        if np.any(np.abs(outside) > 0):
            raise ConfigurationError("kernel cf must vanish outside its support")


def _fan_cf(t):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    inside = np.abs(t) <= 1.0
    out = np.zeros_like(t)
    out[inside] = (1.0 - t[inside] ** 2) ** 3
    return out


_FAN = None


def fan_kernel() -> SmoothKernel:
    """The standard deconvolution kernel with transform ``(1 - t^2)^3`` on [-1, 1]."""
    global _FAN
    if _FAN is None:
        _FAN = SmoothKernel(cf=_fan_cf, support_radius=1.0, description="fan")
    return _FAN


@dataclass(frozen=True)
class ErrorModel:
    """Ordinary-smooth additive error distribution with known transform.

    ``beta`` is the polynomial decay order of the error transform and
    ``beta1`` the positive tail constant ``lim |t^beta phi_r(t)|``.  Use the
    ``laplace``, ``gamma`` and ``identity`` constructors; the raw constructor
    performs no parameter derivation.
    """

    family: str
    scale: float = 0.0  # Laplace scale b
    shape: float = 0.0  # Gamma shape a
    rate: float = 0.0  # Gamma rate
    beta: int = 0
    beta1: float = 1.0

    @classmethod
    def laplace(cls, scale: float) -> "ErrorModel":
        if not scale > 0:
            raise ConfigurationError("Laplace scale must be positive")
        return cls(family="laplace", scale=float(scale), beta=2, beta1=1.0 / scale**2)

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "ErrorModel":
        if not (shape > 0 and rate > 0):
            raise ConfigurationError("Gamma shape and rate must be positive")
        if shape != int(shape) or int(shape) % 2 != 0:
            raise ConfigurationError(
                f"Gamma shape {shape} gives an odd decay order; an even order is required"
            )
        beta = int(shape)
        beta1 = _tail_constant_gamma(shape, rate)
        return cls(family="gamma", shape=float(shape), rate=float(rate), beta=beta, beta1=beta1)

    @classmethod
    def identity(cls) -> "ErrorModel":
        """Degenerate no-error model (transform identically 1, beta = 0)."""
        return cls(family="identity", beta=0, beta1=1.0)

    def cf(self, t):
        """Transform ``phi_r(t)``; real for symmetric families, complex for Gamma."""
        t = np.asarray(t, dtype=float)
        if self.family == "laplace":
            return 1.0 / (1.0 + (self.scale * t) ** 2)
        if self.family == "gamma":
            return (1.0 + 1j * t / self.rate) ** (-self.shape)
        if self.family == "identity":
            return np.ones_like(t)
        raise ConfigurationError(f"unknown error family {self.family!r}")

    def cf_inv_abs_max(self, t_max: float) -> float:
        """Largest amplification ``1/|phi_r|`` over ``[0, t_max]``."""
        ts = np.linspace(0.0, t_max, 64)
        return float(np.max(1.0 / np.abs(self.cf(ts))))


def _tail_constant_gamma(shape: float, rate: float) -> float:
    # |t^a phi_r(t)| = (rate^2 t^2 / (rate^2 + t^2))^(a/2), evaluated at
    # increasing t until it settles; the signed limit carries a phase
    # exp(-i pi a / 2), so the positive constant is the modulus.
    previous = None
    for t in (1e6, 1e7, 1e8):
        value = (rate**2 * t**2 / (rate**2 + t**2)) ** (shape / 2.0)
        if previous is not None and abs(value - previous) <= 1e-9 * max(1.0, abs(value)):
            return float(value)
        previous = value
    warnings.warn("gamma tail constant did not fully settle; using t = 1e8 value")
    return float(previous)


def char_fn_kernel(kernel: SmoothKernel, t):
    """Evaluate the kernel transform ``phi_k`` at ``t`` (scalar or array)."""
    scalar = np.isscalar(t)
    out = np.asarray(kernel.cf(np.atleast_1d(np.asarray(t, dtype=float))), dtype=float)
    return float(out[0]) if scalar else out


def char_fn_error(model: ErrorModel, t):
    """Evaluate the error transform ``phi_r`` at ``t`` (scalar or array)."""
    scalar = np.isscalar(t)
    out = model.cf(np.atleast_1d(np.asarray(t, dtype=float)))
    if scalar:
        out = out[0]
        return complex(out) if np.iscomplexobj(np.asarray(out)) else float(np.real(out))
    return out


def smoothness_params(model: ErrorModel) -> tuple[int, float]:
    """Return the decay order and tail constant ``(beta, beta1)`` of the model."""
    if model.beta % 2 != 0:
        raise ConfigurationError(f"decay order {model.beta} is odd")
    return model.beta, model.beta1


# ---------------------------------------------------------------------------
# Gauss-Legendre evaluation of inversion integrals over the compact support.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _gl_on_support(support: float, u_max: float) -> tuple[np.ndarray, np.ndarray]:
    # Node count grows with the largest phase support * u_max so the
    # oscillatory factor stays resolved to machine precision.
    n = max(160, int(0.8 * support * u_max) + 96)
    x, w = _gl_nodes(n)
    t = 0.5 * support * (x + 1.0)
    return t, 0.5 * support * w


def _transform_on_points(kernel, model, h, points):
    """``W_h`` evaluated on an arbitrary float array by one quadrature rule."""
    points = np.asarray(points, dtype=float)
    u_max = float(np.max(np.abs(points))) if points.size else 1.0
    t, w = _gl_on_support(kernel.support_radius, u_max)
    inv_phi = 1.0 / model.cf(t / h)
    coeff = np.asarray(kernel.cf(t)) * inv_phi * w
    out = np.empty(points.shape, dtype=float)
    flat = points.ravel()
    res = out.ravel()
    chunk = max(1, int(8e6 // max(1, t.size)))
    if np.iscomplexobj(coeff):
        for i in range(0, flat.size, chunk):
            blk = flat[i : i + chunk]
            res[i : i + chunk] = (
                np.exp(-1j * blk[:, None] * t[None, :]) @ coeff
            ).real / np.pi
    else:
        for i in range(0, flat.size, chunk):
            blk = flat[i : i + chunk]
            res[i : i + chunk] = (np.cos(blk[:, None] * t[None, :]) @ coeff) / np.pi
    return out


def deconv_kernel_point(
    kernel: SmoothKernel,
    model: ErrorModel,
    h: float,
    x: float,
    *,
    abs_tol: float = QUAD_ABS_TOL,
    imag_tol: float = IMAG_GUARD_TOL,
) -> float:
    """Pointwise ``W_h(x)`` by adaptive quadrature over the transform support.

    The integrand is Hermitian, so the exact value is real; the imaginary
    part is integrated as well and any excess beyond ``imag_tol`` raises
    :class:`NumericalError` instead of being silently discarded (this catches
    parity bugs in user-supplied transforms).
    """
    if not h > 0:
        raise ConfigurationError("bandwidth must be positive")
    s = kernel.support_radius

    def ratio(t):
        tv = np.array([t], dtype=float)
        num = np.asarray(kernel.cf(tv), dtype=complex)[0]
        den = np.asarray(model.cf(tv / h), dtype=complex)[0]
        return complex(num / den)

    def re_part(t):
        q = ratio(t)
        return math.cos(t * x) * q.real + math.sin(t * x) * q.imag

    def im_part(t):
        q = ratio(t)
        return math.cos(t * x) * q.imag - math.sin(t * x) * q.real

    re_val, re_err = integrate.quad(re_part, -s, s, epsabs=abs_tol, limit=400)
    if re_err > max(100 * abs_tol, 1e-6 * abs(re_val)):
        raise NumericalError(
            f"kernel inversion quadrature did not converge at x={x}", residual=re_err
        )
    im_val, _ = integrate.quad(im_part, -s, s, epsabs=abs_tol, limit=400)
    if abs(im_val) > imag_tol:
        raise NumericalError(
            f"inversion integral has imaginary part {im_val:.3e} at x={x}; "
            "kernel or error transform violates the evenness assumptions",
            residual=abs(im_val),
        )
    return re_val / (2.0 * math.pi)


@dataclass(frozen=True)
class KernelGrid:
    """Uniform tabulation of ``W_h`` and its running integral ``M_h``.

    ``m_values`` starts at exactly 0 on the left edge and each increment is
    the trapezoid panel of ``w_values``; the right edge must reach 1 within
    ``norm_tol`` for the grid to be accepted.
    """

    points: np.ndarray
    spacing: float
    w_values: np.ndarray
    m_values: np.ndarray
    bandwidth: float
    norm_tol: float = GRID_NORM_TOL
    edge_tol: float = GRID_EDGE_TOL

    def __post_init__(self):
        if len(self.points) != len(self.w_values) or len(self.points) != len(self.m_values):
            raise ConfigurationError("grid arrays must share one length")
        if max(abs(self.w_values[0]), abs(self.w_values[-1])) > self.edge_tol:
            raise ConfigurationError(
                "grid too narrow: kernel mass at the edges exceeds the edge tolerance"
            )
        total = self.m_values[-1]
        if abs(total - 1.0) > self.norm_tol:
            raise ConfigurationError(
                f"grid too narrow: trapezoid mass {total!r} misses 1 beyond tolerance"
            )

    @property
    def half_width(self) -> float:
        return float(self.points[-1])

    def w_at(self, u):
        """Linear interpolation of ``W_h``; zero outside the tabulated range."""
        return np.interp(u, self.points, self.w_values, left=0.0, right=0.0)

    def m_at(self, u):
        """Linear interpolation of ``M_h``; clamped to 0 / 1 outside the range."""
        return np.interp(u, self.points, self.m_values, left=0.0, right=float(self.m_values[-1]))


def _edge_decay_coefficient(kernel: SmoothKernel) -> float:
    # Magnitude of the third one-sided derivative of the transform at the
    # support edge; it drives the x^-4 tail envelope of the inverted kernel.
    s = kernel.support_radius
    d = 1e-3 * s
    ts = s - d * np.arange(5)
    vals = np.asarray(kernel.cf(ts), dtype=float)
    third = (vals[3] - 3 * vals[2] + 3 * vals[1] - vals[0]) / d**3
    return max(abs(third), 1.0)


def _auto_half_width(kernel, model, h, tol):
    amp = model.cf_inv_abs_max(kernel.support_radius / h)
    c3 = _edge_decay_coefficient(kernel)
    # Tail mass beyond X of an x^-4 envelope ~ 2 * c3 * amp / (pi X^4);
    # the factor 4 is a safety margin for phase alignment.
    r = (8.0 * c3 * amp / (math.pi * tol)) ** 0.25
    return max(16.0, r)


def deconv_kernel_grid(
    kernel: SmoothKernel,
    model: ErrorModel,
    h: float,
    half_width: float | None = None,
    n_points: int | None = None,
    *,
    norm_tol: float = GRID_NORM_TOL,
    edge_tol: float = GRID_EDGE_TOL,
    spacing: float = GRID_SPACING,
) -> KernelGrid:
    """Tabulate ``W_h`` and ``M_h`` on a uniform grid wide enough for ``norm_tol``.

    With ``half_width=None`` the range is chosen from the tail envelope of the
    inverted kernel so that the trapezoid mass reaches 1 within ``norm_tol``
    (``W_h`` is band-limited, so on-grid trapezoid quadrature is exact up to
    tail truncation).  An explicitly requested range that is too narrow
    raises :class:`ConfigurationError`.
    """
    if not h > 0:
        raise ConfigurationError("bandwidth must be positive")
    auto = half_width is None
    if auto:
        half_width = _auto_half_width(kernel, model, h, min(norm_tol, edge_tol))
    for _ in range(5):
        if n_points is None or auto:
            n = int(math.ceil(2.0 * half_width / spacing)) + 1
            if n % 2 == 0:
                n += 1
        else:
            n = int(n_points)
        points = np.linspace(-half_width, half_width, n)
        w = _transform_on_points(kernel, model, h, points)
        dx = points[1] - points[0]
        m = np.concatenate(([0.0], np.cumsum(0.5 * dx * (w[1:] + w[:-1]))))
        try:
            return KernelGrid(
                points=points,
                spacing=float(dx),
                w_values=w,
                m_values=m,
                bandwidth=float(h),
                norm_tol=norm_tol,
                edge_tol=edge_tol,
            )
        except ConfigurationError:
            if not auto:
                raise
            half_width *= 2.0
    raise NumericalError(
        "kernel grid failed to reach unit mass after widening; "
        "check the error model amplification",
    )


# ---------------------------------------------------------------------------
# Limit kernel and asymptotic constants.
# ---------------------------------------------------------------------------


def _limit_kernel_values(kernel: SmoothKernel, model: ErrorModel, us: np.ndarray) -> np.ndarray:
    beta, beta1 = smoothness_params(model)
    s = kernel.support_radius
    u_max = float(np.max(np.abs(us))) if us.size else 1.0
    t, w = _gl_on_support(s, u_max)
    coeff = t**beta * np.asarray(kernel.cf(t), dtype=float) * w
    out = np.empty(us.shape)
    chunk = max(1, int(8e6 // max(1, t.size)))
    flat = us.ravel()
    res = out.ravel()
    for i in range(0, flat.size, chunk):
        blk = flat[i : i + chunk]
        res[i : i + chunk] = (np.cos(blk[:, None] * t[None, :]) @ coeff) / (math.pi * beta1)
    return out


def limit_kernel_L(kernel: SmoothKernel, model: ErrorModel, u: float) -> float:
    """Small-bandwidth limit of ``h^beta W_h(u)``.

    Computed as ``(1 / (pi * beta1)) * int_0^infty cos(t u) t^beta phi_k(t) dt``,
    a proper integral thanks to the compact transform support.
    """
    beta, beta1 = smoothness_params(model)
    s = kernel.support_radius
    val, err = integrate.quad(
        lambda t: math.cos(t * u) * t**beta * float(np.asarray(kernel.cf(np.array([t])))[0]),
        0.0,
        s,
        epsabs=QUAD_ABS_TOL,
        limit=400,
    )
    if err > 1e-8:
        raise NumericalError("limit kernel quadrature did not converge", residual=err)
    return val / (math.pi * beta1)


def _d1_truncated(kernel, model, u_truncation, du=0.025):
    n = int(math.ceil(2.0 * u_truncation / du))
    if n % 2 == 1:
        n += 1
    us = np.linspace(-u_truncation, u_truncation, n + 1)
    vals = _limit_kernel_values(kernel, model, us)
    return float(integrate.simpson(vals, dx=us[1] - us[0]))


def constant_D1(
    kernel: SmoothKernel,
    model: ErrorModel,
    u_truncation: float = 200.0,
    *,
    return_remainder: bool = False,
):
    """Integral of the limit kernel over ``[-u_truncation, u_truncation]``.

    The integrand decays slowly and oscillates, so the value is reported
    together with a stability estimate obtained by doubling the truncation;
    a remainder larger than the value itself is reported through a warning
    rather than an exception (the partial value is still returned).
    """
    if not u_truncation > 0:
        raise ConfigurationError("u_truncation must be positive")
    value = _d1_truncated(kernel, model, u_truncation)
    doubled = _d1_truncated(kernel, model, 2.0 * u_truncation)
    remainder = abs(doubled - value)
    if remainder > max(1e-3, abs(value)):
        warnings.warn(
            f"limit-kernel integral unstable under truncation doubling "
            f"(value {value:.3e}, shift {remainder:.3e})"
        )
    if return_remainder:
        return value, remainder
    return value


def constant_D2(kernel: SmoothKernel, model: ErrorModel) -> float:
    """Variance constant ``(1 / (2 pi beta1^2)) * int |t^(2 beta) phi_k(t)^2| dt``."""
    beta, beta1 = smoothness_params(model)
    s = kernel.support_radius
    val, err = integrate.quad(
        lambda t: abs(t ** (2 * beta) * float(np.asarray(kernel.cf(np.array([t])))[0]) ** 2),
        0.0,
        s,
        epsabs=1e-13,
        limit=200,
    )
    if err > 1e-10:
        raise NumericalError("variance constant quadrature did not converge", residual=err)
    return 2.0 * val / (2.0 * math.pi * beta1**2)
