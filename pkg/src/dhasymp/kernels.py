"""Heat kernel, its derivatives, and the Coulomb potential/field of a Gaussian.

Positions are arrays whose last axis has length 3; times are scalars.
All evaluators broadcast over leading axes of ``x``.

Field convention: ``field`` always means ``grad (-Laplacian)^{-1} rho``,
i.e. the gradient of the potential psi with ``-Laplacian psi = rho``. For a
positive charge it points *towards* the charge (``-x`` direction).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import hermite as _herm
from scipy.special import erf

from .quadrature import QuadratureSpec, integrate_finite, integrate_semi_infinite

__all__ = [
    "heat_kernel",
    "heat_kernel_derivative",
    "heat_kernel_gradient",
    "heat_kernel_laplacian",
    "heat_kernel_time_derivative",
    "enclosed_mass_gaussian",
    "coulomb_potential_of_gaussian",
    "field_of_gaussian_closed",
    "field_of_gaussian_sigma",
    "gfg_product_direct",
    "gfg_product_sigma",
    "field_of_radial_density",
    "FIELD_PREFACTOR",
    "MAX_DERIVATIVE_ORDER",
]

MAX_DERIVATIVE_ORDER = 4

# Scalar in front of int_0^inf grad G(t + sigma) dsigma.
FIELD_PREFACTOR = {"paper": 2.0 * math.sqrt(math.pi) / math.pi, "oracle": 1.0}

_SERIES_SWITCH = 1e-4
_SQRT_PI = math.sqrt(math.pi)


def _check_time(t):
    if not np.all(np.asarray(t) > 0):
        raise ValueError(f"kernel evaluation needs t > 0, got {t!r}")


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,):
        raise ValueError(f"positions need a trailing axis of length 3, got shape {x.shape}")
    return x


def heat_kernel(t, x):
    """``G(t, x) = (4 pi t)^{-3/2} exp(-|x|^2 / (4t))``."""
    _check_time(t)
    x = _as_points(x)
    r2 = np.sum(x * x, axis=-1)
    return (4.0 * np.pi * t) ** -1.5 * np.exp(-r2 / (4.0 * t))


def heat_kernel_derivative(t, x, alpha):
    """Spatial derivative ``d^alpha G`` for a multi-index of total order <= 4.

    Uses the factorization of the Gaussian: along each axis
    ``d^n/dx^n exp(-x^2/4t) = (-1)^n (4t)^{-n/2} H_n(x / 2 sqrt t) exp(-x^2/4t)``
    with physicists' Hermite polynomials ``H_n``.
    """
    _check_time(t)
    x = _as_points(x)
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != 3 or any(a < 0 for a in alpha):
        raise ValueError(f"multi-index must have three non-negative entries, got {alpha}")
    if sum(alpha) > MAX_DERIVATIVE_ORDER:
        raise NotImplementedError(f"derivative order {sum(alpha)} exceeds {MAX_DERIVATIVE_ORDER}")
    scale = 1.0 / math.sqrt(4.0 * t)
    out = heat_kernel(t, x)
    for j, n in enumerate(alpha):
        if n:
            coeffs = np.zeros(n + 1)
            coeffs[n] = 1.0
            out = out * ((-scale) ** n) * _herm.hermval(x[..., j] * scale, coeffs)
    return out


def heat_kernel_gradient(t, x):
    """``grad G = -x G / (2t)``, shape ``x.shape``."""
    x = _as_points(x)
    return -x / (2.0 * t) * heat_kernel(t, x)[..., None]


def heat_kernel_laplacian(t, x):
    """``Laplacian G = G (|x|^2/(4t^2) - 3/(2t))``; equals the trace of the Hessian."""
    x = _as_points(x)
    r2 = np.sum(x * x, axis=-1)
    return heat_kernel(t, x) * (r2 / (4.0 * t * t) - 1.5 / t)


def heat_kernel_time_derivative(t, x):
    return heat_kernel_laplacian(t, x)


def _radial_laplacian(t, r):
    r = np.asarray(r, dtype=float)
    return (4.0 * np.pi * t) ** -1.5 * np.exp(-r * r / (4.0 * t)) * (r * r / (4.0 * t * t) - 1.5 / t)


def enclosed_mass_gaussian(t, r):
    """Mass of ``G(t, .)`` inside the ball of radius ``r``.

    ``erf(z) - (2z/sqrt(pi)) exp(-z^2)`` with ``z = r / (2 sqrt t)``; below
    ``z = 1e-4`` a 4-term Taylor series avoids the cancellation.
    """
    _check_time(t)
    r = np.asarray(r, dtype=float)
    z = r / (2.0 * math.sqrt(t))
    z2 = z * z
    series = (2.0 / _SQRT_PI) * z * z2 * (2.0 / 3.0 - 0.4 * z2 + z2 * z2 / 7.0 - z2 ** 3 / 27.0)
    closed = erf(z) - (2.0 / _SQRT_PI) * z * np.exp(-z2)
    return np.where(z < _SERIES_SWITCH, series, closed)


def coulomb_potential_of_gaussian(t, x):
    """``psi`` with ``-Laplacian psi = G(t, .)``: ``erf(r / 2 sqrt t) / (4 pi r)``."""
    _check_time(t)
    x = _as_points(x)
    r = np.sqrt(np.sum(x * x, axis=-1))
    z = r / (2.0 * math.sqrt(t))
    z2 = z * z
    # erf(z)/z = 2/sqrt(pi) (1 - z^2/3 + z^4/10 - z^6/42)
    series = (2.0 / _SQRT_PI) * (1.0 - z2 / 3.0 + z2 * z2 / 10.0 - z2 ** 3 / 42.0) / (8.0 * np.pi * math.sqrt(t))
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = erf(z) / (4.0 * np.pi * r)
    return np.where(z < _SERIES_SWITCH, series, closed)


def _radial_field_gaussian(t, r):
    """Signed radial component of ``grad (-Lap)^{-1} G(t)`` at radius r."""
    r = np.asarray(r, dtype=float)
    z = r / (2.0 * math.sqrt(t))
    z2 = z * z
    # m(r)/(4 pi r^2) expanded for small z: m ~ (2/sqrt pi) z^3 (2/3 - 2z^2/5 + z^4/7 - z^6/27)
    series = (2.0 / _SQRT_PI) * z * (2.0 / 3.0 - 0.4 * z2 + z2 * z2 / 7.0 - z2 ** 3 / 27.0) / (16.0 * np.pi * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = enclosed_mass_gaussian(t, r) / (4.0 * np.pi * r * r)
    return -np.where(z < _SERIES_SWITCH, series, closed)


def field_of_gaussian_closed(t, x):
    """Gauss-law field of ``G(t, .)``: ``-x m(|x|, t) / (4 pi |x|^3)``, zero at the origin."""
    _check_time(t)
    x = _as_points(x)
    r = np.sqrt(np.sum(x * x, axis=-1))
    er = _radial_field_gaussian(t, r)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(r[..., None] > 0, x / r[..., None], 0.0)
    return unit * er[..., None]


def _default_sigma_spec(t):
    # grad G(t + sigma) ~ sigma^{-5/2} at large sigma.
    return QuadratureSpec(abs_tol=1e-15, rel_tol=1e-12, tail_order=2.5, scale=max(t, 1e-300))


def field_of_gaussian_sigma(t, x, q: QuadratureSpec | None = None, prefactor_mode: str = "oracle"):
    """``c * int_0^inf grad G(t + sigma, x) dsigma`` by semi-infinite quadrature.

    ``c = 1`` in ``oracle`` mode, which reproduces the Gauss-law field;
    ``paper`` mode multiplies by ``2 sqrt(pi) / pi``.
    """
    _check_time(t)
    c = FIELD_PREFACTOR[prefactor_mode]
    x = _as_points(x)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 3)
    r2 = np.sum(pts * pts, axis=-1)
    q = q or _default_sigma_spec(t)

    # grad G(t+s, x) = -x/(2(t+s)) G(t+s, x); integrate the scalar factor.
    def integrand(s):
        tau = t + s[:, None]
        return -(4.0 * np.pi * tau) ** -1.5 * np.exp(-r2[None, :] / (4.0 * tau)) / (2.0 * tau)

    res = integrate_semi_infinite(integrand, 0.0, q)
    return c * (pts * np.atleast_1d(res.value)[:, None]).reshape(shape + (3,))


def gfg_product_direct(t, x):
    """``G grad (-Lap)^{-1} G`` at time t from the closed forms."""
    return heat_kernel(t, x)[..., None] * field_of_gaussian_closed(t, x)


def gfg_product_sigma(t, x, q: QuadratureSpec | None = None, prefactor_mode: str = "oracle"):
    """``(4 pi)^{-3/2} t^{-1/2} int_0^inf (2+s)^{-5/2} grad G(t(1+s)/(2+s), x) ds``.

    The Gaussian product ``G(t) G(t+tau)`` is again a Gaussian at the
    harmonic-mean time ``t(t+tau)/(2t+tau)``; substituting ``tau = t s``
    gives this one-dimensional form. In ``paper`` mode the result carries
    the extra field prefactor.
    """
    _check_time(t)
    c = FIELD_PREFACTOR[prefactor_mode]
    x = _as_points(x)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 3)
    r2 = np.sum(pts * pts, axis=-1)
    q = q or QuadratureSpec(abs_tol=1e-16, rel_tol=1e-12, tail_order=2.5)

    def integrand(s):
        s = s[:, None]
        tau = t * (1.0 + s) / (2.0 + s)
        gscalar = -(4.0 * np.pi * tau) ** -1.5 * np.exp(-r2[None, :] / (4.0 * tau)) / (2.0 * tau)
        return (2.0 + s) ** -2.5 * gscalar

    res = integrate_semi_infinite(integrand, 0.0, q)
    pref = c * (4.0 * np.pi) ** -1.5 / math.sqrt(t)
    return pref * (pts * np.atleast_1d(res.value)[:, None]).reshape(shape + (3,))


def field_of_radial_density(rho, x, q: QuadratureSpec | None = None):
    """Gauss-law field ``-x m(r) / (4 pi r^3)`` of a radial density ``rho(r)``.

    ``m(r) = 4 pi r^3 int_0^1 rho(r u) u^2 du`` is integrated for all query
    radii at once; ``rho`` must accept an array of radii of any shape.
    """
    x = _as_points(x)
    shape = x.shape[:-1]
    pts = x.reshape(-1, 3)
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    q = q or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11)
    er = radial_field_magnitude(rho, r, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(r[:, None] > 0, pts / r[:, None], 0.0)
    return (unit * er[:, None]).reshape(shape + (3,))


def radial_field_magnitude(rho, r, q: QuadratureSpec | None = None):
    """Signed radial component of the field of ``rho`` at radii ``r`` (1-D)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    q = q or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11)
    positive = r > 0
    out = np.zeros_like(r)
    if not positive.any():
        return out
    rp = r[positive]
    res = integrate_finite(lambda u: np.asarray(rho(rp[None, :] * u[:, None])) * (u * u)[:, None], 0.0, 1.0, q)
    # 4 pi r^3 * I / (4 pi r^2) = r * I, pointing inward.
    out[positive] = -rp * np.atleast_1d(res.value)
    return out
