"""Large-time profile terms of the 3D drift-diffusion equation.

Terms evaluated here, for total charge ``M0`` and first moment ``M1``::

    U0(t)       = M0 G(t)
    U1odd(t)    = M1 . grad G(t)
    U1rad(t)    = c M0^2 int_0^t int_0^inf s^{-1/2} (2+sig)^{-5/2} Lap G(t - s/(2+sig)) dsig ds
    J(t)        = int_0^t grad G(t-s) * (G grad(-Lap)^{-1} G)(1+s) ds
    K2(t) log t = -kappa M0^3 Lap G(t) log t,  kappa = (2 pi - 3 sqrt 3) / (2^7 3^2 pi^3)

Two prefactors ``c`` are exposed. ``oracle`` is ``(4 pi)^{-3/2}``, the value
obtained by composing the Gauss-law field of a Gaussian with the Gaussian
product rule; ``paper`` is the printed ``1 / (8 pi^2)``. They differ by a
factor ``sqrt(pi)``.

Convolutions with ``grad G`` never touch a grid: the semigroup property
``grad G(a) *. grad G(b) = Lap G(a + b)`` collapses every space convolution
into an evaluation of ``Lap G`` at a shifted time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import _radial_laplacian, heat_kernel, heat_kernel_gradient, heat_kernel_laplacian, radial_field_magnitude
from .quadrature import QuadratureSpec, integrate_2d, integrate_finite, integrate_semi_infinite

__all__ = [
    "Moments",
    "ExpansionSpec",
    "KAPPA",
    "MOMENT_COEFFICIENT",
    "LOG_INTEGRAL",
    "U1RAD_PREFACTOR",
    "eval_U0",
    "eval_U1odd",
    "eval_U1rad",
    "eval_J",
    "eval_K2_log_term",
    "dimensionless_log_integral",
    "moment_coefficient",
    "duhamel_quadratic_gaussian",
    "eval_expansion",
    "u1rad_radial",
    "j_radial",
    "q2_radial",
]

_TWO_PI_MINUS = 2.0 * math.pi - 3.0 * math.sqrt(3.0)
KAPPA = _TWO_PI_MINUS / (2 ** 7 * 3 ** 2 * math.pi ** 3)
MOMENT_COEFFICIENT = _TWO_PI_MINUS / (2 ** 7 * 3 * math.pi ** 3)
LOG_INTEGRAL = _TWO_PI_MINUS / 6.0

U1RAD_PREFACTOR = {"paper": 1.0 / (8.0 * math.pi ** 2), "oracle": (4.0 * math.pi) ** -1.5}
_C = U1RAD_PREFACTOR["oracle"]


@dataclass(frozen=True)
class Moments:
    """Total charge ``m0`` and first moment ``m1 = -int x u0``."""

    m0: float
    m1: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        m1 = tuple(float(v) for v in np.broadcast_to(np.asarray(self.m1, dtype=float), (3,)))
        object.__setattr__(self, "m1", m1)
        if not (math.isfinite(self.m0) and all(math.isfinite(v) for v in m1)):
            raise ValueError("moments must be finite")


@dataclass(frozen=True)
class ExpansionSpec:
    include_u0: bool = True
    include_u1odd: bool = False
    include_u1rad: bool = False
    include_k2log: bool = False
    prefactor_mode: str = "oracle"
    log_mode: str = "log_t"  # or "log1p_t"

    def __post_init__(self):
        if self.include_k2log and not self.include_u1rad:
            raise ValueError("the log term needs the radial first-order term")
        if self.prefactor_mode not in U1RAD_PREFACTOR:
            raise ValueError(f"unknown prefactor mode {self.prefactor_mode!r}")
        if self.log_mode not in ("log_t", "log1p_t"):
            raise ValueError(f"unknown log mode {self.log_mode!r}")

    @classmethod
    def full(cls, **kw):
        return cls(True, True, True, True, **kw)

    @classmethod
    def first_order(cls, **kw):
        return cls(True, True, True, False, **kw)

    def label(self):
        parts = [n for n, on in (("U0", self.include_u0), ("U1odd", self.include_u1odd),
                                 ("U1rad", self.include_u1rad), ("K2log", self.include_k2log)) if on]
        return "+".join(parts) or "none"


def _profile_spec(q):
    if q is not None:
        return q
    return QuadratureSpec(abs_tol=1e-15, rel_tol=1e-11)


def _radii(x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (3,):
        raise ValueError(f"positions need a trailing axis of length 3, got {x.shape}")
    return np.sqrt(np.sum(x * x, axis=-1))


def _radial_eval(func, x):
    """Evaluate a radial function once per distinct radius of ``x``."""
    r = _radii(x)
    flat = r.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    return np.asarray(func(uniq))[inv].reshape(r.shape)


def _check_t(t):
    if not t > 0:
        raise ValueError(f"profile evaluation needs t > 0, got {t}")


def eval_U0(m: Moments, t, x):
    return m.m0 * heat_kernel(t, x)


def eval_U1odd(m: Moments, t, x):
    return heat_kernel_gradient(t, x) @ np.asarray(m.m1)


def _sigma_spec(q):
    return QuadratureSpec(abs_tol=q.abs_tol, rel_tol=q.rel_tol, max_depth=q.max_depth, tail_order=2.5)


def _s_spec(q, singular):
    return QuadratureSpec(abs_tol=q.abs_tol, rel_tol=q.rel_tol, max_depth=q.max_depth,
                          singularity="inverse_sqrt_left" if singular else "none")


def u1rad_radial(t, r, q=None, method="double"):
    """``U1rad(t, r)`` for unit charge and the oracle prefactor.

    ``method="double"`` integrates the defining double integral.
    ``method="collapsed"`` uses the exact one-dimensional reduction
    ``int_{t/2}^t (a - t/2)/t (t - a)^{-1/2} Lap G(a) da`` obtained by
    substituting ``a = t - s/(2+sig)`` and integrating over ``sig`` first.
    """
    _check_t(t)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    q = _profile_spec(q)
    if method == "double":
        def f(s, sig):
            a = t - s / (2.0 + sig)
            w = s ** -0.5 * (2.0 + sig) ** -2.5
            return w[..., None] * _radial_laplacian(a[..., None], r)
        res = integrate_2d(f, (0.0, t), _s_spec(q, True), _sigma_spec(q))
    elif method == "collapsed":
        # b = t - a in [0, t/2]; weight (t/2 - b)/t * b^{-1/2}
        def g(b):
            b = b[:, None]
            return (0.5 * t - b) / t * b ** -0.5 * _radial_laplacian(t - b, r[None, :])
        res = integrate_finite(g, 0.0, 0.5 * t, _s_spec(q, True))
    else:
        raise ValueError(f"unknown method {method!r}")
    return _C * np.atleast_1d(res.value)


def eval_U1rad(m: Moments, t, x, q=None, mode="oracle", method="double"):
    """Radial first-order correction ``U1rad(t, x)``; radially symmetric in x."""
    _check_t(t)
    if m.m0 == 0:
        return np.zeros(_radii(x).shape)
    scale = m.m0 ** 2 * U1RAD_PREFACTOR[mode] / _C
    return scale * _radial_eval(lambda r: u1rad_radial(t, r, q, method), x)


def _shifted_duhamel(t, t0, r, q):
    """``c int_0^t int_0^inf (t0+s)^{-1/2} (2+sig)^{-5/2} Lap G(t-s+(t0+s)(1+sig)/(2+sig))``.

    ``G(t0+s) grad(-Lap)^{-1} G(t0+s)`` equals ``c (t0+s)^{-1/2} int (2+sig)^{-5/2}
    grad G((t0+s)(1+sig)/(2+sig)) dsig``; convolving with ``grad G(t-s)`` adds
    the times and turns the gradient pair into a Laplacian.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))

    def f(s, sig):
        a = t - s + (t0 + s) * (1.0 + sig) / (2.0 + sig)
        w = (t0 + s) ** -0.5 * (2.0 + sig) ** -2.5
        return w[..., None] * _radial_laplacian(a[..., None], r)

    res = integrate_2d(f, (0.0, t), _s_spec(q, False), _sigma_spec(q))
    return _C * np.atleast_1d(res.value)


def j_radial(t, r, q=None):
    _check_t(t)
    return _shifted_duhamel(t, 1.0, r, _profile_spec(q))


def eval_J(t, x, q=None):
    """``J(t, x)``, radial; computed without any spatial convolution."""
    _check_t(t)
    return _radial_eval(lambda r: j_radial(t, r, q), x)


def q2_radial(t0, t, r, q=None):
    _check_t(t)
    if not t0 > 0:
        raise ValueError("t0 must be positive")
    return _shifted_duhamel(t, t0, r, _profile_spec(q))


def duhamel_quadratic_gaussian(m0, t0, t, x, q=None):
    """Exact quadratic Duhamel term for data ``m0 G(t0, .)``, evaluated at (t, x)."""
    if m0 == 0:
        _check_t(t)
        return np.zeros(_radii(x).shape)
    return m0 * m0 * _radial_eval(lambda r: q2_radial(t0, t, r, q), x)


def _log_factor(t, log_mode):
    return math.log(t) if log_mode == "log_t" else math.log1p(t)


def eval_K2_log_term(m: Moments, t, x, log_mode="log_t"):
    """``K2(t) log t = -kappa M0^3 Lap G(t) log t``."""
    _check_t(t)
    return -KAPPA * m.m0 ** 3 * heat_kernel_laplacian(t, x) * _log_factor(t, log_mode)


def dimensionless_log_integral(q=None):
    """``int_0^1 int_0^inf s^{-1/2} (2+sig)^{-1} (4+2 sig - s)^{-3/2} dsig ds``."""
    q = q or QuadratureSpec(abs_tol=1e-13, rel_tol=1e-12)
    f = lambda s, sig: s ** -0.5 / (2.0 + sig) * (4.0 + 2.0 * sig - s) ** -1.5
    return float(integrate_2d(f, (0.0, 1.0), _s_spec(q, True), _sigma_spec(q)).value)


def moment_coefficient(m: Moments, q=None, mode="oracle", method="double"):
    """``int y . (U0 grad(-Lap)^{-1} U1rad + U1rad grad(-Lap)^{-1} U0)(1, y) dy``.

    Both densities are radial, so each field is ``E_r(r) y/r`` and
    ``y . E = r E_r``; the 3-D integral becomes ``4 pi int r^3 (...) dr``.
    """
    if m.m0 == 0:
        return 0.0
    q = q or QuadratureSpec(abs_tol=1e-14, rel_tol=1e-9)
    inner = QuadratureSpec(abs_tol=q.abs_tol * 1e-2, rel_tol=q.rel_tol * 1e-2)
    u0 = lambda r: m.m0 * _radial_gaussian(1.0, r)
    pref = m.m0 ** 2 * U1RAD_PREFACTOR[mode] / _C

    def u1(r):
        shape = np.shape(r)
        return pref * u1rad_radial(1.0, np.ravel(r), inner, method).reshape(shape)

    def integrand(r):
        e1 = radial_field_magnitude(u1, r, inner)
        e0 = radial_field_magnitude(u0, r, inner)
        return 4.0 * np.pi * r ** 3 * (u0(r) * e1 + u1(r) * e0)

    spec = QuadratureSpec(abs_tol=q.abs_tol, rel_tol=q.rel_tol, scale=2.0)
    return float(integrate_semi_infinite(integrand, 0.0, spec).value)


def _radial_gaussian(t, r):
    r = np.asarray(r, dtype=float)
    return (4.0 * np.pi * t) ** -1.5 * np.exp(-r * r / (4.0 * t))


def eval_expansion(spec: ExpansionSpec, m: Moments, t, x, q=None, terms: dict | None = None):
    """Sum of the selected profile terms at (t, x).

    If ``terms`` is a dict, each evaluated term is stored in it by name so
    callers can log the individual contributions.
    """
    _check_t(t)
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    store = terms if terms is not None else {}
    if spec.include_u0:
        store["U0"] = eval_U0(m, t, x)
        total = total + store["U0"]
    if spec.include_u1odd:
        store["U1odd"] = eval_U1odd(m, t, x)
        total = total + store["U1odd"]
    if spec.include_u1rad:
        store["U1rad"] = eval_U1rad(m, t, x, q, spec.prefactor_mode, method="collapsed")
        total = total + store["U1rad"]
    if spec.include_k2log:
        # Adds K2 log t (itself carrying the minus sign), matching u - ... + kappa Lap G log t.
        store["K2log"] = eval_K2_log_term(m, t, x, spec.log_mode)
        total = total + store["K2log"]
    return total
