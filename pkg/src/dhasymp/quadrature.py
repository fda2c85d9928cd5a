"""Adaptive Gauss-Kronrod quadrature with endpoint and tail substitutions.

Every integrand is evaluated in vectorized form: it receives a 1-D array of
nodes and returns an array whose leading axis matches the nodes. Trailing
axes are allowed, so one adaptive pass can integrate a whole batch of
related integrands (for instance a profile at many radii). Error control on
batches uses the max-norm over the trailing axes.

Singular endpoints of the form ``(s - a)**-0.5`` are removed with
``s = a + w**2``; semi-infinite ranges are compactified with
``sigma = a + scale * ((1 - v)**-beta - 1)`` on ``v in [0, 1)``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "QuadratureSpec",
    "QuadratureResult",
    "QuadratureError",
    "integrate_finite",
    "integrate_semi_infinite",
    "integrate_2d",
]

# 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG_FULL = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes.
_WG_FULL[[1, 3, 5]] = _WG[:3]
_WG_FULL[7] = _WG[3]
_WG_FULL[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps
_MAX_INTERVALS = 4000


class QuadratureError(ArithmeticError):
    """Requested tolerance not reached.

    Carries the best value found and its error estimate so callers can
    decide whether the partial result is still usable.
    """

    def __init__(self, message, value=None, error_estimate=None, axis=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate
        self.axis = axis


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and substitution hints for one integration axis.

    ``tail_order`` declares algebraic decay ``f ~ sigma**-p`` on a
    semi-infinite range; ``None`` means faster-than-algebraic decay.
    ``scale`` sets the length scale of the compactifying map.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_depth: int = 40
    singularity: str = "none"  # "none" | "inverse_sqrt_left"
    tail_order: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one of abs_tol, rel_tol must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.singularity not in ("none", "inverse_sqrt_left"):
            raise ValueError(f"unknown singularity hint {self.singularity!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def tightened(self, factor: float) -> "QuadratureSpec":
        return replace(self, abs_tol=self.abs_tol / factor, rel_tol=self.rel_tol / factor)


@dataclass
class QuadratureResult:
    value: np.ndarray | float
    error_estimate: float
    evaluations: int

    def __float__(self):
        return float(self.value)


def _gk15(f, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid + half * _NODES
    y = np.asarray(f(x), dtype=float)
    if y.ndim == 0 or y.shape[0] != 15:
        y = np.broadcast_to(y, (15,) + y.shape[1:] if y.ndim else (15,))
    trailing = y.shape[1:]
    y = y.reshape(15, -1)
    k = half * (_WK @ y)
    g = half * (_WG_FULL @ y)
    # Round-off floor keeps the estimator from demanding the impossible.
    floor = 50.0 * _EPS * np.abs(half) * (_WK @ np.abs(y))
    err = np.maximum(np.abs(k - g), floor)
    return k, err, trailing


def _adaptive(f, a, b, spec):
    """Global adaptive bisection on [a, b]; returns (value, err, nevals)."""
    k, err, out_shape = _gk15(f, a, b)
    nevals = 15
    total = k.copy()
    total_err = err.copy()
    # Heap keyed by the max-norm error, largest first.
    heap = [(-float(err.max()), 0, a, b, k, err, 0)]
    counter = 1
    while True:
        tol = max(spec.abs_tol, spec.rel_tol * float(np.abs(total).max()))
        achieved = float(total_err.max())
        if achieved <= tol:
            break
        if not np.all(np.isfinite(total)):
            raise QuadratureError("non-finite integrand value", total.reshape(out_shape), achieved)
        neg, _, lo, hi, kk, ee, depth = heapq.heappop(heap)
        if depth >= spec.max_depth or counter > _MAX_INTERVALS:
            raise QuadratureError(
                f"tolerance {tol:.3g} not reached (estimate {achieved:.3g}) after "
                f"{counter} intervals on [{a}, {b}]",
                total.reshape(out_shape), achieved,
            )
        mid = 0.5 * (lo + hi)
        k1, e1, _ = _gk15(f, lo, mid)
        k2, e2, _ = _gk15(f, mid, hi)
        nevals += 30
        total += k1 + k2 - kk
        total_err += e1 + e2 - ee
        # Guard against negative drift in the running error sum.
        np.maximum(total_err, 0.0, out=total_err)
        heapq.heappush(heap, (-float(e1.max()), counter, lo, mid, k1, e1, depth + 1))
        counter += 1
        heapq.heappush(heap, (-float(e2.max()), counter, mid, hi, k2, e2, depth + 1))
        counter += 1
    # Re-sum from the leaves to shed accumulated round-off.
    total = np.sum([item[4] for item in heap], axis=0)
    total_err = np.sum([item[5] for item in heap], axis=0)
    return _finish(total, total_err, nevals, out_shape)


def _finish(value, err, nevals, out_shape):
    value = value.reshape(out_shape)
    if out_shape == ():
        value = float(value)
    return QuadratureResult(value, float(np.max(err)), nevals)


def integrate_finite(f: Callable, a: float, b: float, spec: QuadratureSpec = QuadratureSpec()) -> QuadratureResult:
    """Integrate ``f`` over ``[a, b]``.

    With ``spec.singularity == "inverse_sqrt_left"`` the integrand may blow up
    like ``(s - a)**-0.5``; the substitution ``s = a + w**2`` makes it smooth.

    >>> r = integrate_finite(lambda s: s**-0.5, 0.0, 1.0,
    ...                      QuadratureSpec(singularity="inverse_sqrt_left"))
    >>> round(r.value, 12)
    2.0
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if spec.singularity == "inverse_sqrt_left":
        def g(w):
            w = np.asarray(w)
            fw = np.asarray(f(a + w * w), dtype=float)
            return fw * (2.0 * w).reshape((-1,) + (1,) * (fw.ndim - 1)) if fw.ndim else fw * 2.0 * w
        lo, hi = 0.0, float(np.sqrt(b - a))
    else:
        g, lo, hi = f, a, b
    return _adaptive(g, lo, hi, spec)


def _tail_exponent(spec):
    if spec.tail_order is None:
        return 1.0
    if spec.tail_order <= 1.0:
        raise ValueError(f"declared tail order {spec.tail_order} gives a divergent integral")
    # beta = 2 turns half-integer algebraic tails into smooth polynomial decay at v = 1.
    return 2.0


def integrate_semi_infinite(f: Callable, a: float, spec: QuadratureSpec = QuadratureSpec()) -> QuadratureResult:
    """Integrate ``f`` over ``[a, inf)`` after mapping onto ``[0, 1)``.

    ``spec.tail_order`` must be supplied for algebraically decaying
    integrands; orders ``<= 1`` are rejected as divergent.
    """
    beta = _tail_exponent(spec)
    c = spec.scale

    def g(v):
        v = np.asarray(v, dtype=float)
        om = 1.0 - v
        sigma = a + c * (om ** -beta - 1.0)
        jac = c * beta * om ** (-beta - 1.0)
        fv = np.asarray(f(sigma), dtype=float)
        if fv.ndim == 0:
            return fv * jac
        return fv * jac.reshape((-1,) + (1,) * (fv.ndim - 1))

    return _adaptive(g, 0.0, 1.0, spec)


def integrate_2d(
    f: Callable,
    s_range: Tuple[float, float],
    spec_s: QuadratureSpec,
    spec_sigma: QuadratureSpec,
    sigma_start: float = 0.0,
) -> QuadratureResult:
    """Iterated integral ``int_s int_sigma f(s, sigma) dsigma ds``.

    The inner range is ``[sigma_start, inf)``. ``f`` is called as
    ``f(s[:, None], sigma[None, :])`` and must return shape
    ``(len(s), len(sigma), ...)``; all outer nodes of one panel share a single
    vector-valued inner integration. The outer tolerance is tightened by 10x.
    """
    s0, s1 = s_range
    outer = spec_s.tightened(10.0)
    inner_err = [0.0]
    inner_evals = [0]

    def along_s(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))

        def inner(sig):
            vals = np.asarray(f(s[:, None], sig[None, :]), dtype=float)
            base = (len(s), len(sig)) + (1,) * max(vals.ndim - 2, 0)
            vals = np.broadcast_to(vals, np.broadcast_shapes(vals.shape, base))
            # Put sigma on the leading axis as the integrator expects.
            return np.moveaxis(vals, 1, 0)

        try:
            res = integrate_semi_infinite(inner, sigma_start, spec_sigma)
        except QuadratureError as exc:
            exc.axis = "sigma"
            raise
        inner_err[0] = max(inner_err[0], res.error_estimate)
        inner_evals[0] += res.evaluations * len(s)
        return np.asarray(res.value)

    try:
        res = integrate_finite(along_s, s0, s1, outer)
    except QuadratureError as exc:
        if exc.axis is None:
            exc.axis = "s"
        raise
    # Inner errors propagate through the outer rule with total weight s1 - s0.
    combined = res.error_estimate + inner_err[0] * (s1 - s0)
    return QuadratureResult(res.value, combined, inner_evals[0])
