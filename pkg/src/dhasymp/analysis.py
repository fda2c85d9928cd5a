"""Moments, L^q norms, decay fits and expansion residuals.

Grid integrals are plain Riemann sums with the box centre as origin; for
smooth, localized, periodic data these are spectrally accurate. ``q = inf``
on a grid is the sample maximum, a lower bound for the true sup norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .profiles import ExpansionSpec, Moments, eval_expansion
from .quadrature import QuadratureSpec, integrate_semi_infinite
from .solver import FieldState, in_valid_window

__all__ = [
    "LqExponent",
    "DecayFit",
    "ResidualReport",
    "FitError",
    "gamma",
    "moments_of_grid",
    "lq_norm_grid",
    "lq_norm_array",
    "weighted_norm_grid",
    "lq_norm_profile",
    "fit_decay",
    "residual_report",
]


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class LqExponent:
    q: float

    def __post_init__(self):
        if not (self.q >= 1):
            raise ValueError(f"q must lie in [1, inf], got {self.q}")

    @property
    def gamma(self):
        return gamma(self.q)

    @property
    def label(self):
        return "inf" if math.isinf(self.q) else f"{self.q:g}"

    @classmethod
    def parse(cls, text):
        text = str(text).strip().lower()
        return cls(math.inf if text in ("inf", "infinity", "∞") else float(text))


def gamma(q) -> float:
    """Heat-semigroup decay exponent ``(3/2)(1 - 1/q)``."""
    q = q.q if isinstance(q, LqExponent) else float(q)
    return 1.5 if math.isinf(q) else 1.5 * (1.0 - 1.0 / q)


def _q(q):
    return q.q if isinstance(q, LqExponent) else float(q)


def moments_of_grid(state: FieldState) -> Moments:
    """``M0 = sum u h^3`` and ``M1 = -sum x u h^3``."""
    u = state.density
    h3 = state.grid.cell_volume
    a = state.grid.axis()
    m0 = float(np.sum(u) * h3)
    m1 = (
        -float(np.sum(u.sum(axis=(1, 2)) * a) * h3),
        -float(np.sum(u.sum(axis=(0, 2)) * a) * h3),
        -float(np.sum(u.sum(axis=(0, 1)) * a) * h3),
    )
    return Moments(m0, m1)


def lq_norm_array(values, cell_volume, q) -> float:
    q = _q(q)
    a = np.abs(values)
    if math.isinf(q):
        return float(a.max())
    if q == 1:
        return float(np.sum(a) * cell_volume)
    return float((np.sum(a ** q) * cell_volume) ** (1.0 / q))


def lq_norm_grid(state: FieldState, q) -> float:
    return lq_norm_array(state.density, state.grid.cell_volume, q)


def weighted_norm_grid(state: FieldState, m: int, q) -> float:
    """``|| |x|^m u ||_q`` on the grid."""
    if m not in (0, 1, 2):
        raise ValueError("weight exponent m must be 0, 1 or 2")
    if m == 0:
        return lq_norm_grid(state, q)
    w = state.grid.radius() ** m
    return lq_norm_array(w * state.density, state.grid.cell_volume, q)


def lq_norm_profile(term: Callable, t: float, q, quad: QuadratureSpec | None = None,
                    symmetry: str = "radial") -> float:
    """L^q norm over R^3 of a radial or dipolar profile.

    ``term(t, r)`` returns the radial amplitude on an array of radii. For
    ``symmetry="dipole"`` the profile is ``term(t, r) * cos(theta)``; the
    angular integral of ``|cos|^q`` contributes ``4 pi / (q + 1)`` instead of
    ``4 pi``. Radii are mapped with the diffusive length ``sqrt(t)``.
    """
    q = _q(q)
    L = math.sqrt(t)
    if math.isinf(q):
        return _sup_radial(lambda r: term(t, r), L)
    ang = 4.0 * math.pi if symmetry == "radial" else 4.0 * math.pi / (q + 1.0)
    quad = quad or QuadratureSpec(abs_tol=1e-300, rel_tol=1e-10)
    spec = QuadratureSpec(abs_tol=quad.abs_tol, rel_tol=quad.rel_tol, max_depth=quad.max_depth, scale=2.0 * L)
    res = integrate_semi_infinite(lambda r: np.abs(term(t, r)) ** q * r * r, 0.0, spec)
    return float((ang * res.value) ** (1.0 / q))


def _sup_radial(f, L):
    r = np.linspace(0.0, 12.0 * L, 2401)
    v = np.abs(np.asarray(f(r)))
    i = int(np.argmax(v))
    lo, hi = r[max(i - 1, 0)], r[min(i + 1, len(r) - 1)]
    if hi <= lo:
        return float(v[i])
    opt = minimize_scalar(lambda s: -float(np.abs(np.asarray(f(np.array([s]))))[0]),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(L, 1.0)})
    return float(max(v[i], -opt.fun))


@dataclass
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    n_points: int
    log_corrected: bool = False


def fit_decay(times: Sequence[float], values: Sequence[float], window=None, log_corrected: bool = False) -> DecayFit:
    """Least-squares line through ``(log t, log value)``.

    With ``log_corrected=True`` the model is ``value = C t^p log t`` and the
    fit is on ``log(value / log t)``; needs ``t > 1``.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, v = t[keep], v[keep]
    if len(t) < 3:
        raise FitError(f"need at least 3 points in the window, have {len(t)}")
    if np.any(v <= 0):
        raise FitError("decay fit needs positive values")
    y = np.log(v)
    if log_corrected:
        if np.any(t <= 1):
            raise FitError("log-corrected fit needs t > 1")
        y = y - np.log(np.log(t))
    x = np.log(t)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    # A flat series has no variance to explain; rounding noise would make r^2 arbitrary.
    flat = ss_tot <= len(y) * (1e-12 * max(1.0, float(np.abs(y).max()))) ** 2
    r2 = 1.0 if flat else max(0.0, 1.0 - float(np.sum(resid ** 2)) / ss_tot)
    w = (float(t.min()), float(t.max()))
    return DecayFit(float(slope), float(intercept), r2, w, len(t), log_corrected)


@dataclass
class ResidualReport:
    expansion: ExpansionSpec
    q_list: list
    times: list
    clocks: list
    residual_norms: dict  # q label -> list over times
    term_norms: dict  # term name -> q label -> list over times
    fits: dict  # q label -> {"plain": DecayFit, "log": DecayFit | None}
    window_rule_applied: bool
    moments: Moments = None

    def rows(self):
        for qi in self.q_list:
            lab = qi.label
            for k, t in enumerate(self.times):
                row = {"t": t, "clock": self.clocks[k], "q": lab, "residual": self.residual_norms[lab][k]}
                for name, per_q in self.term_norms.items():
                    row[f"norm_{name}"] = per_q[lab][k]
                yield row


def residual_report(snapshots: Sequence[FieldState], m: Moments | None, spec: ExpansionSpec,
                    q_list=None, quad: QuadratureSpec | None = None,
                    apply_window: bool = True, use_clock: bool = True) -> ResidualReport:
    """``|| u(t) - expansion(t) ||_q`` for every snapshot and q.

    Profile terms are sampled at the grid points with the box centre as
    origin. With ``use_clock`` the profiles are evaluated at the snapshot
    clock ``t + t0`` (time since a virtual point source), which removes the
    initial-width offset from finite-time comparisons; the shift only
    changes the expansion at second order. Moments default to those of the
    first snapshot.
    """
    snapshots = list(snapshots)
    if not snapshots:
        raise ValueError("residual report needs at least one snapshot")
    q_list = [q if isinstance(q, LqExponent) else LqExponent(q) for q in (q_list or (1, 2, math.inf))]
    if m is None:
        m = moments_of_grid(snapshots[0])
    grid = snapshots[0].grid
    X = grid.coordinates()
    used = [s for s in snapshots if (not apply_window or in_valid_window(s))]
    used = [s for s in used if (s.clock if use_clock else s.time) > 0]
    if not used:
        raise ValueError("no snapshot inside the valid window")
    residuals = {q.label: [] for q in q_list}
    term_norms: dict = {}
    times, clocks = [], []
    for s in used:
        tau = s.clock if use_clock else s.time
        terms: dict = {}
        approx = eval_expansion(spec, m, tau, X, quad, terms=terms)
        times.append(s.time)
        clocks.append(tau)
        diff = s.density - approx
        for q in q_list:
            residuals[q.label].append(lq_norm_array(diff, grid.cell_volume, q))
            for name, val in terms.items():
                term_norms.setdefault(name, {qq.label: [] for qq in q_list})
                term_norms[name][q.label].append(lq_norm_array(val, grid.cell_volume, q))
    fits = {}
    xs = clocks
    for q in q_list:
        vals = residuals[q.label]
        entry = {"plain": None, "log": None}
        if len(xs) >= 3 and all(v > 0 for v in vals):
            entry["plain"] = fit_decay(xs, vals)
            if min(xs) > 1:
                entry["log"] = fit_decay(xs, vals, log_corrected=True)
        fits[q.label] = entry
    return ResidualReport(spec, q_list, times, clocks, residuals, term_norms, fits, apply_window, m)
