"""Self-check suites for the kernel, quadrature and profile modules.

Each check compares an achieved value against an independently computed
target. ``run_suite`` returns plain dicts so the CLI can dump them as JSON.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels, profiles
from .analysis import fit_decay, gamma, lq_norm_profile
from .quadrature import QuadratureSpec, integrate_2d, integrate_finite, integrate_semi_infinite


@dataclass
class Check:
    name: str
    target: float
    achieved: float
    tolerance: float
    passed: bool
    kind: str = "abs"


def _abs(name, target, achieved, tol):
    err = abs(achieved - target)
    return Check(name, float(target), float(achieved), tol, bool(err <= tol), "abs")


def _rel(name, target, achieved, tol):
    err = abs(achieved - target) / abs(target)
    return Check(name, float(target), float(achieved), tol, bool(err <= tol), "rel")


def _within(name, lo, hi, achieved):
    return Check(name, 0.5 * (lo + hi), float(achieved), 0.5 * (hi - lo), bool(lo <= achieved <= hi), "range")


def _radial_mass(f, scale=2.0):
    spec = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13, scale=scale)
    return integrate_semi_infinite(lambda r: 4.0 * np.pi * r * r * f(r), 0.0, spec).value


def _sample_points(rng, count):
    t = 10 ** rng.uniform(-1, 1, count)
    x = rng.normal(size=(count, 3)) * np.sqrt(t)[:, None] * 1.5
    return t, x


def kernel_checks(rng, count):
    out = []
    out.append(_abs("heat_kernel_origin", (4 * np.pi) ** -1.5, kernels.heat_kernel(1.0, np.zeros(3)), 1e-15))
    out.append(_abs("heat_kernel_unit_mass", 1.0,
                    _radial_mass(lambda r: kernels.heat_kernel(0.7, np.stack([r, 0 * r, 0 * r], -1))), 1e-10))
    # Central differences of G itself for first derivatives.
    p = np.array([0.3, -0.7, 1.1])
    h = 1e-4
    worst = 0.0
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (kernels.heat_kernel(1.0, p + e) - kernels.heat_kernel(1.0, p - e)) / (2 * h)
        alpha = [0, 0, 0]
        alpha[j] = 1
        ex = kernels.heat_kernel_derivative(1.0, p, alpha)
        worst = max(worst, abs(fd - ex) / abs(ex))
    out.append(Check("gradient_vs_finite_difference", 0.0, worst, 1e-6, worst < 1e-6, "rel"))
    t, x = _sample_points(rng, count)
    worst = 0.0
    ratio_err = 0.0
    for ti, xi in zip(t, x):
        closed = kernels.field_of_gaussian_closed(ti, xi)
        sig = kernels.field_of_gaussian_sigma(ti, xi)
        paper = kernels.field_of_gaussian_sigma(ti, xi, prefactor_mode="paper")
        worst = max(worst, np.linalg.norm(sig - closed) / np.linalg.norm(closed))
        ratio_err = max(ratio_err, abs(np.linalg.norm(paper) / np.linalg.norm(sig) - 2 / math.sqrt(math.pi)))
    out.append(Check("field_sigma_vs_closed", 0.0, worst, 1e-8, worst < 1e-8, "rel"))
    out.append(Check("field_paper_oracle_ratio", 2 / math.sqrt(math.pi), 2 / math.sqrt(math.pi) + ratio_err,
                     1e-10, ratio_err < 1e-10, "abs"))
    worst = 0.0
    for ti, xi in zip(t, x):
        d = kernels.gfg_product_direct(ti, xi)
        s = kernels.gfg_product_sigma(ti, xi)
        worst = max(worst, np.linalg.norm(s - d) / np.linalg.norm(d))
    out.append(Check("product_sigma_vs_direct", 0.0, worst, 1e-8, worst < 1e-8, "rel"))
    return out


def quadrature_checks():
    S = QuadratureSpec
    out = []
    out.append(_abs("inverse_sqrt_endpoint", 2.0,
                    integrate_finite(lambda s: s ** -0.5, 0, 1, S(singularity="inverse_sqrt_left")).value, 1e-10))
    out.append(_abs("algebraic_tail", math.sqrt(2) / 6,
                    integrate_semi_infinite(lambda s: (2 + s) ** -2.5, 0, S(tail_order=2.5)).value, 1e-10))
    out.append(_abs("exponential_tail", 1.0, integrate_semi_infinite(lambda s: np.exp(-s), 0, S()).value, 1e-10))
    sep = integrate_2d(lambda s, g: s ** -0.5 * (2 + g) ** -2.5, (0, 1),
                       S(singularity="inverse_sqrt_left"), S(tail_order=2.5)).value
    out.append(_abs("separable_2d", math.sqrt(2) / 3, sep, 1e-10))
    return out


def profile_checks(full):
    out = []
    out.append(_abs("dimensionless_log_integral", profiles.LOG_INTEGRAL, profiles.dimensionless_log_integral(), 1e-8))
    out.append(_rel("kappa_arithmetic", (2 * math.pi - 3 * math.sqrt(3)) / (1152 * math.pi ** 3), profiles.KAPPA, 1e-12))
    mc = profiles.moment_coefficient(profiles.Moments(1.0), mode="oracle",
                                     method="double" if full else "collapsed")
    # The log coefficient is one third of the moment integral.
    out.append(_rel("kappa_vs_moment_quadrature", mc / 3.0, profiles.KAPPA, 1e-6))
    out.append(_rel("moment_coefficient_oracle", profiles.MOMENT_COEFFICIENT, mc, 1e-6))
    r = np.linspace(0.0, 6.0, 25)
    a = profiles.u1rad_radial(1.0, r, method="double")
    b = profiles.u1rad_radial(1.0, r, method="collapsed")
    err = float(np.max(np.abs(a - b)))
    out.append(Check("u1rad_double_vs_collapsed", 0.0, err, 1e-13, err < 1e-13, "abs"))
    ts = [1.0, 4.0, 16.0, 64.0]
    for q in ((1.0, 2.0, math.inf) if full else (1.0,)):
        vals = [t ** (gamma(q) + 0.5) * lq_norm_profile(lambda tt, rr: profiles.u1rad_radial(tt, rr, method="collapsed"), t, q)
                for t in ts]
        spread = (max(vals) - min(vals)) / abs(np.mean(vals))
        out.append(Check(f"u1rad_scaling_q{q:g}", 0.0, spread, 1e-5, spread < 1e-5, "rel"))
    if full:
        ts = [4.0 * 2 ** k for k in range(7)]
        diffs = [abs(profiles.j_radial(t, [0.0])[0] - profiles.u1rad_radial(t, [0.0])[0]) for t in ts]
        out.append(_within("j_minus_u1rad_slope", -2.7, -2.3, fit_decay(ts, diffs).slope))
    return out


def run_suite(profile: str = "fast", seed: int = 0) -> list:
    if profile not in ("fast", "full"):
        raise ValueError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    full = profile == "full"
    checks = []
    checks += kernel_checks(rng, 50 if full else 10)
    checks += quadrature_checks()
    checks += profile_checks(full)
    for c in checks:
        c.achieved, c.passed = float(c.achieved), bool(c.passed)
    return [asdict(c) for c in checks]
