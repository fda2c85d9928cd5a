import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dhasymp.quadrature import (QuadratureError, QuadratureSpec, integrate_2d, integrate_finite,
                                integrate_semi_infinite)


def test_polynomial_exact():
    res = integrate_finite(lambda x: 3 * x ** 2 - x, -1.0, 2.0)
    assert res.value == pytest.approx(9.0 - 1.5, abs=1e-13)
    assert res.error_estimate >= 0
    assert res.evaluations >= 15


def test_inverse_sqrt_endpoint():
    spec = QuadratureSpec(singularity="inverse_sqrt_left")
    res = integrate_finite(lambda s: s ** -0.5 * np.cos(s), 0.0, 1.0, spec)
    # int_0^1 cos(s)/sqrt(s) ds = sqrt(2 pi) C(sqrt(2/pi)) with the Fresnel C integral
    from scipy.special import fresnel
    exact = math.sqrt(2 * math.pi) * fresnel(math.sqrt(2 / math.pi))[1]
    assert res.value == pytest.approx(exact, abs=1e-10)


def test_midpoint_oracle_for_inverse_sqrt_times_algebraic():
    # int_0^1 s^{-1/2} (4 - s)^{-3/2} ds; antiderivative sqrt(s) / (2 sqrt(4 - s)).
    spec = QuadratureSpec(singularity="inverse_sqrt_left")
    res = integrate_finite(lambda s: s ** -0.5 * (4 - s) ** -1.5, 0.0, 1.0, spec)
    exact = 1.0 / (2.0 * math.sqrt(3.0))
    assert res.value == pytest.approx(exact, abs=1e-12)
    # Independent brute-force oracle: midpoint rule after s = w^2.
    n = 10 ** 6
    w = (np.arange(n) + 0.5) / n
    mid = np.sum(2.0 * (4 - w * w) ** -1.5) / n
    assert abs(mid - exact) < 1e-9
    assert res.value == pytest.approx(0.2886751, abs=1e-7)


@pytest.mark.parametrize("p", [1.5, 2.5, 4.0])
def test_algebraic_tails(p):
    res = integrate_semi_infinite(lambda s: (1 + s) ** -p, 0.0, QuadratureSpec(tail_order=p))
    assert res.value == pytest.approx(1.0 / (p - 1.0), rel=1e-10)


def test_divergent_tail_rejected():
    with pytest.raises(ValueError):
        integrate_semi_infinite(lambda s: 1 / (1 + s), 0.0, QuadratureSpec(tail_order=1.0))


def test_gaussian_tail_default_map():
    res = integrate_semi_infinite(lambda s: np.exp(-s * s), 0.0)
    assert res.value == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-11)


def test_vector_valued_integrand():
    k = np.arange(1, 6)
    res = integrate_finite(lambda x: x[:, None] ** k[None, :], 0.0, 1.0)
    np.testing.assert_allclose(res.value, 1.0 / (k + 1), atol=1e-13)


def test_separable_2d():
    res = integrate_2d(lambda s, g: np.exp(-s) * (1 + g) ** -3, (0.0, 2.0),
                       QuadratureSpec(), QuadratureSpec(tail_order=3.0))
    assert res.value == pytest.approx((1 - math.exp(-2)) * 0.5, abs=1e-10)


def test_budget_exhaustion_reports_partial_result():
    spec = QuadratureSpec(abs_tol=1e-15, rel_tol=0.0, max_depth=2)
    with pytest.raises(QuadratureError) as info:
        integrate_finite(lambda x: np.abs(x - 0.3137) ** 0.1, 0.0, 1.0, spec)
    assert info.value.value is not None
    assert info.value.error_estimate > 1e-15


def test_nonfinite_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate_finite(lambda x: np.where(x > 0.5, np.nan, x), 0.0, 1.0)


def test_invalid_spec():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0, rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(singularity="log")
    with pytest.raises(ValueError):
        integrate_finite(lambda x: x, 1.0, 0.0)


def test_tightened():
    s = QuadratureSpec(abs_tol=1e-8, rel_tol=1e-6).tightened(10)
    assert s.abs_tol == pytest.approx(1e-9) and s.rel_tol == pytest.approx(1e-7)


@given(a=st.floats(0.1, 5.0), lam=st.floats(0.2, 5.0))
def test_exponential_tail_property(a, lam):
    res = integrate_semi_infinite(lambda s: lam * np.exp(-lam * s), a, QuadratureSpec(abs_tol=1e-16, scale=1 / lam))
    assert res.value == pytest.approx(math.exp(-lam * a), rel=1e-9, abs=1e-13)


@given(a=st.floats(-3, 3), w=st.floats(0.01, 4.0))
def test_additivity_property(a, w):
    f = lambda x: np.sin(3 * x) + x * x
    mid = a + 0.37 * w
    whole = integrate_finite(f, a, a + w).value
    parts = integrate_finite(f, a, mid).value + integrate_finite(f, mid, a + w).value
    assert whole == pytest.approx(parts, abs=1e-10)
