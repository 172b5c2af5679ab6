import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkd_arf.errors import DomainError, OverflowDomainError
from cvqkd_arf.specfun import bessel_k, bessel_k_scaled, erf_fn, gamma_fn, gammaln

# Reference values from 30-digit mpmath. Gamma(4.2) via Euler's integral,
# K_nu via int_0^inf exp(-x cosh t) cosh(nu t) dt, erf(1.40738) via int exp(-t^2).
GAMMA_REF = [
    (4.2, 7.7566895357931776),
    (0.1, 9.5135076986687318),
    (170.5, 5.5620924145599996e305),
]
GAMMALN_REF = [
    (1000.0, 5905.2204232091812),
    (5e-4, 7.6006140572763212),
]
BESSEL_REF = [
    (2.8, 3.0, 0.10445050820664573),
    (0.0, 1e-3, 7.0236888005623813),
    (2.8, 0.05, 2.5644154644517324e4),
    (50.0, 10.0, 2.0613737753892575e27),
]
ERF_REF = [
    (1.40738, 0.95344605231541498),
    (0.3, 0.32862675945912743),
    (3.7, 0.99999983284894209),
]


@pytest.mark.parametrize("x,ref", GAMMA_REF)
def test_gamma_reference(x, ref):
    assert gamma_fn(x) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("x,ref", GAMMALN_REF)
def test_gammaln_reference(x, ref):
    assert gammaln(x) == pytest.approx(ref, rel=1e-13)


def test_gamma_closed_forms():
    assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-12)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert gamma_fn(1.0) == 1.0


def test_gamma_domain():
    with pytest.raises(DomainError):
        gamma_fn(0.0)
    with pytest.raises(DomainError):
        gamma_fn(-1.5)
    with pytest.raises(OverflowDomainError):
        gamma_fn(172.0)


def test_gamma_matches_math_module():
    x = np.linspace(0.05, 170.0, 500)
    ref = np.array([math.gamma(v) for v in x])
    np.testing.assert_allclose(gamma_fn(x), ref, rtol=1e-12)


@given(st.floats(min_value=0.01, max_value=160.0))
def test_gamma_recurrence(x):
    assert gamma_fn(x + 1.0) == pytest.approx(x * gamma_fn(x), rel=1e-12)


@given(st.floats(min_value=0.01, max_value=1e5))
def test_gammaln_matches_lgamma(x):
    assert gammaln(x) == pytest.approx(math.lgamma(x), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("nu,x,ref", BESSEL_REF)
def test_bessel_reference(nu, x, ref):
    assert bessel_k(nu, x) == pytest.approx(ref, rel=1e-8)


def test_bessel_half_order_closed_form():
    for x in (0.1, 1.0, 3.0, 25.0, 120.0):
        ref = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x)
        assert bessel_k(0.5, x) == pytest.approx(ref, rel=1e-8)


def test_bessel_scaled_large_argument():
    # exp(x) K_0.3(x) at x = 700; the unscaled value is ~1e-306
    assert bessel_k_scaled(0.3, 700.0) == pytest.approx(0.047365412104601832, rel=1e-12)
    assert bessel_k_scaled(2.8, 1e8) == pytest.approx(math.sqrt(math.pi / 2e8), rel=1e-7)


def test_bessel_underflows_to_zero():
    assert bessel_k(1.0, 800.0) == 0.0


def test_bessel_domain():
    with pytest.raises(DomainError):
        bessel_k(1.0, 0.0)
    with pytest.raises(DomainError):
        bessel_k(1.0, -2.0)


def test_bessel_array_input():
    x = np.array([0.5, 1.5, 2.5, 60.0])
    out = bessel_k(2.8, x)
    assert out.shape == (4,)
    assert all(out[i] == bessel_k(2.8, float(x[i])) for i in range(4))


@given(st.floats(min_value=-20.0, max_value=20.0), st.floats(min_value=1e-6, max_value=500.0))
def test_bessel_even_in_order(nu, x):
    assert bessel_k(nu, x) == bessel_k(-nu, x)


@given(st.floats(min_value=0.0, max_value=20.0), st.floats(min_value=1e-3, max_value=500.0))
@settings(max_examples=200)
def test_bessel_positive_and_increasing_in_order(nu, x):
    k = bessel_k_scaled(nu, x)
    assert k > 0
    assert bessel_k_scaled(nu + 1.0, x) >= k


@given(st.floats(min_value=0.0, max_value=10.0), st.floats(min_value=1e-3, max_value=300.0))
def test_bessel_recurrence(nu, x):
    lhs = bessel_k_scaled(nu + 1.0, x)
    rhs = bessel_k_scaled(nu - 1.0, x) + 2.0 * nu / x * bessel_k_scaled(nu, x)
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("x,ref", ERF_REF)
def test_erf_reference(x, ref):
    assert erf_fn(x) == pytest.approx(ref, abs=1e-12)


def test_erf_matches_math_module():
    x = np.linspace(-8.0, 8.0, 4001)
    ref = np.array([math.erf(v) for v in x])
    assert np.max(np.abs(erf_fn(x) - ref)) < 1e-12


def test_erf_zero_and_limits():
    assert erf_fn(0.0) == 0.0
    assert erf_fn(40.0) == 1.0
    assert erf_fn(-40.0) == -1.0
    assert erf_fn(math.inf) == 1.0


@given(st.floats(min_value=-30.0, max_value=30.0))
def test_erf_odd(x):
    assert erf_fn(-x) == -erf_fn(x)


@given(st.floats(min_value=-6.0, max_value=6.0), st.floats(min_value=1e-6, max_value=1.0))
def test_erf_monotone_and_bounded(x, dx):
    lo, hi = erf_fn(x), erf_fn(x + dx)
    assert -1.0 <= lo <= hi <= 1.0
