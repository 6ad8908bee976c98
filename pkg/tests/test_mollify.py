import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from gradedwave.coefficients import (
    from_callable, make_constant, make_hoelder_degenerate, make_lipschitz, make_weierstrass,
)
from gradedwave.errors import DomainError, InsufficientData, InvalidParameter
from gradedwave.mollify import (
    bump_kernel, mollify_sqrt, regularized_pair, verify_mollification_bounds,
)

EPS_LADDER = [2.0 ** -j for j in range(3, 10)]


def test_kernel_unit_mass():
    k = bump_kernel(0.1)
    mass = integrate.quad(k.eval, -0.1, 0.1, epsabs=1e-13)[0]
    assert mass == pytest.approx(1.0, abs=1e-10)


def test_kernel_support_and_peak():
    k = bump_kernel(0.1)
    assert k.eval(0.1) == 0
    assert k.eval(-0.1) == 0
    assert k.eval(0.5) == 0
    # normalization fixed independently by quadrature of the raw bump
    raw = integrate.quad(lambda x: math.exp(-1.0 / (1.0 - x * x)), -1, 1, epsabs=1e-14)[0]
    assert k.normalization == pytest.approx(1.0 / raw, rel=1e-10)
    assert k.eval(0.0) == pytest.approx(k.normalization / 0.1 * math.exp(-1), rel=1e-14)


@pytest.mark.parametrize("eps", [0, -0.1])
def test_kernel_rejects_eps(eps):
    with pytest.raises(InvalidParameter):
        bump_kernel(eps)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(-2.0, 2.0))
def test_kernel_nonnegative(eps, t):
    assert bump_kernel(eps).eval(t) >= 0


@pytest.mark.parametrize("eps", [1.0, 0.1, 1e-3])
def test_constants_preserved(eps):
    t = np.linspace(0, 2, 41)
    assert np.allclose(mollify_sqrt(make_constant(4, 2), eps, t), 2.0, rtol=0, atol=1e-14)


def test_sqrt_of_square_away_from_boundary():
    p = from_callable(lambda t: t * t, 1.0)
    t = np.linspace(0.2, 0.8, 13)
    m = mollify_sqrt(p, 0.05, t)
    assert np.all(m >= 0)
    # |t| is linear on the support, so the symmetric average is t itself
    assert np.allclose(m, t, rtol=0, atol=1e-12)


@pytest.mark.parametrize("eps", [0.1, 0.01])
@pytest.mark.parametrize("t0", [0.3, 0.61])
def test_matches_adaptive_quadrature(eps, t0):
    p = make_lipschitz(1, 2, math.pi, 1)
    k = bump_kernel(eps)
    ref = integrate.quad(lambda s: math.sqrt(p.eval(t0 - s)) * k.eval(s), -eps, eps,
                         limit=500, epsabs=1e-14)[0]
    assert mollify_sqrt(p, eps, t0) == pytest.approx(ref, abs=1e-8)


def test_small_eps_difference_bound():
    p = make_weierstrass(1, 0.5, 1, 2, 1)
    t = np.linspace(0, 1, 2001)
    err = np.abs(mollify_sqrt(p, 1e-4, t) - np.sqrt(p.eval(t)))
    assert err.max() <= p.sqrt_seminorm * 1e-4 ** 0.5


def test_domain_errors():
    p = make_constant(1, 1)
    with pytest.raises(DomainError):
        mollify_sqrt(p, 0.1, 1.5)
    with pytest.raises(DomainError):
        mollify_sqrt(p, 0.1, -0.01)
    with pytest.raises(InvalidParameter):
        mollify_sqrt(p, 1.5, 0.5)


def test_constant_pair():
    t = np.linspace(0, 1, 11)
    pair = regularized_pair(make_constant(1, 1), 0.3)
    assert np.allclose(pair.lambda1(t), -1.0, atol=1e-14)
    assert np.allclose(pair.lambda2(t), 1.0, atol=1e-14)


def test_shifted_constant_determinant():
    pair = regularized_pair(make_constant(1, 1), 0.01, "shifted", alpha=0.5)
    assert np.allclose(pair.det(np.linspace(0, 1, 11)), 2.1, rtol=0, atol=1e-13)


def test_shifted_needs_alpha():
    with pytest.raises(InvalidParameter):
        regularized_pair(make_constant(1, 1), 0.1, "shifted")


@pytest.mark.parametrize("p", [
    make_lipschitz(1, 2, math.pi, 1),
    make_weierstrass(1, 0.5, 1, 2, 1),
    make_hoelder_degenerate(1.0, 2 * math.pi, 1),
], ids=["lipschitz", "weierstrass", "hoelder0"])
@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_pair_invariants(p, eps):
    t = np.linspace(0, 1, 1001)
    l1, l2, d1, d2 = regularized_pair(p, eps).evaluate(t)
    assert np.array_equal(l1, -l2)
    assert np.array_equal(d1, -d2)
    assert np.all(l2 >= math.sqrt(p.a0) - 1e-14)
    if p.a0 > 0:
        assert np.all(l2 - l1 >= 2 * math.sqrt(p.a0) - 1e-13)


def test_derivative_rate_constant_stable():
    p = make_weierstrass(1, 0.5, 1, 2, 1)
    t = np.linspace(0, 1, 4097)
    ks = []
    for eps in EPS_LADDER:
        d2 = regularized_pair(p, eps).evaluate(t)[3]
        ks.append(np.abs(d2).max() * eps ** 0.5)
    assert max(ks) / min(ks) < 1.5


def test_bounds_constant_exact():
    r = verify_mollification_bounds(make_constant(2, 1), [0.5, 0.1, 0.01], 200)
    assert r.exact and r.passed
    assert max(r.err1 + r.err2) <= 1e-14
    assert r.to_record()["exponent1"] == "exact"


def test_bounds_weierstrass():
    r = verify_mollification_bounds(make_weierstrass(1, 0.5, 1, 2, 1), EPS_LADDER, 4096)
    assert 0.35 <= r.exponent2 <= 0.65
    assert abs(r.exponent_deriv + 0.5) <= 0.15
    assert r.det_ratio_min >= 1.0
    assert r.passed


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_shifted_degenerate_det(alpha):
    p = make_hoelder_degenerate(alpha, 2 * math.pi, 1)
    r = verify_mollification_bounds(p, EPS_LADDER, 2048)
    assert r.det_ratio_min >= 1.0


def test_bounds_need_three_eps():
    with pytest.raises(InsufficientData):
        verify_mollification_bounds(make_constant(1, 1), [0.1, 0.01], 100)
