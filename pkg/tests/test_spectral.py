import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradedwave import checks
from gradedwave.coefficients import make_constant
from gradedwave.errors import InvalidParameter
from gradedwave.ode_energy import solve_final
from gradedwave.spectral import (
    HORIZON_EXCEEDED, Gevrey, Sobolev, abstract_grid, compare_refinement, concatenate, evolve,
    field_table, gevrey_char_check, gevrey_norm, heisenberg_grid, heisenberg_preset,
    log_gevrey_norm, rate_ladder, sobolev_energy, sobolev_norm, synthesize_data,
    wellposedness_report,
)


def one_mode(u=1.0, du=0.0, beta=1.0, weight=1.0):
    f = abstract_grid([beta], [weight])
    return f.with_amplitudes([u], [du])


def test_heisenberg_beta_values():
    f = heisenberg_grid(1, [1.0], 0)
    assert f.beta[0] ** 2 == pytest.approx(1.0, rel=1e-15)
    f = heisenberg_grid(1, [2.0], 3)
    j = int(np.flatnonzero(f.m == 3)[0])
    assert f.beta[j] ** 2 == pytest.approx(14.0, rel=1e-15)
    assert f.label(j) == (3, 2.0)


def test_heisenberg_multiplicity():
    f = heisenberg_grid(2, [1.0], 1)
    assert f.weight[1] / f.weight[0] == pytest.approx(2.0, rel=1e-15)


def test_heisenberg_weights_fold_both_signs():
    # lone cell spans [c / sqrt2, c sqrt2], so the weight is 2 c (c sqrt2 - c / sqrt2)
    f = heisenberg_grid(1, [0.5], 0)
    assert f.weight[0] == pytest.approx(2 * 0.5 * 0.5 * (math.sqrt(2) - 1 / math.sqrt(2)), rel=1e-14)


def test_heisenberg_order_four():
    f2 = heisenberg_grid(1, [0.5, 1.0], 4, nu=2)
    f4 = heisenberg_grid(1, [0.5, 1.0], 4, nu=4)
    assert np.allclose(f4.beta, f2.beta ** 2, rtol=1e-14)


def test_preset_refinement_sizes():
    assert len(heisenberg_preset()) == 33 * 32
    fine = heisenberg_preset(refine=1)
    assert len(fine) == 65 * 64
    assert fine.beta.max() > heisenberg_preset().beta.max()


@pytest.mark.parametrize("kwargs", [dict(n=0), dict(m_max=-1), dict(lambda_grid=[]),
                                    dict(lambda_grid=[1.0, -1.0]), dict(lambda_grid=[1.0, 1.0])])
def test_heisenberg_rejects(kwargs):
    args = dict(n=1, lambda_grid=[1.0], m_max=2) | kwargs
    with pytest.raises(InvalidParameter):
        heisenberg_grid(args["n"], args["lambda_grid"], args["m_max"])


@pytest.mark.parametrize("size", [1, 2, 100])
def test_abstract_grid_identity(size):
    betas = np.linspace(1, 50, size)
    weights = np.linspace(0.5, 2, size)
    f = abstract_grid(betas, weights)
    assert np.array_equal(f.beta, betas) and np.array_equal(f.weight, weights)
    assert len(f) == size and np.all(f.u_hat == 0)


def test_abstract_grid_mismatch():
    with pytest.raises(InvalidParameter):
        abstract_grid([1, 2], [1])


def test_gevrey_synthesis_single_mode():
    f = synthesize_data(abstract_grid([1.0], [1.0]), Gevrey(1, 1), 0)
    assert abs(f.u_hat[0]) == pytest.approx(math.exp(-1), rel=1e-15)
    assert abs(f.du_hat[0]) == pytest.approx(math.exp(-1), rel=1e-15)


def test_sobolev_synthesis_decay():
    f = synthesize_data(abstract_grid([2.0, 4.0], [1.0, 1.0]), Sobolev(1, 1), 0)
    assert np.allclose(np.abs(f.du_hat), [2.0 ** -2, 4.0 ** -2], rtol=1e-14)
    assert np.allclose(np.abs(f.u_hat), np.abs(f.du_hat) / f.beta, rtol=1e-14)


def test_synthesis_rejects_bad_class():
    f = abstract_grid([1.0], [1.0])
    with pytest.raises(InvalidParameter):
        synthesize_data(f, Gevrey(1, 0), 0)
    with pytest.raises(InvalidParameter):
        synthesize_data(f, "analytic", 0)


def test_sobolev_data_finite_in_gevrey_norm():
    f = synthesize_data(heisenberg_preset(cells=8, m_max=8), Sobolev(0.5), 3)
    assert math.isfinite(gevrey_norm(f, 1.5, 3.0))


def test_seed_reproducibility():
    f = heisenberg_preset(cells=8, m_max=8)
    a = synthesize_data(f, Gevrey(1.5, 1.0), 42)
    b = synthesize_data(f, Gevrey(1.5, 1.0), 42)
    c = synthesize_data(f, Gevrey(1.5, 1.0), 43)
    assert np.array_equal(a.u_hat, b.u_hat) and np.array_equal(a.du_hat, b.du_hat)
    assert not np.array_equal(a.u_hat, c.u_hat)
    assert gevrey_norm(a, 1.5, 0.5) == gevrey_norm(c, 1.5, 0.5)
    assert sobolev_norm(a, 1) == sobolev_norm(c, 1)


def test_evolve_conserves_for_unit_coefficient():
    f = synthesize_data(heisenberg_preset(cells=8, m_max=8), Gevrey(1, 1), 0)
    g = evolve(f, make_constant(1, 1))
    before = f.beta ** 2 * np.abs(f.u_hat) ** 2 + np.abs(f.du_hat) ** 2
    after = g.beta ** 2 * np.abs(g.u_hat) ** 2 + np.abs(g.du_hat) ** 2
    assert np.allclose(after, before, rtol=1e-6, atol=0)


def test_evolve_single_mode_matches_solver():
    p = checks.weierstrass_preset(0.5)
    f = one_mode(0.3 + 0.1j, -2.0, beta=17.0)
    g = evolve(f, p)
    v, dv, _ = solve_final(p, 17.0, 0.3 + 0.1j, -2.0)
    assert g.u_hat[0] == v and g.du_hat[0] == dv


def test_evolve_commutes_with_partition():
    p = checks.lipschitz_preset()
    f = synthesize_data(abstract_grid(np.geomspace(1, 300, 100), np.ones(100)), Gevrey(1.5, 1.0), 5)
    whole = evolve(f, p, threads=4)
    halves = concatenate([evolve(f.take(np.arange(50)), p), evolve(f.take(np.arange(50, 100)), p)])
    assert np.array_equal(whole.u_hat, halves.u_hat)
    assert np.array_equal(whole.du_hat, halves.du_hat)


def test_evolve_error_names_mode():
    f = heisenberg_grid(1, [1.0], 0).with_amplitudes([1.0], [0.0])
    bad = f.with_amplitudes(f.u_hat, f.du_hat, beta=np.array([-1.0]))
    with pytest.raises(InvalidParameter, match=r"mode \(0, 1.0\)"):
        evolve(bad, make_constant(1, 1))


def test_sobolev_norm_examples():
    assert sobolev_norm(one_mode(), 0) == 1
    assert sobolev_norm(one_mode(), 1) == pytest.approx(math.sqrt(2), rel=1e-15)


def test_gevrey_norm_examples():
    assert gevrey_norm(one_mode(math.exp(-1)), 1, 1) == pytest.approx(1.0, rel=1e-15)
    f = synthesize_data(heisenberg_preset(cells=8, m_max=8), Gevrey(1.5, 1), 2)
    assert gevrey_norm(f, 1.5, 0.0) == pytest.approx(sobolev_norm(f, 0), rel=1e-13)


def test_gevrey_norm_overflow_flag():
    f = one_mode(1.0, beta=1e6)
    assert gevrey_norm(f, 1, 1.0) == math.inf
    assert math.isfinite(log_gevrey_norm(f, 1, 1.0))
    with pytest.raises(InvalidParameter):
        gevrey_norm(f, 0.5, 1.0)


def test_plancherel_and_additivity():
    f = synthesize_data(heisenberg_preset(cells=8, m_max=8), Sobolev(0.5), 9)
    assert sobolev_norm(f, 0) ** 2 == pytest.approx(math.fsum(f.weight * np.abs(f.u_hat) ** 2), rel=1e-14)
    n = len(f)
    left, right = f.take(np.arange(n // 3)), f.take(np.arange(n // 3, n))
    for norm in (lambda g: sobolev_norm(g, 1.0), lambda g: gevrey_norm(g, 2.0, 1.0)):
        assert norm(f) ** 2 == pytest.approx(norm(left) ** 2 + norm(right) ** 2, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_permutation_invariance(seed):
    f = synthesize_data(heisenberg_preset(cells=6, m_max=6), Gevrey(1.5, 1.0), seed)
    perm = np.random.default_rng(seed).permutation(len(f))
    g = f.take(perm)
    assert sobolev_norm(g, 1.0) == sobolev_norm(f, 1.0)
    assert log_gevrey_norm(g, 1.5, 0.5) == log_gevrey_norm(f, 1.5, 0.5)
    assert sobolev_energy(g, 0.5) == sobolev_energy(f, 0.5)
    assert gevrey_char_check(g, 1.5, 4).B == gevrey_char_check(f, 1.5, 4).B


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 3), st.floats(0, 3))
def test_monotone_in_index(x, y):
    lo, hi = min(x, y), max(x, y)
    f = synthesize_data(heisenberg_preset(cells=6, m_max=6), Gevrey(1.5, 4.0), 1)
    f = f.take(np.flatnonzero(f.beta >= 1))
    assert sobolev_norm(f, lo) <= sobolev_norm(f, hi)
    assert gevrey_norm(f, 1.5, lo) <= gevrey_norm(f, 1.5, hi)


def test_gevrey_norm_stable_under_refinement():
    norms = [gevrey_norm(synthesize_data(heisenberg_preset(refine=r), Gevrey(1.0, 2.0), 0), 1.0, 1.0)
             for r in (0, 1)]
    assert norms[1] / norms[0] - 1 <= 0.05


def test_char_single_mode():
    r = gevrey_char_check(one_mode(0.7), 1.0, 5)
    assert np.allclose(r.d, 0.7, rtol=1e-15)
    assert r.bounded
    assert all(x <= 1 + 1e-12 for x in r.ratios)


@pytest.mark.parametrize("A", [1.0, 2.0])
def test_char_gevrey_data_consistent(A):
    f = synthesize_data(heisenberg_preset(), Gevrey(1.0, A), 0)
    Bs = [gevrey_char_check(f, 1.0, k).B for k in (4, 6, 8)]
    assert max(Bs) / min(Bs) <= 1.2
    assert all(gevrey_char_check(f, 1.0, k).bounded for k in (4, 6, 8))


def test_char_flags_polynomial_tail():
    betas = np.geomspace(1, 1e8, 400)
    f = abstract_grid(betas, (betas[1] / betas[0] - 1) * betas)
    r = gevrey_char_check(synthesize_data(f, Sobolev(0, 3), 0), 1.0, 8)
    assert not r.bounded
    r = gevrey_char_check(synthesize_data(f, Gevrey(1, 1), 0), 1.0, 8)
    assert r.bounded


def test_char_needs_three_orders():
    with pytest.raises(InvalidParameter):
        gevrey_char_check(one_mode(), 1.0, 2)


def test_rate_ladder():
    lad = rate_ladder(10.0)
    assert lad[-1] == 10.0 and lad[0] == pytest.approx(2 ** 0.25)
    assert all(b > a for a, b in zip(lad, lad[1:]))
    assert rate_ladder(0.5) == []


@pytest.mark.parametrize("s", [0, 1])
def test_report_unit_coefficient(s):
    f = synthesize_data(heisenberg_preset(cells=8, m_max=8), Sobolev(s), 0)
    r = wellposedness_report(f, make_constant(1, 1), s, "Lip+")
    assert r.c_meas == pytest.approx(1.0, abs=1e-4)


def test_report_lipschitz_bound():
    f = synthesize_data(heisenberg_preset(cells=16, m_max=16), Sobolev(0), 0)
    r = wellposedness_report(f, checks.lipschitz_preset(), 0, "Lip+", {"threads": 4})
    assert r.c_meas <= 3 * 1.1
    assert r.finite


def test_report_horizon_exceeded():
    f = synthesize_data(heisenberg_preset(cells=8, m_max=8), Gevrey(1.5, 0.02), 0)
    r = wellposedness_report(f, checks.weierstrass_preset(0.5), 1.5, "Hoelder+")
    assert r.horizon_exceeded and r.status == HORIZON_EXCEEDED
    assert r.to_record()["status"] == HORIZON_EXCEEDED


def test_report_needs_index():
    f = synthesize_data(heisenberg_preset(cells=4, m_max=4), Sobolev(0), 0)
    with pytest.raises(InvalidParameter):
        wellposedness_report(f, checks.weierstrass_preset(0.5), 1.5, "Hoelder+")


def test_report_weierstrass_refinement():
    p = checks.weierstrass_preset(0.5)
    reports = []
    for refine in (0, 1):
        f = synthesize_data(heisenberg_preset(refine=refine), Gevrey(1.5, 6.0), 0)
        reports.append(wellposedness_report(f, p, 1.5, "Hoelder+", {"threads": 4}))
    assert all(r.B > 0 and r.finite for r in reports)
    cmp = compare_refinement(*reports)
    assert cmp.stable and not cmp.flagged


def test_field_table_columns():
    f = synthesize_data(heisenberg_grid(1, [1.0], 1), Gevrey(1, 1), 0)
    header, rows = field_table(f)
    assert header[:4] == ["m", "lambda", "beta", "weight"]
    assert len(rows) == 2 and rows[1][0] == 1
    header, rows = field_table(synthesize_data(abstract_grid([2.0], [1.0]), Gevrey(1, 1), 0))
    assert rows[0][:2] == ["", ""]


def test_char_zero_field():
    r = gevrey_char_check(abstract_grid([1.0, 2.0], [1.0, 1.0]), 1.0, 4)
    assert r.bounded and r.B == 0
