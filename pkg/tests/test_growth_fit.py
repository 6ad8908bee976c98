import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradedwave import checks
from gradedwave.coefficients import make_constant
from gradedwave.errors import InvalidParameter
from gradedwave.growth_fit import (
    SweepRecord, beta_sweep, fit_growth_exponent, geometric_betas, gevrey_threshold,
    theoretical_exponent, verdict,
)

BETAS = geometric_betas(4, 14)


def synthetic(fn, betas=BETAS):
    return [SweepRecord(b, fn(b)) for b in betas]


def test_fit_recovers_constructed_exponent():
    fit = fit_growth_exponent(synthetic(lambda b: math.exp(3 * b ** 0.5)))
    assert fit.exponent == pytest.approx(0.5, abs=0.01)
    assert not fit.bounded


def test_constant_ratio_is_bounded():
    fit = fit_growth_exponent(synthetic(lambda b: 7.0))
    # 7 > 1 + 1e-3 counts as growing, but log log 7 is flat
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)


def test_flat_records_flagged_bounded():
    fit = fit_growth_exponent(synthetic(lambda b: 1.0 + 1e-4))
    assert fit.bounded and fit.exponent == 0


def test_too_few_growing_records():
    recs = synthetic(lambda b: 1.0) + [SweepRecord(1e6, 10.0)]
    assert fit_growth_exponent(recs).bounded


SHORT = geometric_betas(4, 10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 0.8), st.floats(1.5, 2.5))
def test_fit_invariant_under_scaling(p, factor):
    # the common factor acts on g = log e_ratio, so it only moves the intercept of log g
    base = synthetic(lambda b: math.exp(b ** p), SHORT)
    scaled = synthetic(lambda b: math.exp(factor * b ** p), SHORT)
    assert fit_growth_exponent(scaled).exponent == pytest.approx(fit_growth_exponent(base).exponent, abs=1e-9)


def test_order_of_records_irrelevant():
    recs = synthetic(lambda b: math.exp(b ** 0.3))
    assert fit_growth_exponent(recs[::-1]).exponent == fit_growth_exponent(recs).exponent


@pytest.mark.parametrize("args,expected", [
    (("Lip+",), 0.0),
    (("Hoelder+", 0.5), 0.5),
    (("Smooth0", None, 2), 0.5),
    (("Smooth0", None, 4), 1 / 3),
    (("Hoelder0", 1.0), 0.5),
    (("Hoelder0", 1.5), 0.4),
])
def test_theoretical_exponents(args, expected):
    assert theoretical_exponent(*args) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("args", [("Hoelder+",), ("Hoelder+", 1.0), ("Smooth0", None, 1),
                                  ("Hoelder0", 2.0), ("Euclid",)])
def test_theoretical_exponent_rejects(args):
    with pytest.raises(InvalidParameter):
        theoretical_exponent(*args)


def test_gevrey_threshold():
    assert gevrey_threshold("Lip+") == math.inf
    assert gevrey_threshold("Hoelder+", 0.5) == pytest.approx(2.0)


def test_adversarial_verdict_fails():
    v = verdict(synthetic(lambda b: math.exp(b ** 0.9), SHORT), "Hoelder+", alpha=0.5)
    assert v.fitted_exponent == pytest.approx(0.9, abs=0.01)
    assert not v.passed
    assert v.to_record()["pass"] is False


def test_sweep_constant_unit_ratio():
    recs = beta_sweep(make_constant(1, 1), [1, 10, 100, 1000])
    assert [r.beta for r in recs] == [1, 10, 100, 1000]
    assert all(abs(r.e_ratio - 1) <= 1e-6 for r in recs)


def test_sweep_errors():
    p = make_constant(1, 1)
    with pytest.raises(InvalidParameter):
        beta_sweep(p, [])
    with pytest.raises(InvalidParameter):
        beta_sweep(p, [1, -2])
    with pytest.raises(InvalidParameter):
        beta_sweep(p, [1], v0=1)
    with pytest.raises(InvalidParameter):
        beta_sweep(p, [1], v0=0, v1=0)


def test_sweep_fixed_data_below_worst_case():
    p = checks.lipschitz_preset()
    worst = beta_sweep(p, [16, 256])
    single = beta_sweep(p, [16, 256], v0=1, v1=0)
    assert all(s.e_ratio <= w.e_ratio * (1 + 1e-12) for s, w in zip(single, worst))


def test_threads_keep_order_and_values():
    p = checks.weierstrass_preset(0.5)
    betas = [2.0 ** k for k in (9, 4, 7, 5)]
    a = beta_sweep(p, betas, threads=1)
    b = beta_sweep(p, betas, threads=4)
    assert [r.beta for r in b] == sorted(betas)
    assert [r.e_ratio for r in a] == [r.e_ratio for r in b]


def test_lipschitz_spread():
    recs = beta_sweep(checks.lipschitz_preset(), BETAS, threads=4)
    ratios = [r.e_ratio for r in recs]
    assert max(ratios) / min(ratios) <= 1.5
    assert verdict(recs, "Lip+", tolerance=0.05).passed


def test_hoelder0_grows_over_top_decade():
    # resonances make single steps dip; the trend over the decade must rise
    betas = [2.0 ** (k / 2) for k in range(21, 29)]
    ratios = [r.e_ratio for r in beta_sweep(checks.hoelder0_preset(1.0), betas, threads=4)]
    slope = np.polyfit(np.log(betas), np.log(ratios), 1)[0]
    assert slope > 0.2
    assert ratios[-1] > ratios[0]


def test_k_min_attached():
    recs = beta_sweep(checks.weierstrass_preset(0.5), [64.0], k_min_s=1.8)
    assert recs[0].k_min is not None and recs[0].k_min > 0


PRESETS = [
    (checks.lipschitz_preset, ("Lip+",)),
    (lambda: checks.weierstrass_preset(0.5), ("Hoelder+", 0.5)),
    (lambda: checks.smooth_preset(2), ("Smooth0", None, 2)),
    (lambda: checks.hoelder0_preset(1.0), ("Hoelder0", 1.0)),
]


@pytest.mark.parametrize("make,tag", PRESETS, ids=["lip", "weierstrass", "smooth", "hoelder0"])
def test_grid_enlargement_sanity(make, tag):
    p = make()
    full = beta_sweep(p, BETAS, threads=4)
    short = [r for r in full if r.beta <= 2.0 ** 12]
    small, large = fit_growth_exponent(short), fit_growth_exponent(full)
    # 1e-3 floor: bounded sweeps fit slopes of order 1e-4 with stderr below that
    slack = max(2 * max(large.stderr, small.stderr), 1e-3)
    assert large.exponent >= small.exponent - slack
    assert verdict(full, *tag).passed
