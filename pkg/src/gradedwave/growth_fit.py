"""beta-sweeps of the energy amplification and growth-exponent fits.

For each beta the sweep records sup_t E(t)/E(0) of the base energy
E = beta^2 |v|^2 + |v'|^2.  Without explicit initial data the ratio is the
worst case over all data, sup_t ||Phi(t)||^2 for the propagator Phi; a single
data pair can sit near a node of the solution for some beta and hide growth.
Writing the amplification as C exp(K T beta^p), the exponent p is estimated
as the slope of log(log(e_ratio)) against log(beta) over the largest betas,
and compared with the bound for the coefficient's regularity class:

    Lip+      0
    Hoelder+  1 - alpha
    Smooth0   2 / (2 + l)
    Hoelder0  1 / (1 + alpha)
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .coefficients import CoefficientProfile
from .errors import InvalidParameter
from .mollify import regularized_pair
from .ode_energy import amplification_sup, minimal_decay_rate, solve_final

BOUNDED_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SweepRecord:
    beta: float
    e_ratio: float
    k_min: float | None = None
    wall_time: float = 0.0


@dataclass(frozen=True)
class GrowthFit:
    exponent: float
    bounded: bool
    stderr: float
    n_used: int


@dataclass(frozen=True)
class GrowthVerdict:
    fitted_exponent: float
    theoretical_bound: float
    tolerance: float
    passed: bool
    case_tag: str
    bounded: bool
    stderr: float
    alpha: float | None = None
    l: int | None = None
    s: float | None = None

    def to_record(self) -> dict:
        return {
            "case_tag": self.case_tag, "fitted_exponent": self.fitted_exponent,
            "theoretical_bound": self.theoretical_bound, "tolerance": self.tolerance,
            "pass": self.passed, "bounded": self.bounded, "stderr": self.stderr,
            "alpha": "" if self.alpha is None else self.alpha,
            "l": "" if self.l is None else self.l,
        }


def geometric_betas(lo_exp=4, hi_exp=14, base=2.0):
    return [base ** k for k in range(lo_exp, hi_exp + 1)]


def _one(p, beta, v0, v1, steps_per_period, k_min_s):
    start = time.perf_counter()
    if v0 is None:
        ratio = amplification_sup(p, beta, steps_per_period)
    else:
        _, _, sup = solve_final(p, beta, v0, v1, steps_per_period)
        ratio = sup / (beta * beta * abs(v0) ** 2 + abs(v1) ** 2)
    k_min = None
    if k_min_s is not None:
        pair = regularized_pair(p, min(1.0, 1.0 / beta))
        k_min = minimal_decay_rate(p, pair, beta, k_min_s)
    return SweepRecord(float(beta), ratio, k_min, time.perf_counter() - start)


def beta_sweep(p: CoefficientProfile, betas, v0=None, v1=None, steps_per_period=64,
               threads=1, k_min_s=None) -> list[SweepRecord]:
    """One record per beta, sorted by beta whatever the completion order.

    ``v0 = v1 = None`` measures the worst case over all initial data; give
    both to follow one solution instead.

    With ``k_min_s`` set, each record also carries the minimal decay rate for
    the plain pair at eps = 1/beta and that Gevrey order.
    """
    betas = sorted(float(b) for b in betas)
    if not betas:
        raise InvalidParameter("beta grid is empty")
    if any(b <= 0 for b in betas):
        raise InvalidParameter("every beta must be positive")
    if (v0 is None) != (v1 is None):
        raise InvalidParameter("give both v0 and v1, or neither")
    if v0 is not None and v0 == 0 and v1 == 0:
        raise InvalidParameter("initial data must be nonzero")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_one, p, b, v0, v1, steps_per_period, k_min_s) for b in betas]
            return [f.result() for f in futures]
    return [_one(p, b, v0, v1, steps_per_period, k_min_s) for b in betas]


def fit_growth_exponent(records) -> GrowthFit:
    """Slope of log(log e_ratio) vs log beta over the top half of growing records.

    Records with e_ratio <= 1 + 1e-3 do not count as growth; with fewer than
    five growing records the energy is reported bounded with exponent 0.
    """
    recs = sorted(records, key=lambda r: r.beta)
    growing = [r for r in recs if r.e_ratio > 1.0 + BOUNDED_THRESHOLD]
    if len(growing) < 5:
        return GrowthFit(0.0, True, 0.0, len(growing))
    top = growing[len(growing) // 2:]
    x = np.log([r.beta for r in top])
    y = np.log(np.log([r.e_ratio for r in top]))
    fit = stats.linregress(x, y)
    stderr = float(fit.stderr) if len(top) > 2 else 0.0
    return GrowthFit(float(fit.slope), False, stderr, len(top))


def theoretical_exponent(case_tag, alpha=None, l=None) -> float:
    if case_tag == "Lip+":
        return 0.0
    if case_tag == "Hoelder+":
        if alpha is None or not 0 < alpha < 1:
            raise InvalidParameter("Hoelder+ needs alpha in (0, 1)")
        return 1.0 - alpha
    if case_tag == "Smooth0":
        if l is None or l < 2:
            raise InvalidParameter("Smooth0 needs l >= 2")
        return 2.0 / (2.0 + l)
    if case_tag == "Hoelder0":
        if alpha is None or not 0 < alpha < 2:
            raise InvalidParameter("Hoelder0 needs alpha in (0, 2)")
        return 1.0 / (1.0 + alpha)
    raise InvalidParameter(f"unknown case tag {case_tag!r}")


def gevrey_threshold(case_tag, alpha=None, l=None) -> float:
    """Supremum of the admissible Gevrey orders s (infinite for Lip+)."""
    bound = theoretical_exponent(case_tag, alpha, l)
    return math.inf if bound == 0 else 1.0 / bound


def verdict(records, case_tag, alpha=None, l=None, tolerance=0.1) -> GrowthVerdict:
    fit = fit_growth_exponent(records)
    bound = theoretical_exponent(case_tag, alpha, l)
    return GrowthVerdict(
        fitted_exponent=fit.exponent, theoretical_bound=bound, tolerance=tolerance,
        passed=fit.exponent <= bound + tolerance, case_tag=case_tag,
        bounded=fit.bounded, stderr=fit.stderr, alpha=alpha, l=l,
    )
