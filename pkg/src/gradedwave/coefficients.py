"""Propagation speeds a(t) for the four regularity regimes.

Each constructor returns an immutable :class:`CoefficientProfile` whose
``eval`` is a pure, vectorised function of ``t``.  The profile carries the
metadata the energy estimates depend on: the lower bound ``a0``, the Hoelder
order ``alpha`` (or the assumed smoothness ``l``), an upper bound ``a_max``
used by the step-size rule of the solver, and a certified upper bound on the
relevant regularity seminorm.

Case tags
---------
``Lip+``      Lipschitz, ``a >= a0 > 0``
``Hoelder+``  ``C^alpha`` with ``0 < alpha < 1``, ``a >= a0 > 0``
``Smooth0``   ``C^l`` with ``l >= 2``, ``a >= 0``
``Hoelder0``  ``C^alpha`` with ``0 < alpha < 2``, ``a >= 0``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidParameter

CASE_TAGS = ("Lip+", "Hoelder+", "Smooth0", "Hoelder0")

# lacunary series truncation: drop terms below this weight
WEIERSTRASS_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class CoefficientProfile:
    case_tag: str
    T: float
    a0: float
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    a_max: float
    seminorm: float
    alpha: float | None = None
    l: int | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.case_tag not in CASE_TAGS:
            raise InvalidParameter(f"unknown case tag {self.case_tag!r}")
        if not self.T > 0:
            raise InvalidParameter("T must be positive")

    def eval(self, t):
        """a(t); scalar in, float out, array in, array out."""
        t_arr = np.asarray(t, dtype=float)
        out = self.func(t_arr)
        if t_arr.ndim == 0:
            return float(out)
        return out

    def __call__(self, t):
        return self.eval(t)

    def eval_extended(self, t):
        """a extended constantly outside [0, T]."""
        return self.eval(np.clip(t, 0.0, self.T))

    @property
    def sqrt_seminorm(self) -> float:
        """Upper bound on the Hoelder seminorm of sqrt(a) of the same order.

        Only meaningful for strictly positive profiles, where
        |sqrt a(t) - sqrt a(s)| <= |a(t) - a(s)| / (2 sqrt a0).
        """
        if self.a0 <= 0:
            return math.inf
        return self.seminorm / (2.0 * math.sqrt(self.a0))

    def to_record(self) -> dict:
        """Flat key-value description, suitable for the config format."""
        rec = {"profile": self.kind, "T": self.T}
        rec.update(self.params)
        return rec


def _check_positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and value > 0 and math.isfinite(value)):
        raise InvalidParameter(f"{name} must be a positive finite number, got {value!r}")


def make_constant(c, T) -> CoefficientProfile:
    _check_positive("c", c)
    _check_positive("T", T)
    c = float(c)

    def func(t):
        return np.full(np.shape(t), c)

    return CoefficientProfile(
        case_tag="Lip+", T=float(T), a0=c, func=func, a_max=c, seminorm=0.0,
        kind="constant", params={"c": c},
    )


def make_lipschitz(a0, amplitude, freq, T) -> CoefficientProfile:
    """a(t) = a0 + amplitude * sin^2(freq * t), Lipschitz constant amplitude*freq."""
    _check_positive("a0", a0)
    _check_positive("freq", freq)
    _check_positive("T", T)
    if amplitude < 0:
        raise InvalidParameter("amplitude must be nonnegative")
    a0, amplitude, freq = float(a0), float(amplitude), float(freq)

    def func(t):
        return a0 + amplitude * np.sin(freq * t) ** 2

    return CoefficientProfile(
        case_tag="Lip+", T=float(T), a0=a0, func=func, a_max=a0 + amplitude,
        seminorm=amplitude * freq, kind="lipschitz",
        params={"a0": a0, "amplitude": amplitude, "freq": freq},
    )


def weierstrass_terms(alpha: float, base: int) -> int:
    """Index N of the last retained term: smallest N with base**(-alpha*N) < cutoff."""
    return int(math.floor(-math.log(WEIERSTRASS_CUTOFF) / (alpha * math.log(base)))) + 1


def _weierstrass_seminorm(alpha: float, base: int) -> float:
    # |a(t)-a(s)| <= amp * sum_k base^(-alpha k) min(1, base^k |t-s| / 2).  Writing
    # x_k = |t-s| base^k the quotient is sum_k h(x_k) with h(x) = x^-alpha min(1, x/2);
    # summing over all k in Z and maximising over one log-period bounds every truncation.
    lo = min(alpha, 1.0 - alpha)
    kmax = int(math.ceil(80.0 / (lo * math.log2(base)))) + 2
    # keep base^k inside double range; the dropped tail is below 1e-13
    kmax = min(kmax, int(300.0 / math.log10(base)))
    k = np.arange(-kmax, kmax + 1)
    x0 = base ** np.linspace(0.0, 1.0, 2049)
    x = x0[:, None] * float(base) ** k[None, :]
    h = np.where(x < 2.0, 0.5 * x ** (1.0 - alpha), x ** (-alpha))
    # 1% slack covers the discrete sampling of the log-period
    return float(h.sum(axis=1).max()) * 1.01


def make_weierstrass(a0, alpha, amp, base, T) -> CoefficientProfile:
    """a(t) = a0 + amp * sum_{k=0}^{N} base^(-alpha k) (1 + cos(base^k t)) / 2."""
    _check_positive("a0", a0)
    _check_positive("T", T)
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha!r}")
    if amp < 0:
        raise InvalidParameter("amp must be nonnegative")
    if int(base) != base or base < 2:
        raise InvalidParameter("base must be an integer >= 2")
    a0, alpha, amp, base = float(a0), float(alpha), float(amp), int(base)
    n_terms = weierstrass_terms(alpha, base)
    k = np.arange(n_terms + 1)
    weights = float(base) ** (-alpha * k)
    freqs = float(base) ** k
    total = float(weights.sum())

    if amp == 0:
        def func(t):
            return np.full(np.shape(t), a0)
        seminorm = 0.0
    else:
        def func(t):
            acc = np.zeros(np.shape(t))
            for w, f in zip(weights, freqs):
                acc += w * (1.0 + np.cos(f * t))
            return a0 + amp * 0.5 * acc
        seminorm = amp * _weierstrass_seminorm(alpha, base)

    return CoefficientProfile(
        case_tag="Hoelder+", T=float(T), a0=a0, func=func, a_max=a0 + amp * total,
        seminorm=seminorm, alpha=alpha, kind="weierstrass",
        params={"a0": a0, "alpha": alpha, "amp": amp, "base": base},
    )


def make_smooth_degenerate(omega, T, l=2) -> CoefficientProfile:
    """a(t) = sin^2(omega t); smooth, vanishing at multiples of pi/omega.

    ``l`` is the smoothness the energy estimate is allowed to use; the function
    itself is C^infinity.  The stored seminorm is the Lipschitz constant.
    """
    _check_positive("omega", omega)
    _check_positive("T", T)
    if int(l) != l or l < 2:
        raise InvalidParameter("l must be an integer >= 2")
    omega = float(omega)

    def func(t):
        return np.sin(omega * t) ** 2

    a_max = 1.0 if omega * T >= math.pi / 2 else math.sin(omega * T) ** 2
    return CoefficientProfile(
        case_tag="Smooth0", T=float(T), a0=0.0, func=func, a_max=a_max,
        seminorm=omega, l=int(l), kind="smooth_degenerate",
        params={"omega": omega, "l": int(l)},
    )


def make_hoelder_degenerate(alpha, omega, T) -> CoefficientProfile:
    """a(t) = |sin(omega t)|^alpha with 0 < alpha < 2; sqrt(a) is C^(alpha/2).

    For alpha <= 1 the stored seminorm bounds first difference quotients
    (omega^alpha).  For 1 < alpha < 2 it bounds second differences
    |a(t+d) - 2a(t) + a(t-d)| / d^alpha, which is the meaningful C^alpha
    quantity once alpha exceeds one (4 alpha omega^alpha).
    """
    _check_positive("omega", omega)
    _check_positive("T", T)
    if not 0 < alpha < 2:
        raise InvalidParameter(f"alpha must lie in (0, 2), got {alpha!r}")
    alpha, omega = float(alpha), float(omega)

    def func(t):
        return np.abs(np.sin(omega * t)) ** alpha

    seminorm = omega ** alpha if alpha <= 1 else 4.0 * alpha * omega ** alpha
    a_max = 1.0 if omega * T >= math.pi / 2 else abs(math.sin(omega * T)) ** alpha
    return CoefficientProfile(
        case_tag="Hoelder0", T=float(T), a0=0.0, func=func, a_max=a_max,
        seminorm=seminorm, alpha=alpha, kind="hoelder_degenerate",
        params={"alpha": alpha, "omega": omega},
    )


def from_callable(func, T, case_tag="Lip+", a0=0.0, alpha=None, l=None,
                  seminorm=math.inf, samples=1 << 14) -> CoefficientProfile:
    """Wrap a vectorised numpy function; a_max is taken from a dense sample."""
    _check_positive("T", T)
    grid = np.linspace(0.0, T, samples + 1)
    vals = np.asarray(func(grid), dtype=float)
    if np.any(vals < 0):
        raise InvalidParameter("a(t) must be nonnegative")
    return CoefficientProfile(
        case_tag=case_tag, T=float(T), a0=float(a0),
        func=lambda t: np.asarray(func(t), dtype=float),
        a_max=float(vals.max()), seminorm=seminorm, alpha=alpha, l=l,
    )


def estimate_hoelder_seminorm(p: CoefficientProfile, alpha: float, grid_size: int) -> float:
    """Lower bound on the alpha-seminorm from dyadic lags on a uniform grid.

    The grid has ``grid_size`` intervals; pairs are compared at lags of
    1, 2, 4, ... grid steps up to T/8 (at least one lag), so nested dyadic
    grids give nondecreasing estimates.  For alpha > 1 second differences are
    used, see :func:`make_hoelder_degenerate`.
    """
    if grid_size < 2:
        raise InvalidParameter("grid_size must be >= 2")
    n = int(grid_size)
    t = np.linspace(0.0, p.T, n + 1)
    a = np.asarray(p.eval(t), dtype=float)
    h = p.T / n
    max_lag = max(1, n // 8)
    best = 0.0
    lag = 1
    while lag <= max_lag:
        d = lag * h
        if alpha <= 1:
            diff = np.abs(a[lag:] - a[:-lag])
        else:
            if 2 * lag > n:
                break
            diff = np.abs(a[2 * lag:] - 2.0 * a[lag:-lag] + a[:-2 * lag])
        if diff.size:
            best = max(best, float(diff.max()) / d ** alpha)
        lag *= 2
    return best


PROFILE_MAKERS = {
    "constant": (make_constant, ("c", "T")),
    "lipschitz": (make_lipschitz, ("a0", "amplitude", "freq", "T")),
    "weierstrass": (make_weierstrass, ("a0", "alpha", "amp", "base", "T")),
    "smooth_degenerate": (make_smooth_degenerate, ("omega", "T", "l")),
    "hoelder_degenerate": (make_hoelder_degenerate, ("alpha", "omega", "T")),
}


def profile_from_record(record: dict) -> CoefficientProfile:
    """Inverse of :meth:`CoefficientProfile.to_record`."""
    kind = record.get("profile")
    if kind not in PROFILE_MAKERS:
        raise InvalidParameter(f"unknown profile kind {kind!r}; expected one of {sorted(PROFILE_MAKERS)}")
    maker, names = PROFILE_MAKERS[kind]
    kwargs = {}
    for name in names:
        if name not in record:
            if name == "l":
                continue
            raise InvalidParameter(f"profile {kind!r} needs parameter {name!r}")
        value = record[name]
        kwargs[name] = int(value) if name in ("base", "l") else float(value)
    return maker(**kwargs)
