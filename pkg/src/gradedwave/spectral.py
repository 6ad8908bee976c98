"""Decoupled mode model of the wave equation u_tt + a(t) R u = 0.

A diagonal spectral model replaces the group Fourier transform: the Rockland
operator R acts on mode j as multiplication by beta_j^2, and the Plancherel
measure becomes a positive weight per mode.  Every norm below is a weighted
sum over modes,

    Sobolev   ||f||_{H^s}^2    = sum_j w_j (1 + beta_j^2)^(2s/nu) |f_j|^2
    Gevrey    ||f||_{G^s_A}^2  = sum_j w_j exp(2 A beta_j^(1/s)) |f_j|^2

and the evolution is one scalar ODE v'' + beta_j^2 a(t) v = 0 per mode.

Heisenberg preset: on H^n the sub-Laplacian has eigenvalues (2m + n)|lambda|
with multiplicity binom(m + n - 1, n - 1) and Plancherel density |lambda|^n.
A geometric lambda grid turns each (m, lambda-cell) pair into one mode of
weight 2 |lambda|^n dlambda binom(m + n - 1, n - 1); the factor 2 folds the
two signs of lambda.  For a Rockland operator of homogeneous degree nu the
eigenvalue of R is ((2m + n)|lambda|)^(nu/2).

Sums use math.fsum, so norms do not depend on the order of the modes.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coefficients import CoefficientProfile
from .errors import InvalidParameter
from .mollify import regularized_pair
from .ode_energy import minimal_decay_rate, solve_final

BETA0 = 1.0
LADDER_RATIO = 2.0 ** 0.25
HORIZON_EXCEEDED = "horizon exceeded: shrink T or A too small"


@dataclass(frozen=True)
class Sobolev:
    """Data with |du_j| = beta_j^(-2(s + delta)/nu) and |u_j| = |du_j| / beta_j."""

    s: float
    delta: float = 3.0


@dataclass(frozen=True)
class Gevrey:
    """Data with |u_j| = |du_j| = exp(-A beta_j^(1/s))."""

    s: float
    A: float


@dataclass(frozen=True)
class SpectralMode:
    beta: float
    weight: float
    u_hat: complex
    du_hat: complex
    m: int | None = None
    lam: float | None = None

    @property
    def label(self):
        return None if self.m is None else (self.m, self.lam)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Modes stored column-wise; ``modes`` yields them one at a time."""

    beta: np.ndarray
    weight: np.ndarray
    u_hat: np.ndarray
    du_hat: np.ndarray
    nu: float = 2.0
    T: float = 1.0
    m: np.ndarray | None = None
    lam: np.ndarray | None = None
    data: Sobolev | Gevrey | None = None

    def __len__(self):
        return self.beta.size

    @property
    def modes(self):
        for j in range(len(self)):
            yield self.mode(j)

    def mode(self, j) -> SpectralMode:
        m = None if self.m is None else int(self.m[j])
        lam = None if self.lam is None else float(self.lam[j])
        return SpectralMode(float(self.beta[j]), float(self.weight[j]),
                            complex(self.u_hat[j]), complex(self.du_hat[j]), m, lam)

    def label(self, j):
        return j if self.m is None else (int(self.m[j]), float(self.lam[j]))

    def take(self, idx) -> SpectralField:
        """Sub-field (or reordering) selected by an index array."""
        idx = np.asarray(idx)
        pick = lambda x: None if x is None else x[idx]
        return replace(self, beta=self.beta[idx], weight=self.weight[idx],
                       u_hat=self.u_hat[idx], du_hat=self.du_hat[idx],
                       m=pick(self.m), lam=pick(self.lam))

    def with_amplitudes(self, u_hat, du_hat, **changes) -> SpectralField:
        return replace(self, u_hat=np.asarray(u_hat, dtype=complex),
                       du_hat=np.asarray(du_hat, dtype=complex), **changes)


def concatenate(fields) -> SpectralField:
    fields = list(fields)
    first = fields[0]
    cat = lambda name: np.concatenate([getattr(f, name) for f in fields])
    labelled = all(f.m is not None for f in fields)
    return replace(first, beta=cat("beta"), weight=cat("weight"), u_hat=cat("u_hat"),
                   du_hat=cat("du_hat"), m=cat("m") if labelled else None,
                   lam=cat("lam") if labelled else None)


def geometric_cells(lo, ratio, count):
    """Cell centres lo * ratio**j, j = 0..count-1."""
    if not lo > 0 or not ratio > 1 or count < 1:
        raise InvalidParameter("need lo > 0, ratio > 1 and at least one cell")
    return lo * float(ratio) ** np.arange(count)


def _cell_widths(centres):
    # edges at geometric midpoints; the end cells mirror their inner neighbour.
    # A lone cell spans [c / sqrt 2, c sqrt 2].
    c = np.asarray(centres, dtype=float)
    if c.size == 1:
        return c * (math.sqrt(2.0) - 1.0 / math.sqrt(2.0))
    mid = np.sqrt(c[1:] * c[:-1])
    edges = np.concatenate([[c[0] ** 2 / mid[0]], mid, [c[-1] ** 2 / mid[-1]]])
    return np.diff(edges)


def heisenberg_grid(n, lambda_grid, m_max, nu=2.0, T=1.0) -> SpectralField:
    if int(n) != n or n < 1:
        raise InvalidParameter("n must be a positive integer")
    if int(m_max) != m_max or m_max < 0:
        raise InvalidParameter("m_max must be a nonnegative integer")
    lam = np.sort(np.asarray(lambda_grid, dtype=float))
    if lam.size == 0 or np.any(lam <= 0):
        raise InvalidParameter("lambda grid must be nonempty and positive")
    if np.any(np.diff(lam) == 0):
        raise InvalidParameter("lambda cells must be distinct")
    n = int(n)
    widths = _cell_widths(lam)
    mm, jj = np.meshgrid(np.arange(int(m_max) + 1), np.arange(lam.size), indexing="ij")
    mm, jj = mm.ravel(), jj.ravel()
    mult = np.array([math.comb(int(k) + n - 1, n - 1) for k in mm], dtype=float)
    beta = ((2 * mm + n) * lam[jj]) ** (nu / 4.0)
    weight = 2.0 * lam[jj] ** n * widths[jj] * mult
    zeros = np.zeros(beta.size, dtype=complex)
    return SpectralField(beta, weight, zeros, zeros.copy(), float(nu), float(T),
                         m=mm.astype(np.int64), lam=lam[jj])


def heisenberg_preset(cells=32, m_max=32, lo=2.0 ** -4, ratio=LADDER_RATIO, n=1, nu=2.0, T=1.0,
                      refine=0) -> SpectralField:
    """Default Heisenberg grid; each ``refine`` step doubles the lambda cells
    (same ratio, extending upward) and m_max."""
    for _ in range(int(refine)):
        cells, m_max = 2 * cells, 2 * m_max
    return heisenberg_grid(n, geometric_cells(lo, ratio, cells), m_max, nu, T)


def abstract_grid(betas, weights, nu=2.0, T=1.0) -> SpectralField:
    beta = np.asarray(betas, dtype=float).ravel()
    weight = np.asarray(weights, dtype=float).ravel()
    if beta.size != weight.size:
        raise InvalidParameter(f"{beta.size} betas but {weight.size} weights")
    if np.any(beta <= 0) or np.any(weight <= 0):
        raise InvalidParameter("betas and weights must be positive")
    zeros = np.zeros(beta.size, dtype=complex)
    return SpectralField(beta, weight, zeros, zeros.copy(), float(nu), float(T))


def synthesize_data(fld: SpectralField, data_class, seed) -> SpectralField:
    """Amplitudes of the given decay class with phases from PCG64(seed)."""
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=(2, len(fld))))
    b = fld.beta
    if isinstance(data_class, Sobolev):
        du = b ** (-2.0 * (data_class.s + data_class.delta) / fld.nu)
        u = du / b
    elif isinstance(data_class, Gevrey):
        if not data_class.A > 0:
            raise InvalidParameter("Gevrey data needs A > 0")
        if not data_class.s >= 1:
            raise InvalidParameter("Gevrey order s must be >= 1")
        u = np.exp(-data_class.A * b ** (1.0 / data_class.s))
        du = u.copy()
    else:
        raise InvalidParameter(f"unknown data class {data_class!r}")
    return fld.with_amplitudes(u * phase[0], du * phase[1], data=data_class)


def _evolve_one(p, beta, u0, u1, steps_per_period):
    v, dv, _ = solve_final(p, beta, u0, u1, steps_per_period)
    return v, dv


def evolve(fld: SpectralField, p: CoefficientProfile, steps_per_period=64, threads=1) -> SpectralField:
    """Amplitudes at time T = p.T, one independent solve per mode."""
    def run(j):
        try:
            return _evolve_one(p, float(fld.beta[j]), complex(fld.u_hat[j]),
                               complex(fld.du_hat[j]), steps_per_period)
        except Exception as exc:
            raise type(exc)(f"mode {fld.label(j)}: {exc}") from exc

    idx = range(len(fld))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, idx))
    else:
        out = [run(j) for j in idx]
    u = np.array([o[0] for o in out], dtype=complex)
    du = np.array([o[1] for o in out], dtype=complex)
    return fld.with_amplitudes(u, du, T=p.T)


def _abs2(z):
    return z.real ** 2 + z.imag ** 2


def sobolev_norm(fld: SpectralField, s) -> float:
    terms = fld.weight * (1.0 + fld.beta ** 2) ** (2.0 * s / fld.nu) * _abs2(fld.u_hat)
    return math.sqrt(math.fsum(terms))


def _log_sum(log_terms) -> float:
    log_terms = np.asarray(log_terms, dtype=float)
    log_terms = log_terms[np.isfinite(log_terms) | (log_terms > 0)]
    if log_terms.size == 0:
        return -math.inf
    top = float(log_terms.max())
    if not math.isfinite(top):
        return top
    return top + math.log(math.fsum(np.exp(log_terms - top)))


def _log_amp2(z):
    with np.errstate(divide="ignore"):
        return np.log(_abs2(z))


def log_gevrey_norm(fld: SpectralField, s, A) -> float:
    """log of :func:`gevrey_norm`, finite whenever the norm is positive."""
    terms = np.log(fld.weight) + 2.0 * A * fld.beta ** (1.0 / s) + _log_amp2(fld.u_hat)
    return 0.5 * _log_sum(terms)


def gevrey_norm(fld: SpectralField, s, A) -> float:
    """Weighted exp(A beta^(1/s)) norm; inf when it overflows a double."""
    if not s >= 1:
        raise InvalidParameter("Gevrey order s must be >= 1")
    log_norm = log_gevrey_norm(fld, s, A)
    return math.exp(log_norm) if log_norm < 709.0 else math.inf


def log_gevrey_energy(fld: SpectralField, s, B) -> float:
    """log of (sum_j w_j exp(2 B beta_j^(1/s)) (beta_j^2 |u_j|^2 + |u_j'|^2))^(1/2)."""
    grow = np.log(fld.weight) + 2.0 * B * fld.beta ** (1.0 / s)
    terms = np.concatenate([grow + 2.0 * np.log(fld.beta) + _log_amp2(fld.u_hat),
                            grow + _log_amp2(fld.du_hat)])
    return 0.5 * _log_sum(terms)


def sobolev_energy(fld: SpectralField, s, homogeneous=True) -> float:
    """Squared data norm of (u, u_t) in H^(s + nu/2) x H^s.

    The homogeneous form uses beta^(4s/nu) (beta^2 |u|^2 + |u'|^2) per mode,
    the inhomogeneous one (1 + beta^2)^(2s/nu) ((1 + beta^2) |u|^2 + |u'|^2).
    """
    b2 = fld.beta ** 2
    if homogeneous:
        terms = fld.weight * b2 ** (2.0 * s / fld.nu) * (b2 * _abs2(fld.u_hat) + _abs2(fld.du_hat))
    else:
        terms = fld.weight * (1.0 + b2) ** (2.0 * s / fld.nu) * ((1.0 + b2) * _abs2(fld.u_hat) + _abs2(fld.du_hat))
    return math.fsum(terms)


@dataclass
class CharReport:
    s: float
    nu: float
    k_max: int
    d: list
    b_k: list
    B: float
    C: float
    ratios: list
    bounded: bool

    def to_record(self) -> dict:
        return {"s": self.s, "k_max": self.k_max, "B": self.B, "C": self.C,
                "bounded": self.bounded, "b_k": " ".join(f"{x:.6g}" for x in self.b_k)}


# B_k may creep up towards its limit; a rise beyond this factor over the
# second half of the k range counts as divergence
CHAR_GROWTH = 1.2


def gevrey_char_check(fld: SpectralField, s, k_max) -> CharReport:
    """Test ||R^k f|| <= C B^(nu k) ((nu k)!)^s for k = 0..k_max.

    d_k = (sum w beta^(4k) |u|^2)^(1/2) and C = d_0.  B_k =
    (d_k / (C ((nu k)!)^s))^(1/(nu k)) is the smallest B that works at order
    k; the fitted B is the largest B_k, so every ratio is at most 1.  The sequence is reported bounded unless B_{k_max} exceeds
    the largest B_k over k <= k_max / 2 by more than ``CHAR_GROWTH``.
    """
    if int(k_max) != k_max or k_max < 3:
        raise InvalidParameter("k_max must be an integer >= 3")
    k_max = int(k_max)
    nu = fld.nu
    log_w_u = np.log(fld.weight) + _log_amp2(fld.u_hat)
    log_d = [0.5 * _log_sum(log_w_u + 4.0 * k * np.log(fld.beta)) for k in range(k_max + 1)]
    if not math.isfinite(log_d[0]):
        # zero field: every d_k vanishes
        return CharReport(float(s), nu, k_max, [0.0] * (k_max + 1), [0.0] * k_max, 0.0, 0.0,
                          [0.0] * (k_max + 1), True)
    log_b = []
    for k in range(1, k_max + 1):
        log_fact = math.lgamma(nu * k + 1.0)
        log_b.append((log_d[k] - log_d[0] - s * log_fact) / (nu * k))
    B = math.exp(max(log_b))
    C = math.exp(log_d[0]) if math.isfinite(log_d[0]) else 0.0
    ratios = []
    for k in range(k_max + 1):
        log_bound = log_d[0] + nu * k * math.log(B) + s * math.lgamma(nu * k + 1.0)
        ratios.append(math.exp(log_d[k] - log_bound) if math.isfinite(log_d[k]) else 0.0)
    early = max(log_b[:max(1, k_max // 2)])
    bounded = log_b[-1] <= early + math.log(CHAR_GROWTH)
    return CharReport(float(s), nu, k_max, [math.exp(x) for x in log_d],
                      [math.exp(x) for x in log_b], B, C, ratios, bool(bounded))


def _variation_log(p: CoefficientProfile, eps, samples=1 << 14):
    # int_0^T |a'| / (a + eps^2) dt as the total variation of log(a + eps^2);
    # exact for a monotone between samples, so no derivative of a is needed
    t = np.linspace(0.0, p.T, samples + 1)
    g = np.log(p.eval(t) + eps * eps)
    return float(np.abs(np.diff(g)).sum())


def decay_rate(p: CoefficientProfile, case_tag, beta, s, l=None) -> float:
    """Growth rate K(beta) with |V(T)| <= C(beta) exp(K T beta^(1/s)) |V(0)|.

    Hoelder+   minimal decay rate of the plain pair, eps = 1/beta
    Hoelder0   minimal decay rate of the eps^alpha-shifted pair, eps = beta^(-1/(1+alpha))
    Smooth0    Gronwall rate of the quasi-symmetrizer energy, eps = beta^(-l/(2+l)),
               K = (int |a'|/(a + eps^2) + 2 beta eps T) / (2 T beta^(1/s));
               the polynomial factor c1^2 / eps^2 of the energy sandwich stays in C(beta)
    Lip+       0
    """
    if case_tag == "Lip+":
        return 0.0
    if case_tag == "Hoelder+":
        pair = regularized_pair(p, min(1.0, 1.0 / beta))
        return minimal_decay_rate(p, pair, beta, s)
    if case_tag == "Hoelder0":
        if p.alpha is None:
            raise InvalidParameter("Hoelder0 needs the profile's alpha")
        eps = min(1.0, beta ** (-1.0 / (1.0 + p.alpha)))
        return minimal_decay_rate(p, regularized_pair(p, eps, "shifted", p.alpha), beta, s)
    if case_tag == "Smooth0":
        l = p.l if l is None else l
        if l is None:
            raise InvalidParameter("Smooth0 needs l")
        eps = min(1.0, beta ** (-l / (2.0 + l)))
        growth = _variation_log(p, eps) + 2.0 * beta * eps * p.T
        return growth / (2.0 * p.T * beta ** (1.0 / s))
    raise InvalidParameter(f"unknown case tag {case_tag!r}")


def rate_ladder(beta_max, beta0=BETA0, ratio=LADDER_RATIO):
    """beta0 * ratio^j for j >= 1 up to beta_max, with beta_max itself appended."""
    out = []
    b = beta0 * ratio
    while b < beta_max:
        out.append(b)
        b *= ratio
    if beta_max > beta0:
        out.append(float(beta_max))
    return out


@dataclass
class WellposednessReport:
    case_tag: str
    s: float
    T: float
    n_modes: int
    beta_max: float
    c_meas: float | None = None
    c_sobolev: float | None = None
    A: float | None = None
    K: float | None = None
    B: float | None = None
    status: str = "ok"
    log_norm_initial: float | None = None
    log_norm_evolved: float | None = None
    ladder: list = field(default_factory=list)

    @property
    def horizon_exceeded(self) -> bool:
        return self.B is not None and self.B <= 0

    @property
    def norm_ratio(self) -> float | None:
        if self.log_norm_evolved is None:
            return None
        return math.exp(min(self.log_norm_evolved - self.log_norm_initial, 709.0))

    @property
    def finite(self) -> bool:
        if self.case_tag == "Lip+":
            return self.c_meas is not None and math.isfinite(self.c_meas)
        return self.log_norm_evolved is not None and self.log_norm_evolved < 709.0

    def to_record(self) -> dict:
        blank = lambda x: "" if x is None else x
        return {
            "case_tag": self.case_tag, "s": self.s, "T": self.T, "n_modes": self.n_modes,
            "beta_max": self.beta_max, "c_meas": blank(self.c_meas),
            "c_sobolev": blank(self.c_sobolev), "A": blank(self.A), "K": blank(self.K),
            "B": blank(self.B), "norm_ratio": blank(self.norm_ratio),
            "finite": self.finite, "status": self.status,
        }


def wellposedness_report(field0: SpectralField, p: CoefficientProfile, s, case_tag, params=None) -> WellposednessReport:
    """Evolve ``field0`` to T and measure the well-posedness estimate for the case.

    Lip+: c_meas is the ratio of homogeneous energies in H^(s+nu/2) x H^s at
    T and at 0 (c_sobolev the inhomogeneous one).  Other cases: K is the
    largest decay_rate over the ladder (beta0, beta_max], B = A - K T, and
    the evolved energy in the Gevrey-B norm is compared with the initial one
    in the Gevrey-A norm.  Modes below beta0 are evolved like all others.

    params: A (default: half the A' of Gevrey data), l, beta0, ladder_ratio,
    steps_per_period, threads.
    """
    params = dict(params or {})
    spp = int(params.get("steps_per_period", 64))
    threads = int(params.get("threads", 1))
    report = WellposednessReport(case_tag, float(s), p.T, len(field0), float(field0.beta.max()))
    if case_tag == "Lip+":
        evolved = evolve(field0, p, spp, threads)
        report.c_meas = sobolev_energy(evolved, s) / sobolev_energy(field0, s)
        report.c_sobolev = (sobolev_energy(evolved, s, homogeneous=False)
                            / sobolev_energy(field0, s, homogeneous=False))
        return report
    A = params.get("A")
    if A is None and isinstance(field0.data, Gevrey):
        # data exp(-A' beta^(1/s)) has a finite Gevrey-A norm only for A < A'
        A = 0.5 * field0.data.A
    if A is None or not A > 0:
        raise InvalidParameter("Gevrey cases need A > 0")
    ladder = rate_ladder(report.beta_max, float(params.get("beta0", BETA0)),
                         float(params.get("ladder_ratio", LADDER_RATIO)))
    rates = [decay_rate(p, case_tag, b, s, params.get("l")) for b in ladder]
    report.ladder = list(zip(ladder, rates))
    report.A = float(A)
    report.K = max(rates) if rates else 0.0
    report.B = report.A - report.K * p.T
    if report.B <= 0:
        report.status = HORIZON_EXCEEDED
        return report
    evolved = evolve(field0, p, spp, threads)
    report.log_norm_initial = log_gevrey_energy(field0, s, report.A)
    report.log_norm_evolved = log_gevrey_energy(evolved, s, report.B)
    return report


@dataclass
class RefinementComparison:
    coarse: WellposednessReport
    fine: WellposednessReport
    tolerance: float
    measured: float
    flagged: bool
    stable: bool
    reason: str

    def to_record(self) -> dict:
        return {"tolerance": self.tolerance, "measured": self.measured,
                "stable": self.stable, "flagged": self.flagged, "reason": self.reason}


def compare_refinement(coarse: WellposednessReport, fine: WellposednessReport, tolerance=0.2) -> RefinementComparison:
    """Judge a report against its refined-grid counterpart.

    Lip+: relative change of c_meas.  Other cases: flagged when either grid
    has B <= 0, when K grows by more than ``tolerance`` (the rate is not
    uniform in beta), or when the norm ratio grows by more than
    ``tolerance``; stable when none of that happens and the norm ratio
    changes by at most ``tolerance``.
    """
    if coarse.case_tag == "Lip+":
        measured = abs(fine.c_meas / coarse.c_meas - 1.0)
        stable = measured <= tolerance
        return RefinementComparison(coarse, fine, tolerance, measured, False, stable,
                                    "c_meas change")
    if coarse.horizon_exceeded or fine.horizon_exceeded:
        return RefinementComparison(coarse, fine, tolerance, min(coarse.B, fine.B), True, False,
                                    "B <= 0")
    k_growth = fine.K / coarse.K - 1.0 if coarse.K > 0 else 0.0
    if k_growth > tolerance:
        return RefinementComparison(coarse, fine, tolerance, k_growth, True, False,
                                    "K grows under refinement")
    change = math.exp(fine.log_norm_evolved - fine.log_norm_initial
                      - coarse.log_norm_evolved + coarse.log_norm_initial) - 1.0
    if not fine.finite or change > tolerance:
        return RefinementComparison(coarse, fine, tolerance, change, True, False,
                                    "norm grows under refinement")
    stable = abs(change) <= tolerance and coarse.finite and fine.finite
    return RefinementComparison(coarse, fine, tolerance, change, False, stable,
                                "norm ratio change")


FIELD_COLUMNS = ("m", "lambda", "beta", "weight", "re_u_hat", "im_u_hat", "re_du_hat", "im_du_hat")


def field_table(fld: SpectralField):
    """Rows for the field snapshot CSV (labels blank on abstract grids)."""
    rows = []
    for j in range(len(fld)):
        m = "" if fld.m is None else int(fld.m[j])
        lam = "" if fld.lam is None else repr(float(fld.lam[j]))
        rows.append([m, lam] + [repr(float(x)) for x in (
            fld.beta[j], fld.weight[j], fld.u_hat[j].real, fld.u_hat[j].imag,
            fld.du_hat[j].real, fld.du_hat[j].imag)])
    return list(FIELD_COLUMNS), rows
