"""The model ODE v'' + beta^2 a(t) v = 0 and the energies built on it.

The equation is integrated as the first-order system V' = i beta A(t) V with
V = (i beta v, v') and A(t) = [[0, 1], [a(t), 0]], by classical fixed-step RK4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .coefficients import CoefficientProfile
from .errors import DegenerateTransform, InvalidParameter
from .mollify import RegularizedPair

MIN_STEPS = 1000


def step_count(p: CoefficientProfile, beta: float, steps_per_period: int) -> int:
    """Number of uniform steps on [0, T].

    At least ``MIN_STEPS`` and at least ``steps_per_period`` steps per period
    of the fastest local oscillation beta * sqrt(a_max).  The count is rounded
    up to the ladder m * 2^k with 16 <= m < 32 (at most 6.25% extra work), so
    modes of a spectral field share coefficient samples.
    """
    periods = p.T * beta * math.sqrt(p.a_max) / (2.0 * math.pi)
    need = max(MIN_STEPS, int(math.ceil(periods * steps_per_period)))
    k = max(0, int(math.floor(math.log2(need / 16.0))))
    m = -(-need // (1 << k))
    return m << k


@lru_cache(maxsize=64)
def _half_step_samples(p: CoefficientProfile, n: int) -> np.ndarray:
    a = np.ascontiguousarray(p.eval(np.linspace(0.0, p.T, 2 * n + 1)), dtype=float)
    a.setflags(write=False)
    return a


def _validate(beta, steps_per_period):
    if not beta > 0:
        raise InvalidParameter(f"beta must be positive, got {beta!r}")
    if int(steps_per_period) != steps_per_period or steps_per_period < 16:
        raise InvalidParameter(f"steps_per_period must be an integer >= 16, got {steps_per_period!r}")


def _div_i_beta(z, beta):
    # componentwise, so scalar and array paths round identically
    return np.imag(z) / beta - 1j * (np.real(z) / beta)


@dataclass
class StateVector:
    v_component: complex
    dv_component: complex
    beta: float
    t: float

    @property
    def v(self) -> complex:
        return _div_i_beta(self.v_component, self.beta)

    @property
    def dv(self) -> complex:
        return self.dv_component

    def norm2(self) -> float:
        return abs(self.v_component) ** 2 + abs(self.dv_component) ** 2


@dataclass
class Trajectory:
    """States V(t_j) on a uniform grid of [0, T]; V[:, 0] = i beta v, V[:, 1] = v'."""

    t: np.ndarray
    V: np.ndarray
    beta: float
    steps: int
    steps_per_period: int
    method: str = "rk4"

    @property
    def v(self) -> np.ndarray:
        return _div_i_beta(self.V[:, 0], self.beta)

    @property
    def dv(self) -> np.ndarray:
        return self.V[:, 1]

    def state(self, j: int) -> StateVector:
        return StateVector(complex(self.V[j, 0]), complex(self.V[j, 1]), self.beta, float(self.t[j]))

    def __len__(self):
        return self.t.size


def solve(p: CoefficientProfile, beta, v0, v1, steps_per_period=64) -> Trajectory:
    _validate(beta, steps_per_period)
    beta = float(beta)
    n = step_count(p, beta, steps_per_period)
    a_half = _half_step_samples(p, n)
    V = _kernels.rk4_path(a_half, p.T / n, beta, complex(1j * beta * v0), complex(v1))
    return Trajectory(np.linspace(0.0, p.T, n + 1), V, beta, n, int(steps_per_period))


def solve_final(p: CoefficientProfile, beta, v0, v1, steps_per_period=64):
    """(v(T), v'(T), sup_t |V(t)|^2) without storing the path; same arithmetic as :func:`solve`."""
    _validate(beta, steps_per_period)
    beta = float(beta)
    n = step_count(p, beta, steps_per_period)
    a_half = _half_step_samples(p, n)
    y1, y2, sup = _kernels.rk4_final(a_half, p.T / n, beta, complex(1j * beta * v0), complex(v1))
    return complex(_div_i_beta(y1, beta)), y2, sup


def amplification_sup(p: CoefficientProfile, beta, steps_per_period=64) -> float:
    """sup_t of the worst-case ratio |V(t)|^2 / |V(0)|^2 over all initial data.

    This is sup_t ||Phi(t)||^2 for the propagator Phi(t) of the system, from
    two basis solutions advanced on the same step grid as :func:`solve`.
    """
    _validate(beta, steps_per_period)
    beta = float(beta)
    n = step_count(p, beta, steps_per_period)
    return float(_kernels.rk4_propagator_sup(_half_step_samples(p, n), p.T / n, beta))


@dataclass
class EnergyTrace:
    kind: str
    t: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)
    log_values: np.ndarray | None = None

    def ratio_sup(self) -> float:
        """sup_t E(t) / E(0)."""
        return float(self.values.max() / self.values[0])


def base_energy(traj: Trajectory) -> EnergyTrace:
    values = np.abs(traj.V[:, 0]) ** 2 + np.abs(traj.V[:, 1]) ** 2
    return EnergyTrace("base", traj.t, values)


def symmetrizer_energy(traj: Trajectory, p: CoefficientProfile) -> EnergyTrace:
    """(S V, V) with S = diag(2a, 2)."""
    a = p.eval(traj.t)
    values = 2.0 * a * np.abs(traj.V[:, 0]) ** 2 + 2.0 * np.abs(traj.V[:, 1]) ** 2
    return EnergyTrace("symmetrizer", traj.t, values)


def quasi_energy(traj: Trajectory, p: CoefficientProfile, eps) -> EnergyTrace:
    """(Q_eps V, V) with Q_eps = diag(2(a + eps^2), 2)."""
    if not 0 < eps <= 1:
        raise InvalidParameter(f"eps must lie in (0, 1], got {eps!r}")
    a = p.eval(traj.t)
    values = 2.0 * (a + eps * eps) * np.abs(traj.V[:, 0]) ** 2 + 2.0 * np.abs(traj.V[:, 1]) ** 2
    return EnergyTrace("quasi", traj.t, values, {"eps": eps})


def quasi_sandwich_constant(p: CoefficientProfile, eps) -> float:
    """c_1 = max(1, 2 (sup a + eps^2)) in c_1^-1 eps^2 |V|^2 <= E_eps <= c_1 |V|^2."""
    return max(1.0, 2.0 * (p.a_max + eps * eps))


def system_matrix(a_value) -> np.ndarray:
    return np.array([[0.0, 1.0], [a_value, 0.0]], dtype=complex)


def symmetrizer_commutator(a_value) -> np.ndarray:
    """S A - A^* S for S = diag(2a, 2); identically zero."""
    A = system_matrix(a_value)
    S = np.diag([2.0 * a_value, 2.0]).astype(complex)
    return S @ A - A.conj().T @ S


def quasi_symmetrizer_commutator(a_value, eps) -> np.ndarray:
    """Q_eps A - A^* Q_eps; equals 2 eps^2 [[0, 1], [-1, 0]]."""
    if not eps > 0:
        raise InvalidParameter("eps must be positive")
    A = system_matrix(a_value)
    Q = np.diag([2.0 * a_value + 2.0 * eps * eps, 2.0]).astype(complex)
    return Q @ A - A.conj().T @ Q


def _check_det(det):
    if not np.all(det > 0):
        raise DegenerateTransform("det H(t) is not positive on the grid")


def transformed_energy(traj: Trajectory, pair: RegularizedPair, s, K) -> EnergyTrace:
    """|W(t)|^2 for W = exp(rho(t) beta^(1/s)) det H H^-1 V, rho(t) = -K t.

    ``log_values`` holds log |W|^2, which stays finite when the exponential
    weight underflows.
    """
    if s < 1:
        raise InvalidParameter("s must be >= 1")
    if K < 0:
        raise InvalidParameter("K must be nonnegative")
    l1, l2, _, _ = pair.evaluate(traj.t)
    _check_det(l2 - l1)
    V1, V2 = traj.V[:, 0], traj.V[:, 1]
    w1 = l2 * V1 - V2
    w2 = -l1 * V1 + V2
    log_w = np.log(np.abs(w1) ** 2 + np.abs(w2) ** 2) - 2.0 * K * traj.t * traj.beta ** (1.0 / s)
    return EnergyTrace("transformed", traj.t, np.exp(log_w), {"s": s, "K": K}, log_w)


def spectral_norm_2x2(a, b, c, d):
    """Largest singular value of [[a, b], [c, d]], elementwise over arrays (real entries)."""
    fro = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.sqrt(np.maximum(fro * fro - 4.0 * det * det, 0.0))
    return np.sqrt(0.5 * (fro + disc))


def decay_rate_terms(p: CoefficientProfile, pair: RegularizedPair, beta, t):
    """The three rates bounding d|W|^2/dt, at points t.

    Returns (2 ||H^-1 H_t||, 2 |(det H)_t / det H|, beta ||H^-1 A H - (H^-1 A H)^*||).
    """
    l1, l2, dl1, dl2 = pair.evaluate(t)
    det = l2 - l1
    _check_det(det)
    # H^-1 H_t = [[-dl1, -dl2], [dl1, dl2]] / det
    term1 = 2.0 * spectral_norm_2x2(-dl1, -dl2, dl1, dl2) / det
    term2 = 2.0 * np.abs(dl2 - dl1) / det
    # H^-1 A H minus its adjoint is (l1^2 + l2^2 - 2a)/det * [[0, 1], [-1, 0]]
    a = p.eval(t)
    term3 = beta * np.abs(l1 * l1 + l2 * l2 - 2.0 * a) / det
    return term1, term2, term3


def minimal_decay_rate(p: CoefficientProfile, pair: RegularizedPair, beta, s, t_grid=None) -> float:
    """Smallest constant K making the bound on d|W|^2/dt nonpositive on a t-grid.

    ``t_grid`` is the number of grid intervals on [0, T]; by default the grid
    spacing is eps / 8 (and at least 1024 intervals).
    """
    if not beta > 0:
        raise InvalidParameter("beta must be positive")
    if t_grid is None:
        t_grid = max(1024, int(math.ceil(8.0 * p.T / pair.epsilon)))
    t = np.linspace(0.0, p.T, int(t_grid) + 1)
    term1, term2, term3 = decay_rate_terms(p, pair, beta, t)
    total = term1 + term2 + term3
    return float(total.max()) / (2.0 * beta ** (1.0 / s))


@dataclass
class RecoveryCheck:
    """|V(t)| against two forms of the bound recovered from the monotone |W|^2.

    ``chain`` is exp(K t beta^(1/s)) ||H(t)|| / det H(t) * |W(0)|; ``corrected``
    further bounds |W(0)| <= det H(0) ||H(0)^-1|| |V(0)|; ``literal`` uses
    1 / ||H(0)|| in place of ||H(0)^-1||.
    """

    norm_v: np.ndarray
    chain: np.ndarray
    corrected: np.ndarray
    literal: np.ndarray

    def holds(self, bound: str = "corrected", rtol: float = 1e-6) -> bool:
        return bool(np.all(self.norm_v <= getattr(self, bound) * (1.0 + rtol)))


def recovery_check(traj: Trajectory, pair: RegularizedPair, s, K) -> RecoveryCheck:
    l1, l2, _, _ = pair.evaluate(traj.t)
    det = l2 - l1
    _check_det(det)
    h_norm = spectral_norm_2x2(np.ones_like(l1), np.ones_like(l1), l1, l2)
    # H^-1 = [[l2, -1], [-l1, 1]] / det
    h_inv0 = spectral_norm_2x2(l2[0], -1.0, -l1[0], 1.0) / det[0]
    V1, V2 = traj.V[:, 0], traj.V[:, 1]
    norm_v = np.sqrt(np.abs(V1) ** 2 + np.abs(V2) ** 2)
    growth = np.exp(K * traj.t * traj.beta ** (1.0 / s))
    w0 = math.hypot(abs(l2[0] * V1[0] - V2[0]), abs(-l1[0] * V1[0] + V2[0]))
    chain = growth * h_norm / det * w0
    corrected = growth * (det[0] / det) * h_norm * h_inv0 * norm_v[0]
    literal = growth * (det[0] / det) * (h_norm / h_norm[0]) * norm_v[0]
    return RecoveryCheck(norm_v, chain, corrected, literal)


def trajectory_table(traj: Trajectory, extra: dict | None = None):
    """Columns for CSV export: t, Re v, Im v, Re v', Im v', E_base and any extra traces."""
    v, dv = traj.v, traj.dv
    cols = {
        "t": traj.t, "re_v": v.real, "im_v": v.imag, "re_dv": dv.real, "im_dv": dv.imag,
        "E_base": base_energy(traj).values,
    }
    for name, trace in (extra or {}).items():
        cols[name] = trace.values
    return cols
