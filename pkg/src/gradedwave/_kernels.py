"""Compiled fixed-step RK4 for V' = i beta A(t) V with A = [[0, 1], [a, 0]].

``a_half`` holds a(t) at every half step (length 2n + 1).  Both entry points
share :func:`_step`, so a path integration and a final-state integration of
the same problem agree bit for bit.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True, inline="always")
def _step(y1, y2, a0, am, a1, ib, h):
    k11 = ib * y2
    k12 = ib * a0 * y1
    z1 = y1 + 0.5 * h * k11
    z2 = y2 + 0.5 * h * k12
    k21 = ib * z2
    k22 = ib * am * z1
    z1 = y1 + 0.5 * h * k21
    z2 = y2 + 0.5 * h * k22
    k31 = ib * z2
    k32 = ib * am * z1
    z1 = y1 + h * k31
    z2 = y2 + h * k32
    k41 = ib * z2
    k42 = ib * a1 * z1
    y1 = y1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    y2 = y2 + h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
    return y1, y2


@njit(cache=True, nogil=True)
def rk4_path(a_half, h, beta, y1, y2):
    n = (a_half.shape[0] - 1) // 2
    out = np.empty((n + 1, 2), dtype=np.complex128)
    ib = 1j * beta
    out[0, 0] = y1
    out[0, 1] = y2
    for j in range(n):
        y1, y2 = _step(y1, y2, a_half[2 * j], a_half[2 * j + 1], a_half[2 * j + 2], ib, h)
        out[j + 1, 0] = y1
        out[j + 1, 1] = y2
    return out


@njit(cache=True, nogil=True)
def rk4_final(a_half, h, beta, y1, y2):
    """Final state and the largest |V|^2 met along the way."""
    n = (a_half.shape[0] - 1) // 2
    ib = 1j * beta
    sup = y1.real ** 2 + y1.imag ** 2 + y2.real ** 2 + y2.imag ** 2
    for j in range(n):
        y1, y2 = _step(y1, y2, a_half[2 * j], a_half[2 * j + 1], a_half[2 * j + 2], ib, h)
        e = y1.real ** 2 + y1.imag ** 2 + y2.real ** 2 + y2.imag ** 2
        if e > sup:
            sup = e
    return y1, y2, sup


@njit(cache=True, nogil=True)
def rk4_propagator_sup(a_half, h, beta):
    """sup_t ||Phi(t)||^2 for the propagator Phi of V' = i beta A V (spectral norm)."""
    n = (a_half.shape[0] - 1) // 2
    ib = 1j * beta
    p11 = 1.0 + 0j
    p21 = 0j
    p12 = 0j
    p22 = 1.0 + 0j
    sup = 1.0
    for j in range(n):
        a0 = a_half[2 * j]
        am = a_half[2 * j + 1]
        a1 = a_half[2 * j + 2]
        p11, p21 = _step(p11, p21, a0, am, a1, ib, h)
        p12, p22 = _step(p12, p22, a0, am, a1, ib, h)
        fro = (p11.real ** 2 + p11.imag ** 2 + p21.real ** 2 + p21.imag ** 2
               + p12.real ** 2 + p12.imag ** 2 + p22.real ** 2 + p22.imag ** 2)
        det = p11 * p22 - p12 * p21
        det2 = det.real ** 2 + det.imag ** 2
        disc = fro * fro - 4.0 * det2
        if disc < 0.0:
            disc = 0.0
        s = 0.5 * (fro + disc ** 0.5)
        if s > sup:
            sup = s
    return sup
