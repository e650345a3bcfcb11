"""Compiled Dormand-Prince 5(4) integrator for the mean-field equations.

The state is the pair of column-stacked 3x3 density matrices (18 complex
numbers).  Each group evolves as

    d vec(rho_s)/dt = (L0_s + c_s Cp + d_s Cm) vec(rho_s)

with L0_s the uncoupled Liouvillian, Cp / Cm the superoperators of
-i[S^+, .] / -i[S^-, .] and (c_s, d_s) the mean fields felt by group s.
The fields are symmetrized so that d_s = conj(c_s) for any state.
All superoperators are passed in coordinate (COO) form; each has only a
handful of nonzero entries.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Butcher tableau (Hairer, Norsett & Wanner, table 5.2)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th-order and embedded 4th-order weights
E1 = 71 / 57600
E3 = -71 / 16695
E4 = 71 / 1920
E5 = -17253 / 339200
E6 = 22 / 525
E7 = -1 / 40

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_NONFINITE = 2


@njit(cache=True)
def _rhs(y, out, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab):
    # lval[0] / lval[1]: uncoupled Liouvillians of A / B in COO form sharing
    # the (lrow, lcol) pattern; cpval / cmval: -i[S^+, .] / -i[S^-, .]
    ma = 0j
    pa = 0j
    mb = 0j
    pb = 0j
    for k in range(9):
        ma += wm[k] * y[k]
        pa += wp[k] * y[k]
        mb += wm[k] * y[9 + k]
        pb += wp[k] * y[9 + k]
    # symmetrized fields: identical on Hermitian states, and they keep the
    # effective Hamiltonian Hermitian so round-off in rho^dagger - rho cannot grow
    ma = 0.5 * (ma + np.conj(pa))
    mb = 0.5 * (mb + np.conj(pb))
    pa = np.conj(ma)
    pb = np.conj(mb)
    ca = v * ma + vab * mb
    da = v * pa + vab * pb
    cb = v * mb + vab * ma
    db = v * pb + vab * pa
    for i in range(18):
        out[i] = 0j
    for k in range(lrow.size):
        r = lrow[k]
        c = lcol[k]
        out[r] += lval[0, k] * y[c]
        out[9 + r] += lval[1, k] * y[9 + c]
    for k in range(crow.size):
        r = crow[k]
        c = ccol[k]
        out[r] += (ca * cpval[k] + da * cmval[k]) * y[c]
        out[9 + r] += (cb * cpval[k] + db * cmval[k]) * y[9 + c]


@njit(cache=True)
def _error_norm(y, ynew, err, rtol, atol):
    acc = 0.0
    n = y.size
    for k in range(n):
        sc_re = atol + rtol * max(abs(y[k].real), abs(ynew[k].real))
        sc_im = atol + rtol * max(abs(y[k].imag), abs(ynew[k].imag))
        acc += (err[k].real / sc_re) ** 2 + (err[k].imag / sc_im) ** 2
    return np.sqrt(acc / (2 * n))


@njit(cache=True)
def integrate_meanfield(
    y0, sample_times, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab, rtol, atol, max_step
):
    """Integrate from sample_times[0], returning the state at every sample time.

    Returns (samples, status, t_reached, n_accepted, n_rejected).
    """
    n = y0.size
    ns = sample_times.size
    samples = np.empty((ns, n), dtype=np.complex128)
    y = y0.copy()
    samples[0] = y
    t = sample_times[0]

    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    k5 = np.empty_like(k1)
    k6 = np.empty_like(k1)
    k7 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    ynew = np.empty_like(k1)
    err = np.empty_like(k1)

    _rhs(y, k1, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)

    # initial step guess from the derivative scale
    d0 = 0.0
    d1 = 0.0
    for k in range(n):
        sc = atol + rtol * abs(y[k])
        d0 += (abs(y[k]) / sc) ** 2
        d1 += (abs(k1[k]) / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    h = min(h, max_step)

    n_acc = 0
    n_rej = 0
    status = STATUS_OK
    idx = 1
    while idx < ns:
        t_target = sample_times[idx]
        hmin = 1e-13 * max(1.0, abs(t))
        if h < hmin:
            status = STATUS_STEP_UNDERFLOW
            break
        last = False
        hs = h
        if t + hs >= t_target - 1e-12 * max(1.0, abs(t_target)):
            hs = t_target - t
            last = True

        for k in range(n):
            tmp[k] = y[k] + hs * A21 * k1[k]
        _rhs(tmp, k2, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)
        for k in range(n):
            tmp[k] = y[k] + hs * (A31 * k1[k] + A32 * k2[k])
        _rhs(tmp, k3, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)
        for k in range(n):
            tmp[k] = y[k] + hs * (A41 * k1[k] + A42 * k2[k] + A43 * k3[k])
        _rhs(tmp, k4, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)
        for k in range(n):
            tmp[k] = y[k] + hs * (A51 * k1[k] + A52 * k2[k] + A53 * k3[k] + A54 * k4[k])
        _rhs(tmp, k5, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)
        for k in range(n):
            tmp[k] = y[k] + hs * (
                A61 * k1[k] + A62 * k2[k] + A63 * k3[k] + A64 * k4[k] + A65 * k5[k]
            )
        _rhs(tmp, k6, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)
        for k in range(n):
            ynew[k] = y[k] + hs * (
                B1 * k1[k] + B3 * k3[k] + B4 * k4[k] + B5 * k5[k] + B6 * k6[k]
            )
        _rhs(ynew, k7, lrow, lcol, lval, crow, ccol, cpval, cmval, wm, wp, v, vab)
        for k in range(n):
            err[k] = hs * (
                E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]
            )
        enorm = _error_norm(y, ynew, err, rtol, atol)
        if not np.isfinite(enorm):
            status = STATUS_NONFINITE
            break

        if enorm <= 1.0:
            t = t_target if last else t + hs
            for k in range(n):
                y[k] = ynew[k]
                k1[k] = k7[k]
            n_acc += 1
            if last:
                samples[idx] = y
                idx += 1
            if enorm == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * enorm ** -0.2))
            # a step clipped to hit a sample time does not shrink the proposal
            if not last or hs >= h:
                h = min(max_step, hs * fac)
            else:
                h = min(max_step, max(h, hs * fac))
        else:
            n_rej += 1
            h = hs * max(0.2, 0.9 * enorm ** -0.2)

    return samples, status, t, n_acc, n_rej
