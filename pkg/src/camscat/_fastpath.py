"""Compiled numerical core: potential kernels, series recursion, RK propagation.

Everything here is numba-compiled and operates on plain arrays.  The
public modules wrap these kernels with validation and bookkeeping.  The
Dormand-Prince 5(4) tableau is exposed at module level so the generic
(pure Python) fallback integrator in ``propagator`` shares the exact
same coefficients.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from .potential import (
    KERNEL_COULOMB,
    KERNEL_TF1,
    KERNEL_TF2,
    KERNEL_TF2_ADIABATIC,
    KERNEL_ZERO,
)

# Dormand-Prince 5(4): 7 stages, FSAL, 5th-order propagation with embedded
# 4th-order error estimate.
DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
DP_B = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
# 5th-order minus embedded 4th-order weights
DP_E = (
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_STEP_BUDGET = 2
STATUS_NOT_FINITE = 3

_A = np.zeros((7, 7))
for _i, _row in enumerate(DP_A):
    _A[_i, : len(_row)] = _row
_B = np.array(DP_B)
_E = np.array(DP_E)
_C = np.array(DP_C)


@nb.njit(cache=True)
def _potential_into(kind, params, r, out):
    n = out.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    if kind == KERNEL_ZERO:
        return
    if kind == KERNEL_TF2:
        z, a, b, dv, alpha, r_i, dr = (
            params[0], params[1], params[2], params[3], params[4], params[5], params[6],
        )
        v22 = -z / (r * (r + a) * (r * r + b))
        arg = (r - r_i) / dr
        v12 = alpha * np.exp(-arg * arg)
        out[0, 0] = v22 + dv
        out[0, 1] = v12
        out[1, 0] = v12
        out[1, 1] = v22
        return
    if kind == KERNEL_TF1:
        z, a, b, off = params[0], params[1], params[2], params[3]
        out[0, 0] = -z / (r * (r + a) * (r * r + b)) + off
        return
    if kind == KERNEL_TF2_ADIABATIC:
        z, a, b, dv, alpha, r_i, dr = (
            params[0], params[1], params[2], params[3], params[4], params[5], params[6],
        )
        branch = params[7]
        v22 = -z / (r * (r + a) * (r * r + b))
        arg = (r - r_i) / dr
        v12 = alpha * np.exp(-arg * arg)
        mean = v22 + 0.5 * dv
        gap = 0.5 * np.sqrt(dv * dv + 4.0 * v12 * v12)
        out[0, 0] = mean + gap if branch > 0.0 else mean - gap
        return
    if kind == KERNEL_COULOMB:
        out[0, 0] = -params[0] / r
        return


@nb.njit(cache=True)
def _rhs(kind, params, n, two_e, cent, r, y, v_work, out):
    """RHS of the first-order system; y = [phi (n*n), dphi (n*n)] flat."""
    nn = n * n
    _potential_into(kind, params, r, v_work)
    c = cent / (r * r) - two_e
    for i in range(nn):
        out[i] = y[nn + i]
    for a in range(n):
        for b in range(n):
            s = 0.0 + 0.0j
            for m in range(n):
                s += v_work[a, m] * y[m * n + b]
            out[nn + a * n + b] = c * y[a * n + b] + 2.0 * s


@nb.njit(cache=True)
def propagate_kernel(
    kind,
    params,
    n,
    energy,
    lam,
    r_start,
    r_end,
    y,
    rel_tol,
    abs_tol,
    initial_step,
    max_step,
    max_steps,
    rescale_threshold,
    fixed_step,
):
    """Adaptive Dormand-Prince 5(4) integration of the radial bundle.

    ``y`` (length 2 n^2, complex128) is advanced in place from r_start to
    exactly r_end; the final step is truncated to land on r_end.  Returns
    (status, steps_taken, log_rescale, r_reached).
    """
    dim = 2 * n * n
    two_e = 2.0 * energy
    cent = lam * lam - 0.25

    a21 = 1.0 / 5.0
    a31, a32 = 3.0 / 40.0, 9.0 / 40.0
    a41, a42, a43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
    a51, a52, a53, a54 = (
        19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0,
    )
    a61, a62, a63, a64, a65 = (
        9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
        -5103.0 / 18656.0,
    )
    b1, b3, b4, b5, b6 = (
        35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0,
    )
    e1, e3, e4, e5, e6, e7 = (
        71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
        22.0 / 525.0, -1.0 / 40.0,
    )
    c2, c3, c4, c5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0

    v_work = np.empty((n, n))
    k1 = np.empty(dim, np.complex128)
    k2 = np.empty(dim, np.complex128)
    k3 = np.empty(dim, np.complex128)
    k4 = np.empty(dim, np.complex128)
    k5 = np.empty(dim, np.complex128)
    k6 = np.empty(dim, np.complex128)
    k7 = np.empty(dim, np.complex128)
    y_stage = np.empty(dim, np.complex128)
    y_new = np.empty(dim, np.complex128)

    r = r_start
    log_rescale = 0.0
    adaptive = fixed_step <= 0.0
    h = initial_step if adaptive else fixed_step
    if h > max_step:
        h = max_step
    steps = 0
    have_k1 = False

    while r < r_end:
        if steps >= max_steps:
            return STATUS_STEP_BUDGET, steps, log_rescale, r
        if adaptive and h < 1e-14 * max(1.0, abs(r)):
            return STATUS_STEP_UNDERFLOW, steps, log_rescale, r
        # truncate the final step to land exactly on r_end
        if h > r_end - r:
            h = r_end - r

        if not have_k1:
            _rhs(kind, params, n, two_e, cent, r, y, v_work, k1)
            have_k1 = True

        for i in range(dim):
            y_stage[i] = y[i] + h * a21 * k1[i]
        _rhs(kind, params, n, two_e, cent, r + c2 * h, y_stage, v_work, k2)

        for i in range(dim):
            y_stage[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i])
        _rhs(kind, params, n, two_e, cent, r + c3 * h, y_stage, v_work, k3)

        for i in range(dim):
            y_stage[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i])
        _rhs(kind, params, n, two_e, cent, r + c4 * h, y_stage, v_work, k4)

        for i in range(dim):
            y_stage[i] = y[i] + h * (
                a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]
            )
        _rhs(kind, params, n, two_e, cent, r + c5 * h, y_stage, v_work, k5)

        for i in range(dim):
            y_stage[i] = y[i] + h * (
                a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]
            )
        _rhs(kind, params, n, two_e, cent, r + h, y_stage, v_work, k6)

        for i in range(dim):
            y_new[i] = y[i] + h * (
                b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]
            )
        _rhs(kind, params, n, two_e, cent, r + h, y_new, v_work, k7)

        if adaptive:
            err_sq = 0.0
            for i in range(dim):
                err = h * (
                    e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i]
                    + e6 * k6[i] + e7 * k7[i]
                )
                ya = abs(y[i])
                yb = abs(y_new[i])
                w = abs_tol + rel_tol * (ya if ya > yb else yb)
                q = abs(err) / w
                err_sq += q * q
            err_norm = np.sqrt(err_sq / dim)
            if not np.isfinite(err_norm):
                return STATUS_NOT_FINITE, steps, log_rescale, r
        else:
            err_norm = 0.0

        if err_norm <= 1.0:
            r += h
            amax = 0.0
            for i in range(dim):
                y[i] = y_new[i]
                ai = abs(y_new[i])
                if ai > amax:
                    amax = ai
            if amax > rescale_threshold:
                inv = 1.0 / amax
                for i in range(dim):
                    y[i] *= inv
                    k7[i] *= inv
                log_rescale += np.log(amax)
            for i in range(dim):
                k1[i] = k7[i]
            have_k1 = True
            steps += 1
            if adaptive:
                if err_norm > 0.0:
                    factor = 0.9 * err_norm ** -0.2
                else:
                    factor = 5.0
                if factor > 5.0:
                    factor = 5.0
                h *= factor
                if h > max_step:
                    h = max_step
        else:
            factor = 0.9 * err_norm ** -0.2
            if factor < 0.2:
                factor = 0.2
            h *= factor
            steps += 1

    return STATUS_OK, steps, log_rescale, r


@nb.njit(cache=True)
def series_kernel(vl, energy, lam, j_max):
    """Power-series coefficients u_j (all N seeds at once).

    vl is the real Maclaurin table of r*V(r), shape (>= j_max+1, n, n).
    Returns u of shape (j_max+1, n, n) with column m the coefficients of
    the solution seeded in channel m:

        (j+1)(2 lam + j + 1) u_{j+1} = 2 sum_l vl_l u_{j-l} - 2 E u_{j-1}
    """
    n = vl.shape[1]
    u = np.zeros((j_max + 1, n, n), np.complex128)
    for m in range(n):
        u[0, m, m] = 1.0 + 0.0j
    for j in range(j_max):
        den = (j + 1.0) * (2.0 * lam + j + 1.0)
        for a in range(n):
            for b in range(n):
                acc = 0.0 + 0.0j
                for l in range(j + 1):
                    for m in range(n):
                        acc += vl[l, a, m] * u[j - l, m, b]
                acc *= 2.0
                if j >= 1:
                    acc -= 2.0 * energy * u[j - 1, a, b]
                u[j + 1, a, b] = acc / den
    return u
