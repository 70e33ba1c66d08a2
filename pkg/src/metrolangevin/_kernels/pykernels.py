"""Pure-Python chain kernels, the fallback backend.

These mirror the compiled kernels in _speedups.pyx operation for
operation: same signatures, same arithmetic order (Horner polynomial
evaluation, identical update formulas), same blow-up semantics.  All
randomness is precomputed by the caller; kernels are deterministic
array-in/array-out functions.

Method ids: overdamped 0=ULA, 1=MALA, 2=MALTA; inertial 0=GLA, 1=MAGLA.
Return value of every kernel is 0 on completion or the 1-based index of
the step whose post-step state tripped the blow-up guard (non-finite
values count as tripped).
"""

from __future__ import annotations

import math

import numpy as np


def _polyval(c, x):
    """Horner evaluation of ascending coefficients c at each entry of x."""
    acc = np.zeros_like(x)
    for k in range(len(c) - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


def _energy(u_c, x) -> float:
    return float(np.sum(_polyval(u_c, x)))


def _within_guard(x, guard) -> bool:
    m = np.max(np.abs(x))
    return bool(m <= guard)  # NaN compares false, so NaN states trip the guard


def _alpha_from_log(log_alpha: float) -> float:
    alpha = math.exp(min(log_alpha, 0.0))
    if math.isnan(alpha):
        return 0.0  # inf - inf in the exponent: reject rather than propagate NaN
    return alpha


def _overdamped_propose(method, u_c, du_c, beta, h, x, ux, gx, dw_k):
    """One proposal plus its acceptance probability (1.0 for ULA)."""
    sigma = math.sqrt(2.0 / beta)
    if method == 2:
        nx = math.sqrt(float(gx @ gx))
        tx = h * gx / max(1.0, h * nx)
    else:
        tx = h * gx
    y = x - tx + sigma * dw_k
    gy = _polyval(du_c, y)
    if method == 0:
        return y, 1.0, 0.0, gy
    uy = _energy(u_c, y)
    if method == 1:
        g_val = (uy - ux
                 - 0.5 * float((gy + gx) @ (y - x))
                 + 0.25 * h * (float(gy @ gy) - float(gx @ gx)))
        log_alpha = -beta * g_val
    else:
        ny = math.sqrt(float(gy @ gy))
        ty = h * gy / max(1.0, h * ny)
        back = x - y + ty
        fwd = y - x + tx
        log_alpha = (-beta * (uy - ux)
                     - beta / (4.0 * h) * (float(back @ back) - float(fwd @ fwd)))
    return y, _alpha_from_log(log_alpha), uy, gy


def overdamped_chain(method, u_c, du_c, beta, h, guard, x0, dw, zetas,
                     states, proposals, alphas, accepted) -> int:
    n_steps = dw.shape[0]
    x = np.array(x0, dtype=float)
    states[0] = x
    ux = _energy(u_c, x)
    gx = _polyval(du_c, x)
    for k in range(n_steps):
        y, alpha, uy, gy = _overdamped_propose(method, u_c, du_c, beta, h, x, ux, gx, dw[k])
        proposals[k] = y
        alphas[k] = alpha
        if method == 0:
            take = True
        else:
            take = zetas[k] < alpha
        accepted[k] = take
        if take:
            x, ux, gx = y, uy, gy
        states[k + 1] = x
        if not _within_guard(x, guard):
            return k + 1
    return 0


def overdamped_terminal(method, u_c, du_c, beta, h, guard, x, dw, zetas) -> int:
    n_steps = dw.shape[0]
    cur = np.asarray(x, dtype=float)
    ux = _energy(u_c, cur)
    gx = _polyval(du_c, cur)
    for k in range(n_steps):
        y, alpha, uy, gy = _overdamped_propose(method, u_c, du_c, beta, h, cur, ux, gx, dw[k])
        if method == 0 or zetas[k] < alpha:
            cur[:] = y
            ux, gx = uy, gy
        if not _within_guard(cur, guard):
            return k + 1
    return 0


def _inertial_propose(u_c, du_c, h, minv, decay_half, q, p, g, xi1_k, xi2_k):
    """One GLA step psi_{h/2} o theta_h o psi_{h/2} from (q, p) with grad U(q) = g."""
    p_half = decay_half * p + xi1_k
    qn = q + h * minv * p_half - 0.5 * h * h * minv * g
    gn = _polyval(du_c, qn)
    p_kick = p_half - 0.5 * h * (g + gn)
    pn = decay_half * p_kick + xi2_k
    return qn, pn, gn


def _verlet_delta_e(u_c, beta, h, minv, q, qn, uq, un, g, gn) -> float:
    return (un - uq
            - 0.5 * float((gn + g) @ (qn - q))
            + h * h / 8.0 * (float((minv * gn) @ gn) - float((minv * g) @ g)))


def inertial_chain(method, u_c, du_c, beta, h, guard, minv, decay_half,
                   q0, p0, xi1, xi2, zetas,
                   qs, ps, q_props, p_props, alphas, accepted) -> int:
    n_steps = xi1.shape[0]
    q = np.array(q0, dtype=float)
    p = np.array(p0, dtype=float)
    qs[0] = q
    ps[0] = p
    uq = _energy(u_c, q) if method else 0.0
    g = _polyval(du_c, q)
    for k in range(n_steps):
        qn, pn, gn = _inertial_propose(u_c, du_c, h, minv, decay_half, q, p, g, xi1[k], xi2[k])
        q_props[k] = qn
        p_props[k] = pn
        if method == 0:
            alpha, take, un = 1.0, True, 0.0
        else:
            un = _energy(u_c, qn)
            de = _verlet_delta_e(u_c, beta, h, minv, q, qn, uq, un, g, gn)
            alpha = _alpha_from_log(-beta * de)
            take = zetas[k] < alpha
        alphas[k] = alpha
        accepted[k] = take
        if take:
            q, p, g, uq = qn, pn, gn, un
        else:
            p = -p
        qs[k + 1] = q
        ps[k + 1] = p
        if not (_within_guard(q, guard) and _within_guard(p, guard)):
            return k + 1
    return 0


def inertial_terminal(method, u_c, du_c, beta, h, guard, minv, decay_half,
                      q, p, xi1, xi2, zetas) -> int:
    n_steps = xi1.shape[0]
    qc = np.asarray(q, dtype=float)
    pc = np.asarray(p, dtype=float)
    uq = _energy(u_c, qc) if method else 0.0
    g = _polyval(du_c, qc)
    for k in range(n_steps):
        qn, pn, gn = _inertial_propose(u_c, du_c, h, minv, decay_half, qc, pc, g, xi1[k], xi2[k])
        if method == 0:
            take, un = True, 0.0
        else:
            un = _energy(u_c, qn)
            de = _verlet_delta_e(u_c, beta, h, minv, qc, qn, uq, un, g, gn)
            take = zetas[k] < _alpha_from_log(-beta * de)
        if take:
            qc[:] = qn
            pc[:] = pn
            g = gn
            uq = un
        else:
            pc[:] = -pc
        if not (_within_guard(qc, guard) and _within_guard(pc, guard)):
            return k + 1
    return 0
