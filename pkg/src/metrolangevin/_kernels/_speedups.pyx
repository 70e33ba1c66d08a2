# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain kernels.

Semantics, signatures and arithmetic order mirror pykernels.py; that
module is the reference implementation and the import-time fallback.
"""

from libc.math cimport exp, fabs, fmax, isnan, sqrt

import numpy as np


cdef inline double _poly(const double[::1] c, double x) nogil:
    cdef Py_ssize_t k = c.shape[0]
    cdef double acc = 0.0
    while k > 0:
        k -= 1
        acc = acc * x + c[k]
    return acc


cdef inline double _alpha_from_log(double log_alpha) nogil:
    cdef double a
    if log_alpha > 0.0:
        log_alpha = 0.0
    a = exp(log_alpha)
    if isnan(a):
        return 0.0
    return a


cdef int _overdamped_core(int method, const double[::1] u_c, const double[::1] du_c,
                          double beta, double h, double guard,
                          double[::1] x, const double[:, ::1] dw, const double[::1] zetas,
                          double[:, ::1] states, double[:, ::1] proposals,
                          double[::1] alphas, unsigned char[::1] accepted,
                          double[::1] y, double[::1] gx, double[::1] gy,
                          bint store) nogil:
    cdef Py_ssize_t n_steps = dw.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef double sigma = sqrt(2.0 / beta)
    cdef Py_ssize_t k, i
    cdef double ux = 0.0, uy = 0.0
    cdef double nx, ny, denom, denom_y, dot_sum, gg_y, gg_x, back2, fwd2, val, la, alpha
    cdef bint take

    for i in range(n):
        gx[i] = _poly(du_c, x[i])
    if method != 0:
        for i in range(n):
            ux += _poly(u_c, x[i])
    if store:
        for i in range(n):
            states[0, i] = x[i]

    for k in range(n_steps):
        if method == 2:
            nx = 0.0
            for i in range(n):
                nx += gx[i] * gx[i]
            denom = fmax(1.0, h * sqrt(nx))
        else:
            denom = 1.0
        for i in range(n):
            y[i] = x[i] - h * gx[i] / denom + sigma * dw[k, i]
            gy[i] = _poly(du_c, y[i])

        if method == 0:
            alpha = 1.0
            take = True
        else:
            uy = 0.0
            for i in range(n):
                uy += _poly(u_c, y[i])
            if method == 1:
                dot_sum = 0.0
                gg_y = 0.0
                gg_x = 0.0
                for i in range(n):
                    dot_sum += (gy[i] + gx[i]) * (y[i] - x[i])
                    gg_y += gy[i] * gy[i]
                    gg_x += gx[i] * gx[i]
                val = uy - ux - 0.5 * dot_sum + 0.25 * h * (gg_y - gg_x)
                la = -beta * val
            else:
                ny = 0.0
                for i in range(n):
                    ny += gy[i] * gy[i]
                denom_y = fmax(1.0, h * sqrt(ny))
                back2 = 0.0
                fwd2 = 0.0
                for i in range(n):
                    val = x[i] - y[i] + h * gy[i] / denom_y
                    back2 += val * val
                    val = y[i] - x[i] + h * gx[i] / denom
                    fwd2 += val * val
                la = -beta * (uy - ux) - beta / (4.0 * h) * (back2 - fwd2)
            alpha = _alpha_from_log(la)
            take = zetas[k] < alpha

        if store:
            for i in range(n):
                proposals[k, i] = y[i]
            alphas[k] = alpha
            accepted[k] = 1 if take else 0
        if take:
            ux = uy
            for i in range(n):
                x[i] = y[i]
                gx[i] = gy[i]
        if store:
            for i in range(n):
                states[k + 1, i] = x[i]
        for i in range(n):
            if not (fabs(x[i]) <= guard):
                return <int> (k + 1)
    return 0


cdef int _inertial_core(int method, const double[::1] u_c, const double[::1] du_c,
                        double beta, double h, double guard,
                        const double[::1] minv, const double[::1] decay_half,
                        double[::1] q, double[::1] p,
                        const double[:, ::1] xi1, const double[:, ::1] xi2,
                        const double[::1] zetas,
                        double[:, ::1] qs, double[:, ::1] ps,
                        double[:, ::1] q_props, double[:, ::1] p_props,
                        double[::1] alphas, unsigned char[::1] accepted,
                        double[::1] qn, double[::1] pn, double[::1] g,
                        double[::1] gn, double[::1] ph,
                        bint store) nogil:
    cdef Py_ssize_t n_steps = xi1.shape[0]
    cdef Py_ssize_t n = q.shape[0]
    cdef Py_ssize_t k, i
    cdef double uq = 0.0, un = 0.0
    cdef double de, dot_sum, m_y, m_x, alpha
    cdef bint take

    for i in range(n):
        g[i] = _poly(du_c, q[i])
    if method != 0:
        for i in range(n):
            uq += _poly(u_c, q[i])
    if store:
        for i in range(n):
            qs[0, i] = q[i]
            ps[0, i] = p[i]

    for k in range(n_steps):
        for i in range(n):
            ph[i] = decay_half[i] * p[i] + xi1[k, i]
        for i in range(n):
            qn[i] = q[i] + h * minv[i] * ph[i] - 0.5 * h * h * minv[i] * g[i]
            gn[i] = _poly(du_c, qn[i])
        for i in range(n):
            pn[i] = decay_half[i] * (ph[i] - 0.5 * h * (g[i] + gn[i])) + xi2[k, i]

        if method == 0:
            alpha = 1.0
            take = True
            un = 0.0
        else:
            un = 0.0
            for i in range(n):
                un += _poly(u_c, qn[i])
            dot_sum = 0.0
            m_y = 0.0
            m_x = 0.0
            for i in range(n):
                dot_sum += (gn[i] + g[i]) * (qn[i] - q[i])
                m_y += (minv[i] * gn[i]) * gn[i]
                m_x += (minv[i] * g[i]) * g[i]
            de = un - uq - 0.5 * dot_sum + h * h / 8.0 * (m_y - m_x)
            alpha = _alpha_from_log(-beta * de)
            take = zetas[k] < alpha

        if store:
            for i in range(n):
                q_props[k, i] = qn[i]
                p_props[k, i] = pn[i]
            alphas[k] = alpha
            accepted[k] = 1 if take else 0
        if take:
            uq = un
            for i in range(n):
                q[i] = qn[i]
                p[i] = pn[i]
                g[i] = gn[i]
        else:
            for i in range(n):
                p[i] = -p[i]
        if store:
            for i in range(n):
                qs[k + 1, i] = q[i]
                ps[k + 1, i] = p[i]
        for i in range(n):
            if not (fabs(q[i]) <= guard) or not (fabs(p[i]) <= guard):
                return <int> (k + 1)
    return 0


def _vec(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def overdamped_chain(int method, u_c, du_c, double beta, double h, double guard,
                     x0, dw, zetas, states, proposals, alphas, accepted):
    cdef double[::1] x = _vec(x0).copy()
    cdef const double[::1] ucv = _vec(u_c)
    cdef const double[::1] ducv = _vec(du_c)
    cdef const double[:, ::1] dwv = _vec(dw)
    cdef const double[::1] zv = _vec(zetas)
    cdef double[:, ::1] sv = states
    cdef double[:, ::1] pv = proposals
    cdef double[::1] av = alphas
    cdef unsigned char[::1] accv = accepted
    cdef Py_ssize_t n = x.shape[0]
    scratch = np.empty((3, n))
    cdef double[:, ::1] w = scratch
    cdef double[::1] w0 = w[0]
    cdef double[::1] w1 = w[1]
    cdef double[::1] w2 = w[2]
    cdef int res
    with nogil:
        res = _overdamped_core(method, ucv, ducv, beta, h, guard, x, dwv, zv,
                               sv, pv, av, accv, w0, w1, w2, True)
    return res


def overdamped_terminal(int method, u_c, du_c, double beta, double h, double guard,
                        x, dw, zetas):
    cdef double[::1] xv = x
    cdef const double[::1] ucv = _vec(u_c)
    cdef const double[::1] ducv = _vec(du_c)
    cdef const double[:, ::1] dwv = _vec(dw)
    cdef const double[::1] zv = _vec(zetas)
    cdef Py_ssize_t n = xv.shape[0]
    empty2 = np.empty((0, n))
    empty1 = np.empty(0)
    emptyb = np.empty(0, dtype=np.uint8)
    cdef double[:, ::1] e2a = empty2
    cdef double[:, ::1] e2b = empty2
    cdef double[::1] e1 = empty1
    cdef unsigned char[::1] eb = emptyb
    scratch = np.empty((3, n))
    cdef double[:, ::1] w = scratch
    cdef double[::1] w0 = w[0]
    cdef double[::1] w1 = w[1]
    cdef double[::1] w2 = w[2]
    cdef int res
    with nogil:
        res = _overdamped_core(method, ucv, ducv, beta, h, guard, xv, dwv, zv,
                               e2a, e2b, e1, eb, w0, w1, w2, False)
    return res


def inertial_chain(int method, u_c, du_c, double beta, double h, double guard,
                   minv, decay_half, q0, p0, xi1, xi2, zetas,
                   qs, ps, q_props, p_props, alphas, accepted):
    cdef double[::1] q = _vec(q0).copy()
    cdef double[::1] p = _vec(p0).copy()
    cdef const double[::1] ucv = _vec(u_c)
    cdef const double[::1] ducv = _vec(du_c)
    cdef const double[::1] mv = _vec(minv)
    cdef const double[::1] dv = _vec(decay_half)
    cdef const double[:, ::1] x1 = _vec(xi1)
    cdef const double[:, ::1] x2 = _vec(xi2)
    cdef const double[::1] zv = _vec(zetas)
    cdef double[:, ::1] qsv = qs
    cdef double[:, ::1] psv = ps
    cdef double[:, ::1] qpv = q_props
    cdef double[:, ::1] ppv = p_props
    cdef double[::1] av = alphas
    cdef unsigned char[::1] accv = accepted
    cdef Py_ssize_t n = q.shape[0]
    scratch = np.empty((5, n))
    cdef double[:, ::1] w = scratch
    cdef double[::1] w0 = w[0]
    cdef double[::1] w1 = w[1]
    cdef double[::1] w2 = w[2]
    cdef double[::1] w3 = w[3]
    cdef double[::1] w4 = w[4]
    cdef int res
    with nogil:
        res = _inertial_core(method, ucv, ducv, beta, h, guard, mv, dv, q, p,
                             x1, x2, zv, qsv, psv, qpv, ppv, av, accv,
                             w0, w1, w2, w3, w4, True)
    return res


def inertial_terminal(int method, u_c, du_c, double beta, double h, double guard,
                      minv, decay_half, q, p, xi1, xi2, zetas):
    cdef double[::1] qv = q
    cdef double[::1] pv = p
    cdef const double[::1] ucv = _vec(u_c)
    cdef const double[::1] ducv = _vec(du_c)
    cdef const double[::1] mv = _vec(minv)
    cdef const double[::1] dv = _vec(decay_half)
    cdef const double[:, ::1] x1 = _vec(xi1)
    cdef const double[:, ::1] x2 = _vec(xi2)
    cdef const double[::1] zv = _vec(zetas)
    cdef Py_ssize_t n = qv.shape[0]
    empty2 = np.empty((0, n))
    empty1 = np.empty(0)
    emptyb = np.empty(0, dtype=np.uint8)
    cdef double[:, ::1] e2a = empty2
    cdef double[:, ::1] e2b = empty2
    cdef double[:, ::1] e2c = empty2
    cdef double[:, ::1] e2d = empty2
    cdef double[::1] e1 = empty1
    cdef unsigned char[::1] eb = emptyb
    scratch = np.empty((5, n))
    cdef double[:, ::1] w = scratch
    cdef double[::1] w0 = w[0]
    cdef double[::1] w1 = w[1]
    cdef double[::1] w2 = w[2]
    cdef double[::1] w3 = w[3]
    cdef double[::1] w4 = w[4]
    cdef int res
    with nogil:
        res = _inertial_core(method, ucv, ducv, beta, h, guard, mv, dv, qv, pv,
                             x1, x2, zv, e2a, e2b, e2c, e2d, e1, eb,
                             w0, w1, w2, w3, w4, False)
    return res
