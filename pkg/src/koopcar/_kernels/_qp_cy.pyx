# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled ADMM iteration kernel. Twin of qp_py.py (same update order)."""

from libc.math cimport fabs

import numpy as np


def admm_iterate(double[:, ::1] Minv, double[:, ::1] P, double[:, ::1] C,
                 double[::1] q, double[::1] l, double[::1] u,
                 double[::1] x, double[::1] z, double[::1] y,
                 double sigma, double rho, double alpha,
                 int max_iter, int check_every, double eps_abs, double eps_rel):
    """Run ADMM updates in place on x, z, y; returns (iters, pri_res, dua_res)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = z.shape[0]
    cdef Py_ssize_t i, j, it
    cdef double pri = 0.0, dua = 0.0
    cdef double acc, t, v, zn, eps_pri, eps_dua
    cdef double max_cx, max_z, max_px, max_cty, max_q
    cdef int iters = 0, converged

    rhs_arr = np.empty(n)
    xt_arr = np.empty(n)
    zt_arr = np.empty(m)
    work_arr = np.empty(max(m, n) if m > 0 else n)
    cdef double[::1] rhs = rhs_arr
    cdef double[::1] xt = xt_arr
    cdef double[::1] zt = zt_arr
    cdef double[::1] work = work_arr

    max_q = 0.0
    for i in range(n):
        if fabs(q[i]) > max_q:
            max_q = fabs(q[i])

    with nogil:
        for it in range(1, max_iter + 1):
            iters = it
            # rhs = sigma*x - q + C'(rho*z - y)
            for i in range(n):
                rhs[i] = sigma * x[i] - q[i]
            for j in range(m):
                t = rho * z[j] - y[j]
                for i in range(n):
                    rhs[i] += C[j, i] * t
            # xt = Minv @ rhs
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += Minv[i, j] * rhs[j]
                xt[i] = acc
            # zt = C @ xt
            for j in range(m):
                acc = 0.0
                for i in range(n):
                    acc += C[j, i] * xt[i]
                zt[j] = acc
            # relaxed updates
            for i in range(n):
                x[i] = alpha * xt[i] + (1.0 - alpha) * x[i]
            for j in range(m):
                v = alpha * zt[j] + (1.0 - alpha) * z[j] + y[j] / rho
                if v < l[j]:
                    zn = l[j]
                elif v > u[j]:
                    zn = u[j]
                else:
                    zn = v
                y[j] += rho * (alpha * zt[j] + (1.0 - alpha) * z[j] - zn)
                z[j] = zn

            if it % check_every == 0 or it == max_iter:
                # primal: max|Cx - z|, with norms for the relative tolerance
                pri = 0.0
                max_cx = 0.0
                max_z = 0.0
                for j in range(m):
                    acc = 0.0
                    for i in range(n):
                        acc += C[j, i] * x[i]
                    work[j] = acc
                    if fabs(acc) > max_cx:
                        max_cx = fabs(acc)
                    if fabs(z[j]) > max_z:
                        max_z = fabs(z[j])
                    if fabs(acc - z[j]) > pri:
                        pri = fabs(acc - z[j])
                # dual: max|Px + q + C'y|
                dua = 0.0
                max_px = 0.0
                max_cty = 0.0
                for i in range(n):
                    acc = 0.0
                    for j in range(n):
                        acc += P[i, j] * x[j]
                    if fabs(acc) > max_px:
                        max_px = fabs(acc)
                    t = 0.0
                    for j in range(m):
                        t += C[j, i] * y[j]
                    if fabs(t) > max_cty:
                        max_cty = fabs(t)
                    if fabs(acc + q[i] + t) > dua:
                        dua = fabs(acc + q[i] + t)
                eps_pri = eps_abs + eps_rel * (max_cx if max_cx > max_z else max_z)
                t = max_px if max_px > max_cty else max_cty
                if max_q > t:
                    t = max_q
                eps_dua = eps_abs + eps_rel * t
                converged = 1 if (pri <= eps_pri and dua <= eps_dua) else 0
                if converged:
                    break
    return iters, pri, dua
