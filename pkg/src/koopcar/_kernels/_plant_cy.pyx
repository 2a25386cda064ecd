# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled vehicle-integration kernel. Twin of plant_py.py; keep in lockstep."""

from libc.math cimport atan, cos, fabs, fmod, sin, tanh, M_PI

import numpy as np


cdef double GRAVITY = 9.81
cdef double HALF_PI = M_PI / 2.0
cdef double TWO_OVER_PI = 2.0 / M_PI
cdef double TWO_PI = 2.0 * M_PI


cdef inline void _deriv(double x, double y, double psi, double vx, double vy,
                        double r, double swa, double eng, double* p,
                        double* ds) nogil:
    cdef double delta = swa / p[8]
    cdef double vx_c = vx if vx > p[13] else p[13]
    cdef double alpha_f = atan((vy + p[2] * r) / vx_c) - delta
    cdef double alpha_r = atan((vy - p[3] * r) / vx_c)
    cdef double fyf = -p[6] * TWO_OVER_PI * atan(HALF_PI * p[4] * alpha_f / p[6])
    cdef double fyr = -p[7] * TWO_OVER_PI * atan(HALF_PI * p[5] * alpha_r / p[7])

    cdef double sgn = tanh(vx / p[14])
    cdef double fx_cmd
    if eng > 0.0:
        fx_cmd = p[9] * eng
    else:
        fx_cmd = p[10] * eng * sgn
    cdef double fx = fx_cmd - p[11] * vx * fabs(vx) - p[12] * p[0] * GRAVITY * sgn

    cdef double cos_d = cos(delta)
    ds[0] = vx * cos(psi) - vy * sin(psi)
    ds[1] = vx * sin(psi) + vy * cos(psi)
    ds[2] = r
    ds[3] = fx / p[0] + r * vy
    ds[4] = (fyf * cos_d + fyr) / p[0] - r * vx
    ds[5] = (p[2] * fyf * cos_d - p[3] * fyr) / p[1]


cdef inline double _wrap(double a) nogil:
    cdef double r = fmod(a, TWO_PI)
    if r > M_PI:
        r -= TWO_PI
    elif r <= -M_PI:
        r += TWO_PI
    return r


def rollout(double[::1] s0, double[:, ::1] controls, double[::1] params_vec,
            double dt, int n_sub):
    """Integrate n_sub RK4 substeps per control sample; row 0 is the initial state."""
    cdef Py_ssize_t T = controls.shape[0]
    out_arr = np.empty((T + 1, 6), dtype=float)
    cdef double[:, ::1] out = out_arr
    cdef double x = s0[0], y = s0[1], psi = s0[2]
    cdef double vx = s0[3], vy = s0[4], r = s0[5]
    cdef double p[15]
    cdef Py_ssize_t i, k, j
    for i in range(15):
        p[i] = params_vec[i]
    cdef double h = dt / n_sub
    cdef double swa, eng
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = psi
    out[0, 3] = vx
    out[0, 4] = vy
    out[0, 5] = r
    with nogil:
        for k in range(T):
            swa = controls[k, 0]
            eng = controls[k, 1]
            for j in range(n_sub):
                _deriv(x, y, psi, vx, vy, r, swa, eng, p, k1)
                _deriv(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1],
                       psi + 0.5 * h * k1[2], vx + 0.5 * h * k1[3],
                       vy + 0.5 * h * k1[4], r + 0.5 * h * k1[5],
                       swa, eng, p, k2)
                _deriv(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1],
                       psi + 0.5 * h * k2[2], vx + 0.5 * h * k2[3],
                       vy + 0.5 * h * k2[4], r + 0.5 * h * k2[5],
                       swa, eng, p, k3)
                _deriv(x + h * k3[0], y + h * k3[1], psi + h * k3[2],
                       vx + h * k3[3], vy + h * k3[4], r + h * k3[5],
                       swa, eng, p, k4)
                x = x + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
                y = y + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
                psi = psi + (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
                vx = vx + (h / 6.0) * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
                vy = vy + (h / 6.0) * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
                r = r + (h / 6.0) * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5])
            psi = _wrap(psi)
            out[k + 1, 0] = x
            out[k + 1, 1] = y
            out[k + 1, 2] = psi
            out[k + 1, 3] = vx
            out[k + 1, 4] = vy
            out[k + 1, 5] = r
    return out_arr
