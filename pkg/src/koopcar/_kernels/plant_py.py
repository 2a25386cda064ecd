"""Pure-Python twin of the compiled vehicle-integration kernel.

Keep this file and _plant_cy.pyx in lockstep: same parameter packing, same
expression order, same libm calls, so both backends produce bitwise-identical
trajectories (the compiled module is built with FP contraction disabled).

Parameter vector layout (see plant.VehicleParams.as_vector):
  0 mass  1 inertia_z  2 lf  3 lr  4 c_front  5 c_rear  6 sat_front
  7 sat_rear  8 steer_ratio  9 max_drive_force  10 max_brake_force
  11 drag_coeff  12 roll_coeff  13 v_eps  14 v_sign_eps
"""

import math

import numpy as np

GRAVITY = 9.81
HALF_PI = math.pi / 2.0
TWO_OVER_PI = 2.0 / math.pi
TWO_PI = 2.0 * math.pi


def _deriv(x, y, psi, vx, vy, r, swa, eng, p):
    delta = swa / p[8]

    vx_c = vx if vx > p[13] else p[13]
    alpha_f = math.atan((vy + p[2] * r) / vx_c) - delta
    alpha_r = math.atan((vy - p[3] * r) / vx_c)
    fyf = -p[6] * TWO_OVER_PI * math.atan(HALF_PI * p[4] * alpha_f / p[6])
    fyr = -p[7] * TWO_OVER_PI * math.atan(HALF_PI * p[5] * alpha_r / p[7])

    sgn = math.tanh(vx / p[14])
    if eng > 0.0:
        fx_cmd = p[9] * eng
    else:
        fx_cmd = p[10] * eng * sgn
    fx = fx_cmd - p[11] * vx * abs(vx) - p[12] * p[0] * GRAVITY * sgn

    cos_d = math.cos(delta)
    dx = vx * math.cos(psi) - vy * math.sin(psi)
    dy = vx * math.sin(psi) + vy * math.cos(psi)
    dpsi = r
    dvx = fx / p[0] + r * vy
    dvy = (fyf * cos_d + fyr) / p[0] - r * vx
    dr = (p[2] * fyf * cos_d - p[3] * fyr) / p[1]
    return dx, dy, dpsi, dvx, dvy, dr


def _wrap(a):
    r = math.fmod(a, TWO_PI)
    if r > math.pi:
        r -= TWO_PI
    elif r <= -math.pi:
        r += TWO_PI
    return r


def rollout(s0, controls, params_vec, dt, n_sub):
    """Integrate n_sub RK4 substeps per control sample.

    Returns (T+1, 6) with the initial state in row 0.
    """
    T = controls.shape[0]
    out = np.empty((T + 1, 6), dtype=float)
    x, y, psi, vx, vy, r = (float(s0[i]) for i in range(6))
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = psi
    out[0, 3] = vx
    out[0, 4] = vy
    out[0, 5] = r
    p = tuple(float(v) for v in params_vec)
    h = dt / n_sub
    for k in range(T):
        swa = float(controls[k, 0])
        eng = float(controls[k, 1])
        for _ in range(n_sub):
            k1 = _deriv(x, y, psi, vx, vy, r, swa, eng, p)
            k2 = _deriv(
                x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], psi + 0.5 * h * k1[2],
                vx + 0.5 * h * k1[3], vy + 0.5 * h * k1[4], r + 0.5 * h * k1[5],
                swa, eng, p)
            k3 = _deriv(
                x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], psi + 0.5 * h * k2[2],
                vx + 0.5 * h * k2[3], vy + 0.5 * h * k2[4], r + 0.5 * h * k2[5],
                swa, eng, p)
            k4 = _deriv(
                x + h * k3[0], y + h * k3[1], psi + h * k3[2],
                vx + h * k3[3], vy + h * k3[4], r + h * k3[5],
                swa, eng, p)
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
    return out
