"""Nonlinear planar vehicle simulator.

Dynamic bicycle model with arctangent-saturating lateral tire forces,
quadratic aero drag and rolling resistance, integrated with fixed-substep
RK4 under a 10 ms sample clock. Stands in for a full vehicle-dynamics
package as the data source and closed-loop plant.

State order: x, y, psi, vx, vy, r
  x, y   global position [m]
  psi    yaw, wrapped to (-pi, pi]
  vx, vy body-frame velocities [m/s]
  r      yaw rate [rad/s]
Control order: swa, engine
  swa    steering wheel angle [rad], road wheel angle = swa / steer_ratio
  engine signed fraction in [-1, 1]: + drives (fraction of max drive force),
         - brakes (fraction of max brake force, applied against motion)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import plant_rollout
from .errors import NumericError
from .frames import wrap_angle

GRAVITY = 9.81
SWA_LIMIT = 7.85  # rad, steering wheel angle bound


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1500.0          # kg
    inertia_z: float = 2500.0     # kg m^2
    lf: float = 1.2               # m, CoG to front axle
    lr: float = 1.4               # m, CoG to rear axle
    c_front: float = 80000.0      # N/rad, front cornering stiffness
    c_rear: float = 100000.0      # N/rad, rear cornering stiffness
    sat_front: float = 7100.0     # N, front lateral force saturation
    sat_rear: float = 6100.0      # N, rear lateral force saturation
    steer_ratio: float = 16.0     # steering wheel / road wheel
    max_drive_force: float = 7000.0   # N at engine = +1
    max_brake_force: float = 15000.0  # N at engine = -1
    drag_coeff: float = 7.0       # N s^2/m^2
    roll_coeff: float = 0.015     # rolling resistance, fraction of weight
    v_eps: float = 0.5            # m/s, vx floor inside slip angles
    v_sign_eps: float = 0.1       # m/s, smooth-sign width for brake/rolling
    dt: float = 0.01              # s, sample period
    max_substep: float = 0.001    # s, RK4 substep ceiling

    def as_vector(self) -> np.ndarray:
        """Pack for the integration kernels (layout documented in plant_py)."""
        return np.array([
            self.mass, self.inertia_z, self.lf, self.lr,
            self.c_front, self.c_rear, self.sat_front, self.sat_rear,
            self.steer_ratio, self.max_drive_force, self.max_brake_force,
            self.drag_coeff, self.roll_coeff, self.v_eps, self.v_sign_eps,
        ])

    @property
    def n_substeps(self) -> int:
        return max(1, math.ceil(self.dt / self.max_substep - 1e-12))


def derivatives(state, control, params: VehicleParams) -> np.ndarray:
    """Continuous-time state derivative (reference dynamics, numpy path).

    The integration kernels inline the same expressions; this function is the
    single-step truth used by tests and stays cheap enough for oracles.
    """
    x, y, psi, vx, vy, r = (float(v) for v in state)
    swa, eng = float(control[0]), float(control[1])
    p = params

    delta = swa / p.steer_ratio
    vx_c = vx if vx > p.v_eps else p.v_eps
    alpha_f = math.atan((vy + p.lf * r) / vx_c) - delta
    alpha_r = math.atan((vy - p.lr * r) / vx_c)
    two_over_pi = 2.0 / math.pi
    half_pi = math.pi / 2.0
    fyf = -p.sat_front * two_over_pi * math.atan(half_pi * p.c_front * alpha_f / p.sat_front)
    fyr = -p.sat_rear * two_over_pi * math.atan(half_pi * p.c_rear * alpha_r / p.sat_rear)

    sgn = math.tanh(vx / p.v_sign_eps)
    if eng > 0.0:
        fx_cmd = p.max_drive_force * eng
    else:
        fx_cmd = p.max_brake_force * eng * sgn
    fx = fx_cmd - p.drag_coeff * vx * abs(vx) - p.roll_coeff * p.mass * GRAVITY * sgn

    cos_d = math.cos(delta)
    return np.array([
        vx * math.cos(psi) - vy * math.sin(psi),
        vx * math.sin(psi) + vy * math.cos(psi),
        r,
        fx / p.mass + r * vy,
        (fyf * cos_d + fyr) / p.mass - r * vx,
        (p.lf * fyf * cos_d - p.lr * fyr) / p.inertia_z,
    ])


def _check_finite(state, control):
    if not (np.all(np.isfinite(state)) and np.all(np.isfinite(control))):
        raise NumericError("non-finite state or control passed to the plant")


def step(state, control, params: VehicleParams | None = None) -> np.ndarray:
    """Advance one sample period; psi of the result is wrapped to (-pi, pi]."""
    if params is None:
        params = VehicleParams()
    state = np.asarray(state, dtype=float)
    control = np.asarray(control, dtype=float)
    _check_finite(state, control)
    traj = plant_rollout(np.ascontiguousarray(state),
                         np.ascontiguousarray(control.reshape(1, 2)),
                         params.as_vector(), params.dt, params.n_substeps)
    return traj[1]


def rollout(state, controls, params: VehicleParams | None = None) -> np.ndarray:
    """Apply a control sequence (T, 2); returns (T + 1, 6) including row 0 = initial.

    Row k is the state after k controls, so rows pair with the control that
    produced the transition out of them.
    """
    if params is None:
        params = VehicleParams()
    state = np.asarray(state, dtype=float)
    controls = np.asarray(controls, dtype=float).reshape(-1, 2)
    _check_finite(state, controls)
    return plant_rollout(np.ascontiguousarray(state),
                         np.ascontiguousarray(controls),
                         params.as_vector(), params.dt, params.n_substeps)


def excite(duration: int, seed: int, params: VehicleParams | None = None) -> np.ndarray:
    """Bounded open-loop excitation, (duration, 2) controls at the sample clock.

    Sum of sinusoids plus a low-pass-filtered random walk on each channel,
    clipped to the control bounds. Gains are tuned so a rollout from rest
    keeps vx in [0, 27], |vy| <= 1.7 and |r| <= 1.2 while sweeping low and
    high speed and both steering directions. Deterministic per seed.
    """
    if params is None:
        params = VehicleParams()
    if duration < 0:
        raise ValueError("duration must be non-negative")
    rng = np.random.default_rng(seed)
    t = np.arange(duration) * params.dt

    # engine: positive bias so speed sweeps up from rest, slow dips into braking;
    # upper clip keeps the terminal speed under the vx envelope
    eng = np.full(duration, rng.uniform(0.18, 0.3))
    for lo, hi, amp in ((0.008, 0.02, 0.38), (0.05, 0.12, 0.12)):
        f = rng.uniform(lo, hi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        a = rng.uniform(0.6, 1.0) * amp
        eng += a * np.sin(2.0 * math.pi * f * t + phase)
    eng += _lp_walk(duration, rng, tau_steps=500, std=0.1)
    eng = np.clip(eng, -0.8, 0.7)

    # steering: sinusoid mix shaped to ~unit amplitude, then scheduled by a
    # longitudinal speed proxy so the lateral demand stays below tire
    # saturation at speed (keeps |vy|, |r| inside the envelope)
    shape = np.zeros(duration)
    for lo, hi, amp in ((0.02, 0.06, 1.0), (0.08, 0.2, 0.5), (0.25, 0.5, 0.2)):
        f = rng.uniform(lo, hi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        a = rng.uniform(0.5, 1.0) * amp
        shape += a * np.sin(2.0 * math.pi * f * t + phase)
    shape += _lp_walk(duration, rng, tau_steps=300, std=0.4)
    shape = np.clip(shape, -1.7, 1.7) / 1.7

    v_pred = _speed_proxy(eng, params)
    ay_max = rng.uniform(4.0, 5.5)  # m/s^2 lateral demand ceiling
    wheelbase = params.lf + params.lr
    cap = params.steer_ratio * wheelbase * ay_max / np.maximum(v_pred, 2.5) ** 2
    swa = shape * np.minimum(cap, SWA_LIMIT)

    return np.column_stack([np.clip(swa, -SWA_LIMIT, SWA_LIMIT), eng])


def _speed_proxy(eng: np.ndarray, params: VehicleParams) -> np.ndarray:
    """Forward-Euler longitudinal speed prediction from an engine profile.

    Only used to schedule excitation amplitudes, so modest accuracy is fine.
    """
    v = np.empty(len(eng))
    vk = 0.0
    rr = params.roll_coeff * params.mass * GRAVITY
    for i, e in enumerate(eng):
        fx = params.max_drive_force * e if e > 0.0 else params.max_brake_force * e * math.tanh(vk / params.v_sign_eps)
        fx -= params.drag_coeff * vk * abs(vk) + rr * math.tanh(vk / params.v_sign_eps)
        vk = max(0.0, vk + params.dt * fx / params.mass)
        v[i] = vk
    return v


def _lp_walk(n: int, rng: np.random.Generator, tau_steps: float, std: float) -> np.ndarray:
    """First-order low-pass filtered white noise with stationary std ~ std."""
    if n == 0:
        return np.zeros(0)
    a = math.exp(-1.0 / tau_steps)
    drive = rng.standard_normal(n)
    scale = std * math.sqrt(1.0 - a * a)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = a * acc + scale * drive[i]
        out[i] = acc
    return out
