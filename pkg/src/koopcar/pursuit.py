"""Geometric pure-pursuit steering with a proportional speed loop.

Baseline tracker for comparison against the predictive controller. Steering
chases a lookahead point on the reference path through the classic curvature
relation kappa = 2 sin(alpha) / L_d; speed is a saturated proportional law on
the forward-velocity error. No preview, no constraints, no model.
"""

from __future__ import annotations

import math

import numpy as np

from . import plant as plant_mod
from .data import Episode
from .errors import DataError
from .mpc import DIVERGENCE_RADIUS, TrackingLog


def lookahead_point(path_xy: np.ndarray, position: np.ndarray,
                    lookahead: float) -> np.ndarray:
    """First path point at least `lookahead` ahead of the nearest point.

    Search runs forward from the nearest path point so loops and
    self-crossings resolve in path order; falls back to the last point when
    the path ends inside the lookahead circle.
    """
    path_xy = np.asarray(path_xy, dtype=float).reshape(-1, 2)
    if len(path_xy) == 0:
        raise DataError("empty path")
    d = np.hypot(path_xy[:, 0] - position[0], path_xy[:, 1] - position[1])
    start = int(np.argmin(d))
    ahead = np.nonzero(d[start:] >= lookahead)[0]
    idx = start + int(ahead[0]) if len(ahead) else len(path_xy) - 1
    return path_xy[idx]


def pure_pursuit(state, path_xy, v_ref: float,
                 params: plant_mod.VehicleParams | None = None,
                 k_lookahead: float = 0.2, k_speed: float = 0.5,
                 min_lookahead: float = 1.0) -> np.ndarray:
    """One control update [steering wheel angle, engine command]."""
    if params is None:
        params = plant_mod.VehicleParams()
    state = np.asarray(state, dtype=float).reshape(6)
    ld = max(k_lookahead * v_ref, min_lookahead)
    target = lookahead_point(path_xy, state[:2], ld)
    alpha = math.atan2(target[1] - state[1], target[0] - state[0]) - state[2]
    alpha = math.atan2(math.sin(alpha), math.cos(alpha))
    kappa = 2.0 * math.sin(alpha) / ld
    wheelbase = params.lf + params.lr
    swa = math.atan(kappa * wheelbase) * params.steer_ratio
    swa = min(max(swa, -plant_mod.SWA_LIMIT), plant_mod.SWA_LIMIT)
    engine = min(max(k_speed * (v_ref - state[3]), -1.0), 1.0)
    return np.array([swa, engine])


def track_pursuit(reference, v_ref: float | None = None,
                  params: plant_mod.VehicleParams | None = None,
                  k_lookahead: float = 0.2, k_speed: float = 0.5,
                  initial_state=None) -> TrackingLog:
    """Closed-loop pure pursuit over a time-indexed reference.

    v_ref defaults to the per-step reference forward velocity. Output uses
    the same log layout as the predictive tracker; the QP columns are zero.
    """
    if isinstance(reference, Episode):
        t_ref, ref_states = reference.t, reference.states
    else:
        t_ref, ref_states = reference
    t_ref = np.asarray(t_ref, dtype=float)
    ref_states = np.asarray(ref_states, dtype=float).reshape(-1, 6)
    n_steps = len(t_ref)
    if params is None:
        params = plant_mod.VehicleParams()
    path_xy = ref_states[:, :2]

    state = ref_states[0].copy() if initial_state is None else \
        np.asarray(initial_state, dtype=float).copy()
    log_state = np.empty((n_steps, 6))
    log_u = np.empty((n_steps, 2))
    diverged = False
    used = n_steps
    for k in range(n_steps):
        v_k = float(ref_states[k, 3]) if v_ref is None else v_ref
        control = pure_pursuit(state, path_xy, v_k, params,
                               k_lookahead=k_lookahead, k_speed=k_speed)
        log_state[k] = state
        log_u[k] = control
        err = math.hypot(state[0] - ref_states[k, 0], state[1] - ref_states[k, 1])
        if err > DIVERGENCE_RADIUS:
            diverged = True
            used = k + 1
            break
        if k < n_steps - 1:
            state = plant_mod.step(state, control, params)
    zeros = np.zeros(used)
    return TrackingLog(t=t_ref[:used], ref=ref_states[:used],
                       state=log_state[:used], control=log_u[:used],
                       eps=zeros, qp_iters=zeros.astype(int), solve_ms=zeros,
                       diverged=diverged)
