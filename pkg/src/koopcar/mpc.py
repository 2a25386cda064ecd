"""Incremental model predictive control over the lifted linear model.

The latent state is augmented with the previous control so the decision
variables are control increments:

    Phi = [phi; u_prev],  Phi_next = AA Phi + BB du,
    AA = [[A, B], [0, I]],  BB = [[B], [I]],  y = CC Phi

with CC the m x (K + n) selector of the leading physical block (the concat
lift embeds the state there, so references never need encoding). Stacking
N_p outputs gives

    Y = SA Phi + SB dU,   SA (i) = CC AA^i,   SB (i, j) = CC AA^(i-j) BB

over N_c increment blocks. The tracking cost with per-step weights Q, R and
a scalar slack eps on the increment bounds condenses to

    J = [dU' eps] [[SB' QQ SB + RR, 0], [0, rho]] [dU; eps]
      + [2 E' QQ SB, 0] [dU; eps],          E = SA Phi - Y_ref

subject to soft increment bounds du_min - eps <= du_i <= du_max + eps,
hard cumulative bounds u_min <= u_prev + sum du <= u_max, and a box on eps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plant as plant_mod
from .data import Episode
from .errors import DataError, LiftModeError, NumericError, QpInputError
from .frames import states_to_local
from .koopman import LatentModel
from .qp import QpProblem, QpSettings, QpWorkspace

TRACKING_HEADER = ("t,x_ref,y_ref,psi_ref,vx_ref,vy_ref,r_ref,"
                   "x,y,psi,vx,vy,r,swa,engine,eps,qp_iters,solve_ms")


@dataclass
class MpcConfig:
    horizon_pred: int = 30      # N_p
    horizon_ctrl: int = 30      # N_c <= N_p
    q_weight: float = 1000.0    # output tracking weight (Q = q I_m)
    r_weight: float = 5.0       # increment weight (R = r I_n)
    rho_slack: float = 10.0
    u_min: float = -1.0         # normalized control box, both channels
    u_max: float = 1.0
    du_min: float = -0.5
    du_max: float = 0.5
    eps_min: float = 0.0
    eps_max: float = 100.0

    def __post_init__(self):
        if self.horizon_ctrl < 1 or self.horizon_pred < self.horizon_ctrl:
            raise QpInputError("need 1 <= N_c <= N_p")
        if self.q_weight <= 0 or self.r_weight <= 0 or self.rho_slack <= 0:
            raise QpInputError("weights must be positive")
        if self.u_min > self.u_max or self.du_min > self.du_max \
                or self.eps_min > self.eps_max:
            raise QpInputError("crossed bounds in MPC config")


@dataclass
class AugmentedModel:
    AA: np.ndarray   # (K+n, K+n)
    BB: np.ndarray   # (K+n, n)
    CC: np.ndarray   # (m, K+n)
    m: int
    n: int
    K: int


def augment(model: LatentModel) -> AugmentedModel:
    if model.lift_mode != "concat":
        raise LiftModeError("control needs the physical block of the concat lift")
    K, n, m = model.latent_dim, model.n, model.m
    A = model.transition()
    AA = np.zeros((K + n, K + n))
    AA[:K, :K] = A
    AA[:K, K:] = model.B
    AA[K:, K:] = np.eye(n)
    BB = np.vstack([model.B, np.eye(n)])
    CC = np.zeros((m, K + n))
    CC[:, :m] = np.eye(m)
    return AugmentedModel(AA=AA, BB=BB, CC=CC, m=m, n=n, K=K)


def build_prediction(am: AugmentedModel, n_pred: int, n_ctrl: int):
    """Stacked output prediction matrices (SA, SB) over the horizons."""
    if n_ctrl < 1 or n_pred < n_ctrl:
        raise QpInputError("need 1 <= N_c <= N_p")
    m, n = am.m, am.n
    dim = am.AA.shape[0]
    SA = np.empty((m * n_pred, dim))
    SB = np.zeros((m * n_pred, n * n_ctrl))
    # CC AA^i via running product; row block i-1 holds power i
    cpow = am.CC.copy()
    for i in range(1, n_pred + 1):
        cpow = cpow @ am.AA
        SA[(i - 1) * m: i * m] = cpow
    # SB block (i, j) = CC AA^(i-j) BB for i >= j (1-indexed blocks)
    cab = [am.CC @ am.BB]  # CC AA^0 BB
    cpow = am.CC.copy()
    for _ in range(n_pred - 1):
        cpow = cpow @ am.AA
        cab.append(cpow @ am.BB)
    for i in range(1, n_pred + 1):
        for j in range(1, min(i, n_ctrl) + 1):
            SB[(i - 1) * m: i * m, (j - 1) * n: j * n] = cab[i - j]
    return SA, SB


def build_qp(am: AugmentedModel, cfg: MpcConfig, phi_aug: np.ndarray,
             y_ref: np.ndarray, u_prev: np.ndarray,
             prediction=None) -> QpProblem:
    """Condensed QP over z = [dU; eps] for one control step."""
    n_pred, n_ctrl = cfg.horizon_pred, cfg.horizon_ctrl
    m, n = am.m, am.n
    y_ref = np.asarray(y_ref, dtype=float)
    if y_ref.shape != (n_pred, m):
        raise QpInputError(f"reference must be ({n_pred}, {m})")
    SA, SB = build_prediction(am, n_pred, n_ctrl) if prediction is None else prediction

    Q = cfg.q_weight * np.eye(m)
    R = cfg.r_weight * np.eye(n)
    QQ_SB = np.kron(np.eye(n_pred), Q) @ SB
    nu = n * n_ctrl
    H = np.zeros((nu + 1, nu + 1))
    H[:nu, :nu] = SB.T @ QQ_SB + np.kron(np.eye(n_ctrl), R)
    H[nu, nu] = cfg.rho_slack
    err = SA @ np.asarray(phi_aug, dtype=float) - y_ref.reshape(-1)
    g = np.concatenate([2.0 * (err @ QQ_SB), [0.0]])

    # soft increment bounds: du_i - eps <= du_max, -du_i - eps <= -du_min
    eye_u = np.eye(nu)
    ones = np.ones((nu, 1))
    A_soft = np.vstack([np.hstack([eye_u, -ones]), np.hstack([-eye_u, -ones])])
    b_soft = np.concatenate([np.full(nu, cfg.du_max), np.full(nu, -cfg.du_min)])
    # hard cumulative bounds: u_min <= u_prev + sum_{j<=i} du_j <= u_max
    T = np.kron(np.tril(np.ones((n_ctrl, n_ctrl))), np.eye(n))
    T = np.hstack([T, np.zeros((nu, 1))])
    u_prev = np.asarray(u_prev, dtype=float).reshape(n)
    stack_prev = np.tile(u_prev, n_ctrl)
    A_in = np.vstack([A_soft, T, -T])
    b_in = np.concatenate([b_soft,
                           np.full(nu, cfg.u_max) - stack_prev,
                           stack_prev - np.full(nu, cfg.u_min)])
    lb = np.concatenate([np.full(nu, -np.inf), [cfg.eps_min]])
    ub = np.concatenate([np.full(nu, np.inf), [cfg.eps_max]])
    return QpProblem(H=H, g=g, A_in=A_in, b_in=b_in, lb=lb, ub=ub)


@dataclass
class StepInfo:
    eps: float
    qp_iters: int
    solve_ms: float
    u_norm: np.ndarray
    status: str


class MpcController:
    """Receding-horizon tracker; caches prediction matrices and QP factorization."""

    def __init__(self, model: LatentModel, cfg: MpcConfig | None = None,
                 qp_settings: QpSettings | None = None):
        self.model = model
        self.cfg = cfg or MpcConfig()
        self.am = augment(model)
        self.prediction = build_prediction(self.am, self.cfg.horizon_pred,
                                           self.cfg.horizon_ctrl)
        self.nu = self.am.n * self.cfg.horizon_ctrl
        self._QSB = self.cfg.q_weight * self.prediction[1]  # Q = q I
        zero_phi = np.zeros(self.am.AA.shape[0])
        zero_ref = np.zeros((self.cfg.horizon_pred, self.am.m))
        template = build_qp(self.am, self.cfg, zero_phi, zero_ref,
                            np.zeros(self.am.n), prediction=self.prediction)
        self.workspace = QpWorkspace(template, qp_settings or QpSettings())
        self.u_prev = np.zeros(self.am.n)
        self._warm_z = None
        self._warm_y = None
        self._history = []  # last (frames-1) global states, re-localized per step

    def reset(self):
        self.u_prev = np.zeros(self.am.n)
        self._warm_z = None
        self._warm_y = None
        self._history = []

    def _lift_window(self, local_state, origin):
        c = self.model.frames
        if c == 1:
            return self.model.lift(local_state)
        meta = self.model.meta
        rows = [meta.normalize_states(states_to_local(h, origin))
                for h in self._history[-(c - 1):]]
        pad = [local_state] * (c - 1 - len(rows))
        return self.model.lift(np.concatenate([*pad, *rows, local_state]))

    def step(self, state, ref_states):
        """One control update from the current global state and reference rows.

        ref_states are the next up-to-N_p reference states (global frame) in
        time order; shorter windows are padded by holding the last row.
        Returns (control in plant units, StepInfo).
        """
        cfg = self.cfg
        state = np.asarray(state, dtype=float).reshape(6)
        ref_states = np.asarray(ref_states, dtype=float).reshape(-1, 6)
        if not np.all(np.isfinite(state)) or not np.all(np.isfinite(ref_states)):
            raise NumericError("non-finite state or reference in MPC step")
        if ref_states.shape[0] == 0:
            raise DataError("empty reference window")
        if ref_states.shape[0] < cfg.horizon_pred:
            pad = np.repeat(ref_states[-1:], cfg.horizon_pred - ref_states.shape[0], axis=0)
            ref_states = np.vstack([ref_states, pad])
        else:
            ref_states = ref_states[:cfg.horizon_pred]

        origin = state[:3]
        meta = self.model.meta
        local_state = meta.normalize_states(states_to_local(state, origin))
        local_ref = meta.normalize_states(states_to_local(ref_states, origin))

        phi = self._lift_window(local_state, origin)
        phi_aug = np.concatenate([phi, self.u_prev])
        y_ref = local_ref[:, :self.am.m]

        SA, _ = self.prediction
        err = SA @ phi_aug - y_ref.reshape(-1)
        g = np.concatenate([2.0 * (err @ self._QSB), [0.0]])
        stack_prev = np.tile(self.u_prev, cfg.horizon_ctrl)
        b_soft = np.concatenate([np.full(self.nu, cfg.du_max),
                                 np.full(self.nu, -cfg.du_min)])
        b_in = np.concatenate([b_soft,
                               np.full(self.nu, cfg.u_max) - stack_prev,
                               stack_prev - np.full(self.nu, cfg.u_min)])

        t0 = time.perf_counter()
        sol = self.workspace.solve(g=g, b_in=b_in,
                                   warm_z=self._warm_z, warm_y=self._warm_y)
        solve_ms = (time.perf_counter() - t0) * 1e3

        du = sol.z[:self.am.n]
        u = np.clip(self.u_prev + du, cfg.u_min, cfg.u_max)
        self.u_prev = u
        # warm start next step: shift primal increments and the per-increment
        # multiplier blocks one step, zero-fill the tails, keep the slack
        nu, n = self.nu, self.am.n
        warm = np.zeros_like(sol.z)
        warm[:nu - n] = sol.z[n:nu]
        warm[nu] = sol.z[nu]
        self._warm_z = warm
        warm_y = sol.y.copy()
        for b0 in range(0, 5 * nu, nu):
            blk = warm_y[b0:b0 + nu].reshape(-1, n)
            blk[:-1] = blk[1:]
            blk[-1] = 0.0
        self._warm_y = warm_y
        if self.model.frames > 1:
            self._history.append(state)
            self._history = self._history[-(self.model.frames - 1):]

        control = meta.denormalize_controls(u)
        info = StepInfo(eps=float(sol.z[self.nu]), qp_iters=sol.iterations,
                        solve_ms=solve_ms, u_norm=u, status=sol.status)
        return control, info


def mpc_step(model: LatentModel, state, ref_window, u_prev,
             cfg: MpcConfig | None = None) -> np.ndarray:
    """One-shot control update; u_prev is the previous control in plant units."""
    controller = MpcController(model, cfg)
    controller.u_prev = model.meta.normalize_controls(
        np.asarray(u_prev, dtype=float).reshape(2))
    control, _ = controller.step(state, ref_window)
    return control


@dataclass
class TrackingLog:
    t: np.ndarray
    ref: np.ndarray        # (T, 6)
    state: np.ndarray      # (T, 6)
    control: np.ndarray    # (T, 2) plant units
    eps: np.ndarray
    qp_iters: np.ndarray
    solve_ms: np.ndarray
    diverged: bool = False

    def __len__(self):
        return len(self.t)

    def save_csv(self, path) -> None:
        rows = np.column_stack([self.t, self.ref, self.state, self.control,
                                self.eps, self.qp_iters, self.solve_ms])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",",
                   header=TRACKING_HEADER, comments="")

    @classmethod
    def load_csv(cls, path) -> "TrackingLog":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"tracking log not found: {path}")
        with open(path) as fh:
            header = fh.readline().strip()
        if header != TRACKING_HEADER:
            raise DataError(f"bad tracking log header in {path}")
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(t=rows[:, 0], ref=rows[:, 1:7], state=rows[:, 7:13],
                   control=rows[:, 13:15], eps=rows[:, 15],
                   qp_iters=rows[:, 16].astype(int), solve_ms=rows[:, 17])


DIVERGENCE_RADIUS = 50.0  # m, position error that aborts closed-loop runs


def track(model: LatentModel, reference, cfg: MpcConfig | None = None,
          params: plant_mod.VehicleParams | None = None,
          plant_step=None, initial_state=None,
          qp_settings: QpSettings | None = None) -> TrackingLog:
    """Closed-loop tracking of a time-indexed reference.

    reference: (t, states) tuple or an Episode. The plant starts at the first
    reference state unless initial_state is given; plant_step(state, control)
    may replace the built-in simulator (tests inject linear fakes). The
    reference index advances strictly with time, never re-anchored to the
    plant. Runs whose position error exceeds DIVERGENCE_RADIUS stop early
    with the diverged flag set.
    """
    if isinstance(reference, Episode):
        t_ref, ref_states = reference.t, reference.states
    else:
        t_ref, ref_states = reference
    t_ref = np.asarray(t_ref, dtype=float)
    ref_states = np.asarray(ref_states, dtype=float).reshape(-1, 6)
    n_steps = len(t_ref)
    cfg = cfg or MpcConfig()
    if params is None:
        params = plant_mod.VehicleParams()
    if plant_step is None:
        def plant_step(s, u):
            return plant_mod.step(s, u, params)

    controller = MpcController(model, cfg, qp_settings=qp_settings)
    state = ref_states[0].copy() if initial_state is None else \
        np.asarray(initial_state, dtype=float).copy()

    log_t, log_ref, log_state, log_u = [], [], [], []
    log_eps, log_iters, log_ms = [], [], []
    diverged = False
    for k in range(n_steps):
        ref_window = ref_states[min(k + 1, n_steps - 1): k + 1 + cfg.horizon_pred]
        if len(ref_window) == 0:
            ref_window = ref_states[-1:]
        control, info = controller.step(state, ref_window)
        log_t.append(t_ref[k])
        log_ref.append(ref_states[k])
        log_state.append(state.copy())
        log_u.append(control)
        log_eps.append(info.eps)
        log_iters.append(info.qp_iters)
        log_ms.append(info.solve_ms)
        err = math.hypot(state[0] - ref_states[k, 0], state[1] - ref_states[k, 1])
        if err > DIVERGENCE_RADIUS:
            diverged = True
            break
        if k < n_steps - 1:
            state = np.asarray(plant_step(state, control), dtype=float)
    return TrackingLog(
        t=np.array(log_t), ref=np.array(log_ref).reshape(-1, 6),
        state=np.array(log_state).reshape(-1, 6),
        control=np.array(log_u).reshape(-1, 2), eps=np.array(log_eps),
        qp_iters=np.array(log_iters, dtype=int), solve_ms=np.array(log_ms),
        diverged=diverged)
