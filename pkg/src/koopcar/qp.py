"""Dense convex QP solver: operator splitting (ADMM) plus a polishing step.

Problem form (note the objective carries no 1/2 factor):

    minimize    z' H z + g' z
    subject to  A_in z <= b_in      (optional general inequalities)
                lb <= z <= ub       (box, +-inf allowed)

Internally both constraint kinds become two-sided rows l <= C z <= u with
C = [A_in; I]. The splitting iterations run in a compiled kernel when
available; a polishing step then solves the equality-constrained KKT system
on the active set, which lands machine-accurate solutions (KKT residuals
well under 1e-6) whenever the active set is identified correctly. Failed
polishes fall back to more splitting iterations at tighter tolerance.

Hessians and constraint rows are often reused across many solves (receding
horizon control); QpWorkspace caches the factorization and scaling so only
the linear term, the bound vector and the warm start change per solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import admm_iterate
from .errors import QpInputError


@dataclass
class QpSettings:
    sigma: float = 1e-6
    rho: float = 0.01    # small step weight suits ill-scaled condensed problems
    alpha: float = 1.6
    max_iter: int = 20000
    check_every: int = 25
    eps_abs: float = 1e-6
    eps_rel: float = 1e-6
    polish: bool = True
    polish_retries: int = 2


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    A_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        nz = self.g.size
        if self.H.shape != (nz, nz):
            raise QpInputError("H must be square and match g")
        if not np.all(np.isfinite(self.H)) or not np.all(np.isfinite(self.g)):
            raise QpInputError("non-finite entries in H or g")
        scale = max(1.0, float(np.max(np.abs(self.H))))
        if np.max(np.abs(self.H - self.H.T)) > 1e-8 * scale:
            raise QpInputError("H must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (self.H + self.H.T))
        if eigs[0] < -1e-8 * max(1.0, eigs[-1]):
            raise QpInputError(f"H is not positive semidefinite (min eig {eigs[0]:g})")
        if (self.A_in is None) != (self.b_in is None):
            raise QpInputError("A_in and b_in must be given together")
        if self.A_in is not None:
            self.A_in = np.asarray(self.A_in, dtype=float).reshape(-1, nz)
            self.b_in = np.asarray(self.b_in, dtype=float).reshape(-1)
            if self.A_in.shape[0] != self.b_in.size:
                raise QpInputError("A_in and b_in row counts differ")
            if not np.all(np.isfinite(self.A_in)):
                raise QpInputError("non-finite entries in A_in")
        self.lb = (np.full(nz, -np.inf) if self.lb is None
                   else np.asarray(self.lb, dtype=float).reshape(-1))
        self.ub = (np.full(nz, np.inf) if self.ub is None
                   else np.asarray(self.ub, dtype=float).reshape(-1))
        if self.lb.size != nz or self.ub.size != nz:
            raise QpInputError("box bounds must match the decision dimension")
        if np.any(self.lb > self.ub):
            raise QpInputError("crossed box bounds (lb > ub)")

    @property
    def dim(self) -> int:
        return self.g.size


@dataclass
class QpSolution:
    z: np.ndarray
    y: np.ndarray            # multipliers for the stacked rows [A_in; I]
    obj: float
    iterations: int
    status: str              # "solved" | "max_iter"
    residuals: dict = field(default_factory=dict)
    solve_time: float = 0.0
    polished: bool = False


def objective(problem: QpProblem, z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    return float(z @ problem.H @ z + problem.g @ z)


def _stack_rows(problem: QpProblem):
    nz = problem.dim
    eye = np.eye(nz)
    if problem.A_in is None:
        C = eye
        l = problem.lb.copy()
        u = problem.ub.copy()
    else:
        C = np.vstack([problem.A_in, eye])
        mi = problem.A_in.shape[0]
        l = np.concatenate([np.full(mi, -np.inf), problem.lb])
        u = np.concatenate([problem.b_in, problem.ub])
    return C, l, u


def kkt_residuals(problem: QpProblem, z: np.ndarray, y: np.ndarray) -> dict:
    """Infinity-norm KKT residuals at (z, y) for the stacked two-sided rows.

    stationarity   ||2 H z + g + C' y||
    primal         largest constraint violation
    dual           multiplier mass pushing on absent bounds
    complementarity  max |y_i * slack_i| on the side y_i pushes
    """
    C, l, u = _stack_rows(problem)
    return _residuals_stacked(problem.H, problem.g, C, l, u, z, y)


def _residuals_stacked(H, g, C, l, u, z, y) -> dict:
    cz = C @ z
    stat = float(np.max(np.abs(2.0 * H @ z + g + C.T @ y)))
    upper_viol = np.where(np.isfinite(u), np.maximum(cz - u, 0.0), 0.0)
    lower_viol = np.where(np.isfinite(l), np.maximum(l - cz, 0.0), 0.0)
    primal = float(max(upper_viol.max(initial=0.0), lower_viol.max(initial=0.0)))
    y_up = np.maximum(y, 0.0)
    y_lo = np.maximum(-y, 0.0)
    dual = float(max(np.max(y_up[~np.isfinite(u)], initial=0.0),
                     np.max(y_lo[~np.isfinite(l)], initial=0.0)))
    u_fin = np.where(np.isfinite(u), u, 0.0)
    l_fin = np.where(np.isfinite(l), l, 0.0)
    comp_up = np.where(np.isfinite(u), y_up * np.abs(u_fin - cz), 0.0)
    comp_lo = np.where(np.isfinite(l), y_lo * np.abs(cz - l_fin), 0.0)
    comp = float(max(comp_up.max(initial=0.0), comp_lo.max(initial=0.0)))
    return {"stationarity": stat, "primal": primal, "dual": dual,
            "complementarity": comp}


def _polish(P, q, C, l, u, z, y):
    """Equality-solve on the active set guessed from multiplier signs.

    Returns (z_pol, y_pol) or None when the KKT system is singular or the
    result is infeasible / wrongly signed.
    """
    act_lo = y < 0.0
    act_up = y > 0.0
    rows = np.where(act_lo | act_up)[0]
    nz = P.shape[0]
    C_act = C[rows]
    b_act = np.where(act_lo[rows], l[rows], u[rows])
    na = rows.size
    kkt = np.zeros((nz + na, nz + na))
    kkt[:nz, :nz] = P
    kkt[:nz, nz:] = C_act.T
    kkt[nz:, :nz] = C_act
    rhs = np.concatenate([-q, b_act])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    z_pol = sol[:nz]
    nu = sol[nz:]
    y_pol = np.zeros_like(y)
    y_pol[rows] = nu
    feas_tol = 1e-8 * (1.0 + float(np.max(np.abs(z_pol))))
    cz = C @ z_pol
    if np.any(cz > u + feas_tol) or np.any(cz < l - feas_tol):
        return None
    if na:
        sign_tol = 1e-8 * (1.0 + float(np.max(np.abs(nu))))
        if np.any(nu[act_lo[rows]] > sign_tol) or np.any(nu[act_up[rows]] < -sign_tol):
            return None
    return z_pol, y_pol


class QpWorkspace:
    """Reusable solver state for a family of QPs sharing H, A_in and box pattern."""

    def __init__(self, problem: QpProblem, settings: QpSettings | None = None):
        self.settings = settings or QpSettings()
        self.problem = problem
        self.C, self.l, self.u = _stack_rows(problem)
        self.nz = problem.dim
        # one scalar cost scaling keeps rho meaningful across magnitudes
        self.cost_scale = 1.0 / max(1.0, float(np.max(np.abs(problem.H))))
        self.P = 2.0 * problem.H * self.cost_scale
        s = self.settings
        M = self.P + s.sigma * np.eye(self.nz) + s.rho * (self.C.T @ self.C)
        self.Minv = np.linalg.inv(M)
        self.C_c = np.ascontiguousarray(self.C)
        self.P_c = np.ascontiguousarray(self.P)
        self.Minv_c = np.ascontiguousarray(self.Minv)

    def solve(self, g=None, b_in=None, lb=None, ub=None,
              warm_z=None, warm_y=None) -> QpSolution:
        """Solve with optionally updated linear term and bounds."""
        t_start = time.perf_counter()
        prob = self.problem
        s = self.settings
        g = prob.g if g is None else np.asarray(g, dtype=float).reshape(-1)
        l = self.l.copy()
        u = self.u.copy()
        mi = 0 if prob.A_in is None else prob.A_in.shape[0]
        if b_in is not None:
            u[:mi] = np.asarray(b_in, dtype=float).reshape(-1)
        if lb is not None:
            l[mi:] = np.asarray(lb, dtype=float).reshape(-1)
        if ub is not None:
            u[mi:] = np.asarray(ub, dtype=float).reshape(-1)
        if np.any(l > u):
            raise QpInputError("crossed bounds (lb > ub)")

        q = g * self.cost_scale
        x = np.zeros(self.nz) if warm_z is None else np.array(warm_z, dtype=float)
        y = np.zeros(len(l)) if warm_y is None else np.array(warm_y, dtype=float) * self.cost_scale
        z = self.C @ x

        # replace infinities for the kernel (projection never reaches them)
        big = 1e30
        l_k = np.maximum(l, -big)
        u_k = np.minimum(u, big)

        total_iters = 0
        eps = (s.eps_abs, s.eps_rel)
        polished = False
        z_out = y_out = None
        for attempt in range(s.polish_retries + 1):
            iters, _, _ = admm_iterate(
                self.Minv_c, self.P_c, self.C_c, q, l_k, u_k, x, z, y,
                s.sigma, s.rho, s.alpha, s.max_iter, s.check_every,
                eps[0], eps[1])
            total_iters += iters
            if s.polish:
                pol = _polish(self.P, q, self.C, l, u, x, y)
                if pol is not None:
                    z_out, y_out = pol
                    polished = True
                    break
            else:
                break
            eps = (eps[0] * 0.01, eps[1] * 0.01)  # retry tighter, then re-polish
        if z_out is None:
            z_out, y_out = x, y

        y_unscaled = y_out / self.cost_scale
        # residuals of the returned iterate on the unscaled problem
        res = _residuals_stacked(prob.H, g, self.C, l, u, z_out, y_unscaled)
        tol = 10.0 * max(s.eps_abs, s.eps_rel)
        scale = 1.0 + float(np.max(np.abs(z_out)))
        ok = (res["stationarity"] <= tol / self.cost_scale * scale
              and res["primal"] <= tol * scale)
        status = "solved" if (polished or ok) else "max_iter"
        obj = float(z_out @ prob.H @ z_out + g @ z_out)
        return QpSolution(
            z=z_out, y=y_unscaled, obj=obj,
            iterations=total_iters, status=status, residuals=res,
            solve_time=time.perf_counter() - t_start, polished=polished)


def solve_qp(problem: QpProblem, warm_z=None, warm_y=None,
             settings: QpSettings | None = None) -> QpSolution:
    """One-shot convenience wrapper around QpWorkspace."""
    return QpWorkspace(problem, settings).solve(warm_z=warm_z, warm_y=warm_y)
