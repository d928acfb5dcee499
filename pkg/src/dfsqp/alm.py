"""Outer loop: modified augmented Lagrangian with linearized constraints.

Each outer iteration refreshes the constraint Jacobian by finite differences,
restores an interior point that is feasible for the linearization, minimizes
the modified augmented Lagrangian over that manifold (inner SQP loop), then
updates the dual estimate, penalty, and restart state.  The equality-dual
estimate is taken from the last QP subproblem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numdiff import StepController, forward_jacobian
from .problem import (
    EvalBudgetExhausted,
    ProblemSpec,
    StandardForm,
    box_violation,
    nudge_interior,
    to_standard_form,
)
from .sqp import BestFeasible, run_inner
from .subsolver import (
    DegenerateJacobianError,
    QpProblem,
    project_free,
    solve_feasibility_lp,
    solve_qp,
)

__all__ = [
    "SolverOptions",
    "SolveResult",
    "TraceRecord",
    "modified_AL",
    "update_penalty",
    "projected_stationarity",
    "check_restart",
    "solve",
]

RESTART_NONE = "none"
RESTART_SOFT = "soft_restart"
RESTART_DUAL = "dual_reset_restart"


@dataclass
class SolverOptions:
    """Tuning constants; the defaults reproduce the benchmark suite."""

    tol: float = 1e-4
    feas_tol: float = 1e-4
    max_outer: int = 50
    max_inner: int = 10
    rho0: float = 3.0
    delta0: Optional[float] = None  # None: 1e-4, or 1e-2 when noisy
    noisy: bool = False
    max_bisect: int = 3
    # step-size controller
    c_e: float = 10.0
    r_ed: float = 2.0
    c_re: float = 0.1
    r_rd: float = 0.5
    delta_min: float = 1e-8
    delta_max: float = 1e-1
    # penalty heuristic
    c_z: float = 10.0
    c_ir: float = 1.2
    r_ir: float = 5.0
    c_rr: float = 0.2
    r_rr: float = 0.5
    rho_max: float = 1e5
    # restart thresholds (None: eps_s=tol, eps_a=1.0; the restart check is a
    # coarse "far from stationary" screen, so eps_a is deliberately large)
    eps_s: Optional[float] = None
    eps_a: Optional[float] = None
    # coordinate-search adoption filter floor (see sqp.run_inner)
    cs_feas_floor: float = 1e-4
    # subsolvers
    qp_max_iter: int = 100
    step_fraction: float = 0.9
    max_evals: Optional[int] = None  # None: 10*dim*max_outer*max_inner
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.c_z <= 1 or self.r_ir <= 1 or not 0 < self.r_rr < 1:
            raise ValueError("penalty constants out of range")


@dataclass
class TraceRecord:
    k: int
    objective: float
    infeasibility: float
    rho: float
    delta: float
    restart: str
    evals: int


@dataclass
class SolveResult:
    z_star: np.ndarray
    x_star: np.ndarray
    y_star: np.ndarray
    objective: float
    infeasibility: float
    status: str
    eval_count: int
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def modified_AL(
    z: np.ndarray,
    y: np.ndarray,
    rho: float,
    z_k: np.ndarray,
    G_k: np.ndarray,
    J: np.ndarray,
    sf: StandardForm,
) -> float:
    """Objective penalizing the deviation of G from its linearization at z_k."""
    f, G = sf.bundle(z)
    if len(G) == 0:
        return f
    w = G - (G_k + J @ (np.asarray(z, dtype=float) - z_k))
    return f - float(y @ w) + 0.5 * rho * float(w @ w)


def _make_al_callback(sf: StandardForm, y: np.ndarray, rho: float,
                      z_k: np.ndarray, G_k: np.ndarray, J: np.ndarray
                      ) -> Callable[[np.ndarray], float]:
    if sf.m == 0:
        return sf.objective
    y = y.copy()
    rho = float(rho)
    Jz_k = J @ z_k
    lin0 = G_k - Jz_k

    def L(z):
        f, G = sf.bundle(z)
        w = G - (lin0 + J @ z)
        return f - float(y @ w) + 0.5 * rho * float(w @ w)

    return L


def update_penalty(rho: float, v_k: float, v_prev: float, opts: SolverOptions) -> float:
    """Penalty heuristic driven by the infeasibility of successive iterates."""
    if v_k <= opts.c_z * opts.tol:
        return 0.0
    if v_k >= opts.c_ir * v_prev:
        return min(opts.r_ir * rho, opts.rho_max)
    if v_k <= opts.c_rr * v_prev:
        return opts.r_rr * rho
    return rho


def projected_stationarity(z: np.ndarray, grad: np.ndarray,
                           lower: np.ndarray, upper: np.ndarray) -> float:
    """Inf-norm of the projected gradient step ``P(z - grad) - z``."""
    z = np.asarray(z, dtype=float)
    return float(np.abs(np.clip(z - grad, lower, upper) - z).max(initial=0.0))


def check_restart(f_prev: float, f_curr: float, v_prev: float, v_curr: float,
                  stationarity: float, eps_s: float, eps_a: float) -> str:
    """Restart decision after one outer iteration.

    Rising objective *and* infeasibility resets the dual as well; stalled
    objective far from stationarity resets only the step size and the
    off-diagonal Hessian model.
    """
    if f_curr > f_prev and v_curr > v_prev:
        return RESTART_DUAL
    rel = (f_prev - f_curr) / max(1.0, abs(f_prev))
    if abs(rel) <= eps_s and stationarity > eps_a:
        return RESTART_SOFT
    return RESTART_NONE


def _restore_bounded(J: np.ndarray, G_k: np.ndarray, z: np.ndarray,
                     lo: np.ndarray, hi: np.ndarray, opts: SolverOptions) -> np.ndarray:
    """Interior near-feasible point for the linearization, close to ``z``.

    The feasibility LP settles the reachable residual scale; among the many
    near-feasible interior points it could return, a least-norm polish QP on
    the achieved manifold keeps the restoration jump small so the objective
    does not bounce between outer iterations.
    """
    z_lp, _ = solve_feasibility_lp(J, G_k, z, lo, hi,
                                   opts.qp_max_iter, opts.step_fraction)
    # min 0.5 |z' - z|^2 on the achieved manifold, expanded at z_lp
    qp = QpProblem(H=np.eye(len(z)), grad=z_lp - z, A=J, b=J @ z_lp,
                   lower=lo, upper=hi, start=z_lp)
    sol = solve_qp(qp, max_iter=opts.qp_max_iter, step_fraction=opts.step_fraction)
    if sol.status == "numerical-failure":
        return z_lp
    return sol.z


class _EvalTracker:
    """Records the best feasible bundle seen during a solve."""

    def __init__(self, feas_tol: float, lower: np.ndarray, upper: np.ndarray):
        self.feas_tol = feas_tol
        self.lower = lower
        self.upper = upper
        self.best: Optional[BestFeasible] = None
        self.rows: Optional[list[tuple[int, float, float]]] = None
        self.count = 0

    def __call__(self, z: np.ndarray, f: float, G: np.ndarray) -> None:
        self.count += 1
        infeas = float(np.abs(G).max(initial=0.0)) + box_violation(z, self.lower, self.upper)
        if self.rows is not None:
            self.rows.append((self.count, f, infeas))
        if infeas <= self.feas_tol and (self.best is None or f < self.best.objective):
            self.best = BestFeasible(point=z.copy(), objective=f, infeasibility=infeas)


def solve(spec: ProblemSpec, opts: Optional[SolverOptions] = None,
          eval_log: Optional[list] = None) -> SolveResult:
    """Solve a constrained NLP without derivatives.

    ``eval_log``, when given, receives one ``(eval_index, objective,
    infeasibility)`` row per evaluation bundle.
    """
    opts = opts if opts is not None else SolverOptions()
    sf = to_standard_form(spec)
    dim, m = sf.dim, sf.m
    lo, hi = sf.lower, sf.upper
    eps_s = opts.eps_s if opts.eps_s is not None else opts.tol
    eps_a = opts.eps_a if opts.eps_a is not None else 1.0
    max_evals = (opts.max_evals if opts.max_evals is not None
                 else 10 * dim * opts.max_outer * opts.max_inner)
    delta0 = opts.delta0
    if delta0 is None:
        delta0 = 1e-2 if opts.noisy else 1e-4
    delta0 = min(max(delta0, opts.delta_min), opts.delta_max)
    ctrl = StepController(
        delta=delta0, delta0=delta0, c_e=opts.c_e, r_ed=opts.r_ed,
        c_re=opts.c_re, r_rd=opts.r_rd,
        delta_min=opts.delta_min, delta_max=opts.delta_max,
    )
    tracker = _EvalTracker(opts.feas_tol, lo, hi)
    if eval_log is not None:
        tracker.rows = eval_log
    sf.on_eval = tracker
    sf.max_evals = max_evals

    status = "max-outer"
    trace: list[TraceRecord] = []
    y = np.zeros(m)
    rho = opts.rho0
    z = sf.z0.copy()
    f_prev = math.inf
    v_prev = math.inf
    try:
        f_prev, G_z = sf.bundle(z)
        v_prev = float(np.abs(G_z).max(initial=0.0))
        H = np.eye(dim) * max(1.0, abs(f_prev))
        for k in range(opts.max_outer):
            if m > 0:
                J = forward_jacobian(sf.combined_eq, z, ctrl.delta, lo, hi)
                G_k = sf.combined_eq(z)
            else:
                J = np.zeros((0, dim))
                G_k = np.empty(0)
            # interior restoration for the linearized constraints
            if m == 0:
                z0_k = z
            elif not (np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))):
                try:
                    z0_k = project_free(z, J, G_k)
                except DegenerateJacobianError:
                    z0_k = _restore_bounded(J, G_k, z, lo, hi, opts)
            else:
                z0_k = _restore_bounded(J, G_k, z, lo, hi, opts)
            L = _make_al_callback(sf, y, rho, z, G_k, J)
            z_next, y_qp, inner, ctrl = run_inner(sf, L, z, z0_k, J, H, ctrl, opts)
            H = inner.H
            if inner.qp_status == "numerical-failure":
                status = "numerical-failure"
                break
            f_next, G_next = sf.bundle(z_next)
            v_next = float(np.abs(G_next).max(initial=0.0))
            # coordinate search: adopt the best feasible probe when it wins
            bf = inner.best_feasible
            if bf is not None and bf.objective < f_next:
                z_next = nudge_interior(bf.point, lo, hi)
                f_next, v_next = bf.objective, bf.infeasibility
            if m > 0:
                y = y_qp
            # stationarity of the original problem: the modified-AL gradient
            # carries no dual information at the expansion point, so fold the
            # dual and penalty terms back in (grad f - J'(y - rho G)).
            if m > 0:
                cached = sf.peek(inner.grad_point)
                G_g = cached[1] if cached is not None else sf.combined_eq(inner.grad_point)
                grad_stat = inner.grad_L - J.T @ (y - rho * G_g)
            else:
                grad_stat = inner.grad_L
            stationarity = projected_stationarity(inner.grad_point, grad_stat, lo, hi)
            rho = update_penalty(rho, v_next, v_prev, opts)
            restart = check_restart(f_prev, f_next, v_prev, v_next,
                                    stationarity, eps_s, eps_a)
            if restart == RESTART_DUAL:
                y = np.zeros(m)
            if restart != RESTART_NONE:
                ctrl = ctrl.reset()
                H = np.diag(np.diag(H))
            rel = (f_prev - f_next) / max(1.0, abs(f_prev))
            trace.append(TraceRecord(k, f_next, v_next, rho, ctrl.delta,
                                     restart, sf.eval_count))
            z, f_prev, v_prev = z_next, f_next, v_next
            if (restart == RESTART_NONE and stationarity <= opts.tol
                    and v_next <= opts.feas_tol and abs(rel) <= eps_s):
                status = "converged"
                break
    except EvalBudgetExhausted:
        status = "eval-budget"
    finally:
        sf.on_eval = None
        sf.max_evals = None

    z_star, f_star, v_star = z, f_prev, v_prev
    best = tracker.best
    if best is not None and (v_star > opts.feas_tol or best.objective < f_star):
        z_star, f_star, v_star = best.point, best.objective, best.infeasibility
    return SolveResult(
        z_star=z_star,
        x_star=sf.x_part(z_star).copy(),
        y_star=y.copy(),
        objective=float(f_star),
        infeasibility=float(v_star),
        status=status,
        eval_count=sf.eval_count,
        trace=trace,
    )
