"""Inner iteration: sequential QP on the modified augmented Lagrangian.

Each pass solves a convex QP built from a BFGS model at the current point,
bisects toward the QP solution, updates the model, and adapts the
finite-difference step.  Probe points evaluated during the gradients are
screened for the best feasible visit (coordinate search), which the outer
loop may adopt as its next start.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numdiff import StepController, forward_gradient, update_step
from .problem import StandardForm
from .subsolver import QpProblem, solve_qp

__all__ = ["InnerState", "BestFeasible", "bfgs_update", "line_search", "run_inner"]

CURVATURE_EPS = 1e-12


@dataclass
class BestFeasible:
    point: np.ndarray
    objective: float
    infeasibility: float


@dataclass
class InnerState:
    """State carried out of one inner loop."""

    z: np.ndarray
    H: np.ndarray
    grad_L: np.ndarray
    grad_point: np.ndarray
    L_values: list[float] = field(default_factory=list)
    best_feasible: Optional[BestFeasible] = None
    inner_iter: int = 0
    step_changed: bool = False
    qp_status: str = "converged"


def bfgs_update(H: np.ndarray, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Rank-two BFGS update of the Hessian model; skipped unless ``t's > 0``.

    The curvature guard keeps the update positive definite in floating
    point, not just in exact arithmetic.
    """
    ts = float(t @ s)
    if ts <= CURVATURE_EPS * np.linalg.norm(t) * np.linalg.norm(s):
        return H
    Hs = H @ s
    sHs = float(s @ Hs)
    if sHs <= 0.0:
        return H
    return H + np.outer(t, t) / ts - np.outer(Hs, Hs) / sHs


def line_search(
    L: Callable[[np.ndarray], float],
    z_i: np.ndarray,
    z_tilde: np.ndarray,
    max_bisect: int,
    L_zi: Optional[float] = None,
) -> tuple[np.ndarray, float]:
    """Bisection between the current point and the QP solution.

    Evaluates ``z_tilde`` plus at most ``max_bisect`` midpoints of the
    interval, shrinking toward the better endpoint, and returns the best
    candidate seen (the endpoints included).  Non-finite values discard a
    candidate.
    """
    if L_zi is None:
        L_zi = float(L(z_i))
    a, fa = np.asarray(z_i, dtype=float), L_zi
    b = np.asarray(z_tilde, dtype=float)
    fb = float(L(b))
    if not np.isfinite(fb):
        fb = np.inf
    best, fbest = (a, fa) if fa <= fb else (b, fb)
    for _ in range(max_bisect):
        mid = 0.5 * (a + b)
        fm = float(L(mid))
        if not np.isfinite(fm):
            fm = np.inf
        if fm < fbest:
            best, fbest = mid, fm
        # drop the worse endpoint
        if fa <= fb:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    return best, fbest


def run_inner(
    sf: StandardForm,
    L: Callable[[np.ndarray], float],
    z_k: np.ndarray,
    z0: np.ndarray,
    J: np.ndarray,
    H0: np.ndarray,
    ctrl: StepController,
    opts,
) -> tuple[np.ndarray, np.ndarray, InnerState, StepController]:
    """Run up to ``opts.max_inner`` SQP passes on the linearized problem.

    ``z0`` is the restored interior start; the equality manifold
    ``J (z - z_k) = J (z0 - z_k)`` is fixed for the whole loop.  Returns the
    final point, the last QP duals, the inner state (including the best
    feasible probe for coordinate-search adoption), and the updated step
    controller.
    """
    lo_box, hi_box = sf.lower, sf.upper
    rhs = J @ (z0 - z_k) if J.shape[0] > 0 else np.empty(0)
    b = J @ z_k + rhs if J.shape[0] > 0 else np.empty(0)
    H = H0.copy()
    y = np.zeros(J.shape[0])
    state = InnerState(z=z0.copy(), H=H, grad_L=np.zeros(sf.dim), grad_point=z0.copy())
    best: Optional[BestFeasible] = None

    # Saddle-escape filter: at tight feas_tol no probe would ever qualify,
    # so the adoption screen keeps a floor; adopted points are iterate starts
    # (restored next pass), never reported results.
    cs_tol = max(opts.feas_tol, opts.cs_feas_floor)

    def record_probes(probes):
        nonlocal best
        for zp, _ in probes:
            cached = sf.peek(zp)
            if cached is None:
                continue
            fp, Gp = cached
            infeas = float(np.abs(Gp).max(initial=0.0))
            if infeas < cs_tol and (best is None or fp < best.objective):
                best = BestFeasible(point=zp.copy(), objective=fp, infeasibility=infeas)

    z = z0.copy()
    L_z = float(L(z))
    grad, probes = forward_gradient(L, z, ctrl.delta, lo_box, hi_box)
    record_probes(probes)
    state.grad_L, state.grad_point = grad, z.copy()
    state.L_values.append(L_z)

    for i in range(opts.max_inner):
        state.inner_iter = i + 1
        qp = QpProblem(H=H, grad=grad, A=J, b=b, lower=lo_box, upper=hi_box, start=z)
        sol = solve_qp(qp, max_iter=opts.qp_max_iter, step_fraction=opts.step_fraction)
        state.qp_status = sol.status
        if sol.status == "numerical-failure":
            break
        y = sol.y
        z_next, L_next = line_search(L, z, sol.z, opts.max_bisect, L_zi=L_z)
        state.L_values.append(L_next)
        grad_next, probes = forward_gradient(L, z_next, ctrl.delta, lo_box, hi_box)
        record_probes(probes)
        H = bfgs_update(H, grad_next - grad, z_next - z)
        r = (L_z - L_next) / max(1.0, abs(L_z))
        rel_stalled = r < 0.1 * opts.tol
        ctrl, changed = update_step(ctrl, r)
        z, L_z, grad = z_next, L_next, grad_next
        state.grad_L, state.grad_point = grad, z.copy()
        if changed:
            state.step_changed = True
            break
        if rel_stalled:
            break

    state.z = z
    state.H = H
    state.best_feasible = best
    return z, y, state, ctrl
