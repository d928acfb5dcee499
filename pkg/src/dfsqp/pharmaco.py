"""Tumor-growth-inhibition blackbox and its dosing optimization problem.

The drug concentration decays exponentially between doses and jumps by the
administered amount at each dose time, so it is handled analytically; the
three tumor-cell compartments are integrated per inter-dose segment with an
adaptive Dormand-Prince pair.  The optimization problem has one time and one
amount variable per dose, with safety limits on the peak and cumulative
concentration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import STATUS_CONVERGED
from .problem import ProblemSpec

__all__ = ["TumorParams", "DoseSchedule", "simulate", "tumor_problem",
           "IntegrationError", "PAPER_THETA", "PAPER_K"]

PAPER_THETA = (0.045, 4.52, 0.09, 0.11, 0.04, 0.00001, 0.09, 1.0)
PAPER_K = 100.0


class IntegrationError(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"integrator step-size underflow at t={t:.6g}")
        self.t = t


@dataclass
class TumorParams:
    theta: np.ndarray = field(default_factory=lambda: np.array(PAPER_THETA))
    K: float = PAPER_K
    n_doses: int = 4
    t_end: float = 200.0
    v_max: float = 1.1
    v_cum: float = 65.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (8,):
            raise ValueError("theta must have 8 entries")
        if self.theta[0] <= 0 or self.K <= 0 or self.t_end <= 0:
            raise ValueError("theta[0], K and t_end must be positive")


@dataclass
class DoseSchedule:
    times: np.ndarray
    amounts: np.ndarray

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.amounts = np.atleast_1d(np.asarray(self.amounts, dtype=float))
        if self.times.shape != self.amounts.shape:
            raise ValueError("times and amounts must have the same length")

    def canonical(self, t_end: float) -> "DoseSchedule":
        """Times clipped into [0, t_end] and sorted, amounts carried along."""
        t = np.clip(self.times, 0.0, t_end)
        order = np.argsort(t, kind="stable")
        return DoseSchedule(t[order], self.amounts[order])


def simulate(params: TumorParams, sched: DoseSchedule,
             rtol: float = 1e-6, atol: float = 1e-9) -> tuple[float, float, float]:
    """Run the dosing schedule; returns ``(tumor_size, c_max, c_cum)``.

    ``tumor_size`` is the total cell count at ``t_end``; ``c_max`` and
    ``c_cum`` are the peak and time-integrated drug concentration, both
    exact given the analytic per-segment decay.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    canon = sched.canonical(params.t_end)
    size, cmax, ccum, status, t_fail = _kernels.tumor_rk45(
        np.ascontiguousarray(params.theta),
        float(params.K),
        np.ascontiguousarray(canon.times),
        np.ascontiguousarray(canon.amounts),
        float(params.t_end),
        float(rtol),
        float(atol),
    )
    if status != STATUS_CONVERGED:
        raise IntegrationError(t_fail)
    return float(size), float(cmax), float(ccum)


def tumor_problem(params: TumorParams, rtol: float = 1e-6,
                  atol: float = 1e-9) -> ProblemSpec:
    """Dosing optimization: minimize the final tumor size.

    Variables are ``(t_1..t_n, a_1..a_n)``; dose times live in
    ``[0, t_end]``, amounts in ``[0, 1]``; the peak and cumulative
    concentration are inequality-constrained.  One simulation serves both
    the objective and the constraints at a given point.
    """
    n = params.n_doses
    memo: dict = {"key": None, "out": None}

    def run(x):
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if memo["key"] != key:
            sched = DoseSchedule(x[:n], x[n:])
            memo["out"] = simulate(params, sched, rtol, atol)
            memo["key"] = key
        return memo["out"]

    def objective(x):
        return run(x)[0]

    def ineq(x):
        _, cmax, ccum = run(x)
        return np.array([cmax, ccum])

    x0 = np.concatenate([np.full(n, params.t_end / 2.0), np.full(n, 0.5)])
    return ProblemSpec(
        objective=objective,
        ineq_con=ineq,
        ineq_lower=[0.0, 0.0],
        ineq_upper=[params.v_max, params.v_cum],
        box_lower=np.concatenate([np.zeros(n), np.zeros(n)]),
        box_upper=np.concatenate([np.full(n, params.t_end), np.ones(n)]),
        x0=x0,
    )
