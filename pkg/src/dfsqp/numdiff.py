"""Forward finite differences and the adaptive step-size controller.

The gradient step size is shared across coordinates and adapted between
inner iterations: large relative progress grows it (big steps average out
high-frequency noise), stalled progress shrinks it.  Whenever the step
changes the caller is expected to terminate its inner loop.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .problem import EvaluationError

__all__ = ["StepController", "forward_gradient", "forward_jacobian", "update_step"]


@dataclass(frozen=True)
class StepController:
    """Finite-difference step size with grow/shrink thresholds.

    ``r >= c_e * delta`` grows the step by ``r_ed``; ``r <= c_re * delta``
    shrinks it by ``r_rd``; in between it is left alone.  The step is always
    clamped to ``[delta_min, delta_max]``.
    """

    delta: float
    delta0: float
    c_e: float = 10.0
    r_ed: float = 2.0
    c_re: float = 0.1
    r_rd: float = 0.5
    delta_min: float = 1e-8
    delta_max: float = 1e-1

    def __post_init__(self):
        if not (self.r_ed > 1.0 and 0.0 < self.r_rd < 1.0):
            raise ValueError("need r_ed > 1 and 0 < r_rd < 1")
        if not self.c_re < self.c_e:
            raise ValueError("need c_re < c_e")

    def clamp(self, delta: float) -> float:
        return min(max(delta, self.delta_min), self.delta_max)

    def reset(self) -> "StepController":
        return replace(self, delta=self.clamp(self.delta0))


def update_step(ctrl: StepController, r: float) -> tuple[StepController, bool]:
    """Adapt the step from the relative progress ratio ``r``.

    Returns the (possibly unchanged) controller and whether a branch fired;
    the caller stops its inner iteration when it did.
    """
    if r >= ctrl.c_e * ctrl.delta:
        new_delta = ctrl.clamp(ctrl.r_ed * ctrl.delta)
        return replace(ctrl, delta=new_delta), new_delta != ctrl.delta
    if r <= ctrl.c_re * ctrl.delta:
        new_delta = ctrl.clamp(ctrl.r_rd * ctrl.delta)
        return replace(ctrl, delta=new_delta), new_delta != ctrl.delta
    return ctrl, False


def _probe_step(z_j: float, delta: float, lo: float, hi: float) -> float:
    """Signed probe step at coordinate value ``z_j`` respecting [lo, hi].

    The step is relative: ``delta`` scaled by the coordinate magnitude, so
    one shared ``delta`` serves problems mixing unit-scale and
    thousand-scale variables.
    """
    step = delta * max(1.0, abs(z_j))
    if z_j + step <= hi:
        return step
    if z_j - step >= lo:
        return -step
    # box narrower than the step: probe halfway into the wider side
    room_up = hi - z_j
    room_dn = z_j - lo
    return 0.5 * room_up if room_up >= room_dn else -0.5 * room_dn


def forward_gradient(
    fun: Callable[[np.ndarray], float],
    z: np.ndarray,
    delta: float,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> tuple[np.ndarray, list[tuple[np.ndarray, float]]]:
    """Forward-difference gradient of a scalar function.

    One base evaluation plus one probe per coordinate.  Probes that would
    leave the box switch to a backward difference.  Returns the gradient and
    the list of ``(probe_point, value)`` pairs so callers can reuse the
    evaluated points.
    """
    z = np.asarray(z, dtype=float)
    dim = len(z)
    if lower is None:
        lower = np.full(dim, -np.inf)
    if upper is None:
        upper = np.full(dim, np.inf)
    f0 = float(fun(z))
    if not np.isfinite(f0):
        raise EvaluationError("non-finite value at gradient base point", z)
    grad = np.empty(dim)
    probes: list[tuple[np.ndarray, float]] = []
    for i in range(dim):
        step = _probe_step(z[i], delta, lower[i], upper[i])
        zp = z.copy()
        zp[i] += step
        fp = float(fun(zp))
        if not np.isfinite(fp):
            raise EvaluationError("non-finite value at gradient probe", zp)
        grad[i] = (fp - f0) / step
        probes.append((zp, fp))
    return grad, probes


def forward_jacobian(
    fun: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    delta: float,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
) -> np.ndarray:
    """Forward-difference Jacobian of a vector function, one probe per column."""
    z = np.asarray(z, dtype=float)
    dim = len(z)
    if lower is None:
        lower = np.full(dim, -np.inf)
    if upper is None:
        upper = np.full(dim, np.inf)
    f0 = np.asarray(fun(z), dtype=float)
    if not np.all(np.isfinite(f0)):
        raise EvaluationError("non-finite value at Jacobian base point", z)
    J = np.empty((len(f0), dim))
    for i in range(dim):
        step = _probe_step(z[i], delta, lower[i], upper[i])
        zp = z.copy()
        zp[i] += step
        fp = np.asarray(fun(zp), dtype=float)
        if not np.all(np.isfinite(fp)):
            raise EvaluationError("non-finite value at Jacobian probe", zp)
        J[:, i] = (fp - f0) / step
    return J
