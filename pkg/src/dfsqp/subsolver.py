"""Interior-point subsolvers: feasibility restoration and the convex QP.

Both the feasibility LP and the QP are solved by affine scaling: rescale the
variables by their distance to the box bounds, solve the scaled
equality-constrained model, and step a safeguarded fraction toward the
boundary.  The free (unbounded) case restores feasibility with a plain
least-norm projection instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "QpProblem",
    "QpSolution",
    "DegenerateJacobianError",
    "project_free",
    "solve_feasibility_lp",
    "solve_qp",
    "BOUND_SENTINEL",
]

BOUND_SENTINEL = 1e20
ACTIVE_TOL = 1e-8
_STATUS_NAMES = {0: "converged", 1: "iteration-limit", 2: "numerical-failure"}


class DegenerateJacobianError(RuntimeError):
    """The constraint Jacobian is (numerically) rank deficient."""


def sentinel_bounds(lower: np.ndarray, upper: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Replace infinite bounds by the finite sentinels the kernels expect."""
    lo = np.where(np.isfinite(lower), lower, -BOUND_SENTINEL)
    hi = np.where(np.isfinite(upper), upper, BOUND_SENTINEL)
    return np.ascontiguousarray(lo, dtype=float), np.ascontiguousarray(hi, dtype=float)


@dataclass
class QpProblem:
    """Convex QP ``min 0.5 (z-c)'H(z-c) + grad'(z-c)`` with ``A z = b`` and box.

    ``start`` doubles as the model expansion point ``c`` and must be strictly
    interior and satisfy the equalities.
    """

    H: np.ndarray
    grad: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    start: np.ndarray

    def validate(self, tol: float = 1e-8) -> None:
        if self.A.shape[0] > 0:
            res = np.abs(self.A @ self.start - self.b).max()
            if res > tol * (1.0 + np.abs(self.b).max(initial=0.0)):
                raise ValueError(f"start violates equalities by {res:.2e}")
        if np.abs(self.H - self.H.T).max() > 1e-12 * (1.0 + np.abs(self.H).max()):
            raise ValueError("H not symmetric")
        lo, hi = self.lower, self.upper
        if np.any((np.isfinite(lo) & (self.start <= lo)) | (np.isfinite(hi) & (self.start >= hi))):
            raise ValueError("start not strictly interior")


@dataclass
class QpSolution:
    z: np.ndarray
    y: np.ndarray
    kkt_residual: float
    iterations: int
    status: str


def project_free(x_k: np.ndarray, J: np.ndarray, g_k: np.ndarray) -> np.ndarray:
    """Least-norm shift of ``x_k`` onto the hyperplane ``J (x - x_k) = -g_k``.

    Only valid when no box bounds are present.  Raises
    :class:`DegenerateJacobianError` when ``J`` has deficient row rank, in
    which case the caller should fall back to the LP route.
    """
    J = np.asarray(J, dtype=float)
    g_k = np.asarray(g_k, dtype=float)
    gram = J @ J.T
    try:
        w = np.linalg.solve(gram, g_k)
    except np.linalg.LinAlgError as exc:
        raise DegenerateJacobianError("degenerate Jacobian") from exc
    x_feas = x_k - J.T @ w
    res = np.abs(J @ (x_feas - x_k) + g_k).max(initial=0.0)
    if not np.isfinite(res) or res > 1e-10 * (1.0 + np.abs(g_k).max(initial=0.0)):
        raise DegenerateJacobianError("degenerate Jacobian")
    return x_feas


def solve_feasibility_lp(
    J: np.ndarray,
    g_k: np.ndarray,
    x_k: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iter: int = 100,
    step_fraction: float = 0.9,
    tau_stop: float = 1e-7,
) -> tuple[np.ndarray, float]:
    """Interior near-feasible point for the linearized constraints.

    Minimizes the residual scale ``tau`` in ``J (x - x_k) - g_k tau = -g_k``
    over the box, starting from the trivially feasible ``[x_k; 1]``.  Returns
    the interior ``x`` iterate and the final ``tau``; ``tau`` near zero means
    the linearized system is interior-feasible.
    """
    J = np.ascontiguousarray(J, dtype=float)
    g_k = np.asarray(g_k, dtype=float)
    m, nv = J.shape
    if m == 0:
        return np.asarray(x_k, dtype=float).copy(), 0.0
    A = np.ascontiguousarray(np.hstack([J, -g_k.reshape(-1, 1)]))
    c = np.zeros(nv + 1)
    c[-1] = 1.0
    v0 = np.ascontiguousarray(np.concatenate([x_k, [1.0]]))
    lo, hi = sentinel_bounds(lower, upper)
    lo_ext = np.ascontiguousarray(np.concatenate([lo, [0.0]]))
    hi_ext = np.ascontiguousarray(np.concatenate([hi, [BOUND_SENTINEL]]))
    v, _, _ = _kernels.lp_affine_scaling(
        A, c, v0, lo_ext, hi_ext, max_iter, step_fraction, 1e-10, tau_stop
    )
    return v[:-1], float(v[-1])


def solve_qp(qp: QpProblem, max_iter: int = 100, step_fraction: float = 0.9,
             tol: float | None = None) -> QpSolution:
    """Solve the box-and-equality QP by affine scaling and extract duals.

    The equality duals come from the stationarity least-squares system on
    the coordinates away from their bounds; ``kkt_residual`` is the inf-norm
    of the remaining stationarity defect on those coordinates.
    """
    H = np.ascontiguousarray(qp.H, dtype=float)
    grad = np.ascontiguousarray(qp.grad, dtype=float)
    A = np.ascontiguousarray(qp.A, dtype=float)
    start = np.ascontiguousarray(qp.start, dtype=float)
    lo, hi = sentinel_bounds(qp.lower, qp.upper)
    if tol is None:
        tol = 1e-8 * (1.0 + np.abs(grad).max(initial=0.0))
    z, iters, code = _kernels.qp_affine_scaling(
        H, start, grad, A, start, lo, hi, max_iter, step_fraction, tol
    )
    q = H @ (z - start) + grad
    inactive = np.minimum(z - lo, hi - z) > ACTIVE_TOL
    m = A.shape[0]
    if m > 0 and inactive.any():
        y, *_ = np.linalg.lstsq(A[:, inactive].T, q[inactive], rcond=None)
    else:
        y = np.zeros(m)
    resid = q[inactive] - A[:, inactive].T @ y if m > 0 else q[inactive]
    kkt_residual = float(np.abs(resid).max(initial=0.0))
    return QpSolution(z=z, y=y, kkt_residual=kkt_residual, iterations=iters,
                      status=_STATUS_NAMES[int(code)])
