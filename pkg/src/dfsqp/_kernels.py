"""Hot numeric kernels: affine-scaling subsolver loops and the tumor ODE.

Everything here is plain float64 loop code decorated with :func:`dfsqp._accel.jit`,
so it runs JIT-compiled under numba by default and as ordinary numpy when
``DFSQP_DISABLE_NUMBA=1`` is set.  Status codes are shared by the solver
kernels: 0 converged, 1 iteration limit, 2 numerical failure.
"""
import numpy as np

from ._accel import jit

# scaling distance cap for coordinates with (effectively) infinite bounds
SCALE_CAP = 1e3
# primal regularization on the scaled Hessian and dual regularization on the
# KKT (2,2) block; keeps the system solvable for rank-deficient Jacobians
QP_REG = 1e-10
DUAL_REG = 1e-10

STATUS_CONVERGED = 0
STATUS_ITER_LIMIT = 1
STATUS_NUMERICAL = 2


@jit
def _bound_distances(z, lower, upper):
    dim = z.shape[0]
    d = np.empty(dim)
    for j in range(dim):
        dj = min(z[j] - lower[j], upper[j] - z[j])
        d[j] = min(dj, SCALE_CAP)
    return d


@jit
def _max_feasible_step(z, p, lower, upper):
    amax = 1e18
    for j in range(z.shape[0]):
        if p[j] > 0.0:
            amax = min(amax, (upper[j] - z[j]) / p[j])
        elif p[j] < 0.0:
            amax = min(amax, (lower[j] - z[j]) / p[j])
    return amax


@jit
def qp_affine_scaling(H, center, g, A, start, lower, upper,
                      max_iter, step_fraction, tol):
    """Affine-scaling iteration for ``min 0.5 (z-c)'H(z-c) + g'(z-c)``
    subject to ``A z = A start`` and box bounds.

    Every iterate stays strictly interior.  Returns ``(z, iterations,
    status)``; the convergence measure is the inf-norm of the scaled
    stationarity residual.
    """
    dim = H.shape[0]
    m = A.shape[0]
    nk = dim + m
    z = start.copy()
    status = STATUS_ITER_LIMIT
    it = 0
    while it < max_iter:
        it += 1
        q = H @ (z - center) + g
        d = _bound_distances(z, lower, upper)
        dcol = d.reshape(dim, 1)
        Hs = dcol * H * d
        kkt = np.zeros((nk, nk))
        kkt[:dim, :dim] = Hs
        for r in range(dim):
            kkt[r, r] += QP_REG
        if m > 0:
            As = A * d
            kkt[dim:, :dim] = As
            kkt[:dim, dim:] = As.T
            for r in range(m):
                kkt[dim + r, dim + r] = -DUAL_REG
        rhs = np.zeros(nk)
        rhs[:dim] = -(d * q)
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            status = STATUS_NUMERICAL
            break
        pt = sol[:dim].copy()
        # scaled stationarity residual |D(q + A'w)| = |(DHD + reg I) pt|
        res_vec = Hs @ pt + QP_REG * pt
        res = np.max(np.abs(res_vec))
        if res <= tol:
            status = STATUS_CONVERGED
            break
        p = d * pt
        amax = _max_feasible_step(z, p, lower, upper)
        alpha = min(1.0, step_fraction * amax)
        if alpha <= 0.0:
            status = STATUS_CONVERGED
            break
        step = alpha * p
        z = z + step
        if np.max(np.abs(step)) <= 1e-16 * (1.0 + np.max(np.abs(z))):
            status = STATUS_CONVERGED
            break
    return z, it, status


@jit
def lp_affine_scaling(A, c, v0, lower, upper, max_iter, step_fraction,
                      tol, obj_stop):
    """Long-step Dikin iteration for ``min c'v`` s.t. ``A v = A v0``, box bounds.

    Stops when the objective reaches ``obj_stop``, when the scaled reduced
    cost is below ``tol``, or at the iteration limit.  Iterates stay strictly
    interior.
    """
    m, nv = A.shape
    v = v0.copy()
    status = STATUS_ITER_LIMIT
    it = 0
    while it < max_iter:
        obj = float(c @ v)
        if obj <= obj_stop:
            status = STATUS_CONVERGED
            break
        it += 1
        d = _bound_distances(v, lower, upper)
        Ad = A * d
        M = Ad @ Ad.T
        for r in range(m):
            M[r, r] += DUAL_REG
        w = np.linalg.solve(M, Ad @ (d * c))
        if not np.all(np.isfinite(w)):
            status = STATUS_NUMERICAL
            break
        r_red = c - A.T @ w
        dr = d * r_red
        if np.max(np.abs(dr)) <= tol * (1.0 + abs(obj)):
            status = STATUS_CONVERGED
            break
        p = -(d * dr)
        amax = _max_feasible_step(v, p, lower, upper)
        if amax > 1e17:
            amax = 1e17
        v = v + step_fraction * amax * p
    return v, it, status


# ---------------------------------------------------------------------------
# Tumor-growth blackbox: segmented Dormand-Prince 5(4) with analytic drug
# concentration C(t) = C0 * exp(-theta1 * t) on each inter-dose segment.
# ---------------------------------------------------------------------------

@jit
def _tumor_rhs(tau, y, c0, theta, kcap):
    """Right-hand side for (P, Q, Q_P); ``tau`` is time since segment start."""
    conc = c0 * np.exp(-theta[0] * tau)
    p, q, qp = y[0], y[1], y[2]
    kill = theta[0] * theta[1] * conc
    total = p + q + qp
    dy = np.empty(3)
    dy[0] = theta[3] * p * (1.0 - total / kcap) + theta[4] * qp - theta[2] * p - kill * p
    dy[1] = theta[2] * p - kill * q
    dy[2] = kill * q - theta[4] * qp - theta[5] * qp
    return dy


@jit
def _integrate_segment(y, c0, theta, kcap, seg_len, rtol, atol):
    """Advance ``y`` in place across one inter-dose segment.

    Returns ``(ok, t_fail)``; ``ok`` is False on step-size underflow.
    """
    t = 0.0
    h = seg_len if seg_len < 1.0 else 1.0
    while t < seg_len:
        if h > seg_len - t:
            h = seg_len - t
        k1 = _tumor_rhs(t, y, c0, theta, kcap)
        k2 = _tumor_rhs(t + h / 5.0, y + h * (k1 / 5.0), c0, theta, kcap)
        k3 = _tumor_rhs(t + 3.0 * h / 10.0,
                        y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2),
                        c0, theta, kcap)
        k4 = _tumor_rhs(t + 4.0 * h / 5.0,
                        y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3),
                        c0, theta, kcap)
        k5 = _tumor_rhs(t + 8.0 * h / 9.0,
                        y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2
                                 + 64448.0 / 6561.0 * k3 - 212.0 / 729.0 * k4),
                        c0, theta, kcap)
        k6 = _tumor_rhs(t + h,
                        y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2
                                 + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
                                 - 5103.0 / 18656.0 * k5),
                        c0, theta, kcap)
        y5 = y + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4
                      - 2187.0 / 6784.0 * k5 + 11.0 / 84.0 * k6)
        k7 = _tumor_rhs(t + h, y5, c0, theta, kcap)
        err_vec = h * (71.0 / 57600.0 * k1 - 71.0 / 16695.0 * k3 + 71.0 / 1920.0 * k4
                       - 17253.0 / 339200.0 * k5 + 22.0 / 525.0 * k6 - k7 / 40.0)
        err = 0.0
        for i in range(3):
            sc = atol + rtol * max(abs(y[i]), abs(y5[i]))
            e = err_vec[i] / sc
            err += e * e
        err = np.sqrt(err / 3.0)
        if err <= 1.0:
            t += h
            for i in range(3):
                y[i] = y5[i]
        fac = 0.9 * err ** -0.2 if err > 0.0 else 5.0
        if fac < 0.2:
            fac = 0.2
        elif fac > 5.0:
            fac = 5.0
        h *= fac
        if h < 1e-14 * (seg_len + 1.0):
            return False, t
    return True, t


@jit
def tumor_rk45(theta, kcap, times, amounts, t_end, rtol, atol):
    """Simulate the dosing schedule; ``times`` must be sorted in [0, t_end].

    Returns ``(tumor_size, c_max, c_cum, status, t_fail)`` with tumor_size =
    P + Q + Q_P at ``t_end`` and the concentration peak/integral computed
    from the analytic per-segment decay.
    """
    y = np.empty(3)
    y[0] = theta[6]
    y[1] = theta[7]
    y[2] = 0.0
    conc = 0.0
    cmax = 0.0
    ccum = 0.0
    t = 0.0
    n = times.shape[0]
    for i in range(n + 1):
        t1 = times[i] if i < n else t_end
        if t1 > t:
            seg = t1 - t
            ok, t_reached = _integrate_segment(y, conc, theta, kcap, seg, rtol, atol)
            if not ok:
                return 0.0, 0.0, 0.0, STATUS_NUMERICAL, t + t_reached
            ccum += conc * (1.0 - np.exp(-theta[0] * seg)) / theta[0]
            conc *= np.exp(-theta[0] * seg)
            t = t1
        if i < n:
            conc += amounts[i]
            if conc > cmax:
                cmax = conc
    return y[0] + y[1] + y[2], cmax, ccum, STATUS_CONVERGED, t_end
