import numpy as np
import pytest

from dfsqp.alm import (
    SolverOptions,
    check_restart,
    modified_AL,
    projected_stationarity,
    solve,
    update_penalty,
)
from dfsqp.problem import ProblemSpec, to_standard_form

INF = np.inf


# ---------------------------------------------------------------------------
# modified_AL
# ---------------------------------------------------------------------------

def al_fixture():
    def f(x):
        return float(x[0] ** 2 - x[1])

    def g(x):
        return np.array([x[0] * x[1] - 1.0, x[0] + x[1] - 2.0])

    spec = ProblemSpec(objective=f, eq_con=g, x0=[1.5, 0.5])
    return to_standard_form(spec)


def test_modified_al_equals_f_at_expansion_point():
    sf = al_fixture()
    z_k = sf.z0.copy()
    G_k = sf.combined_eq(z_k)
    J = np.array([[0.5, 1.5], [1.0, 1.0]])
    y = np.array([0.7, -0.3])
    val = modified_AL(z_k, y, rho=5.0, z_k=z_k, G_k=G_k, J=J, sf=sf)
    assert val == sf.objective(z_k)  # exact, not approximate


def test_modified_al_reduces_to_f_for_affine_constraints():
    def f(x):
        return float(np.sin(x[0]) + x[1] ** 2)

    def g(x):
        return np.array([2.0 * x[0] - x[1] + 1.0])

    spec = ProblemSpec(objective=f, eq_con=g, x0=[0.3, 0.4])
    sf = to_standard_form(spec)
    z_k = sf.z0.copy()
    G_k = sf.combined_eq(z_k)
    J = np.array([[2.0, -1.0]])  # exact Jacobian of the affine map
    y = np.array([3.0])
    for z in ([1.0, -2.0], [0.0, 0.0], [-1.5, 2.5]):
        z = np.array(z)
        val = modified_AL(z, y, rho=7.0, z_k=z_k, G_k=G_k, J=J, sf=sf)
        assert val == pytest.approx(sf.objective(z), abs=1e-12)


def test_modified_al_penalty_arithmetic():
    # w = [1, -1], f = 0, y = 0, rho = 2 -> value = (2/2) * 2 = 2
    spec = ProblemSpec(objective=lambda x: 0.0,
                       eq_con=lambda x: np.array([1.0, -1.0]), x0=[0.0])
    sf = to_standard_form(spec)
    z_k = sf.z0.copy()
    val = modified_AL(z_k, np.zeros(2), rho=2.0, z_k=z_k,
                      G_k=np.zeros(2), J=np.zeros((2, 1)), sf=sf)
    assert val == 2.0


# ---------------------------------------------------------------------------
# update_penalty branch table
# ---------------------------------------------------------------------------

def popts(**kw):
    base = dict(c_z=10.0, c_ir=5.0, r_ir=5.0, c_rr=0.2, r_rr=0.2, tol=1e-4)
    base.update(kw)
    return SolverOptions(**base)


def test_penalty_zeroed_when_nearly_feasible():
    assert update_penalty(3.0, 0.0, 1.0, popts()) == 0.0
    assert update_penalty(3.0, 9e-4, 1.0, popts()) == 0.0  # <= c_z * tol


def test_penalty_increase_branch():
    assert update_penalty(1.0, 10.0, 1.0, popts()) == 5.0


def test_penalty_decrease_branch():
    assert update_penalty(1.0, 0.1, 1.0, popts()) == pytest.approx(0.2)


def test_penalty_dead_zone():
    assert update_penalty(1.0, 1.0, 1.0, popts()) == 1.0


def test_penalty_rho_max_clamp():
    assert update_penalty(5e4, 10.0, 1.0, popts(rho_max=1e5)) == 1e5


def test_penalty_never_negative():
    rng = np.random.default_rng(0)
    rho = 1.0
    v_prev = 1.0
    for _ in range(100):
        v = float(rng.uniform(0, 2))
        rho = update_penalty(rho, v, v_prev, popts())
        v_prev = v
        assert rho >= 0.0


# ---------------------------------------------------------------------------
# projected_stationarity
# ---------------------------------------------------------------------------

def test_stationarity_zero_gradient():
    z = np.array([0.5, 0.5])
    assert projected_stationarity(z, np.zeros(2), np.zeros(2), np.ones(2)) == 0.0


def test_stationarity_interior_is_grad_norm():
    z = np.zeros(2)
    grad = np.array([0.3, -0.2])
    lo = np.full(2, -INF)
    hi = np.full(2, INF)
    assert projected_stationarity(z, grad, lo, hi) == pytest.approx(0.3)


def test_stationarity_bound_kills_ascent_component():
    # z at the lower bound, positive gradient: the projection clamps the
    # step back to the bound, so that coordinate contributes nothing
    z = np.array([0.0])
    grad = np.array([2.0])
    assert projected_stationarity(z, grad, np.zeros(1), np.ones(1)) == 0.0


# ---------------------------------------------------------------------------
# check_restart
# ---------------------------------------------------------------------------

def test_restart_none_when_objective_drops():
    out = check_restart(10.0, 5.0, 1.0, 1.0, stationarity=99.0,
                        eps_s=1e-4, eps_a=1e-2)
    assert out == "none"


def test_restart_soft_on_flat_objective_far_from_stationary():
    out = check_restart(1.0, 1.0 - 1e-9, 1.0, 1.0, stationarity=0.5,
                        eps_s=1e-4, eps_a=1e-2)
    assert out == "soft_restart"


def test_restart_dual_reset_when_both_increase():
    out = check_restart(1.0, 2.0, 0.5, 1.5, stationarity=0.0,
                        eps_s=1e-4, eps_a=1e-2)
    assert out == "dual_reset_restart"


def test_restart_none_when_flat_but_stationary():
    out = check_restart(1.0, 1.0, 1.0, 1.0, stationarity=1e-5,
                        eps_s=1e-4, eps_a=1e-2)
    assert out == "none"


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_unconstrained_quadratic():
    spec = ProblemSpec(objective=lambda x: float((x[0] - 1) ** 2 + 2 * (x[1] + 0.5) ** 2),
                       x0=[3.0, 3.0])
    res = solve(spec)
    assert res.status == "converged"
    assert np.abs(res.x_star - [1.0, -0.5]).max() <= 1e-4
    assert len(res.trace) <= 10


def test_solve_equality_constrained():
    spec = ProblemSpec(
        objective=lambda x: float(x[0] ** 2 + x[1] ** 2),
        eq_con=lambda x: np.array([x[0] + x[1] - 2.0]),
        x0=[0.5, 3.0],
    )
    res = solve(spec)
    assert res.status == "converged"
    assert np.abs(res.x_star - 1.0).max() <= 1e-3
    assert res.infeasibility <= 1e-4


def test_solve_result_invariants():
    spec = ProblemSpec(
        objective=lambda x: float((x[0] - 2) ** 2),
        ineq_con=lambda x: np.array([x[0]]),
        ineq_lower=[0.0],
        ineq_upper=[1.0],
        x0=[0.5],
    )
    opts = SolverOptions()
    res = solve(spec, opts)
    # converged results satisfy the advertised tolerances at x_star
    assert res.infeasibility <= opts.feas_tol
    # reported objective equals a fresh noiseless evaluation at x_star
    assert res.objective == pytest.approx(float((res.x_star[0] - 2) ** 2), abs=1e-12)
    assert len(res.trace) <= opts.max_outer
    assert all(t.rho >= 0.0 for t in res.trace)


def test_solve_eval_budget_status():
    spec = ProblemSpec(objective=lambda x: float((x[0] - 1) ** 2), x0=[5.0])
    res = solve(spec, SolverOptions(max_evals=7))
    assert res.status == "eval-budget"
    assert res.eval_count <= 7


def test_solve_trace_is_deterministic():
    def build():
        return ProblemSpec(
            objective=lambda x: float(x[0] ** 2 + (x[1] - 1) ** 4),
            eq_con=lambda x: np.array([x[0] + 2 * x[1] - 3.0]),
            x0=[2.0, 2.0],
        )

    r1 = solve(build(), SolverOptions())
    r2 = solve(build(), SolverOptions())
    assert len(r1.trace) == len(r2.trace)
    for a, b in zip(r1.trace, r2.trace):
        assert a.objective == b.objective
        assert a.infeasibility == b.infeasibility
        assert a.rho == b.rho
        assert a.delta == b.delta
        assert a.restart == b.restart
    assert np.array_equal(r1.z_star, r2.z_star)


def test_solve_rejects_bad_options():
    with pytest.raises(ValueError):
        SolverOptions(tol=-1.0)
    with pytest.raises(ValueError):
        SolverOptions(max_outer=0)
    with pytest.raises(ValueError):
        SolverOptions(r_rr=1.5)


def test_solve_eval_log_rows():
    spec = ProblemSpec(objective=lambda x: float(x[0] ** 2), x0=[2.0])
    log = []
    res = solve(spec, SolverOptions(max_evals=50), eval_log=log)
    assert len(log) == res.eval_count
    assert log[0][0] == 1
    idx = [row[0] for row in log]
    assert idx == sorted(idx)
