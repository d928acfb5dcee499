import numpy as np
import pytest

from dfsqp.numdiff import StepController, forward_gradient, forward_jacobian, update_step


def ctrl(delta=1e-3, **kw):
    return StepController(delta=delta, delta0=delta, **kw)


# ---------------------------------------------------------------------------
# forward_gradient
# ---------------------------------------------------------------------------

def test_gradient_linear_exact():
    a = np.array([2.0, -3.0, 0.5])
    z = np.array([0.3, 0.4, 0.5])
    grad, probes = forward_gradient(lambda v: float(a @ v), z, 1e-3)
    assert np.allclose(grad, a, atol=1e-10)
    assert len(probes) == 3


def test_gradient_forward_difference_bias():
    # f = z^2 at z=1, step 1e-3: (f(1.001) - f(1)) / 1e-3 = 2 + 1e-3
    grad, _ = forward_gradient(lambda v: float(v[0] ** 2), np.array([1.0]), 1e-3)
    assert grad[0] == pytest.approx(2.001, abs=1e-12)


def _hs38_objective(x):
    return (100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
            + 90.0 * (x[3] - x[2] ** 2) ** 2 + (1.0 - x[2]) ** 2
            + 10.1 * ((x[1] - 1.0) ** 2 + (x[3] - 1.0) ** 2)
            + 19.8 * (x[1] - 1.0) * (x[3] - 1.0))


def _hs38_gradient(x):
    # analytic oracle, differentiated by hand
    g = np.zeros(4)
    g[0] = -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0])
    g[1] = 200.0 * (x[1] - x[0] ** 2) + 20.2 * (x[1] - 1.0) + 19.8 * (x[3] - 1.0)
    g[2] = -360.0 * x[2] * (x[3] - x[2] ** 2) - 2.0 * (1.0 - x[2])
    g[3] = 180.0 * (x[3] - x[2] ** 2) + 20.2 * (x[3] - 1.0) + 19.8 * (x[1] - 1.0)
    return g


def test_gradient_hs38_matches_analytic_within_hessian_bound():
    x0 = np.array([-3.0, -1.0, -3.0, -1.0])
    delta = 1e-6
    grad, _ = forward_gradient(lambda v: float(_hs38_objective(v)), x0, delta)
    exact = _hs38_gradient(x0)
    # curvature bound near x0: max |f''| entry is ~1.13e4 (at x1 = -3)
    step = delta * np.maximum(1.0, np.abs(x0))
    bound = 0.5 * 1.2e4 * step.max() + 1e-6
    assert np.abs(grad - exact).max() <= bound


def test_gradient_probe_points_and_count():
    z = np.array([0.5, 1.5])
    grad, probes = forward_gradient(lambda v: float(v.sum()), z, 1e-3)
    assert len(probes) == 2
    # relative step: delta * max(1, |z_i|)
    assert probes[0][0][0] == pytest.approx(0.5 + 1e-3)
    assert probes[1][0][1] == pytest.approx(1.5 + 1.5e-3)


def test_gradient_backward_probe_at_upper_bound():
    z = np.array([1.0])
    lo, hi = np.array([0.0]), np.array([1.0 + 1e-9])
    grad, probes = forward_gradient(lambda v: float(3 * v[0]), z, 1e-3, lo, hi)
    assert grad[0] == pytest.approx(3.0)
    assert probes[0][0][0] < 1.0  # probed backwards


def test_gradient_nonfinite_raises_with_point():
    from dfsqp.problem import EvaluationError

    def bad(v):
        return np.inf if v[0] > 1.0005 else 1.0

    with pytest.raises(EvaluationError) as err:
        forward_gradient(bad, np.array([1.0]), 1e-3)
    assert err.value.point[0] > 1.0


# ---------------------------------------------------------------------------
# forward_jacobian
# ---------------------------------------------------------------------------

def test_jacobian_affine_exact():
    A = np.array([[1.0, 2.0], [3.0, -1.0], [0.0, 5.0]])
    b = np.array([0.5, -0.5, 1.0])
    J = forward_jacobian(lambda z: A @ z + b, np.array([0.3, -0.7]), 1e-4)
    assert np.allclose(J, A, atol=1e-9)


def test_jacobian_slack_rows_are_minus_identity():
    from dfsqp.problem import ProblemSpec, to_standard_form

    spec = ProblemSpec(
        objective=lambda x: 0.0,
        x0=[1.0, 2.0],
        ineq_con=lambda x: np.array([x[0] * x[1], x[0] ** 2]),
        ineq_lower=[0.0, 0.0],
        ineq_upper=[9.0, 9.0],
    )
    sf = to_standard_form(spec)
    J = forward_jacobian(sf.combined_eq, sf.z0, 1e-5)
    assert np.allclose(J[:, :2], -np.eye(2), atol=1e-9)


def test_jacobian_product_rule_example():
    # g(x) = x1*x2 at (2,3): exact row is [3, 2]; forward differences with
    # magnitude-scaled steps recover it to first order
    J = forward_jacobian(lambda z: np.array([z[0] * z[1]]),
                         np.array([2.0, 3.0]), 1e-4)
    assert abs(J[0, 0] - 3.0) <= 2e-4
    assert abs(J[0, 1] - 2.0001) <= 2e-4


# ---------------------------------------------------------------------------
# update_step branch table
# ---------------------------------------------------------------------------

def test_update_step_grow_branch():
    c = ctrl(1e-3, c_e=10.0, r_ed=2.0)
    new, changed = update_step(c, 0.5)  # 0.5 >= 10 * 1e-3
    assert changed and new.delta == pytest.approx(2e-3)


def test_update_step_shrink_branch():
    c = ctrl(1e-3, c_re=0.1, r_rd=0.5)
    new, changed = update_step(c, 5e-5)  # 5e-5 <= 1e-4
    assert changed and new.delta == pytest.approx(5e-4)


def test_update_step_dead_zone():
    c = ctrl(1e-3)
    new, changed = update_step(c, 5e-3)  # between 1e-4 and 1e-2
    assert not changed and new is c


def test_update_step_negative_ratio_shrinks():
    c = ctrl(1e-3)
    new, changed = update_step(c, -1.0)
    assert changed and new.delta == pytest.approx(5e-4)


def test_update_step_clamps_never_escape():
    c = ctrl(1e-3, delta_min=1e-8, delta_max=1e-1)
    for _ in range(100):
        c, _ = update_step(c, -1.0)
    assert c.delta == 1e-8
    for _ in range(100):
        c, _ = update_step(c, 1e9)
    assert c.delta == 1e-1


def test_update_step_at_clamp_reports_unchanged():
    c = ctrl(1e-8, delta_min=1e-8)
    new, changed = update_step(c, -1.0)
    assert new.delta == 1e-8 and not changed


def test_controller_invariants_enforced():
    with pytest.raises(ValueError):
        ctrl(1e-3, r_ed=0.5)
    with pytest.raises(ValueError):
        ctrl(1e-3, c_re=20.0, c_e=10.0)


def test_controller_reset_restores_initial_step():
    c = ctrl(1e-3)
    c, _ = update_step(c, -1.0)
    assert c.reset().delta == 1e-3
