import numpy as np
import pytest

from dfsqp.problem import (
    EvalBudgetExhausted,
    NoiseModel,
    ProblemSpec,
    apply_noise,
    box_violation,
    clip_interior,
    default_ineq_guess,
    infeasibility,
    to_standard_form,
)

INF = np.inf


def make_spec(**kw):
    base = dict(
        objective=lambda x: float(x[0] ** 2),
        x0=[3.0],
    )
    base.update(kw)
    return ProblemSpec(**base)


# ---------------------------------------------------------------------------
# default_ineq_guess
# ---------------------------------------------------------------------------

def test_guess_two_sided_midpoint():
    assert default_ineq_guess(np.array([0.0]), np.array([4.0]))[0] == 2.0


def test_guess_symmetric_midpoint_tiny_interval():
    eps = 1e-9
    lo, hi = np.array([-1.0]), np.array([-1.0 + 2 * eps])
    guess = default_ineq_guess(lo, hi)
    assert abs(guess[0] - (-1.0 + eps)) <= 1e-15


def test_guess_one_sided_lower():
    assert default_ineq_guess(np.array([3.0]), np.array([INF]))[0] == 4.0


def test_guess_one_sided_upper():
    assert default_ineq_guess(np.array([-INF]), np.array([10.0]))[0] == 9.0


def test_guess_unbounded_row_rejected():
    with pytest.raises(ValueError, match="unbounded inequality row"):
        default_ineq_guess(np.array([-INF]), np.array([INF]))


def test_clip_interior_margins():
    lo, hi = np.array([0.0]), np.array([4.0])
    assert clip_interior(np.array([-1.0]), lo, hi)[0] == pytest.approx(0.2)
    assert clip_interior(np.array([9.0]), lo, hi)[0] == pytest.approx(3.8)
    assert clip_interior(np.array([2.0]), lo, hi)[0] == 2.0


# ---------------------------------------------------------------------------
# ProblemSpec validation
# ---------------------------------------------------------------------------

def test_spec_rejects_boundary_start():
    with pytest.raises(ValueError, match="strictly inside"):
        make_spec(box_lower=[3.0], box_upper=[5.0])


def test_spec_rejects_crossed_bounds():
    with pytest.raises(ValueError):
        make_spec(box_lower=[5.0], box_upper=[1.0], x0=[2.0])


def test_spec_rejects_unbounded_ineq_row():
    with pytest.raises(ValueError, match="unbounded inequality row"):
        make_spec(ineq_con=lambda x: np.array([x[0]]))


# ---------------------------------------------------------------------------
# to_standard_form
# ---------------------------------------------------------------------------

def test_standard_form_no_slacks_is_original():
    spec = make_spec()
    sf = to_standard_form(spec)
    assert sf.dim == 1
    assert np.array_equal(sf.z0, spec.x0)
    assert sf.combined_eq(sf.z0).shape == (0,)


def test_standard_form_slack_row_arithmetic():
    spec = make_spec(
        ineq_con=lambda x: np.array([x[0] ** 2]),
        ineq_lower=[0.0],
        ineq_upper=[4.0],
        ineq_guess=[2.0],
    )
    sf = to_standard_form(spec)
    # z = [slack; x]
    out = sf.combined_eq(np.array([2.0, 3.0]))
    assert out[-1] == 9.0 - 2.0


def test_standard_form_hs11_shape():
    from dfsqp.bench import hs_problem

    sf = to_standard_form(hs_problem("HS11").spec)
    assert sf.dim == 3
    assert sf.m == 1


def test_slack_rows_exact_for_random_points():
    rng = np.random.default_rng(3)
    spec = make_spec(
        x0=[1.0, 1.0],
        objective=lambda x: float(x[0] + x[1]),
        ineq_con=lambda x: np.array([np.sin(x[0]), x[0] * x[1]]),
        ineq_lower=[-2.0, -2.0],
        ineq_upper=[2.0, 2.0],
    )
    sf = to_standard_form(spec)
    for _ in range(25):
        z = rng.standard_normal(sf.dim)
        G = sf.combined_eq(z)
        x = z[2:]
        h = np.array([np.sin(x[0]), x[0] * x[1]])
        assert np.array_equal(G, h - z[:2])


def test_eval_bundle_accounting():
    calls = {"f": 0, "h": 0}

    def f(x):
        calls["f"] += 1
        return float(x[0])

    def h(x):
        calls["h"] += 1
        return np.array([x[0]])

    spec = make_spec(objective=f, ineq_con=h, ineq_lower=[0.0], ineq_upper=[4.0],
                     ineq_guess=[2.0], m2=1)
    sf = to_standard_form(spec)
    calls["f"] = calls["h"] = 0  # drop any validation-time calls
    z = sf.z0.copy()
    sf.objective(z)
    sf.combined_eq(z)
    sf.bundle(z)
    assert sf.eval_count == 1
    assert calls == {"f": 1, "h": 1}
    sf.bundle(z + 0.5)
    assert sf.eval_count == 2


def test_eval_counter_never_decreases():
    sf = to_standard_form(make_spec())
    counts = []
    for t in np.linspace(0.1, 1.0, 7):
        sf.bundle(np.array([t]))
        counts.append(sf.eval_count)
    assert counts == sorted(counts)


def test_eval_budget_exhausted():
    sf = to_standard_form(make_spec())
    sf.max_evals = 2
    sf.bundle(np.array([0.1]))
    sf.bundle(np.array([0.2]))
    with pytest.raises(EvalBudgetExhausted):
        sf.bundle(np.array([0.3]))
    # cached points stay readable after exhaustion
    assert sf.bundle(np.array([0.2]))[0] == pytest.approx(0.04)


# ---------------------------------------------------------------------------
# infeasibility
# ---------------------------------------------------------------------------

def test_infeasibility_zero_at_feasible_interior():
    spec = make_spec(
        ineq_con=lambda x: np.array([x[0]]),
        ineq_lower=[0.0],
        ineq_upper=[4.0],
        ineq_guess=[3.0],
    )
    sf = to_standard_form(spec)
    assert infeasibility(sf, np.array([3.0, 3.0])) == 0.0


def test_infeasibility_max_norm():
    spec = make_spec(
        x0=[1.0],
        eq_con=lambda x: np.array([0.3, -0.7]),
    )
    sf = to_standard_form(spec)
    assert infeasibility(sf, np.array([1.0])) == pytest.approx(0.7)


def test_round_trip_feasible_point():
    spec = make_spec(
        x0=[1.0],
        ineq_con=lambda x: np.array([x[0] ** 2]),
        ineq_lower=[0.0],
        ineq_upper=[4.0],
    )
    sf = to_standard_form(spec)
    x = np.array([1.5])
    z = np.concatenate([spec.ineq_con(x), x])  # slack = h(x)
    assert infeasibility(sf, z) == 0.0


def test_box_violation_with_infinite_bounds():
    lo = np.array([-INF, 0.0])
    hi = np.array([INF, 1.0])
    assert box_violation(np.array([-50.0, 0.5]), lo, hi) == 0.0
    assert box_violation(np.array([0.0, 1.25]), lo, hi) == pytest.approx(0.25)


# ---------------------------------------------------------------------------
# apply_noise
# ---------------------------------------------------------------------------

def test_noise_zero_magnitude_is_bit_identical():
    spec = make_spec(eq_con=lambda x: np.array([x[0] * 7.0]))
    noisy = apply_noise(spec, NoiseModel(0.0, seed=5))
    for v in (0.3, 1.7, -2.5):
        x = np.array([v])
        assert noisy.objective(x) == spec.objective(x)
        assert np.array_equal(noisy.eq_con(x), spec.eq_con(x))


def test_noise_tail_bound_monte_carlo():
    # multiplicative gaussian, magnitude 1e-4: |output/100 - 1| <= 5e-4
    # corresponds to |xi| <= 5, which a 1e5-sample draw essentially never
    # exceeds (P ~ 5.7e-7 per sample)
    spec = make_spec(objective=lambda x: 100.0)
    noisy = apply_noise(spec, NoiseModel(1e-4, seed=11))
    x = np.array([1.0])
    samples = np.array([noisy.objective(x) for _ in range(100_000)])
    inside = np.abs(samples / 100.0 - 1.0) <= 5e-4
    assert inside.mean() >= 0.9999


def test_noise_seeded_determinism():
    spec = make_spec(ineq_con=lambda x: np.array([x[0], 2 * x[0]]),
                     ineq_lower=[0.0, 0.0], ineq_upper=[9.0, 9.0])
    x = np.array([1.2])
    a = apply_noise(spec, NoiseModel(1e-2, seed=42))
    b = apply_noise(spec, NoiseModel(1e-2, seed=42))
    seq_a = [a.objective(x), tuple(a.ineq_con(x)), a.objective(x)]
    seq_b = [b.objective(x), tuple(b.ineq_con(x)), b.objective(x)]
    assert seq_a == seq_b


def test_noise_draws_are_fresh_per_evaluation():
    spec = make_spec(objective=lambda x: 10.0)
    noisy = apply_noise(spec, NoiseModel(1e-2, seed=0))
    x = np.array([1.0])
    assert noisy.objective(x) != noisy.objective(x)
