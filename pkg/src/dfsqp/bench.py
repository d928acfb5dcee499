"""Benchmark problems and the experiment harness.

A subset of the classic Hock-Schittkowski collection, transcribed from the
published formulations, with the book's start points, optimal points, and
optimal values.  Problems are deliberately exposed only through blackbox
callbacks, matching how the solver is used.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .alm import SolveResult, SolverOptions, solve
from .problem import NoiseModel, ProblemSpec, apply_noise, box_violation

__all__ = [
    "BenchProblem",
    "SuiteRow",
    "NoiseReport",
    "hs_problem",
    "supported_ids",
    "solved",
    "true_objective",
    "true_infeasibility",
    "run_suite",
    "rows_to_csv",
    "CSV_HEADER",
]

INF = np.inf


@dataclass
class BenchProblem:
    id: str
    spec: ProblemSpec
    f_opt: float
    x_opt: np.ndarray

    @property
    def dim(self) -> int:
        return self.spec.n


# ---------------------------------------------------------------------------
# Problem definitions.  Each builder returns (spec, f_opt, x_opt).
# ---------------------------------------------------------------------------

def _hs1():
    def f(x):
        return 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2

    spec = ProblemSpec(
        objective=f,
        x0=[-2.0, 1.0],
        box_lower=[-INF, -1.5],
    )
    return spec, 0.0, np.array([1.0, 1.0])


def _hs11():
    def f(x):
        return (x[0] - 5.0) ** 2 + x[1] ** 2 - 25.0

    def h(x):
        return np.array([x[1] - x[0] ** 2])

    spec = ProblemSpec(
        objective=f, ineq_con=h, ineq_lower=[0.0], ineq_upper=[INF],
        x0=[4.9, 0.1],
    )
    x_opt = np.array([1.2347728203875512, 1.524663904632881])
    return spec, -8.498464223, x_opt


def _hs26():
    def f(x):
        return (x[0] - x[1]) ** 2 + (x[1] - x[2]) ** 4

    def g(x):
        return np.array([(1.0 + x[1] ** 2) * x[0] + x[2] ** 4 - 3.0])

    spec = ProblemSpec(objective=f, eq_con=g, x0=[-2.6, 2.0, 2.0])
    return spec, 0.0, np.array([1.0, 1.0, 1.0])


def _hs38():
    def f(x):
        return (100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
                + 90.0 * (x[3] - x[2] ** 2) ** 2 + (1.0 - x[2]) ** 2
                + 10.1 * ((x[1] - 1.0) ** 2 + (x[3] - 1.0) ** 2)
                + 19.8 * (x[1] - 1.0) * (x[3] - 1.0))

    spec = ProblemSpec(
        objective=f,
        x0=[-3.0, -1.0, -3.0, -1.0],
        box_lower=[-10.0] * 4,
        box_upper=[10.0] * 4,
    )
    return spec, 0.0, np.ones(4)


def _hs40():
    def f(x):
        return -x[0] * x[1] * x[2] * x[3]

    def g(x):
        return np.array([
            x[0] ** 3 + x[1] ** 2 - 1.0,
            x[0] ** 2 * x[3] - x[2],
            x[3] ** 2 - x[1],
        ])

    spec = ProblemSpec(objective=f, eq_con=g, x0=[0.8] * 4)
    x_opt = np.array([2.0 ** (-1.0 / 3.0), 2.0 ** (-1.0 / 2.0),
                      2.0 ** (-2.0 / 3.0 - 1.0 / 4.0), 2.0 ** (-1.0 / 4.0)])
    return spec, -0.25, x_opt


def _hs46():
    def f(x):
        return ((x[0] - x[1]) ** 2 + (x[2] - 1.0) ** 2
                + (x[3] - 1.0) ** 4 + (x[4] - 1.0) ** 6)

    def g(x):
        return np.array([
            x[0] ** 2 * x[3] + math.sin(x[3] - x[4]) - 1.0,
            x[1] + x[2] ** 4 * x[3] ** 2 - 2.0,
        ])

    spec = ProblemSpec(
        objective=f, eq_con=g,
        x0=[math.sqrt(2.0) / 2.0, 1.75, 0.5, 2.0, 2.0],
    )
    return spec, 0.0, np.ones(5)


def _hs56():
    def f(x):
        return -x[0] * x[1] * x[2]

    def g(x):
        return np.array([
            x[0] - 4.2 * math.sin(x[3]) ** 2,
            x[1] - 4.2 * math.sin(x[4]) ** 2,
            x[2] - 4.2 * math.sin(x[5]) ** 2,
            x[0] + 2.0 * x[1] + 2.0 * x[2] - 7.2 * math.sin(x[6]) ** 2,
        ])

    a = math.asin(math.sqrt(1.0 / 4.2))
    b = math.asin(math.sqrt(5.0 / 7.2))
    spec = ProblemSpec(objective=f, eq_con=g, x0=[1.0, 1.0, 1.0, a, a, a, b])
    x_opt = np.array([
        2.4, 1.2, 1.2,
        math.asin(math.sqrt(2.4 / 4.2)),
        math.asin(math.sqrt(1.2 / 4.2)),
        math.asin(math.sqrt(1.2 / 4.2)),
        math.pi / 2.0,
    ])
    return spec, -3.456, x_opt


def _hs78():
    def f(x):
        return x[0] * x[1] * x[2] * x[3] * x[4]

    def g(x):
        return np.array([
            x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2 + x[4] ** 2 - 10.0,
            x[1] * x[2] - 5.0 * x[3] * x[4],
            x[0] ** 3 + x[1] ** 3 + 1.0,
        ])

    spec = ProblemSpec(objective=f, eq_con=g, x0=[-2.0, 1.5, 2.0, -1.0, -1.0])
    x_opt = np.array([-1.7171435654712657, 1.5957096844826262,
                      1.8272457620747140, -0.7636430673147703,
                      -0.7636430901481875])
    return spec, -2.91970035, x_opt


def _hs79():
    def f(x):
        return ((x[0] - 1.0) ** 2 + (x[0] - x[1]) ** 2 + (x[1] - x[2]) ** 2
                + (x[2] - x[3]) ** 4 + (x[3] - x[4]) ** 4)

    def g(x):
        return np.array([
            x[0] + x[1] ** 2 + x[2] ** 3 - 2.0 - 3.0 * math.sqrt(2.0),
            x[1] - x[2] ** 2 + x[3] + 2.0 - 2.0 * math.sqrt(2.0),
            x[0] * x[4] - 2.0,
        ])

    spec = ProblemSpec(objective=f, eq_con=g, x0=[2.0] * 5)
    x_opt = np.array([1.1911274491528925, 1.3626031623550763,
                      1.4728179337036653, 1.6350166282302483,
                      1.6790814462569580])
    return spec, 0.0787768209, x_opt


def _hs80():
    def f(x):
        return math.exp(x[0] * x[1] * x[2] * x[3] * x[4])

    def g(x):
        return np.array([
            x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2 + x[4] ** 2 - 10.0,
            x[1] * x[2] - 5.0 * x[3] * x[4],
            x[0] ** 3 + x[1] ** 3 + 1.0,
        ])

    spec = ProblemSpec(
        objective=f, eq_con=g,
        x0=[-2.0, 2.0, 2.0, -1.0, -1.0],
        box_lower=[-2.3, -2.3, -3.2, -3.2, -3.2],
        box_upper=[2.3, 2.3, 3.2, 3.2, 3.2],
    )
    x_opt = np.array([-1.7171435687386407, 1.5957096882662194,
                      1.8272457560036868, -0.7636430784172819,
                      -0.7636430783191474])
    return spec, 0.0539498478, x_opt


def _hs81():
    def f(x):
        return (math.exp(x[0] * x[1] * x[2] * x[3] * x[4])
                - 0.5 * (x[0] ** 3 + x[1] ** 3 + 1.0) ** 2)

    def g(x):
        return np.array([
            x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2 + x[4] ** 2 - 10.0,
            x[1] * x[2] - 5.0 * x[3] * x[4],
            x[0] ** 3 + x[1] ** 3 + 1.0,
        ])

    spec = ProblemSpec(
        objective=f, eq_con=g,
        x0=[-2.0, 2.0, 2.0, -1.0, -1.0],
        box_lower=[-2.3, -2.3, -3.2, -3.2, -3.2],
        box_upper=[2.3, 2.3, 3.2, 3.2, 3.2],
    )
    x_opt = np.array([-1.7171435687386407, 1.5957096882662194,
                      1.8272457560036868, -0.7636430784172819,
                      -0.7636430783191474])
    return spec, 0.0539498478, x_opt


_HS84_A = np.array([
    -24345.0, -8720288.849, 150512.5253, -156.6950325, 476470.3222,
    729482.8271, -145421.402, 2931.1506, -40.427932, 5106.192,
    15711.36, -155011.1084, 4360.53352, 12.9492344, 10236.884,
    13176.786, -326669.5104, 7390.68412, -27.8986976, 16643.076,
    30988.146,
])


def _hs84():
    a = _HS84_A

    def f(x):
        return -(a[0] + a[1] * x[0] + a[2] * x[0] * x[1] + a[3] * x[0] * x[2]
                 + a[4] * x[0] * x[3] + a[5] * x[0] * x[4])

    def h(x):
        return np.array([
            a[6] * x[0] + a[7] * x[0] * x[1] + a[8] * x[0] * x[2]
            + a[9] * x[0] * x[3] + a[10] * x[0] * x[4],
            a[11] * x[0] + a[12] * x[0] * x[1] + a[13] * x[0] * x[2]
            + a[14] * x[0] * x[3] + a[15] * x[0] * x[4],
            a[16] * x[0] + a[17] * x[0] * x[1] + a[18] * x[0] * x[2]
            + a[19] * x[0] * x[3] + a[20] * x[0] * x[4],
        ])

    spec = ProblemSpec(
        objective=f, ineq_con=h,
        ineq_lower=[0.0, 0.0, 0.0],
        ineq_upper=[294000.0, 294000.0, 277200.0],
        x0=[2.52, 2.0, 37.5, 9.25, 6.8],
        box_lower=[0.0, 1.2, 20.0, 9.0, 6.5],
        box_upper=[1000.0, 2.4, 60.0, 9.3, 7.0],
    )
    x_opt = np.array([4.53743097, 2.4, 60.0, 9.3, 7.0])
    return spec, -5280335.133, x_opt


def _hs93():
    def f(x):
        return (0.0204 * x[0] * x[3] * (x[0] + x[1] + x[2])
                + 0.0187 * x[1] * x[2] * (x[0] + 1.57 * x[1] + x[3])
                + 0.0607 * x[0] * x[3] * x[4] ** 2 * (x[0] + x[1] + x[2])
                + 0.0437 * x[1] * x[2] * x[5] ** 2 * (x[0] + 1.57 * x[1] + x[3]))

    def h(x):
        return np.array([
            0.001 * x[0] * x[1] * x[2] * x[3] * x[4] * x[5] - 2.07,
            1.0 - 0.00062 * x[0] * x[3] * x[4] ** 2 * (x[0] + x[1] + x[2])
            - 0.00058 * x[1] * x[2] * x[5] ** 2 * (x[0] + 1.57 * x[1] + x[3]),
        ])

    spec = ProblemSpec(
        objective=f, ineq_con=h,
        ineq_lower=[0.0, 0.0], ineq_upper=[INF, INF],
        x0=[5.54, 4.4, 12.02, 11.82, 0.702, 0.852],
        box_lower=[0.0] * 6,
    )
    x_opt = np.array([5.3326664092104660, 4.6567440285905550,
                      10.432993891982909, 12.082304021056917,
                      0.7526074732775151, 0.8786508292767412])
    return spec, 135.075961, x_opt


def _hs106():
    def f(x):
        return x[0] + x[1] + x[2]

    def h(x):
        return np.array([
            1.0 - 0.0025 * (x[3] + x[5]),
            1.0 - 0.0025 * (x[4] + x[6] - x[3]),
            1.0 - 0.01 * (x[7] - x[4]),
            x[0] * x[5] - 833.33252 * x[3] - 100.0 * x[0] + 83333.333,
            x[1] * x[6] - 1250.0 * x[4] - x[1] * x[3] + 1250.0 * x[3],
            x[2] * x[7] - 1250000.0 - x[2] * x[4] + 2500.0 * x[4],
        ])

    spec = ProblemSpec(
        objective=f, ineq_con=h,
        ineq_lower=[0.0] * 6, ineq_upper=[INF] * 6,
        x0=[5000.0, 5000.0, 5000.0, 200.0, 350.0, 150.0, 225.0, 425.0],
        box_lower=[100.0, 1000.0, 1000.0] + [10.0] * 5,
        box_upper=[10000.0] * 3 + [1000.0] * 5,
    )
    x_opt = np.array([579.3167, 1359.943, 5110.071, 182.0174,
                      295.5985, 217.9799, 286.4162, 395.5979])
    return spec, 7049.330923, x_opt


_BUILDERS: dict[str, Callable] = {
    "HS1": _hs1,
    "HS11": _hs11,
    "HS26": _hs26,
    "HS38": _hs38,
    "HS40": _hs40,
    "HS46": _hs46,
    "HS56": _hs56,
    "HS78": _hs78,
    "HS79": _hs79,
    "HS80": _hs80,
    "HS81": _hs81,
    "HS84": _hs84,
    "HS93": _hs93,
    "HS106": _hs106,
}


def supported_ids() -> list[str]:
    return list(_BUILDERS)


def hs_problem(problem_id: str) -> BenchProblem:
    """Build a benchmark problem by id (e.g. ``"HS40"``)."""
    key = problem_id.upper()
    if key not in _BUILDERS:
        raise KeyError(f"unknown problem id: {problem_id}")
    spec, f_opt, x_opt = _BUILDERS[key]()
    return BenchProblem(id=key, spec=spec, f_opt=f_opt, x_opt=np.asarray(x_opt, dtype=float))


def solved(f: float, f_opt: float, infeas: float, feas_cut: float) -> bool:
    """The benchmark acceptance rule: small optimality gap and near-feasible."""
    return (f - f_opt <= 1e-2 * max(1.0, abs(f_opt))) and (infeas < feas_cut)


def true_objective(problem: BenchProblem, x: np.ndarray) -> float:
    """Noiseless objective at ``x`` (problems are rebuilt to bypass wrappers)."""
    return float(problem.spec.objective(np.asarray(x, dtype=float)))


def true_infeasibility(problem: BenchProblem, x: np.ndarray) -> float:
    """Noiseless constraint violation at ``x`` in the solver's metric."""
    spec = problem.spec
    x = np.asarray(x, dtype=float)
    res = 0.0
    if spec.m1 > 0:
        res = max(res, float(np.abs(np.asarray(spec.eq_con(x))).max()))
    if spec.m2 > 0:
        h = np.asarray(spec.ineq_con(x), dtype=float)
        res = max(res, box_violation(h, spec.ineq_lower, spec.ineq_upper))
    return res + box_violation(x, spec.box_lower, spec.box_upper)


# ---------------------------------------------------------------------------
# Suite runner
# ---------------------------------------------------------------------------

CSV_HEADER = ["id", "dim", "evals", "objective", "infeasibility",
              "time_ms", "solved", "seed"]


@dataclass
class SuiteRow:
    id: str
    dim: int
    evals: int
    objective: float
    infeasibility: float
    time_ms: float
    solved: bool
    seed: int
    result: Optional[SolveResult] = None


@dataclass
class NoiseReport:
    id: str
    runs: int
    fail_count: int
    mean_evals: float
    mean_objective: float


def run_suite(
    ids: Sequence[str],
    opts: Optional[SolverOptions] = None,
    noise: Optional[NoiseModel] = None,
    repeats: int = 1,
    feas_cut: Optional[float] = None,
) -> tuple[list[SuiteRow], list[NoiseReport]]:
    """Solve each problem ``repeats`` times, optionally under noise.

    Noisy repeat ``r`` perturbs the callbacks with seed ``noise.seed + r``;
    objectives and infeasibilities in the returned rows are always measured
    with the noiseless callbacks.  Individual failures are recorded, never
    raised.
    """
    base_opts = opts if opts is not None else SolverOptions()
    if feas_cut is None:
        feas_cut = base_opts.feas_tol
    rows: list[SuiteRow] = []
    reports: list[NoiseReport] = []
    for pid in ids:
        problem = hs_problem(pid)
        per_problem: list[SuiteRow] = []
        for r in range(repeats):
            seed = (noise.seed + r) if noise is not None else base_opts.seed
            spec = problem.spec
            if noise is not None:
                spec = apply_noise(problem.spec, NoiseModel(noise.magnitude, seed))
            t0 = time.perf_counter()
            try:
                res = solve(spec, base_opts)
                f_true = true_objective(problem, res.x_star)
                v_true = true_infeasibility(problem, res.x_star)
                evals = res.eval_count
            except Exception:
                res = None
                f_true, v_true, evals = math.inf, math.inf, 0
            elapsed_ms = (time.perf_counter() - t0) * 1e3
            ok = solved(f_true, problem.f_opt, v_true, feas_cut)
            per_problem.append(SuiteRow(
                id=pid, dim=problem.dim, evals=evals, objective=f_true,
                infeasibility=v_true, time_ms=elapsed_ms, solved=ok,
                seed=seed, result=res,
            ))
        rows.extend(per_problem)
        if noise is not None:
            feasible = [row for row in per_problem if row.infeasibility < feas_cut]
            fails = repeats - len(feasible)
            reports.append(NoiseReport(
                id=pid,
                runs=repeats,
                fail_count=fails,
                mean_evals=float(np.mean([row.evals for row in feasible])) if feasible else math.nan,
                mean_objective=float(np.mean([row.objective for row in feasible])) if feasible else math.nan,
            ))
    return rows, reports


def rows_to_csv(rows: Sequence[SuiteRow]) -> str:
    """Render suite rows in the stable CSV schema (LF line endings)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([
            row.id, row.dim, row.evals,
            f"{row.objective:.10e}", f"{row.infeasibility:.10e}",
            f"{row.time_ms:.3f}", str(row.solved).lower(), row.seed,
        ])
    return buf.getvalue()
