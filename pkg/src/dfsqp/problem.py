"""Problem model: user-facing NLP, slack-variable standard form, noise wrapper.

The solver consumes problems of the form

    min  f(x)
    s.t. g(x) = 0
         l_h <= h(x) <= u_h
         l_x <=  x   <= u_x

A :class:`ProblemSpec` holds the callbacks and bounds; :func:`to_standard_form`
converts it into the slack-augmented form with a single combined equality map
and box bounds, which is what the solver iterates on.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ProblemSpec",
    "StandardForm",
    "NoiseModel",
    "EvaluationError",
    "EvalBudgetExhausted",
    "default_ineq_guess",
    "to_standard_form",
    "infeasibility",
    "box_violation",
    "apply_noise",
]

# Fraction of a two-sided interval width kept as margin when clipping a
# point into the strict interior.
INTERIOR_MARGIN = 0.05


class EvaluationError(RuntimeError):
    """A user callback returned a non-finite value.

    Carries the offending point in ``point``.
    """

    def __init__(self, message: str, point: np.ndarray):
        super().__init__(message)
        self.point = np.asarray(point, dtype=float).copy()


class EvalBudgetExhausted(Exception):
    """Raised by the evaluation bundle once ``max_evals`` is reached."""


def _as_bound(value, n: int, default: float) -> np.ndarray:
    if value is None:
        return np.full(n, default, dtype=float)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"bound has shape {arr.shape}, expected ({n},)")
    return arr.copy()


@dataclass
class ProblemSpec:
    """A constrained NLP defined by blackbox callbacks.

    Parameters
    ----------
    objective : callable
        ``x -> float``.
    x0 : array
        Start point; must lie strictly inside any finite box bounds.
    eq_con : callable, optional
        ``x -> array of shape (m1,)``, constrained to equal zero.
    ineq_con : callable, optional
        ``x -> array of shape (m2,)``, constrained to ``ineq_lower <= h(x)
        <= ineq_upper``.  Each row needs at least one finite bound.
    ineq_lower, ineq_upper : array, optional
        Inequality bounds (default -inf / +inf).
    box_lower, box_upper : array, optional
        Box bounds on ``x`` (default -inf / +inf).
    ineq_guess : array, optional
        Initial guess for ``h(x)``; derived via :func:`default_ineq_guess`
        when omitted.
    """

    objective: Callable[[np.ndarray], float]
    x0: np.ndarray
    eq_con: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_con: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_lower: Optional[np.ndarray] = None
    ineq_upper: Optional[np.ndarray] = None
    box_lower: Optional[np.ndarray] = None
    box_upper: Optional[np.ndarray] = None
    ineq_guess: Optional[np.ndarray] = None
    m1: int = 0
    m2: int = 0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).copy()
        n = self.n
        if self.eq_con is not None and self.m1 == 0:
            self.m1 = len(np.atleast_1d(np.asarray(self.eq_con(self.x0), dtype=float)))
        if self.ineq_con is not None and self.m2 == 0:
            self.m2 = len(np.atleast_1d(np.asarray(self.ineq_con(self.x0), dtype=float)))
        self.ineq_lower = _as_bound(self.ineq_lower, self.m2, -np.inf)
        self.ineq_upper = _as_bound(self.ineq_upper, self.m2, np.inf)
        self.box_lower = _as_bound(self.box_lower, n, -np.inf)
        self.box_upper = _as_bound(self.box_upper, n, np.inf)
        if self.ineq_guess is not None:
            self.ineq_guess = np.asarray(self.ineq_guess, dtype=float).copy()
        self.validate()

    @property
    def n(self) -> int:
        return len(self.x0)

    def validate(self) -> None:
        if np.any(self.ineq_lower > self.ineq_upper):
            raise ValueError("ineq_lower > ineq_upper on some row")
        if np.any(self.box_lower > self.box_upper):
            raise ValueError("box_lower > box_upper on some coordinate")
        if np.any(np.isinf(self.ineq_lower) & np.isinf(self.ineq_upper)):
            raise ValueError("unbounded inequality row")
        # interior start is required by the restoration subsolvers
        lo, hi = self.box_lower, self.box_upper
        if np.any((np.isfinite(lo) & (self.x0 <= lo)) | (np.isfinite(hi) & (self.x0 >= hi))):
            raise ValueError("x0 must lie strictly inside the finite box bounds")
        if self.m2 > 0 and self.ineq_con is None:
            raise ValueError("m2 > 0 but no ineq_con callback")
        if self.m1 > 0 and self.eq_con is None:
            raise ValueError("m1 > 0 but no eq_con callback")


def default_ineq_guess(ineq_lower: np.ndarray, ineq_upper: np.ndarray) -> np.ndarray:
    """Initial guess for the inequality-constraint values.

    Midpoint for two-sided rows, one unit inside the bound for one-sided
    rows.  Rows with neither bound finite are rejected.
    """
    lo = np.asarray(ineq_lower, dtype=float)
    hi = np.asarray(ineq_upper, dtype=float)
    if np.any(np.isinf(lo) & np.isinf(hi)):
        raise ValueError("unbounded inequality row")
    guess = np.empty(len(lo))
    both = np.isfinite(lo) & np.isfinite(hi)
    guess[both] = 0.5 * (lo[both] + hi[both])
    upper_only = np.isinf(lo) & np.isfinite(hi)
    guess[upper_only] = hi[upper_only] - 1.0
    lower_only = np.isfinite(lo) & np.isinf(hi)
    guess[lower_only] = lo[lower_only] + 1.0
    return clip_interior(guess, lo, hi)


def clip_interior(v: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Clip ``v`` into the strict interior of ``[lower, upper]``.

    Two-sided coordinates keep a margin of ``INTERIOR_MARGIN`` times the
    interval width; one-sided coordinates keep a margin scaled by the
    magnitude of the finite bound.
    """
    v = np.asarray(v, dtype=float).copy()
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    for j in range(len(v)):
        if np.isfinite(lo[j]) and np.isfinite(hi[j]):
            m = INTERIOR_MARGIN * (hi[j] - lo[j])
            v[j] = min(max(v[j], lo[j] + m), hi[j] - m)
        elif np.isfinite(lo[j]):
            v[j] = max(v[j], lo[j] + INTERIOR_MARGIN * max(1.0, abs(lo[j])))
        elif np.isfinite(hi[j]):
            v[j] = min(v[j], hi[j] - INTERIOR_MARGIN * max(1.0, abs(hi[j])))
    return v


def nudge_interior(z: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                   rel: float = 1e-9) -> np.ndarray:
    """Push coordinates sitting exactly on a finite bound inward by a hair."""
    z = np.asarray(z, dtype=float).copy()
    for j in range(len(z)):
        eps = rel * max(1.0, abs(z[j]))
        if np.isfinite(lower[j]) and z[j] <= lower[j]:
            z[j] = lower[j] + eps
        if np.isfinite(upper[j]) and z[j] >= upper[j]:
            z[j] = upper[j] - eps
    return z


class StandardForm:
    """Slack-augmented problem: equality constraints plus box bounds only.

    Variables are ordered ``z = [s; x]`` with the ``m2`` slacks first.  The
    combined equality map is ``G(z) = [g(x); h(x) - s]``.  Evaluations of the
    objective and constraints at a point are a single *bundle*: one joint
    call of ``(f, g, h)``, counted once.  A small LRU cache keyed on the
    point keeps gradient probes and line-search candidates from re-paying
    for points the solver just visited.
    """

    _CACHE_FACTOR = 4  # cache holds ~4 probe sweeps

    def __init__(self, spec: ProblemSpec, z0: np.ndarray):
        self.spec = spec
        self.n = spec.n
        self.m1 = spec.m1
        self.m2 = spec.m2
        self.dim = spec.n + spec.m2
        self.lower = np.concatenate([spec.ineq_lower, spec.box_lower])
        self.upper = np.concatenate([spec.ineq_upper, spec.box_upper])
        self.z0 = np.asarray(z0, dtype=float).copy()
        self.eval_count = 0
        self.max_evals: Optional[int] = None
        self.on_eval: Optional[Callable[[np.ndarray, float, np.ndarray], None]] = None
        self._cache: OrderedDict[bytes, tuple[float, np.ndarray]] = OrderedDict()
        self._cache_size = self._CACHE_FACTOR * (self.dim + 4)

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    def x_part(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z)[self.m2:]

    def slack_part(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z)[: self.m2]

    # -- evaluation bundle ------------------------------------------------
    def bundle(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        """Return ``(f(x), G(z))``, evaluating the callbacks at most once."""
        z = np.asarray(z, dtype=float)
        key = z.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            self._cache.move_to_end(key)
            return hit
        if self.max_evals is not None and self.eval_count >= self.max_evals:
            raise EvalBudgetExhausted()
        x = z[self.m2:]
        f = float(self.spec.objective(x))
        parts = []
        if self.m1 > 0:
            parts.append(np.asarray(self.spec.eq_con(x), dtype=float))
        if self.m2 > 0:
            h = np.asarray(self.spec.ineq_con(x), dtype=float)
            parts.append(h - z[: self.m2])
        G = np.concatenate(parts) if parts else np.empty(0)
        self.eval_count += 1
        if not np.isfinite(f) or not np.all(np.isfinite(G)):
            raise EvaluationError("non-finite callback value", z)
        if self.on_eval is not None:
            self.on_eval(z, f, G)
        self._cache[key] = (f, G)
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return f, G

    def peek(self, z: np.ndarray) -> Optional[tuple[float, np.ndarray]]:
        """Cached bundle at ``z``, or None if it has been evicted."""
        return self._cache.get(np.asarray(z, dtype=float).tobytes())

    def objective(self, z: np.ndarray) -> float:
        return self.bundle(z)[0]

    def combined_eq(self, z: np.ndarray) -> np.ndarray:
        return self.bundle(z)[1]


def to_standard_form(spec: ProblemSpec) -> StandardForm:
    """Add slacks for the inequality constraints.

    The start point is ``[i0; x0]`` with the inequality guess clipped into
    the strict interior of its bounds.
    """
    if spec.m2 > 0:
        i0 = spec.ineq_guess
        if i0 is None:
            i0 = default_ineq_guess(spec.ineq_lower, spec.ineq_upper)
        else:
            i0 = clip_interior(i0, spec.ineq_lower, spec.ineq_upper)
        z0 = np.concatenate([i0, spec.x0])
    else:
        z0 = spec.x0.copy()
    return StandardForm(spec, z0)


def box_violation(z: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    below = np.maximum(lower - z, 0.0)  # -inf bounds give -inf - z -> 0 after max
    above = np.maximum(z - upper, 0.0)
    return float(max(below.max(initial=0.0), above.max(initial=0.0)))


def infeasibility(sf: StandardForm, z: np.ndarray) -> float:
    """Max-norm equality residual plus max-norm box violation; 0 iff feasible."""
    z = np.asarray(z, dtype=float)
    G = sf.combined_eq(z)
    res = float(np.abs(G).max(initial=0.0))
    return res + box_violation(z, sf.lower, sf.upper)


@dataclass
class NoiseModel:
    """Multiplicative Gaussian observation noise.

    Every scalar output of the wrapped callbacks is multiplied by
    ``1 + magnitude * xi`` with fresh standard-normal ``xi`` per evaluation.
    The generator is seeded, so a fixed seed reproduces the same noisy
    evaluation sequence.
    """

    magnitude: float = 1e-4
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("noise magnitude must be non-negative")
        self._rng = np.random.default_rng(self.seed)

    def perturb_scalar(self, value: float) -> float:
        return (1.0 + self.magnitude * self._rng.standard_normal()) * value

    def perturb_vector(self, value: np.ndarray) -> np.ndarray:
        xi = self._rng.standard_normal(len(value))
        return (1.0 + self.magnitude * xi) * value


def apply_noise(spec: ProblemSpec, model: NoiseModel) -> ProblemSpec:
    """Wrap the callbacks of ``spec`` with multiplicative Gaussian noise."""
    f, g, h = spec.objective, spec.eq_con, spec.ineq_con

    def noisy_f(x):
        return model.perturb_scalar(float(f(x)))

    noisy_g = None
    if g is not None:
        def noisy_g(x):
            return model.perturb_vector(np.asarray(g(x), dtype=float))

    noisy_h = None
    if h is not None:
        def noisy_h(x):
            return model.perturb_vector(np.asarray(h(x), dtype=float))

    return ProblemSpec(
        objective=noisy_f,
        x0=spec.x0,
        eq_con=noisy_g,
        ineq_con=noisy_h,
        ineq_lower=spec.ineq_lower,
        ineq_upper=spec.ineq_upper,
        box_lower=spec.box_lower,
        box_upper=spec.box_upper,
        ineq_guess=spec.ineq_guess,
        m1=spec.m1,
        m2=spec.m2,
    )
