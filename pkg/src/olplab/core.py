"""Shared domain types for the online LP laboratory.

An instance is a stream of orders (reward, resource column); capacity is a
nonnegative vector consumed by accepted orders.  Everything downstream
(solvers, policies, benchmarks) speaks these types.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Numerical contract shared across modules.
FEAS_TOL = 1e-9          # primal feasibility slack allowed by the solvers
PIVOT_TOL = 1e-10        # reduced-cost / pivot eligibility threshold
GAP_TOL = 1e-8           # relative duality gap bound on reported optima
CS_TOL = 1e-8            # complementary slackness check tolerance
P_MAX_DEFAULT = 1e4      # price cap when a model declares no bounds

PRICE_ACCEPT = 0
PRICE_REJECT = 1
CAPACITY_REJECT = 2
REASON_NAMES = {PRICE_ACCEPT: "price_accept",
                PRICE_REJECT: "price_reject",
                CAPACITY_REJECT: "capacity_reject"}


class ConfigError(ValueError):
    """Invalid experiment configuration; CLI maps this to exit code 2."""


class NumericalFailure(RuntimeError):
    """A solver or invariant check failed numerically; CLI exit code 3."""


@dataclass(frozen=True)
class Order:
    """One arriving request: scalar reward and its resource column."""
    reward: float
    column: np.ndarray  # shape (m,)

    def __post_init__(self):
        col = np.asarray(self.column, dtype=float)
        object.__setattr__(self, "column", col)
        object.__setattr__(self, "reward", float(self.reward))
        if col.ndim != 1:
            raise ValueError("order column must be a vector")


@dataclass(frozen=True)
class ModelBounds:
    """Declared envelope of an input model.

    r_bar bounds |reward|, a_bar bounds the L2 norm of a column, and
    (d_lower, d_upper) bracket admissible per-period capacities.  declared
    is False when the model refuses to certify any envelope (price caps
    then fall back to P_MAX_DEFAULT).
    """
    r_bar: float = float("nan")
    a_bar: float = float("nan")
    d_lower: float = float("nan")
    d_upper: float = float("nan")
    declared: bool = True

    def price_cap(self) -> float:
        """Box bound for dual prices: r_bar / d_lower when declared."""
        if self.declared and self.d_lower > 0 and np.isfinite(self.r_bar):
            return self.r_bar / self.d_lower
        return P_MAX_DEFAULT


UNDECLARED_BOUNDS = ModelBounds(declared=False)


@dataclass(frozen=True)
class CapacitySpec:
    """Horizon, dimension and initial capacity of one run.

    d is stored as exactly b / n so the two views never drift apart.
    """
    n: int
    m: int
    b: np.ndarray
    d: np.ndarray = field(init=False)
    bounds: ModelBounds = UNDECLARED_BOUNDS

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "b", b)
        if self.n <= self.m:
            raise ValueError("horizon n must exceed the number of resources m")
        if b.shape != (self.m,):
            raise ValueError("capacity vector must have shape (m,)")
        if np.any(b <= 0):
            raise ValueError("initial capacity must be strictly positive")
        object.__setattr__(self, "d", b / self.n)
        bd = self.bounds
        if bd.declared and np.isfinite(bd.d_lower) and np.isfinite(bd.d_upper):
            if np.any(self.d <= bd.d_lower) or np.any(self.d >= bd.d_upper):
                raise ValueError("per-period capacity d outside declared (d_lower, d_upper)")

    @staticmethod
    def from_rate(n: int, d, m: Optional[int] = None,
                  bounds: ModelBounds = UNDECLARED_BOUNDS) -> "CapacitySpec":
        """Build from per-period rate d (scalar or vector); b = n * d."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if m is None:
            m = d.size
        if d.size == 1 and m > 1:
            d = np.full(m, d[0])
        if d.shape != (m,):
            raise ValueError("capacity rate d must be scalar or shape (m,)")
        return CapacitySpec(n=n, m=m, b=n * d, bounds=bounds)


_PROVENANCES = ("exact_lp", "subgradient", "saa_oracle", "analytic")


@dataclass(frozen=True)
class DualPrice:
    """A nonnegative price vector plus how it was obtained."""
    p: np.ndarray
    provenance: str = "exact_lp"

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown price provenance {self.provenance!r}")
        if np.any(p < -FEAS_TOL):
            raise ValueError("dual price must be nonnegative")
        object.__setattr__(self, "p", np.maximum(p, 0.0))

    def in_price_box(self, bounds: ModelBounds, tol: float = 1e-7) -> bool:
        """Membership in the admissible simplex {p >= 0, sum(p) <= r_bar/d_lower}."""
        return bool(np.sum(self.p) <= bounds.price_cap() + tol)


class ConstraintLedger:
    """Trajectory of remaining capacity under a 0/1 decision stream.

    Index convention: b[0] is the initial capacity, b[t] the capacity after
    period t's decision; decisions and reasons are 0-based over periods.
    """

    def __init__(self, capacity: CapacitySpec):
        self.capacity = capacity
        n, m = capacity.n, capacity.m
        self.b = np.empty((n + 1, m))
        self.b[0] = capacity.b
        self.x = np.zeros(n, dtype=np.int8)
        self.reasons = np.zeros(n, dtype=np.int8)
        self.t = 0  # periods recorded so far

    def record(self, order: Order, x: int, reason: int) -> None:
        if self.t >= self.capacity.n:
            raise ValueError("ledger is full")
        if x not in (0, 1):
            raise ValueError("decisions are binary")
        t = self.t
        nxt = self.b[t] - order.column if x else self.b[t]
        if x and np.any(nxt < 0):
            raise ValueError("acceptance would drive capacity negative")
        self.b[t + 1] = nxt
        self.x[t] = x
        self.reasons[t] = reason
        self.t = t + 1

    def remaining(self) -> np.ndarray:
        """Capacity after the last recorded period."""
        return self.b[self.t].copy()

    def is_complete(self) -> bool:
        return self.t == self.capacity.n


def stopping_time(ledger: ConstraintLedger, s: float) -> int:
    """First period whose post-decision minimum capacity drops below s.

    Returns min({n} | {t >= 1 : min_i b[t, i] < s}); n caps the answer when
    capacity never dips below s.
    """
    t = ledger.t
    mins = ledger.b[1:t + 1].min(axis=1) if t else np.empty(0)
    below = np.nonzero(mins < s)[0]
    first = int(below[0]) + 1 if below.size else ledger.capacity.n
    return min(first, ledger.capacity.n)


@dataclass(frozen=True)
class BindingClassification:
    """Estimated split of resources into binding and nonbinding sets.

    expected_consumption[i] estimates the per-period consumption of resource
    i at the optimal price; binding resources have consumption equal to d_i
    up to Monte Carlo noise.
    """
    binding: tuple
    nonbinding: tuple
    expected_consumption: np.ndarray
    stderr: np.ndarray

    def __post_init__(self):
        overlap = set(self.binding) & set(self.nonbinding)
        if overlap:
            raise ValueError(f"resource classified both ways: {sorted(overlap)}")


@dataclass(frozen=True)
class RegretReport:
    """Aggregated Monte Carlo outcome of one (model, algorithm, n) cell."""
    model: str
    algorithm: str
    n: int
    m: int
    trials: int
    mean_regret: float
    stderr: float
    mean_binding_leftover: Optional[float] = None
    mean_stop_gap: Optional[float] = None
    mean_price_error: Optional[float] = None


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the dual solvers and the resolving policy.

    eps_sub: suboptimality target for the subgradient path; when None it
      defaults to 1e-6 * (1 + r_bar) with r_bar from the model declaration
      (or the empirical max |reward| when undeclared).
    budget: subgradient iteration budget.
    p_max: price box cap; None means derive from bounds (r_bar / d_lower,
      else P_MAX_DEFAULT).
    resolve_engine: 'simplex' (exact, warm-started basis) or 'subgradient'
      (projected warm path with exact fallback) for the resolving policy.
    """
    eps_sub: Optional[float] = None
    budget: int = 500
    p_max: Optional[float] = None
    resolve_engine: str = "simplex"

    def __post_init__(self):
        if self.resolve_engine not in ("simplex", "subgradient"):
            raise ValueError("resolve_engine must be 'simplex' or 'subgradient'")
        if self.budget < 1:
            raise ValueError("budget must be positive")

    def effective_eps(self, r_bar: float) -> float:
        if self.eps_sub is not None:
            return self.eps_sub
        return 1e-6 * (1.0 + (r_bar if np.isfinite(r_bar) else 0.0))

    def effective_cap(self, bounds: ModelBounds) -> float:
        return self.p_max if self.p_max is not None else bounds.price_cap()


def instance_arrays(orders: Sequence[Order]) -> tuple[np.ndarray, np.ndarray]:
    """Stack orders into (rewards, columns) with columns shaped (n, m)."""
    r = np.array([o.reward for o in orders], dtype=float)
    a = np.array([o.column for o in orders], dtype=float)
    if a.ndim != 2:
        raise ValueError("orders must share one column dimension")
    return r, a
