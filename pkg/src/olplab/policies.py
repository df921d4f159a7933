"""Online dual-price policies: static, scheduled learning, and resolving.

All three share one decision step: accept order t exactly when its reward
strictly beats the priced cost a_t . p under the current price AND the
remaining capacity can absorb the column componentwise.  Ties reject.  A
missing price (warmup) rejects with the price reason.  The decision at
period t never sees (r_t, a_t) before it is made; learning runs after the
ledger records the step.

- static: one price for the whole horizon, no learning.
- scheduled: prices refreshed at geometrically spaced periods t_k by an
  exact sampled-dual solve on the observed prefix with the nominal rate d.
  Decisions before the first refresh are forced rejections.
- resolving: price refreshed after every period from the sampled dual with
  the capacity-to-go rate b_t / (n - t).  The default engine keeps one
  warm simplex session alive across periods (append column, shift rhs,
  dual repair + primal cleanup), which reproduces from-scratch exact
  solves up to dual degeneracy: the price may be a different vertex of
  the same optimal face, with equal objective value.  A projected
  subgradient engine is selectable; it falls back to an exact solve
  whenever the iteration budget runs out without a certificate.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (CAPACITY_REJECT, CapacitySpec, ConstraintLedger, DualPrice,
                   NumericalFailure, Order, PRICE_ACCEPT, PRICE_REJECT,
                   SolverOptions)
from .dual import (SampledDualProblem, solve_sampled_dual_exact,
                   subgradient_descent)
from .simplex import BoxLpSession


class PolicyState:
    """Per-trial mutable state: current price, ledger, history, diagnostics."""

    __slots__ = ("capacity", "price", "provenance", "ledger", "rewards",
                 "columns", "schedule_pos", "session", "resolve_count",
                 "fallback_count", "subgrad_iterations")

    def __init__(self, capacity: CapacitySpec):
        self.capacity = capacity
        self.price: Optional[np.ndarray] = None
        self.provenance: Optional[str] = None
        self.ledger = ConstraintLedger(capacity)
        self.rewards = np.empty(capacity.n)
        self.columns = np.empty((capacity.n, capacity.m))
        self.schedule_pos = 0
        self.session: Optional[BoxLpSession] = None
        self.resolve_count = 0
        self.fallback_count = 0
        self.subgrad_iterations = 0

    @property
    def t(self) -> int:
        return self.ledger.t


class DualPricePolicy:
    """Interface: start() builds state, update() learns after each period."""

    name = "abstract"

    def start(self, capacity: CapacitySpec) -> PolicyState:
        return PolicyState(capacity)

    def update(self, state: PolicyState, order: Order) -> None:
        pass


def policy_step(policy: DualPricePolicy, state: PolicyState,
                order: Order) -> Tuple[int, int]:
    """One period: decide from the pre-period price, record, then learn.

    Returns (decision, reason).  Acceptance needs a strict reward margin
    (ties reject) and componentwise remaining capacity; columns with
    negative entries replenish and never block on those resources.
    """
    t = state.t
    state.rewards[t] = order.reward
    state.columns[t] = order.column
    if state.price is None or not order.reward > float(order.column @ state.price):
        x, reason = 0, PRICE_REJECT
    elif np.all(state.ledger.remaining() - order.column >= 0.0):
        x, reason = 1, PRICE_ACCEPT
    else:
        x, reason = 0, CAPACITY_REJECT
    state.ledger.record(order, x, reason)
    policy.update(state, order)
    return x, reason


def run_policy(policy: DualPricePolicy, orders: Sequence[Order],
               capacity: CapacitySpec) -> PolicyState:
    """Run a full horizon and return the finished state."""
    state = policy.start(capacity)
    for order in orders:
        policy_step(policy, state, order)
    assert state.ledger.is_complete()
    return state


class StaticPricePolicy(DualPricePolicy):
    """Fixed exogenous price (typically an estimate of the population
    optimal price); never learns."""

    name = "static"

    def __init__(self, pstar: DualPrice):
        self.pstar = pstar

    def start(self, capacity):
        state = PolicyState(capacity)
        if self.pstar.p.size != capacity.m:
            raise ValueError("price dimension does not match the instance")
        state.price = self.pstar.p.copy()
        state.provenance = self.pstar.provenance
        return state


def geometric_schedule(n: int) -> Tuple[int, ...]:
    """Refresh periods t_k = floor(delta^k), delta = n^(1/ceil(log2 n)),
    k = 1..L-1, deduplicated; all lie in [1, n)."""
    if n < 2:
        return ()
    L = max(1, math.ceil(math.log2(n)))
    delta = n ** (1.0 / L)
    pts = []
    for k in range(1, L):
        v = math.floor(delta ** k)
        if v >= 1 and v < n and (not pts or v > pts[-1]):
            pts.append(v)
    return tuple(pts)


class ScheduledLearningPolicy(DualPricePolicy):
    """Exact sampled-dual refreshes on a geometric schedule, nominal rate d."""

    name = "scheduled"

    def __init__(self):
        self.schedule_cache = {}

    def schedule(self, n: int) -> Tuple[int, ...]:
        if n not in self.schedule_cache:
            self.schedule_cache[n] = geometric_schedule(n)
        return self.schedule_cache[n]

    def update(self, state, order):
        sched = self.schedule(state.capacity.n)
        if state.schedule_pos >= len(sched):
            return
        t = state.t
        if t != sched[state.schedule_pos]:
            return
        problem = SampledDualProblem(state.rewards[:t], state.columns[:t],
                                     state.capacity.d)
        price = solve_sampled_dual_exact(problem)
        state.price = price.p
        state.provenance = price.provenance
        state.schedule_pos += 1
        state.resolve_count += 1


class ResolvingPolicy(DualPricePolicy):
    """Re-solve the sampled dual with capacity-to-go after every period.

    Starts at price zero (accept anything with positive margin).  After
    period t < n the price becomes a minimizer of

        (b_t / (n - t)) . p + (1/t) sum_{j<=t} max(r_j - a_j . p, 0).
    """

    name = "resolving"

    def __init__(self, options: Optional[SolverOptions] = None):
        self.options = options or SolverOptions()

    def start(self, capacity):
        state = PolicyState(capacity)
        state.price = np.zeros(capacity.m)
        state.provenance = "initial_zero"
        return state

    def update(self, state, order):
        t = state.t
        n = state.capacity.n
        if t >= n:
            return
        d_eff = state.ledger.remaining() / (n - t)
        if self.options.resolve_engine == "simplex":
            self._resolve_simplex(state, order, t, d_eff)
        elif self.options.resolve_engine == "subgradient":
            self._resolve_subgradient(state, t, d_eff)
        else:
            raise ValueError(
                f"unknown resolve_engine {self.options.resolve_engine!r}")
        state.resolve_count += 1

    def _resolve_simplex(self, state, order, t, d_eff):
        rhs = t * d_eff
        col = order.column.reshape(-1, 1)
        rew = np.array([order.reward])
        try:
            if state.session is None:
                state.session = BoxLpSession(state.capacity.m, rhs,
                                             capacity_hint=state.capacity.n)
                state.session.add_columns(col, rew)
                state.session.primal_simplex()
            else:
                state.session.add_columns(col, rew, keep_dual_feasible=True)
                state.session.set_rhs(rhs)
                state.session.reoptimize()
        except NumericalFailure:
            # warm path drifted: rebuild the session from scratch
            state.fallback_count += 1
            state.session = BoxLpSession(state.capacity.m, rhs,
                                         capacity_hint=state.capacity.n)
            state.session.add_columns(state.columns[:t].T.copy(),
                                      state.rewards[:t].copy())
            state.session.primal_simplex()
        state.price = state.session.prices()
        state.provenance = "exact_lp"

    def _resolve_subgradient(self, state, t, d_eff):
        problem = SampledDualProblem(state.rewards[:t], state.columns[:t], d_eff)
        opts = self.options
        best_p, _, converged, iters = subgradient_descent(
            problem, state.price, budget=opts.budget,
            p_max=opts.effective_cap(state.capacity.bounds))
        state.subgrad_iterations += iters
        if converged:
            state.price = best_p
            state.provenance = "subgradient"
        else:
            state.fallback_count += 1
            price = solve_sampled_dual_exact(problem)
            state.price = price.p
            state.provenance = price.provenance


def make_static_policy(pstar: DualPrice) -> StaticPricePolicy:
    return StaticPricePolicy(pstar)


def make_dynamic_policy() -> ScheduledLearningPolicy:
    return ScheduledLearningPolicy()


def make_ahd_policy(options: Optional[SolverOptions] = None) -> ResolvingPolicy:
    """Resolving policy: each period's price reflects the capacity left by
    the decisions actually taken so far."""
    return ResolvingPolicy(options)


POLICY_NAMES = ("static", "scheduled", "resolving")
