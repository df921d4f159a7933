"""Sampled dual objectives, their minimizers, and price diagnostics.

The sampled dual built from t observed orders and an effective capacity
rate d_eff is

    f(p) = d_eff . p + (1/t) * sum_j max(r_j - a_j . p, 0),   p >= 0.

Its exact minimizer is recovered from the box LP

    max sum_j r_j x_j   s.t.  sum_j x_j a_j <= t * d_eff,  0 <= x <= 1,

whose constraint prices minimize f (strong duality; the tie-broken vertex
with minimal price sum is returned so equal-data problems yield equal
prices regardless of solve path).  A projected subgradient path is
available for warm restarts; it certifies optimality only at fixed points
(zero or boundary-blocked subgradient) and otherwise signals that the
budget ran out, carrying its best iterate.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (BindingClassification, DualPrice, NumericalFailure, Order,
                   SolverOptions, instance_arrays)
from .simplex import solve_box_lp


@dataclass(frozen=True)
class SampledDualProblem:
    """Empirical dual data: t rewards, t columns, effective capacity rate."""

    rewards: np.ndarray   # (t,)
    columns: np.ndarray   # (t, m)
    d_eff: np.ndarray     # (m,) nonnegative

    def __post_init__(self):
        r = np.ascontiguousarray(np.asarray(self.rewards, dtype=float).ravel())
        a = np.ascontiguousarray(np.asarray(self.columns, dtype=float))
        if a.ndim != 2 or a.shape[0] != r.size or r.size == 0:
            raise ValueError("columns must be (t, m) aligned with rewards, t >= 1")
        d = np.asarray(self.d_eff, dtype=float).ravel()
        if d.size != a.shape[1]:
            raise ValueError("d_eff length must match the column dimension")
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("d_eff must be finite and nonnegative")
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "columns", a)
        object.__setattr__(self, "d_eff", d)

    @property
    def t(self) -> int:
        return self.rewards.size

    @property
    def m(self) -> int:
        return self.columns.shape[1]

    @staticmethod
    def from_orders(orders: Sequence[Order], d_eff) -> "SampledDualProblem":
        r, a = instance_arrays(orders)
        return SampledDualProblem(r, a, np.asarray(d_eff, dtype=float))


def f_value(problem: SampledDualProblem, p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    margin = problem.rewards - problem.columns @ p
    return float(problem.d_eff @ p + np.maximum(margin, 0.0).mean())


def subgradient(problem: SampledDualProblem, p) -> np.ndarray:
    """d_eff - (1/t) sum_j a_j 1{r_j > a_j . p} (strict acceptance set)."""
    p = np.asarray(p, dtype=float).ravel()
    accept = problem.rewards > problem.columns @ p
    return problem.d_eff - accept.astype(float) @ problem.columns / problem.t


def solve_sampled_dual_exact(problem: SampledDualProblem) -> DualPrice:
    """Tie-broken exact minimizer over p >= 0 via the scaled box LP."""
    sol = solve_box_lp(problem.rewards, problem.columns,
                       problem.t * problem.d_eff, tie_break=True)
    return sol.dual_price


class SubgradientBudgetExhausted(RuntimeError):
    """Warm solve ran out of iterations before certifying a fixed point.

    Carries the best iterate found so the caller can fall back (to an
    exact solve, or accept the iterate) without repeating work.
    """

    def __init__(self, best: DualPrice, f_best: float, iterations: int):
        super().__init__(
            f"subgradient budget exhausted after {iterations} iterations "
            f"(best objective {f_best:.6g})")
        self.best = best
        self.f_best = f_best
        self.iterations = iterations


def subgradient_descent(problem: SampledDualProblem, start,
                        budget: int = 500, p_max: float = np.inf,
                        patience: int = 20):
    """Projected subgradient core loop; shared by warm solve and policies.

    Steps c / sqrt(k) with c = 1 + ||start||_2, projected onto the box
    [0, p_max]^m.  Tracks the best iterate including the start.  Returns
    (best_p, best_f, converged, iterations); converged means a fixed point
    of the projected step was reached (optimality certificate) or the
    best objective value repeated exactly for `patience` iterations in a
    row (flat optimal face reached).
    """
    p = np.clip(np.asarray(start, dtype=float).ravel().copy(), 0.0, p_max)
    if p.size != problem.m:
        raise ValueError("start must have the problem's dimension")
    c = 1.0 + float(np.linalg.norm(p))
    best_p, best_f = p.copy(), f_value(problem, p)
    equal_run = 0
    for k in range(1, budget + 1):
        g = subgradient(problem, p)
        p_new = np.clip(p - (c / np.sqrt(k)) * g, 0.0, p_max)
        if np.array_equal(p_new, p):
            # projected step is a fixed point: g_i = 0 off the bounds and
            # pushes outward on them, which is the optimality condition
            return best_p, best_f, True, k
        f_new = f_value(problem, p_new)
        if f_new < best_f:
            best_f, best_p, equal_run = f_new, p_new.copy(), 0
        elif f_new == best_f:
            equal_run += 1
            if equal_run >= patience:
                return best_p, best_f, True, k
        else:
            equal_run = 0
        p = p_new
    return best_p, best_f, False, budget


def solve_sampled_dual_warm(problem: SampledDualProblem, start,
                            options: Optional[SolverOptions] = None) -> DualPrice:
    """Warm restart from `start`; raises SubgradientBudgetExhausted when no
    fixed point is certified within the budget."""
    opts = options or SolverOptions()
    p_max = opts.p_max if opts.p_max is not None else np.inf
    best_p, best_f, converged, iters = subgradient_descent(
        problem, start, budget=opts.budget, p_max=p_max)
    price = DualPrice(best_p, provenance="subgradient")
    if not converged:
        raise SubgradientBudgetExhausted(price, best_f, iters)
    return price


# ---------------------------------------------------------------------------
# Population-level price estimation (sample average approximation)


def _exact_price_from_arrays(r, a, rhs) -> np.ndarray:
    return solve_box_lp(r, a, rhs, tie_break=True).dual_price.p


def estimate_pstar(model, d, samples: int = 1_000_000, seed: int = 0) -> DualPrice:
    """Monte Carlo stand-in for the population optimal price.

    Minimizes the sampled dual of `samples` fresh draws exactly.  For
    large sample counts the solve is localized: a pilot subsample gives a
    trust radius, orders whose accept/reject side cannot flip anywhere in
    that ball are folded into the capacity term, and the reduced problem
    is solved exactly.  The reduction is verified after the fact (the
    minimizer must sit strictly inside the ball and no folded order may
    flip); on failure the radius doubles.  The result is therefore the
    exact tie-broken minimizer of the full sampled dual.
    """
    from .inputs import resolve_d  # local import: inputs pulls core only
    d_vec = resolve_d(d, model.m)
    if np.any(d_vec <= 0):
        raise ValueError("capacity rates must be positive for price estimation")
    r, a = model.sample_arrays(seed, int(samples))
    n = r.size
    direct_cutoff = 60_000
    if n <= direct_cutoff:
        p = _exact_price_from_arrays(r, a, n * d_vec)
        return DualPrice(p, provenance="saa_oracle")

    pilot = direct_cutoff // 2
    p_hat = _exact_price_from_arrays(r[:pilot], a[:pilot], pilot * d_vec)
    col_norm = np.linalg.norm(a, axis=1)
    margin = r - a @ p_hat
    rho = (1.0 + float(np.linalg.norm(p_hat))) * max(0.02, 8.0 / np.sqrt(pilot))
    for _ in range(8):
        flippable = np.abs(margin) <= rho * col_norm
        if flippable.sum() > 3 * direct_cutoff:
            # no localization possible: a macroscopic fraction of samples
            # sits on the kink (e.g. rewards that are deterministic
            # functions of the columns), so the exact tie-broken solve
            # would pivot through a fully degenerate basis set
            raise NumericalFailure(
                "estimate_pstar: %d of %d samples are within the trust "
                "band around the pilot price; the sampled dual is too "
                "degenerate for an exact solve at this sample count. "
                "Retry with samples <= %d." % (int(flippable.sum()), n,
                                               direct_cutoff))
        fixed_accept = (~flippable) & (margin > 0)
        keep = np.flatnonzero(flippable)
        rhs = n * d_vec - a[fixed_accept].sum(axis=0)
        if np.any(rhs < 0) or keep.size == 0:
            rho *= 2.0
            continue
        try:
            p_tilde = _exact_price_from_arrays(r[keep], a[keep], rhs)
        except NumericalFailure:
            rho *= 2.0
            continue
        inside = np.linalg.norm(p_tilde - p_hat) <= 0.95 * rho
        new_margin = r - a @ p_tilde
        sides_hold = (np.all(new_margin[fixed_accept] > 0)
                      and np.all(new_margin[(~flippable) & (margin <= 0)] <= 0))
        if inside and sides_hold:
            return DualPrice(p_tilde, provenance="saa_oracle")
        rho *= 2.0
    raise NumericalFailure(
        "estimate_pstar: localization failed to stabilize after 8 radius doublings")


def classify_binding(model, d, pstar: DualPrice, samples: int = 200_000,
                     seed: int = 0) -> BindingClassification:
    """Split resources by whether the price-accepted consumption rate
    reaches capacity: binding iff d_i - E[a_i 1{r > a.p*}] <= 3 stderr."""
    from .inputs import resolve_d
    d_vec = resolve_d(d, model.m)
    r, a = model.sample_arrays(seed, int(samples))
    accept = r > a @ pstar.p
    contrib = a * accept[:, None]
    cons = contrib.mean(axis=0)
    stderr = contrib.std(axis=0, ddof=1) / np.sqrt(samples)
    slack = d_vec - cons
    binding = tuple(int(i) for i in np.flatnonzero(slack <= 3.0 * stderr))
    nonbinding = tuple(int(i) for i in np.flatnonzero(slack > 3.0 * stderr))
    return BindingClassification(binding=binding, nonbinding=nonbinding,
                                 expected_consumption=cons, stderr=stderr)


def taylor_identity_residual(problem: SampledDualProblem, p, pstar) -> float:
    """Residual of the exact two-term expansion of f around pstar.

    With alpha_j = a_j . p, beta_j = a_j . pstar, s_j = 1{r_j > beta_j}:

        f(p) - f(pstar) = phi_bar . (p - pstar)
                        + (1/t) sum_j [ min(beta_j, r_j) - min(alpha_j, r_j)
                                        - s_j (beta_j - alpha_j) ],

    where phi_bar is the subgradient at pstar.  The identity is exact for
    every pair of prices, so the residual is numerical noise only.
    """
    p = np.asarray(p, dtype=float).ravel()
    ps = np.asarray(pstar, dtype=float).ravel()
    lhs = f_value(problem, p) - f_value(problem, ps)
    first = float(subgradient(problem, ps) @ (p - ps))
    alpha = problem.columns @ p
    beta = problem.columns @ ps
    s = (problem.rewards > beta).astype(float)
    second = float(np.mean(np.minimum(beta, problem.rewards)
                           - np.minimum(alpha, problem.rewards)
                           - s * (beta - alpha)))
    return abs(lhs - first - second)
