"""Monte Carlo harness: trials, regret curves, dual convergence, gaps.

Seeds derive per trial from a base seed, so results are independent of
trial count and execution order; parallel runs aggregate in trial order
and reproduce serial output exactly.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import (BindingClassification, DualPrice, NumericalFailure,
                   RegretReport, stopping_time, instance_arrays)
from .dual import SampledDualProblem, solve_sampled_dual_exact
from .inputs import (InputModel, derive_trial_seed, empirical_a_bar,
                     generate_instance, mix64, resolve_d)
from .policies import DualPricePolicy, policy_step
from .simplex import solve_box_lp


@dataclass
class TrialResult:
    """One simulated horizon under one policy."""

    seed: int
    online_revenue: float
    offline_optimum: float
    regret: float
    ledger: object
    tau_abar: int
    binding_leftover: Optional[np.ndarray] = None
    price_error_sum: Optional[float] = None
    price_trace: Optional[list] = None


def run_trial(model: InputModel, policy: DualPricePolicy, n: int, d, seed: int,
              pstar: Optional[DualPrice] = None,
              binding: Optional[BindingClassification] = None,
              record_prices: bool = False) -> TrialResult:
    """Simulate one instance end to end and compare to the offline optimum."""
    orders, capacity = generate_instance(model, n, d, seed)
    r, a = instance_arrays(orders)
    try:
        offline = solve_box_lp(r, a, capacity.b, tie_break=False)
    except NumericalFailure as exc:
        raise NumericalFailure(
            f"trial seed {seed}, offline solve: {exc}") from exc
    state = policy.start(capacity)
    perr = 0.0 if pstar is not None else None
    trace = [] if record_prices else None
    for step, order in enumerate(orders, start=1):
        if pstar is not None and state.price is not None:
            diff = state.price - pstar.p
            perr += float(diff @ diff)
        if record_prices:
            trace.append(None if state.price is None else state.price.copy())
        try:
            policy_step(policy, state, order)
        except NumericalFailure as exc:
            raise NumericalFailure(
                f"trial seed {seed}, period {step}: {exc}") from exc
    online = float(r @ state.ledger.x)
    regret = offline.objective - online
    scale = 1.0 + abs(offline.objective)
    if regret < -1e-6 * scale:
        raise NumericalFailure(
            f"trial seed {seed}: online revenue exceeded the offline optimum "
            f"by {-regret:.3g} (policy {policy.name})")
    bounds = capacity.bounds
    a_bar = bounds.a_bar if bounds.declared else empirical_a_bar(orders)
    tau = stopping_time(state.ledger, a_bar)
    leftover = None
    if binding is not None:
        leftover = state.ledger.remaining()[list(binding.binding)]
    return TrialResult(seed=seed, online_revenue=online,
                       offline_optimum=offline.objective, regret=regret,
                       ledger=state.ledger, tau_abar=tau,
                       binding_leftover=leftover, price_error_sum=perr,
                       price_trace=trace)


def _trial_task(payload):
    model, policy, n, d, seed, pstar, binding, record = payload
    return run_trial(model, policy, n, d, seed, pstar=pstar, binding=binding,
                     record_prices=record)


def run_trials(model: InputModel, policy: DualPricePolicy, n: int, d,
               trials: int, base_seed: int,
               pstar: Optional[DualPrice] = None,
               binding: Optional[BindingClassification] = None,
               record_prices: bool = False,
               threads: int = 1) -> List[TrialResult]:
    """Independent trials with per-trial derived seeds, optionally parallel.

    Trial i of a run is identical no matter how many trials surround it or
    how many workers execute them.
    """
    seeds = [derive_trial_seed(base_seed, i) for i in range(trials)]
    payloads = [(model, policy, n, d, s, pstar, binding, record_prices)
                for s in seeds]
    if threads <= 1 or trials < 2:
        return [_trial_task(p) for p in payloads]
    chunk = max(1, trials // (8 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_trial_task, payloads, chunksize=chunk))


def summarize_trials(model: InputModel, policy: DualPricePolicy, n: int,
                     results: Sequence[TrialResult],
                     with_binding: bool, with_pstar: bool) -> RegretReport:
    regrets = np.array([t.regret for t in results])
    stop_gaps = np.array([n - t.tau_abar for t in results], dtype=float)
    mean_leftover = None
    if with_binding:
        mean_leftover = float(np.mean([t.binding_leftover.sum() for t in results]))
    mean_perr = None
    if with_pstar:
        mean_perr = float(np.mean([t.price_error_sum for t in results]))
    return RegretReport(
        model=model.describe(), algorithm=policy.name, n=n, m=model.m,
        trials=len(results), mean_regret=float(regrets.mean()),
        stderr=float(regrets.std(ddof=1) / np.sqrt(len(results))),
        mean_binding_leftover=mean_leftover,
        mean_stop_gap=float(stop_gaps.mean()),
        mean_price_error=mean_perr)


def estimate_regret(model: InputModel, policy: DualPricePolicy, n: int, d,
                    trials: int, base_seed: int,
                    pstar: Optional[DualPrice] = None,
                    binding: Optional[BindingClassification] = None,
                    threads: int = 1) -> RegretReport:
    """Mean regret (and companions) over `trials` derived-seed instances.

    Reports for different policies at the same (model, n, d, base_seed)
    see identical instances, so algorithm comparisons are paired.
    """
    if trials < 2:
        raise ValueError("trials must be at least 2 for a standard error")
    results = run_trials(model, policy, n, d, trials, base_seed,
                         pstar=pstar, binding=binding, threads=threads)
    return summarize_trials(model, policy, n, results,
                            with_binding=binding is not None,
                            with_pstar=pstar is not None)


class DegenerateDualWarning(UserWarning):
    """Sampled prices coincide exactly with the reference on most draws."""


def dual_convergence_experiment(model: InputModel, d, n_grid: Sequence[int],
                                trials: int, base_seed: int,
                                pstar: DualPrice) -> List[Tuple[int, float, float]]:
    """Mean squared price error of exact sampled-dual solves vs a reference.

    Returns rows (n, mse, stderr).  Draws are independent across grid
    points and trials.  When most draws hit the reference price exactly
    the curve carries no rate information; a DegenerateDualWarning says so.
    """
    d_vec = resolve_d(d, model.m)
    rows = []
    zero_hits = 0
    total = 0
    for n in n_grid:
        errs = np.empty(trials)
        for i in range(trials):
            seed = int(mix64(base_seed, np.uint64(n), np.uint64(i)))
            r, a = model.sample_arrays(seed, n)
            p_n = solve_sampled_dual_exact(SampledDualProblem(r, a, d_vec)).p
            errs[i] = float(np.sum((p_n - pstar.p) ** 2))
        zero_hits += int(np.sum(errs < 1e-18))
        total += trials
        rows.append((int(n), float(errs.mean()),
                     float(errs.std(ddof=1) / np.sqrt(trials))))
    if zero_hits > total / 2:
        warnings.warn(
            "most sampled prices equal the reference exactly; the error "
            "curve is degenerate and log-log fits are unreliable",
            DegenerateDualWarning)
    return rows


def trajectory_export(model: InputModel, policy: DualPricePolicy, n: int, d,
                      trials: int, base_seed: int,
                      resource: int = 0) -> np.ndarray:
    """Remaining capacity paths: array (trials, n + 1) for one resource."""
    if not 0 <= resource < model.m:
        raise ValueError(f"resource index {resource} out of range for m={model.m}")
    out = np.empty((trials, n + 1))
    for i in range(trials):
        res = run_trial(model, policy, n, d, derive_trial_seed(base_seed, i))
        out[i] = res.ledger.b[:, resource]
    return out


def lagrangian_gap_detail(model: InputModel, d, pstar: DualPrice, p,
                          samples: int = 200_000, seed: int = 0) -> Tuple[float, float]:
    """Population Lagrangian shortfall of price p against pstar.

    Per draw:  val(q) = r 1{r > a.q} + (d - a 1{r > a.q}) . pstar;
    the gap is E[val(pstar) - val(p)], nonnegative for the true pstar.
    Paired sampling keeps the variance of the difference low.
    """
    d_vec = resolve_d(d, model.m)
    p = np.asarray(p, dtype=float).ravel()
    r, a = model.sample_arrays(seed, int(samples))

    def per_draw(price):
        accept = r > a @ price
        return r * accept + (d_vec - a * accept[:, None]) @ pstar.p

    diff = per_draw(pstar.p) - per_draw(p)
    return (float(diff.mean()),
            float(diff.std(ddof=1) / np.sqrt(samples)))


def lagrangian_gap(model: InputModel, d, pstar: DualPrice, p,
                   samples: int = 200_000, seed: int = 0) -> float:
    return lagrangian_gap_detail(model, d, pstar, p, samples, seed)[0]


def loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise ValueError("log-log slope needs strictly positive values")
    return float(np.polyfit(np.log(ns), np.log(values), 1)[0])
