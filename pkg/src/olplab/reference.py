"""Exhaustive reference solvers used to cross-check the simplex engine.

Two independent routes to the packing LP optimum:

* enumerate_primal_value walks every basic solution directly: each choice
  of at most m fractional indices, each same-size active-constraint subset,
  and every 0/1 bound pattern for the remaining variables.  Exponential in
  n, intended for n <= 12.
* enumerate_dual_value walks every vertex candidate of the piecewise-linear
  dual bᵀp + sum_j (r_j - a_jᵀp)⁺ instead: each choice of at most m tight
  reward hyperplanes combined with zero-price coordinates.  Polynomial in n,
  comfortable up to n ~ 25, and equal to the primal optimum by strong
  duality.

Both are deliberately pivot-free so they share no code with the solver they
audit.  A couple of one-dimensional scans for the sampled dual live here
for the same reason.
"""
from __future__ import annotations

from itertools import combinations, product

import numpy as np

_TOL = 1e-9


def enumerate_primal_value(r: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Best objective over all basic feasible candidates (n <= ~12)."""
    r = np.asarray(r, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n, m = a.shape
    scale = 1.0 + np.abs(b)
    best = -np.inf
    all_idx = np.arange(n)
    for k in range(0, min(m, n) + 1):
        for frac in combinations(range(n), k):
            fr = np.array(frac, dtype=int)
            rest = np.setdiff1d(all_idx, fr)
            patterns = np.array(list(product((0.0, 1.0), repeat=rest.size)))
            if patterns.size == 0:
                patterns = np.zeros((1, 0))
            base_use = patterns @ a[rest] if rest.size else np.zeros((patterns.shape[0], m))
            if k == 0:
                x_full = np.zeros((patterns.shape[0], n))
                x_full[:, rest] = patterns
                feas = np.all(base_use <= b + _TOL * scale, axis=1)
                if feas.any():
                    vals = x_full[feas] @ r
                    best = max(best, float(vals.max()))
                continue
            for rows in combinations(range(m), k):
                tr = np.array(rows, dtype=int)
                block = a[fr][:, tr].T  # (k, k): tight rows x fractional vars
                if abs(np.linalg.det(block)) < 1e-12:
                    continue
                rhs = b[tr][None, :] - base_use[:, tr]
                xf = np.linalg.solve(block, rhs.T).T
                ok = np.all((xf > -_TOL) & (xf < 1.0 + _TOL), axis=1)
                if not ok.any():
                    continue
                use = base_use[ok] + xf[ok] @ a[fr]
                feas = np.all(use <= b + _TOL * scale, axis=1)
                if not feas.any():
                    continue
                vals = (patterns[ok][feas] @ r[rest] if rest.size else 0.0) \
                    + xf[ok][feas] @ r[fr]
                best = max(best, float(np.max(vals)))
    return best


def enumerate_dual_value(r: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Min of the dual piecewise-linear objective over its vertex candidates.

    Vertices of min_{p>=0} bᵀp + (1/1)sum_j (r_j - a_jᵀp)⁺ sit where m
    independent conditions bind, each either a tight hyperplane a_jᵀp = r_j
    or a zero coordinate p_i = 0.  Equals the primal optimum by strong
    duality.
    """
    r = np.asarray(r, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n, m = a.shape
    best = np.inf
    for k in range(0, min(m, n) + 1):
        frs = np.array(list(combinations(range(n), k)), dtype=int)
        if frs.size == 0 and k > 0:
            continue
        for free in combinations(range(m), k):
            fc = np.array(free, dtype=int)
            if k == 0:
                p = np.zeros((1, m))
            else:
                blocks = a[frs][:, :, fc]          # (nc, k, k)
                dets = np.linalg.det(blocks)
                good = np.abs(dets) > 1e-12
                if not good.any():
                    continue
                sol = np.linalg.solve(blocks[good], r[frs[good]][..., None])[..., 0]
                keep = np.all(sol > -_TOL, axis=1)
                if not keep.any():
                    continue
                p = np.zeros((int(keep.sum()), m))
                p[:, fc] = sol[keep]
            margins = r[None, :] - p @ a.T
            vals = p @ b + np.maximum(margins, 0.0).sum(axis=1)
            best = min(best, float(vals.min()))
    return best


def secretary_quantile(rewards: np.ndarray, d: float) -> float:
    """Minimal optimal price of the unit-column sampled dual (m = 1, a = 1).

    The minimizer set of d*p + mean((r - p)+) over p >= 0 is the sample
    (1-d)-quantile region; its left endpoint is the k-th smallest reward
    with k = ceil(t*(1-d)), or 0 when the capacity rate d >= 1.
    """
    rewards = np.asarray(rewards, dtype=float)
    t = rewards.size
    k = int(np.ceil(t * (1.0 - d) - 1e-12))
    if k <= 0:
        return 0.0
    return float(np.sort(rewards)[min(k, t) - 1])


def scan_dual_1d(r: np.ndarray, a: np.ndarray, d_eff: float):
    """Breakpoint scan of the m = 1 sampled dual; returns (p_min, f_min).

    p_min is the smallest minimizer (left endpoint of the optimal face).
    """
    r = np.asarray(r, dtype=float)
    a = np.asarray(a, dtype=float).reshape(-1)
    t = r.size
    bps = [0.0]
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = r / a
    bps.extend(c for c, aa in zip(cand, a) if aa != 0 and np.isfinite(c) and c > 0)
    bps = np.unique(np.asarray(bps, dtype=float))
    vals = d_eff * bps + np.maximum(r[None, :] - np.outer(bps, a), 0.0).sum(axis=1) / t
    fmin = vals.min()
    p_min = float(bps[np.nonzero(vals <= fmin + 1e-12)[0][0]])
    return p_min, float(fmin)
