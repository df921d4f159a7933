"""Dense bounded-variable simplex for packing LPs.

Solves   max  c.x   s.t.  A x <= b,  lo <= x <= up
with the row count m small and the column count n possibly large.  Columns
live in a growing buffer so a caller can append one column at a time and
reoptimize from the previous basis (dual simplex restores feasibility after
rhs changes, primal simplex finishes).  Pivoting follows Bland's smallest
index rule throughout, which keeps every solve deterministic and cycle free.

Slack columns occupy indices 0..m-1; structural column j is index m + j.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (CS_TOL, FEAS_TOL, GAP_TOL, PIVOT_TOL, CapacitySpec,
                   DualPrice, NumericalFailure, Order, instance_arrays)

AT_LOWER, AT_UPPER, BASIC = 0, 1, 2
_REFACTOR_EVERY = 128


class BoxLpSession:
    """Incremental simplex state for one LP with box-bounded columns."""

    def __init__(self, m: int, rhs: np.ndarray, capacity_hint: int = 64):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (m,):
            raise ValueError("rhs must have shape (m,)")
        if np.any(rhs < -FEAS_TOL):
            raise NumericalFailure("initial slack basis infeasible (rhs < 0)")
        self.m = m
        cap = m + max(capacity_hint, 16)
        self.cols = np.zeros((m, cap))
        self.cols[:, :m] = np.eye(m)
        self.obj = np.zeros(cap)
        self.lo = np.zeros(cap)
        self.up = np.full(cap, np.inf)
        self.status = np.full(cap, AT_LOWER, dtype=np.int8)
        self.ncol = m
        self.rhs = rhs.copy()
        self.basis = np.arange(m)
        self.status[:m] = BASIC
        self.binv = np.eye(m)
        self.xb = np.maximum(rhs.copy(), 0.0)
        self.pivots = 0
        self._since_refactor = 0

    # -- construction ------------------------------------------------------

    def _grow(self, extra: int) -> None:
        cap = self.cols.shape[1]
        need = self.ncol + extra
        if need <= cap:
            return
        new_cap = max(need, 2 * cap)
        obj = np.zeros(new_cap)
        obj[:cap] = self.obj
        self.obj = obj
        lo = np.zeros(new_cap)
        lo[:cap] = self.lo
        self.lo = lo
        up = np.full(new_cap, np.inf)
        up[:cap] = self.up
        self.up = up
        status = np.full(new_cap, AT_LOWER, dtype=np.int8)
        status[:cap] = self.status
        self.status = status
        cols = np.zeros((self.m, new_cap))
        cols[:, :cap] = self.cols
        self.cols = cols

    def add_columns(self, a: np.ndarray, c: np.ndarray, lo: float = 0.0,
                    up: float = 1.0, keep_dual_feasible: bool = False) -> None:
        """Append structural columns (a is (m, k)).

        With keep_dual_feasible (the warm resolve path), columns whose
        reduced cost is attractive at the current prices are bound-flipped
        to their upper bound, which preserves dual feasibility so a dual
        simplex pass can absorb the change.  Cold builds leave everything
        at the lower bound and rely on the primal pass instead.
        """
        a = np.atleast_2d(np.asarray(a, dtype=float))
        if a.shape[0] != self.m:
            a = a.T
        k = a.shape[1]
        c = np.atleast_1d(np.asarray(c, dtype=float))
        self._grow(k)
        sl = slice(self.ncol, self.ncol + k)
        self.cols[:, sl] = a
        self.obj[sl] = c
        self.lo[sl] = lo
        self.up[sl] = up
        self.status[sl] = AT_LOWER
        self.ncol += k
        if lo != 0.0:
            self.xb -= self.binv @ (a.sum(axis=1) * lo)
        if keep_dual_feasible and np.isfinite(up):
            y = self.duals_raw()
            z = c - y @ a
            flip = z > PIVOT_TOL
            if np.any(flip):
                shift = a[:, flip].sum(axis=1) * (up - lo)
                self.xb -= self.binv @ shift
                idx = np.nonzero(flip)[0] + sl.start
                self.status[idx] = AT_UPPER

    def set_rhs(self, rhs: np.ndarray) -> None:
        rhs = np.asarray(rhs, dtype=float)
        self.xb += self.binv @ (rhs - self.rhs)
        self.rhs = rhs.copy()

    # -- linear algebra ----------------------------------------------------

    def refactor(self) -> None:
        base = self.cols[:, self.basis]
        try:
            self.binv = np.linalg.inv(base)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        xn = np.where(self.status[:self.ncol] == AT_UPPER,
                      self.up[:self.ncol], self.lo[:self.ncol])
        xn[self.basis] = 0.0
        nz = np.nonzero(xn)[0]
        r_eff = self.rhs - self.cols[:, nz] @ xn[nz] if nz.size else self.rhs.copy()
        self.xb = self.binv @ r_eff
        self._since_refactor = 0

    def duals_raw(self) -> np.ndarray:
        return self.binv.T @ self.obj[self.basis]

    def _maybe_refactor(self) -> None:
        self._since_refactor += 1
        if self._since_refactor >= _REFACTOR_EVERY:
            self.refactor()

    # -- pivoting ----------------------------------------------------------

    def _apply_pivot(self, enter: int, w: np.ndarray, row: int, t: float,
                     direction: int, leave_status: int) -> None:
        g = direction * w
        piv = w[row]
        if abs(piv) < PIVOT_TOL:
            raise NumericalFailure("pivot element vanished")
        enter_val = (self.lo[enter] + t) if direction > 0 else (self.up[enter] - t)
        self.xb -= t * g
        leave = self.basis[row]
        self.status[leave] = leave_status
        self.basis[row] = enter
        self.status[enter] = BASIC
        self.binv[row] /= piv
        others = np.arange(self.m) != row
        self.binv[others] -= np.outer(w[others], self.binv[row])
        self.xb[row] = enter_val
        self.pivots += 1
        self._maybe_refactor()

    def _ratio_test(self, enter: int, direction: int):
        """Max step for the entering variable; returns (t, row, leave_status).

        row is None when the binding event is the entering variable hitting
        its own opposite bound (a bound flip).
        """
        w = self.binv @ self.cols[:, enter]
        g = direction * w
        lob = self.lo[self.basis]
        upb = self.up[self.basis]
        t_best = self.up[enter] - self.lo[enter]  # flip distance, may be inf
        row, leave_status = None, AT_LOWER
        dec = g > PIVOT_TOL
        inc = g < -PIVOT_TOL
        ratios = np.full(self.m, np.inf)
        if np.any(dec):
            ratios[dec] = np.maximum(self.xb[dec] - lob[dec], 0.0) / g[dec]
        finite_up = inc & np.isfinite(upb)
        if np.any(finite_up):
            ratios[finite_up] = np.maximum(upb[finite_up] - self.xb[finite_up], 0.0) \
                / (-g[finite_up])
        rmin = ratios.min() if self.m else np.inf
        if rmin < t_best - 1e-12:
            cands = np.nonzero(ratios <= rmin + 1e-10)[0]
            row = cands[np.argmin(self.basis[cands])]
            t_best = max(ratios[row], 0.0)
            leave_status = AT_LOWER if g[row] > 0 else AT_UPPER
        if not np.isfinite(t_best):
            raise NumericalFailure("unbounded ray in a box LP (should not happen)")
        return t_best, row, w, leave_status

    def _batch_flip_from_slack_basis(self) -> None:
        """Vectorized replay of the opening run of Bland bound flips.

        Only valid from the all-slack basis (prices are zero, so reduced
        costs equal objective coefficients).  Flips the longest prefix of
        profitable finite-bound columns whose cumulative consumption keeps
        every slack nonnegative; identical to running those flips one at a
        time.
        """
        if not np.array_equal(self.basis, np.arange(self.m)):
            return
        if np.any(self.obj[:self.m] != 0.0):
            return
        n = self.ncol
        elig = (self.obj[:n] > PIVOT_TOL) & (self.status[:n] == AT_LOWER) \
            & np.isfinite(self.up[:n])
        idx = np.nonzero(elig)[0]
        if idx.size == 0:
            return
        widths = self.up[idx] - self.lo[idx]
        use = self.cols[:, idx] * widths
        slack_path = self.xb[:, None] - np.cumsum(use, axis=1)
        feas = np.all(slack_path >= 0.0, axis=0)
        k = int(np.argmin(feas)) if not feas.all() else idx.size
        if k == 0:
            return
        take = idx[:k]
        self.status[take] = AT_UPPER
        self.xb = slack_path[:, k - 1].copy()

    def primal_simplex(self, max_pivots: Optional[int] = None) -> int:
        """Run Bland primal simplex to optimality; returns pivot count."""
        if max_pivots is None:
            max_pivots = 20000 + 10 * self.ncol
        self._batch_flip_from_slack_basis()
        n = self.ncol
        start_pivots = self.pivots
        it = 0
        while True:
            it += 1
            if it > max_pivots:
                raise NumericalFailure("pivot limit exceeded in primal simplex")
            y = self.duals_raw()
            z = self.obj[:n] - y @ self.cols[:, :n]
            st = self.status[:n]
            elig = ((st == AT_LOWER) & (z > PIVOT_TOL)) | \
                   ((st == AT_UPPER) & (z < -PIVOT_TOL))
            if not elig.any():
                return self.pivots - start_pivots
            enter = int(np.argmax(elig))  # first True = smallest index (Bland)
            direction = 1 if st[enter] == AT_LOWER else -1
            t, row, w, leave_status = self._ratio_test(enter, direction)
            if row is None:
                # bound flip
                self.status[enter] = AT_UPPER if direction > 0 else AT_LOWER
                self.xb -= t * direction * w
            else:
                self._apply_pivot(enter, w, row, t, direction, leave_status)

    def dual_restore(self, max_pivots: Optional[int] = None) -> int:
        """Dual simplex pass: make the basis primal feasible again.

        Precondition: reduced costs are optimal-signed (true right after an
        optimal solve whose rhs was then shifted).  Returns pivot count.
        """
        if max_pivots is None:
            max_pivots = 20000 + 10 * self.ncol
        n = self.ncol
        start_pivots = self.pivots
        it = 0
        while True:
            it += 1
            if it > max_pivots:
                raise NumericalFailure("pivot limit exceeded in dual simplex")
            lob = self.lo[self.basis]
            upb = self.up[self.basis]
            low_viol = self.xb < lob - FEAS_TOL
            up_viol = self.xb > upb + FEAS_TOL
            viol = low_viol | up_viol
            if not viol.any():
                return self.pivots - start_pivots
            rows = np.nonzero(viol)[0]
            row = rows[np.argmin(self.basis[rows])]
            below = bool(low_viol[row])
            y = self.duals_raw()
            z = self.obj[:n] - y @ self.cols[:, :n]
            alpha = self.binv[row] @ self.cols[:, :n]
            st = self.status[:n]
            if below:
                elig = ((st == AT_LOWER) & (alpha < -PIVOT_TOL)) | \
                       ((st == AT_UPPER) & (alpha > PIVOT_TOL))
            else:
                elig = ((st == AT_LOWER) & (alpha > PIVOT_TOL)) | \
                       ((st == AT_UPPER) & (alpha < -PIVOT_TOL))
            if not elig.any():
                raise NumericalFailure("dual simplex found no entering column")
            idx = np.nonzero(elig)[0]
            theta = np.abs(z[idx] / alpha[idx])
            tmin = theta.min()
            cands = idx[theta <= tmin + 1e-10]
            enter = int(cands.min())
            w = self.binv @ self.cols[:, enter]
            bound = lob[row] if below else upb[row]
            delta = (self.xb[row] - bound) / w[row]
            enter_from = self.lo[enter] if st[enter] == AT_LOWER else self.up[enter]
            self.xb -= delta * w
            leave = self.basis[row]
            self.status[leave] = AT_LOWER if below else AT_UPPER
            self.basis[row] = enter
            self.status[enter] = BASIC
            piv = w[row]
            if abs(piv) < PIVOT_TOL:
                raise NumericalFailure("pivot element vanished in dual simplex")
            self.binv[row] /= piv
            others = np.arange(self.m) != row
            self.binv[others] -= np.outer(w[others], self.binv[row])
            self.xb[row] = enter_from + delta
            self.pivots += 1
            self._maybe_refactor()

    def reoptimize(self) -> int:
        """Restore feasibility then finish with primal pivots."""
        done = self.dual_restore()
        done += self.primal_simplex()
        return done

    # -- extraction --------------------------------------------------------

    def structural_values(self) -> np.ndarray:
        n = self.ncol
        x = np.where(self.status[:n] == AT_UPPER, self.up[:n], self.lo[:n])
        x[self.basis] = self.xb
        return x[self.m:]

    def structural_objective(self) -> float:
        return float(self.obj[self.m:self.ncol] @ self.structural_values())

    def prices(self) -> np.ndarray:
        """Row duals at the current basis, clamped to be nonnegative."""
        return np.maximum(self.duals_raw(), 0.0)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LpSolution:
    """Offline LP outcome: allocation, value, prices and reduced costs."""
    x: np.ndarray
    objective: float
    dual_price: DualPrice
    reduced: np.ndarray
    status: str
    pivots: int = 0


def _minimal_sum_prices(r: np.ndarray, a: np.ndarray, b: np.ndarray,
                        x: np.ndarray, p_native: np.ndarray) -> np.ndarray:
    """Minimal sum-of-prices vertex of the optimal dual face.

    The face is cut out by complementary slackness against the fixed
    optimal allocation x: rows with positive slack force p_i = 0, orders at
    their upper bound force a_j.p <= r_j, rejected orders force
    a_j.p >= r_j, fractional orders force equality.  The face LP
    (min sum p subject to those rows) is solved through its dual, which has
    only |tight rows| constraints and so fits the same simplex engine.
    Falls back to the native vertex if the mini LP misbehaves numerically.
    """
    m = b.size
    slack = b - x @ a
    tight = slack <= 1e-7 * (1.0 + np.abs(b))
    if not tight.any():
        return np.zeros(m)
    cidx = np.nonzero(tight)[0]
    at_one = x >= 1.0 - 1e-9
    at_zero = x <= 1e-9
    frac = ~(at_one | at_zero)
    ac = a[:, cidx]
    g = np.vstack([ac[at_zero], -ac[at_one], ac[frac], -ac[frac]])
    h = np.concatenate([r[at_zero], -r[at_one], r[frac], -r[frac]])
    p_new = np.zeros(m)
    if g.shape[0]:
        try:
            sess = BoxLpSession(cidx.size, np.ones(cidx.size),
                                capacity_hint=g.shape[0])
            sess.add_columns(g.T, h, lo=0.0, up=np.inf)
            sess.primal_simplex()
            p_face = sess.prices()
        except NumericalFailure:
            return p_native
        p_new[cidx] = p_face
        viol = np.max(g @ p_face - h) if g.size else 0.0
        scale = 1.0 + float(np.max(np.abs(r), initial=0.0))
        if viol > 1e-6 * scale:
            return p_native
    # the face vertex must attain the same dual objective as the native one
    def dual_obj(p):
        return float(b @ p + np.sum(np.maximum(r - a @ p, 0.0)))
    if abs(dual_obj(p_new) - dual_obj(p_native)) > 1e-6 * (1.0 + abs(dual_obj(p_native))):
        return p_native
    return p_new


def solve_box_lp(r: np.ndarray, a: np.ndarray, b: np.ndarray,
                 tie_break: bool = True) -> LpSolution:
    """Solve max r.x, x @ a <= b, 0 <= x <= 1 (a has shape (n, m))."""
    r = np.asarray(r, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n, m = a.shape
    # feed columns in reward order: the initial bound-flip pass then covers
    # most of the accepted set and pivot counts stay near m
    order = np.argsort(-r, kind="stable")
    sess = BoxLpSession(m, b, capacity_hint=n)
    sess.add_columns(a[order].T, r[order], lo=0.0, up=1.0)
    pivots = sess.primal_simplex()
    x = np.empty(n)
    x[order] = sess.structural_values()
    x = np.clip(x, 0.0, 1.0)
    obj = float(r @ x)
    p = sess.prices()
    if tie_break:
        p = _minimal_sum_prices(r, a, b, x, p)
    price = DualPrice(p, provenance="exact_lp")
    reduced = np.maximum(r - a @ price.p, 0.0)
    sol = LpSolution(x=x, objective=obj, dual_price=price, reduced=reduced,
                     status="optimal", pivots=pivots)
    _check_solution(r, a, b, sol)
    return sol


def _check_solution(r, a, b, sol: LpSolution) -> None:
    x, p, y = sol.x, sol.dual_price.p, sol.reduced
    scale_b = 1.0 + np.abs(b)
    if np.any(x @ a > b + FEAS_TOL * scale_b):
        raise NumericalFailure("primal feasibility violated")
    if np.any(a @ p + y < r - 1e-9 * (1.0 + np.abs(r))):
        raise NumericalFailure("dual feasibility violated")
    dual_obj = float(b @ p + y.sum())
    if abs(dual_obj - sol.objective) > GAP_TOL * (1.0 + abs(sol.objective)):
        raise NumericalFailure(
            f"duality gap {dual_obj - sol.objective:.3e} out of tolerance")


def solve_offline(orders: Sequence[Order], capacity: CapacitySpec) -> LpSolution:
    """Offline optimum of the packing LP over a full instance."""
    r, a = instance_arrays(orders)
    if a.shape != (capacity.n, capacity.m):
        raise ValueError("instance shape does not match the capacity spec")
    return solve_box_lp(r, a, capacity.b)


def dual_from_offline(solution: LpSolution) -> DualPrice:
    """Dual price of an offline solve (minimal-sum vertex, already applied)."""
    return solution.dual_price


def check_complementary_slackness(r, a, b, sol: LpSolution,
                                  tol: float = CS_TOL) -> float:
    """Max complementary slackness violation of a solution (test helper)."""
    x, p, y = sol.x, sol.dual_price.p, sol.reduced
    scale = 1.0 + max(float(np.max(np.abs(r), initial=0.0)),
                      float(np.max(np.abs(b), initial=0.0)))
    slack = b - x @ a
    worst = float(np.max(np.abs(p * slack), initial=0.0))
    margin = r - a @ p - y          # <= 0 with equality where x_j > 0
    worst = max(worst, float(np.max(x * np.abs(margin), initial=0.0)))
    worst = max(worst, float(np.max(y * (1.0 - x), initial=0.0)))
    return worst / scale
