"""Bounded-variable revised simplex.

The LP is held in the form ``A x + s = b`` where every row owns a slack
``s`` whose bounds encode the row sense (``<=``: ``s >= 0``, ``>=``:
``s <= 0``, ``=``: ``s = 0``).  A second (signed) identity block of
artificial columns provides a feasible starting basis for phase 1.  The
basis is kept as a sparse LU factorisation followed by a product-form eta
file; it is refactorised every ``REFACTOR_EVERY`` pivots.

Two entry points are used by branch and bound:

* :meth:`DenseLP.solve` -- cold start, phase 1 on the artificials, then phase 2.
* :meth:`DenseLP.resolve` -- warm start from a stored basis after bound
  changes, by the dual simplex (the stored basis stays dual feasible).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from gridgame.errors import NumericalError
from gridgame.milp.model import Sense, Status

BASIC, AT_LOWER, AT_UPPER, AT_ZERO = 0, 1, 2, 3

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-7   # smallest acceptable pivot in the ratio tests
TINY_PIVOT = 1e-9
REFACTOR_EVERY = 50
DEGENERATE_STREAK = 30


@dataclass(frozen=True)
class Basis:
    basic: tuple[int, ...]
    status: bytes  # one status code per column


@dataclass
class LPResult:
    status: Status
    x: np.ndarray
    objective: float
    basis: Basis | None
    iterations: int


class DenseLP:
    """One LP whose structural bounds may be changed between solves."""

    def __init__(self, c, A, senses, b, lb, ub, max_iter: int | None = None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            A = A.reshape(len(b), -1)
        m, n = A.shape
        if m == 0:  # keep one empty row so the basis is never 0x0
            A, b, senses, m = np.zeros((1, n)), [0.0], [Sense.LE], 1
        self.m, self.n = m, n
        self.N = n + 2 * m
        self.b = np.asarray(b, dtype=float).copy()
        s_lb = np.zeros(m)
        s_ub = np.zeros(m)
        for i, sense in enumerate(senses):
            if sense is Sense.LE:
                s_ub[i] = np.inf
            elif sense is Sense.GE:
                s_lb[i] = -np.inf
        self._art_sign = np.ones(m)
        # structural and slack columns; artificial column i is art_sign[i] * e_i
        self.A = sp.hstack([sp.csc_matrix(A), sp.identity(m, format="csc")], format="csc")
        self.AT = self.A.T.tocsr()
        self.lb = np.concatenate([np.asarray(lb, float), s_lb, np.zeros(m)])
        self.ub = np.concatenate([np.asarray(ub, float), s_ub, np.zeros(m)])
        self.cost = np.concatenate([np.asarray(c, float), np.zeros(2 * m)])
        self.max_iter = max_iter or 50 * (self.N + m) + 1000
        self.iterations = 0
        # working state
        self.x = np.zeros(self.N)
        self.status = np.full(self.N, AT_LOWER, dtype=np.int8)
        self.basic = np.arange(n + m, n + 2 * m)
        self._lu = None
        self._etas: list[tuple[int, np.ndarray]] = []

    # -- bounds ---------------------------------------------------------------
    def set_structural_bounds(self, lb, ub) -> None:
        self.lb[: self.n] = lb
        self.ub[: self.n] = ub

    @property
    def structural_bounds(self):
        return self.lb[: self.n].copy(), self.ub[: self.n].copy()

    # -- linear algebra helpers ------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        out = np.zeros(self.m)
        if j < self.n + self.m:
            lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
            out[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        else:
            i = j - self.n - self.m
            out[i] = self._art_sign[i]
        return out

    def _times(self, x: np.ndarray) -> np.ndarray:
        """``A_full @ x``."""
        k = self.n + self.m
        return self.A @ x[:k] + self._art_sign * x[k:]

    def _row_times(self, y: np.ndarray) -> np.ndarray:
        """``y @ A_full``."""
        return np.concatenate([self.AT @ y, self._art_sign * y])

    def _refactor(self) -> None:
        k = self.n + self.m
        cols, rows, vals = [], [], []
        for pos, j in enumerate(self.basic):
            if j < k:
                lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
                rows.append(self.A.indices[lo:hi])
                vals.append(self.A.data[lo:hi])
                cols.append(np.full(hi - lo, pos))
            else:
                i = j - k
                rows.append(np.array([i]))
                vals.append(np.array([self._art_sign[i]]))
                cols.append(np.array([pos]))
        B = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.m, self.m))
        try:
            self._lu = splu(B)
        except RuntimeError as exc:
            raise NumericalError("singular basis matrix") from exc
        self._etas = []
        self._recompute_basics()
        if not np.all(np.isfinite(self.x[self.basic])):
            raise NumericalError("basis solve is not finite")

    def _ftran(self, v: np.ndarray) -> np.ndarray:
        """``B^{-1} v``."""
        z = self._lu.solve(v)
        for r, alpha in self._etas:
            zr = z[r] / alpha[r]
            z -= alpha * zr
            z[r] = zr
        return z

    def _btran(self, v: np.ndarray) -> np.ndarray:
        """``v^T B^{-1}``."""
        v = v.astype(float, copy=True)
        for r, alpha in reversed(self._etas):
            v[r] = (v[r] - (v @ alpha - v[r] * alpha[r])) / alpha[r]
        return self._lu.solve(v, trans="T")

    def _recompute_basics(self) -> None:
        xn = np.where(self.status != BASIC, self.x, 0.0)
        self.x[self.basic] = self._ftran(self.b - self._times(xn))

    def _pivot(self, r: int, q: int, col: np.ndarray, leave_status: int, leave_value: float) -> None:
        if not abs(col[r]) > TINY_PIVOT or not np.isfinite(col[r]):
            raise NumericalError(f"pivot element {col[r]!r} too small")
        leaving = self.basic[r]
        self._etas.append((r, col.copy()))
        self.basic[r] = q
        self.status[q] = BASIC
        self.status[leaving] = leave_status
        self.x[leaving] = leave_value
        if len(self._etas) >= REFACTOR_EVERY:
            self._refactor()

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = self._btran(cost[self.basic])
        d = cost - self._row_times(y)
        d[self.basic] = 0.0
        return d

    def _place_nonbasic(self, j: int) -> None:
        lo, hi = self.lb[j], self.ub[j]
        if np.isfinite(lo):
            self.x[j], self.status[j] = lo, AT_LOWER
        elif np.isfinite(hi):
            self.x[j], self.status[j] = hi, AT_UPPER
        else:
            self.x[j], self.status[j] = 0.0, AT_ZERO

    # -- primal simplex ---------------------------------------------------------
    def _primal(self, cost: np.ndarray) -> Status:
        bland = False
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            d = self._reduced_costs(cost)
            movable = (self.status != BASIC) & (self.ub > self.lb)
            score = np.zeros(self.N)
            at_lo = movable & (self.status == AT_LOWER)
            at_hi = movable & (self.status == AT_UPPER)
            free = movable & (self.status == AT_ZERO)
            score[at_lo] = -d[at_lo]
            score[at_hi] = d[at_hi]
            score[free] = np.abs(d[free])
            eligible = np.flatnonzero(score > OPT_TOL)
            if eligible.size == 0:
                return Status.OPTIMAL
            q = int(eligible[0]) if bland else int(eligible[np.argmax(score[eligible])])
            direction = 1.0 if d[q] < 0 else -1.0
            col = self._ftran(self._column(q))
            rate = -col * direction  # d x_B / d t
            xb = self.x[self.basic]
            lbb, ubb = self.lb[self.basic], self.ub[self.basic]
            t = np.full(self.m, np.inf)
            up = rate > PIVOT_TOL
            dn = rate < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                t[up] = (ubb[up] - xb[up]) / rate[up]
                t[dn] = (lbb[dn] - xb[dn]) / rate[dn]
            t = np.where(np.isnan(t), np.inf, np.maximum(t, 0.0))
            t_flip = self.ub[q] - self.lb[q]
            t_min = t.min() if self.m else np.inf
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return Status.UNBOUNDED
            self.iterations += 1
            if t_flip <= t_min:
                step = t_flip
                self.x[self.basic] = xb + rate * step
                if self.status[q] == AT_LOWER:
                    self.x[q], self.status[q] = self.ub[q], AT_UPPER
                else:
                    self.x[q], self.status[q] = self.lb[q], AT_LOWER
            else:
                step = t_min
                ties = np.flatnonzero(t <= t_min + 1e-12)
                if bland:
                    r = int(ties[np.argmin(self.basic[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(col[ties]))])
                leaving = self.basic[r]
                hits_upper = rate[r] > 0
                self.x[self.basic] = xb + rate * step
                self.x[q] += direction * step
                if hits_upper:
                    self._pivot(r, q, col, AT_UPPER, self.ub[leaving])
                else:
                    self._pivot(r, q, col, AT_LOWER, self.lb[leaving])
            if step <= 1e-12:
                streak += 1
                if streak >= DEGENERATE_STREAK:
                    bland = True
            else:
                streak = 0
                bland = False

    # -- dual simplex -------------------------------------------------------------
    def _dual(self, cost: np.ndarray) -> Status:
        bland = False
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                return Status.ITERATION_LIMIT
            xb = self.x[self.basic]
            lbb, ubb = self.lb[self.basic], self.ub[self.basic]
            below = lbb - xb
            above = xb - ubb
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.m else 0
            if self.m == 0 or viol[r] <= FEAS_TOL:
                return Status.OPTIMAL
            if bland:
                rows = np.flatnonzero(viol > FEAS_TOL)
                r = int(rows[np.argmin(self.basic[rows])])
            raise_it = below[r] > above[r]
            e = np.zeros(self.m)
            e[r] = 1.0
            alpha = self._row_times(self._btran(e))
            d = self._reduced_costs(cost)
            movable = (self.status != BASIC) & (self.ub > self.lb)
            at_lo = movable & (self.status == AT_LOWER)
            at_hi = movable & (self.status == AT_UPPER)
            free = movable & (self.status == AT_ZERO)
            if raise_it:
                ok = (at_lo & (alpha < -PIVOT_TOL)) | (at_hi & (alpha > PIVOT_TOL))
            else:
                ok = (at_lo & (alpha > PIVOT_TOL)) | (at_hi & (alpha < -PIVOT_TOL))
            ok |= free & (np.abs(alpha) > PIVOT_TOL)
            cand = np.flatnonzero(ok)
            if cand.size == 0:
                return Status.INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(alpha[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12]
            q = int(ties[0]) if bland else int(ties[np.argmax(np.abs(alpha[ties]))])
            if best <= 1e-12:
                streak += 1
                bland = bland or streak >= DEGENERATE_STREAK
            else:
                streak, bland = 0, False
            target = lbb[r] if raise_it else ubb[r]
            delta = (xb[r] - target) / alpha[q]
            col = self._ftran(self._column(q))
            if abs(col[r] - alpha[q]) > 1e-6 * max(1.0, abs(alpha[q])):
                # row and column computations disagree: refresh the factorisation
                if not self._etas:
                    raise NumericalError("inconsistent pivot element after refactorisation")
                self._refactor()
                continue
            leaving = self.basic[r]
            self.iterations += 1
            self.x[self.basic] = xb - col * delta
            self.x[q] += delta
            self._pivot(r, q, col, AT_LOWER if raise_it else AT_UPPER, target)

    # -- public entry points ---------------------------------------------------------
    def _result(self, status: Status) -> LPResult:
        x = self.x[: self.n].copy()
        obj = float(self.cost[: self.n] @ x) if status is Status.OPTIMAL else float("nan")
        basis = Basis(tuple(int(i) for i in self.basic), self.status.tobytes())
        return LPResult(status, x, obj, basis if status is Status.OPTIMAL else None, self.iterations)

    def solve(self) -> LPResult:
        """Cold start: place structurals at a bound, run phase 1 then phase 2."""
        n, m = self.n, self.m
        self.iterations = 0
        if np.any(self.lb[:n] > self.ub[:n]):
            return LPResult(Status.INFEASIBLE, np.zeros(n), float("nan"), None, 0)
        for j in range(n):
            self._place_nonbasic(j)
        s = self.b - self.A[:, :n] @ self.x[:n]
        art = np.arange(n + m, n + 2 * m)
        self.basic = np.empty(m, dtype=int)
        for i in range(m):
            sj, aj = n + i, n + m + i
            lo, hi = self.lb[sj], self.ub[sj]
            if lo - FEAS_TOL <= s[i] <= hi + FEAS_TOL:
                self.basic[i] = sj
                self.status[sj] = BASIC
                self.x[sj] = s[i]
                self.ub[aj] = 0.0
                self.status[aj], self.x[aj] = AT_LOWER, 0.0
                self._art_sign[i] = 1.0
            else:
                target = min(max(s[i], lo), hi)
                self.x[sj] = target
                self.status[sj] = AT_LOWER if target == lo else AT_UPPER
                sign = 1.0 if s[i] > target else -1.0
                self._art_sign[i] = sign
                self.basic[i] = aj
                self.status[aj] = BASIC
                self.x[aj] = abs(s[i] - target)
                self.ub[aj] = np.inf
        self._refactor()
        phase1 = np.zeros(self.N)
        phase1[art] = (self.ub[art] > 0).astype(float)
        if phase1.any():
            st = self._primal(phase1)
            if st is Status.ITERATION_LIMIT:
                return self._result(st)
            infeas = float(self.x[art].sum())
            if infeas > FEAS_TOL * max(1.0, np.abs(self.b).max(initial=0.0)):
                self.ub[art] = 0.0
                return LPResult(Status.INFEASIBLE, self.x[:n].copy(), float("nan"), None,
                                self.iterations)
        self.ub[art] = 0.0
        for j in art:
            if self.status[j] != BASIC:
                self.x[j], self.status[j] = 0.0, AT_LOWER
        self._recompute_basics()
        st = self._primal(self.cost)
        if st is Status.OPTIMAL:
            self._refactor()
        return self._result(st)

    def resolve(self, basis: Basis) -> LPResult:
        """Warm start from ``basis`` after structural bounds changed."""
        self.iterations = 0
        n = self.n
        if np.any(self.lb[:n] > self.ub[:n]):
            return LPResult(Status.INFEASIBLE, np.zeros(n), float("nan"), None, 0)
        self.basic = np.array(basis.basic, dtype=int)
        self.status = np.frombuffer(basis.status, dtype=np.int8).copy()
        for j in np.flatnonzero(self.status != BASIC):
            st = self.status[j]
            if st == AT_LOWER and np.isfinite(self.lb[j]):
                self.x[j] = self.lb[j]
            elif st == AT_UPPER and np.isfinite(self.ub[j]):
                self.x[j] = self.ub[j]
            else:
                self._place_nonbasic(j)
        try:
            self._refactor()
        except NumericalError:
            return self.solve()
        d = self._reduced_costs(self.cost)
        movable = (self.status != BASIC) & (self.ub > self.lb)
        bad = (movable & (self.status == AT_LOWER) & (d < -1e-7)) | \
              (movable & (self.status == AT_UPPER) & (d > 1e-7)) | \
              (movable & (self.status == AT_ZERO) & (np.abs(d) > 1e-7))
        if bad.any():
            return self.solve()
        try:
            st = self._dual(self.cost)
            if st is Status.ITERATION_LIMIT:
                return self.solve()
            if st is Status.OPTIMAL:
                # confirm with a primal pass (cleans up any drift in the dual phase)
                st = self._primal(self.cost)
                if st is Status.OPTIMAL:
                    self._refactor()
                    xb = self.x[self.basic]
                    if np.any(xb < self.lb[self.basic] - 1e-7) or np.any(xb > self.ub[self.basic] + 1e-7):
                        return self.solve()
        except NumericalError:
            return self.solve()
        return self._result(st)


def solve_lp(c, A, senses, b, lb, ub) -> LPResult:
    return DenseLP(c, A, senses, b, lb, ub).solve()
