"""Best-bound branch and bound over binary variables."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from gridgame.errors import NumericalError
from gridgame.milp.model import MilpSolution, Model, Sense, Status
from gridgame.milp.simplex import Basis, DenseLP

INT_TOL = 1e-6
CERT_TOL = 1e-7
PRUNE_TOL = 1e-9


@dataclass(frozen=True)
class Limits:
    max_nodes: int = 200_000
    time_limit: float | None = None
    max_lp_iterations: int | None = None


@dataclass(order=True)
class _Node:
    bound: float
    seq: int          # negated creation order: among equal bounds the newest node dives first
    fixed: dict = field(compare=False)
    basis: Basis | None = field(compare=False)


@dataclass
class NodeRecord:
    """Trace entry for one evaluated node (used to check bounding in tests)."""
    bound: float
    incumbent: float
    depth: int
    fixed: tuple[tuple[int, float], ...] = ()   # (variable index, value) branching fixings


def certify(model: Model, assignment, tol: float = CERT_TOL) -> float:
    """Largest bound or constraint violation of ``assignment``; raises above ``tol``."""
    worst = 0.0
    for v in model.variables:
        val = assignment[v]
        worst = max(worst, v.lower - val, val - v.upper)
    for con in model.constraints:
        worst = max(worst, con.residual(assignment))
    if worst > tol:
        raise NumericalError(f"solution violates model by {worst:.3g} (> {tol:g})")
    return worst


def _objective_value(model: Model, x: np.ndarray) -> float:
    return model.objective.constant + sum(c * x[v.index] for v, c in model.objective.terms.items())


class BranchAndBound:
    def __init__(self, model: Model, limits: Limits = Limits(),
                 on_node: Callable[[NodeRecord], None] | None = None):
        self.model = model
        self.limits = limits
        self.on_node = on_node
        c, A, senses, b, lb, ub, is_bin = model.to_arrays()
        self.c = c
        self.lb0, self.ub0 = lb, ub
        self.bin_idx = np.flatnonzero(is_bin)
        self.priority = np.array([model.variables[j].priority for j in self.bin_idx], dtype=int)
        self.lp = DenseLP(c, A, senses, b, lb, ub, max_iter=limits.max_lp_iterations)
        self.nodes = 0
        self.lp_iterations = 0

    def _bounds(self, fixed: dict):
        lb, ub = self.lb0.copy(), self.ub0.copy()
        for j, v in fixed.items():
            lb[j] = ub[j] = v
        return lb, ub

    def _solve_node(self, fixed: dict, basis: Basis | None):
        lb, ub = self._bounds(fixed)
        self.lp.set_structural_bounds(lb, ub)
        res = self.lp.resolve(basis) if basis is not None else self.lp.solve()
        self.lp_iterations += res.iterations
        return res

    def _fractional(self, x: np.ndarray) -> int | None:
        if self.bin_idx.size == 0:
            return None
        vals = x[self.bin_idx]
        frac = np.abs(vals - np.round(vals))
        if frac.max() <= INT_TOL:
            return None
        # highest priority class, then most fractional, then lowest index
        dist = np.abs(vals - 0.5)
        cand = np.flatnonzero(frac > INT_TOL)
        top = self.priority[cand]
        cand = cand[top == top.max()]
        best = cand[np.argmin(dist[cand])]
        return int(self.bin_idx[best])

    def _finish(self, status: Status, x: np.ndarray | None) -> MilpSolution:
        model = self.model
        if x is None:
            return MilpSolution(status, float("nan"), {}, self.nodes, self.lp_iterations)
        x = x.copy()
        x[self.bin_idx] = np.round(x[self.bin_idx])
        assignment = {v: float(x[v.index]) for v in model.variables}
        certify(model, assignment)
        obj = _objective_value(model, x)
        return MilpSolution(status, obj, assignment, self.nodes, self.lp_iterations)

    def run(self) -> MilpSolution:
        start = time.perf_counter()
        counter = itertools.count()
        root = self._solve_node({}, None)
        self.nodes = 1
        if root.status is Status.INFEASIBLE:
            return self._finish(Status.INFEASIBLE, None)
        if root.status is Status.UNBOUNDED:
            return self._finish(Status.UNBOUNDED, None)
        if root.status is Status.ITERATION_LIMIT:
            return self._finish(Status.ITERATION_LIMIT, None)
        incumbent = np.inf
        best_x = None
        heap = [_Node(root.objective, -next(counter), {}, None)]
        pending = {heap[0].seq: root}
        while heap:
            node = heapq.heappop(heap)
            if node.bound >= incumbent - PRUNE_TOL * max(1.0, abs(incumbent)):
                pending.pop(node.seq, None)
                continue
            res = pending.pop(node.seq, None)
            if res is None:
                if self.nodes >= self.limits.max_nodes or (
                        self.limits.time_limit is not None
                        and time.perf_counter() - start > self.limits.time_limit):
                    return self._finish(Status.ITERATION_LIMIT, best_x)
                res = self._solve_node(node.fixed, node.basis)
                self.nodes += 1
            if res.status is Status.ITERATION_LIMIT:
                return self._finish(Status.ITERATION_LIMIT, best_x)
            if res.status is not Status.OPTIMAL:
                continue
            if self.on_node is not None:
                self.on_node(NodeRecord(res.objective, incumbent, len(node.fixed),
                                        tuple(sorted(node.fixed.items()))))
            if res.objective >= incumbent - PRUNE_TOL * max(1.0, abs(incumbent)):
                continue
            j = self._fractional(res.x)
            if j is None:
                x = res.x
                if self.bin_idx.size:
                    fixed = dict(node.fixed)
                    for k in self.bin_idx:
                        fixed[int(k)] = float(np.round(res.x[k]))
                    polished = self._solve_node(fixed, res.basis)
                    if polished.status is not Status.OPTIMAL:
                        continue
                    x = polished.x
                    obj = polished.objective
                else:
                    obj = res.objective
                if obj < incumbent:
                    incumbent, best_x = obj, x.copy()
                continue
            for val in (0.0, 1.0):
                child = dict(node.fixed)
                child[j] = val
                seq = -next(counter)
                heapq.heappush(heap, _Node(res.objective, seq, child, res.basis))
        if best_x is None:
            return self._finish(Status.INFEASIBLE, None)
        return self._finish(Status.OPTIMAL, best_x)


def solve(model: Model, limits: Limits = Limits(), backend: str = "builtin",
          on_node: Callable[[NodeRecord], None] | None = None) -> MilpSolution:
    """Solve ``model`` to global optimality.

    ``backend="highs"`` delegates to SciPy's HiGHS interface; its answer goes
    through the same feasibility certification as the built-in engine.
    """
    if backend == "highs":
        from gridgame.milp.highs import solve_highs
        return solve_highs(model, limits)
    if backend != "builtin":
        raise ValueError(f"unknown backend {backend!r}")
    if not model.variables:
        status = Status.INFEASIBLE if any(
            (c.sense is Sense.LE and c.rhs < -CERT_TOL) or (c.sense is Sense.GE and c.rhs > CERT_TOL)
            or (c.sense is Sense.EQ and abs(c.rhs) > CERT_TOL) for c in model.constraints
        ) else Status.OPTIMAL
        value = model.objective.constant if status is Status.OPTIMAL else float("nan")
        return MilpSolution(status, value, {})
    return BranchAndBound(model, limits, on_node).run()


def solve_lp_relaxation(model: Model, limits: Limits = Limits()) -> MilpSolution:
    """Solve with binary variables relaxed to ``[0, 1]``."""
    if not model.variables:
        return solve(model, limits)
    c, A, senses, b, lb, ub, _ = model.to_arrays()
    res = DenseLP(c, A, senses, b, lb, ub, max_iter=limits.max_lp_iterations).solve()
    if res.status is not Status.OPTIMAL:
        return MilpSolution(res.status, float("nan"), {}, 1, res.iterations)
    assignment = {v: float(res.x[v.index]) for v in model.variables}
    certify(model, assignment)
    return MilpSolution(Status.OPTIMAL, _objective_value(model, res.x), assignment, 1, res.iterations)
