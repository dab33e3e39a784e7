"""External backend: SciPy's HiGHS MILP interface behind the same contract."""
from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint as SciConstraint, milp

from gridgame.milp.bnb import Limits, certify
from gridgame.milp.model import MilpSolution, Model, Sense, Status


def solve_highs(model: Model, limits: Limits = Limits()) -> MilpSolution:
    c, A, senses, b, lb, ub, is_bin = model.to_arrays()
    lo = np.full(len(b), -np.inf)
    hi = np.full(len(b), np.inf)
    for i, s in enumerate(senses):
        if s is not Sense.GE:
            hi[i] = b[i]
        if s is not Sense.LE:
            lo[i] = b[i]
    options = {"mip_rel_gap": 0.0}
    if limits.time_limit is not None:
        options["time_limit"] = limits.time_limit
    constraints = [SciConstraint(A, lo, hi)] if len(b) else []
    res = milp(c, constraints=constraints, integrality=is_bin.astype(int),
               bounds=Bounds(lb, ub), options=options)
    status = {0: Status.OPTIMAL, 2: Status.INFEASIBLE, 3: Status.UNBOUNDED}.get(
        res.status, Status.ITERATION_LIMIT)
    if res.x is None:
        return MilpSolution(status, float("nan"), {})
    x = np.asarray(res.x, dtype=float)
    x[is_bin] = np.round(x[is_bin])
    assignment = {v: float(x[v.index]) for v in model.variables}
    certify(model, assignment)
    obj = model.objective.constant + sum(k * x[v.index] for v, k in model.objective.terms.items())
    return MilpSolution(status, obj, assignment)
