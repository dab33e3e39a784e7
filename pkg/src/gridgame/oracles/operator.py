"""The grid operator's islanding MILP and the properness checker."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from gridgame.errors import InfeasiblePartition, SolverError
from gridgame.grid.flow import FlowState
from gridgame.grid.model import CoherencyConfig, PowerNetwork, components
from gridgame.milp import LinExpr, Limits, Model, Status, solve
from gridgame.oracles.actions import AdversaryAction, OperatorAction

BALANCE_TOL = 1e-6   # MW
BOUND_TOL = 1e-6


def _build(network: PowerNetwork, coherency: CoherencyConfig, weights: np.ndarray,
           keep_value: np.ndarray, allowed: np.ndarray):
    """Operator model minimising ``sum_l w_l (1 - z^o_l keep_value_l)``.

    ``allowed[l] = 0`` forces line ``l`` open (``z^o <= z^a``).
    """
    coherency.validate_for(network)
    K, n, L = coherency.K, network.n_bus, network.n_line
    idx = network.bus_index
    ends = network.endpoints
    S = network.susceptance_mw
    m = Model("operator_br")

    group_of = {}
    for k, grp in enumerate(coherency.groups):
        for b in grp:
            group_of[idx[b]] = k
    ref_pos = [idx[r] for r in coherency.reference_generators]

    x = {}
    for i in range(n):
        for k in range(K):
            lo, hi = 0.0, 1.0
            if i in group_of:  # coherent group members are pinned to their island
                lo = hi = 1.0 if group_of[i] == k else 0.0
            x[i, k] = m.add_var(f"x_{network.substations[i].id}_{k}", lo, hi, binary=True, priority=1)
    for i in range(n):
        m.add(LinExpr.sum(x[i, k] for k in range(K)) <= 1, f"one_island_{i}")

    w, zo = {}, []
    for l in range(L):
        a, b = ends[l]
        ln = network.lines[l]
        for k in range(K):
            v = m.add_var(f"w_{ln.from_id}_{ln.to_id}_{k}", 0.0, float(allowed[l]), binary=True)
            w[l, k] = v
            m.add(v - x[a, k] <= 0, f"w_le_x_{l}_{k}_a")
            m.add(v - x[b, k] <= 0, f"w_le_x_{l}_{k}_b")
        zo.append(LinExpr.sum(w[l, k] for k in range(K)))

    # single-commodity connectivity flow from each island's reference bus
    Zc = float(n)
    f = {}
    for l in range(L):
        for k in range(K):
            for d in (0, 1):
                v = m.add_var(f"f_{l}_{k}_{d}", 0.0)
                f[l, k, d] = v
                m.add(v - Zc * w[l, k] <= 0, f"f_cap_{l}_{k}_{d}")
    for i in range(n):
        for k in range(K):
            expr = -1.0 * x[i, k]
            if i == ref_pos[k]:
                expr = expr + LinExpr.sum(x[j, k] for j in range(n))
            for l in network.incident[i]:
                a, b = ends[l]
                # direction 0 runs a -> b
                inflow = f[l, k, 0] if b == i else f[l, k, 1]
                outflow = f[l, k, 1] if b == i else f[l, k, 0]
                expr = expr + inflow - outflow
            m.add(expr.eq(0), f"conn_{i}_{k}")

    g = {}
    for i, s in enumerate(network.substations):
        gen = network.generator_at.get(s.id)
        if gen is not None:
            g[i] = m.add_var(f"g_{s.id}", gen.gen_min_mw, gen.gen_max_mw)
    theta = [m.add_var(f"th_{s.id}", s.angle_min_rad, s.angle_max_rad) for s in network.substations]
    span = max(s.angle_max_rad for s in network.substations) - min(s.angle_min_rad for s in network.substations)
    P = []
    for l in range(L):
        a, b = ends[l]
        lo, hi = network.flow_capacity(l)
        p = m.add_var(f"P_{l}", lo, hi)
        P.append(p)
        m.add(p - hi * zo[l] <= 0, f"p_hi_{l}")
        m.add(p - lo * zo[l] >= 0, f"p_lo_{l}")
        bigm = S[l] * span
        dc = S[l] * theta[a] - S[l] * theta[b] - p
        m.add(dc + bigm * zo[l] <= bigm, f"dc_hi_{l}")
        m.add(dc - bigm * zo[l] >= -bigm, f"dc_lo_{l}")
    for i, s in enumerate(network.substations):
        expr = LinExpr()
        for l in network.incident[i]:
            a, b = ends[l]
            expr = expr + (P[l] if b == i else -1.0 * P[l])
        if i in g:
            expr = expr + g[i]
        m.add(expr.eq(s.load_mw), f"balance_{s.id}")

    total = float(np.dot(weights, np.ones(L)))
    m.minimize(total - LinExpr.sum(zo[l] * float(weights[l] * keep_value[l]) for l in range(L)
                                   if weights[l] * keep_value[l] != 0.0))
    return m, x, w, g, theta, P


def _extract(network, coherency, sol, x, w, g, theta, P) -> OperatorAction:
    K = coherency.K
    assignment = []
    for i in range(network.n_bus):
        ks = [k for k in range(K) if sol[x[i, k]] > 0.5]
        assignment.append(ks[0] if ks else None)
    island_lines = []
    flows = []
    for l in range(network.n_line):
        ks = [k for k in range(K) if sol[w[l, k]] > 0.5]
        island_lines.append(ks[0] if ks else None)
        flows.append(float(sol[P[l]]) if ks else 0.0)
    dispatch = [float(sol[g[i]]) if i in g else 0.0 for i in range(network.n_bus)]
    angles = [float(sol[t]) for t in theta]
    return OperatorAction(network, tuple(assignment), tuple(island_lines), tuple(dispatch),
                          tuple(angles), tuple(flows))


def _solve(network, coherency, weights, keep_value, allowed, backend, limits) -> tuple[OperatorAction, float]:
    m, x, w, g, theta, P = _build(network, coherency, weights, keep_value, allowed)
    sol = solve(m, limits, backend=backend)
    if sol.status is Status.INFEASIBLE:
        raise InfeasiblePartition("no proper islanding exists for this adversary action")
    if not sol.optimal:
        raise SolverError(f"operator best response ended with status {sol.status.value}")
    return _extract(network, coherency, sol, x, w, g, theta, P), float(sol.objective_value)


def operator_best_response(network: PowerNetwork, coherency: CoherencyConfig, flows: FlowState,
                           adversary: AdversaryAction, backend: str = "builtin",
                           limits: Limits = Limits()) -> OperatorAction:
    """Proper islanding minimising disruption once ``adversary`` has struck.

    Lines the adversary trips cannot be kept (``z^o <= z^a``), so the product
    ``z^o z^a`` collapses to ``z^o``.
    """
    za = adversary.z(network)
    action, _ = _solve(network, coherency, flows.weights, za, za, backend, limits)
    return action


def operator_best_response_mixed(network: PowerNetwork, coherency: CoherencyConfig, flows: FlowState,
                                 adversaries: Sequence[AdversaryAction], probabilities,
                                 backend: str = "builtin", limits: Limits = Limits()
                                 ) -> tuple[OperatorAction, float]:
    """Islanding minimising expected disruption against a mix of adversary actions.

    Returns the action and its expected payoff.  The action is proper on its
    own kept-line set; the adversary's lines enter only through the payoff.
    """
    probs = np.asarray(probabilities, dtype=float)
    keep_value = np.zeros(network.n_line)
    for adv, p in zip(adversaries, probs):
        if p > 0:
            keep_value += p * adv.z(network)
    return _solve(network, coherency, flows.weights, keep_value, np.ones(network.n_line),
                  backend, limits)


def validate_operator_action(network: PowerNetwork, coherency: CoherencyConfig,
                             action: OperatorAction, adversary: AdversaryAction | None = None
                             ) -> list[str]:
    """Names of the properness conditions ``action`` violates (empty if proper)."""
    out: list[str] = []
    K = coherency.K
    n, L = network.n_bus, network.n_line
    ends = network.endpoints
    if len(action.assignment) != n or len(action.island_lines) != L:
        return ["shape: action does not match the network"]

    # (i) disjoint islands: a kept line belongs to one island holding both ends
    for l, k in enumerate(action.island_lines):
        if k is None:
            continue
        a, b = ends[l]
        if not (0 <= k < K) or action.assignment[a] != k or action.assignment[b] != k:
            out.append(f"condition (i): line {network.lines[l].key} not inside a single island")
    if any(k is not None and not 0 <= k < K for k in action.assignment):
        out.append("condition (i): island index out of range")

    # (ii) coherent groups
    for k, grp in enumerate(coherency.groups):
        for bus in sorted(grp):
            if action.assignment[network.bus_index[bus]] != k:
                out.append(f"condition (ii): generator {bus} of group {k} not in island {k}")

    # (iii) connectivity of each island over its own kept lines
    for k in range(K):
        members = [i for i in range(n) if action.assignment[i] == k]
        if not members:
            continue
        pos = {i: t for t, i in enumerate(members)}
        edges = [(pos[ends[l][0]], pos[ends[l][1]]) for l in range(L)
                 if action.island_lines[l] == k and ends[l][0] in pos and ends[l][1] in pos]
        if len(components(len(members), edges)) > 1:
            out.append(f"condition (iii): island {k} is not connected")

    # (iv) generation and angle bounds
    for i, s in enumerate(network.substations):
        gen = network.generator_at.get(s.id)
        gi = action.dispatch[i]
        lo, hi = (gen.gen_min_mw, gen.gen_max_mw) if gen else (0.0, 0.0)
        tol = BOUND_TOL * max(1.0, hi)
        if not lo - tol <= gi <= hi + tol:
            out.append(f"condition (iv): dispatch {gi:.6g} MW at {s.id} outside [{lo}, {hi}]")
        th = action.angles[i]
        if not s.angle_min_rad - BOUND_TOL <= th <= s.angle_max_rad + BOUND_TOL:
            out.append(f"condition (iv): angle {th:.6g} rad at {s.id} out of bounds")

    # (v) flow limits and DC physics on kept lines, zero on open lines
    S = network.susceptance_mw
    for l, ln in enumerate(network.lines):
        p = action.post_flows[l]
        a, b = ends[l]
        if action.kept[l]:
            lo, hi = ln.flow_min_mw, ln.flow_max_mw
            tol = BOUND_TOL * max(1.0, abs(p))
            if not lo - tol <= p <= hi + tol:
                out.append(f"condition (v): flow {p:.6g} MW on {ln.key} exceeds capacity")
            dc = S[l] * (action.angles[a] - action.angles[b])
            if abs(dc - p) > BALANCE_TOL * max(1.0, abs(p)):
                out.append(f"condition (v): flow on {ln.key} violates DC power flow")
        elif abs(p) > BALANCE_TOL:
            out.append(f"condition (v): open line {ln.key} carries {p:.6g} MW")

    # (vi) nodal balance
    res = np.array(action.dispatch) - network.loads
    P = np.array(action.post_flows)
    if L:
        np.add.at(res, ends[:, 0], -P)
        np.add.at(res, ends[:, 1], P)
    for i in np.flatnonzero(np.abs(res) > BALANCE_TOL):
        out.append(f"condition (vi): imbalance {res[i]:.6g} MW at {network.substations[i].id}")

    if adversary is not None:
        za = adversary.z(network)
        for l in range(L):
            if action.kept[l] and za[l] == 0:
                out.append(f"z^o <= z^a: line {network.lines[l].key} kept after the adversary tripped it")
    return out


def is_proper(network, coherency, action, adversary=None) -> bool:
    return not validate_operator_action(network, coherency, action, adversary)


def kept_lines_feasible(network: PowerNetwork, coherency: CoherencyConfig, kept: Sequence[int]
                        ) -> OperatorAction | None:
    """Brute-force properness of a kept-line set: topology by graph search, physics by LP.

    Used as an independent check of the MILP; returns a proper action or ``None``.
    """
    from scipy.optimize import linprog

    n, L = network.n_bus, network.n_line
    ends = network.endpoints
    kept = [int(bool(k)) for k in kept]
    comps = components(n, [tuple(ends[l]) for l in range(L) if kept[l]])
    comp_of = {i: c for c, comp in enumerate(comps) for i in comp}
    assignment: list[int | None] = [None] * n
    used = set()
    for k, grp in enumerate(coherency.groups):
        cs = {comp_of[network.bus_index[b]] for b in grp}
        if len(cs) != 1:
            return None
        c = cs.pop()
        if c in used:
            return None
        used.add(c)
        for i in comps[c]:
            assignment[i] = k
    for c, comp in enumerate(comps):
        if c not in used and len(comp) > 1:
            return None  # a kept line outside every island
    # LP over (g at generator buses, theta, P)
    gens = [i for i, s in enumerate(network.substations) if s.id in network.generator_at]
    ng = len(gens)
    nv = ng + n + L
    A_eq, b_eq = [], []
    S = network.susceptance_mw
    for l in range(L):
        row = np.zeros(nv)
        row[ng + n + l] = 1.0
        if kept[l]:
            a, b = ends[l]
            row[ng + a] -= S[l]
            row[ng + b] += S[l]
        A_eq.append(row)
        b_eq.append(0.0)
    for i in range(n):
        row = np.zeros(nv)
        if i in gens:
            row[gens.index(i)] = 1.0
        for l in network.incident[i]:
            row[ng + n + l] += 1.0 if ends[l][1] == i else -1.0
        A_eq.append(row)
        b_eq.append(network.substations[i].load_mw)
    bounds = []
    for i in gens:
        gen = network.generator_at[network.substations[i].id]
        bounds.append((gen.gen_min_mw, gen.gen_max_mw))
    bounds += [(s.angle_min_rad, s.angle_max_rad) for s in network.substations]
    for l, ln in enumerate(network.lines):
        if kept[l]:
            bounds.append((None if math.isinf(ln.flow_min_mw) else ln.flow_min_mw,
                           None if math.isinf(ln.flow_max_mw) else ln.flow_max_mw))
        else:
            bounds.append((0.0, 0.0))
    res = linprog(np.zeros(nv), A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds,
                  method="highs")
    if res.status != 0:
        return None
    xv = res.x
    dispatch = [0.0] * n
    for t, i in enumerate(gens):
        dispatch[i] = float(xv[t])
    island_lines = tuple(assignment[ends[l][0]] if kept[l] else None for l in range(L))
    return OperatorAction(network, tuple(assignment), island_lines, tuple(dispatch),
                          tuple(float(v) for v in xv[ng:ng + n]),
                          tuple(float(v) if kept[l] else 0.0 for l, v in enumerate(xv[ng + n:])))
