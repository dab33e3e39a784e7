"""Shared fixtures and test-side oracles.

The brute-force helpers here deliberately avoid the package's own solvers so
that they can serve as independent references.
"""
from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from gridgame.grid import (
    CoherencyConfig,
    Generator,
    PowerNetwork,
    Substation,
    TransmissionLine,
    bundled_case,
    dc_power_flow,
)
from gridgame.oracles import AdversaryAction, OperatorAction, OperatorMixedStrategy

DATA = Path(__file__).resolve().parents[1] / "src" / "gridgame" / "data"
SCENARIOS = DATA / "scenarios"
FIXTURES = ("tri3", "ring4", "five5", "six6")

TABLE1 = {
    "case9": ([[1, 2], [3]], [1, 3]),
    "case14": ([[1, 2, 3], [6, 8]], [1, 6]),
    "case30": ([[1, 2], [13], [22, 23, 27]], [1, 13, 22]),
}


def ieee(name: str):
    net = bundled_case(name)
    groups, refs = TABLE1[name]
    coh = CoherencyConfig.from_lists(groups, refs)
    return net, coh, dc_power_flow(net, coherency=coh)


@pytest.fixture(scope="session")
def case9():
    return ieee("case9")


@pytest.fixture(scope="session")
def case14():
    return ieee("case14")


# -- random instances ----------------------------------------------------------

def random_network(rng: np.random.Generator, n: int, extra: int = 2, n_gen: int = 2,
                   name: str = "random") -> PowerNetwork:
    """Connected random grid: a random spanning tree plus ``extra`` chords."""
    order = rng.permutation(n) + 1
    edges = set()
    for i in range(1, n):
        a, b = int(order[i]), int(order[rng.integers(0, i)])
        edges.add((min(a, b), max(a, b)))
    pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1) if (a, b) not in edges]
    for k in rng.permutation(len(pairs))[:extra]:
        edges.add(pairs[k])
    gens = sorted(int(g) for g in rng.choice(np.arange(1, n + 1), size=min(n_gen, n), replace=False))
    loads = {i: (0.0 if i in gens else float(rng.integers(0, 60))) for i in range(1, n + 1)}
    total = sum(loads.values())
    share = total / len(gens)
    subs = [Substation(i, loads[i]) for i in range(1, n + 1)]
    generators = [Generator(g, 0.0, max(2 * share, 1.0), share) for g in gens]
    lines = [TransmissionLine(a, b, float(rng.uniform(2, 20))) for a, b in sorted(edges)]
    return PowerNetwork(subs, generators, lines, name=name)


def star_network(leaves: int = 4) -> PowerNetwork:
    subs = [Substation(1, 0.0)] + [Substation(i, 10.0) for i in range(2, leaves + 2)]
    gens = [Generator(1, 0.0, 100.0, 10.0 * leaves)]
    lines = [TransmissionLine(1, i, 10.0) for i in range(2, leaves + 2)]
    return PowerNetwork(subs, gens, lines, name="star")


def kept_action(network: PowerNetwork, kept) -> OperatorAction:
    """An operator action carrying only its kept-line vector (for payoff arithmetic)."""
    kept = [int(k) for k in kept]
    return OperatorAction(network, (0,) * network.n_bus, tuple(0 if k else None for k in kept),
                          (0.0,) * network.n_bus, (0.0,) * network.n_bus, (0.0,) * network.n_line)


def random_mixed(network: PowerNetwork, rng: np.random.Generator, size: int) -> OperatorMixedStrategy:
    actions, seen = [], set()
    while len(actions) < size:
        kept = tuple(int(v) for v in rng.random(network.n_line) < 0.7)
        if kept in seen:
            if len(seen) >= 2 ** network.n_line:
                break
            continue
        seen.add(kept)
        actions.append(kept_action(network, kept))
    p = rng.dirichlet(np.ones(len(actions)))
    return OperatorMixedStrategy.from_weights(actions, p)


# -- brute-force oracles ---------------------------------------------------------

def tripped_by(network: PowerNetwork, compromised) -> set[int]:
    """Line indices touching a compromised substation, by a plain endpoint scan."""
    comp = set(compromised)
    return {k for k, ln in enumerate(network.lines) if ln.from_id in comp or ln.to_id in comp}


def expected_value_scan(network, weights, mixed: OperatorMixedStrategy | None, compromised) -> float:
    hit = tripped_by(network, compromised)
    support = [(None, 1.0)] if mixed is None else list(mixed.support)
    total = 0.0
    for action, p in support:
        kept = [1] * network.n_line if action is None else action.kept
        total += p * sum(weights[k] for k in range(network.n_line) if k in hit or not kept[k])
    return total


def brute_adversary(network, weights, mixed, budget) -> tuple[float, frozenset]:
    ids = [s.id for s in network.substations]
    best, arg = -1.0, frozenset()
    for c in range(min(budget, len(ids)) + 1):
        for comb in itertools.combinations(ids, c):
            v = expected_value_scan(network, weights, mixed, comb)
            if v > best + 1e-12:
                best, arg = v, frozenset(comb)
    return best, arg


def minimax(R: np.ndarray) -> float:
    """Value of the matrix game ``min_mu max_a mu^T R[:, a]`` by LP."""
    n_o, n_a = R.shape
    c = np.r_[np.zeros(n_o), 1.0]
    res = linprog(c, A_ub=np.hstack([R.T, -np.ones((n_a, 1))]), b_ub=np.zeros(n_a),
                  A_eq=np.r_[np.ones(n_o), 0.0].reshape(1, -1), b_eq=[1.0],
                  bounds=[(0, None)] * n_o + [(None, None)], method="highs")
    assert res.status == 0
    return float(res.fun)


def enumerate_proper_kept_sets(network, coherency) -> list[tuple[int, ...]]:
    from gridgame.oracles.operator import kept_lines_feasible
    out = []
    for bits in itertools.product((0, 1), repeat=network.n_line):
        if kept_lines_feasible(network, coherency, bits) is not None:
            out.append(bits)
    return out


def stackelberg_by_enumeration(network, coherency, flows, budget) -> float:
    """Full matrix game over every proper operator action and every attack of size <= budget."""
    kept_sets = enumerate_proper_kept_sets(network, coherency)
    ids = [s.id for s in network.substations]
    attacks = [comb for c in range(min(budget, len(ids)) + 1) for comb in itertools.combinations(ids, c)]
    w = flows.weights
    R = np.zeros((len(kept_sets), len(attacks)))
    for i, kept in enumerate(kept_sets):
        for j, comb in enumerate(attacks):
            hit = tripped_by(network, comb)
            R[i, j] = sum(w[k] for k in range(network.n_line) if k in hit or not kept[k])
    return minimax(R)


def canonical(network, compromised) -> AdversaryAction:
    return AdversaryAction.canonical(network, compromised)


# -- random MILPs ----------------------------------------------------------------

def random_milp(seed: int):
    """A random mixed-binary program: <= 12 binaries (<= 8 when continuous columns exist)."""
    from gridgame.milp import LinExpr, Model

    rng = np.random.default_rng(seed)
    nc = int(rng.integers(0, 4))
    nb = int(rng.integers(1, 13 if nc == 0 else 9))
    m = int(rng.integers(1, 11))
    model = Model(f"random_{seed}")
    xs = [model.add_binary(f"b{i}") for i in range(nb)]
    ys = [model.add_var(f"y{i}", float(rng.integers(-3, 1)), float(rng.integers(1, 5))) for i in range(nc)]
    allv = xs + ys
    for k in range(m):
        coef = rng.integers(-5, 6, len(allv)).astype(float)
        sense = rng.choice(["<=", ">=", "="], p=[0.6, 0.3, 0.1])
        expr = LinExpr.sum(c * v for c, v in zip(coef, allv))
        rhs = float(rng.integers(-2, 3)) if sense == "=" else float(rng.integers(-3, 10))
        model.add({"<=": expr <= rhs, ">=": expr >= rhs, "=": expr.eq(rhs)}[sense], f"c{k}")
    obj = rng.integers(-10, 11, len(allv)).astype(float)
    expr = LinExpr.sum(c * v for c, v in zip(obj, allv))
    model.maximize(expr) if rng.random() < 0.5 else model.minimize(expr)
    return model


def brute_milp(model) -> float:
    """Optimum by enumerating every binary vector (LP over the continuous part); inf if infeasible.

    Returned in the model's own sense (a maximisation returns its maximum).
    """
    c, A, senses, b, lb, ub, is_bin = model.to_arrays()
    bi, ci = np.flatnonzero(is_bin), np.flatnonzero(~is_bin)
    sign = np.array([{"<=": 1, ">=": -1, "=": 0}[s.value] for s in senses])
    grid = np.array(list(itertools.product((0.0, 1.0), repeat=len(bi)))).reshape(-1, len(bi))
    best = np.inf
    if len(ci) == 0:
        lhs = grid @ A[:, bi].T if len(b) else np.zeros((len(grid), 0))
        ok = np.all(np.where(sign == 1, lhs <= b + 1e-9,
                             np.where(sign == -1, lhs >= b - 1e-9, np.abs(lhs - b) <= 1e-9)), axis=1)
        if ok.any():
            best = float((grid[ok] @ c[bi]).min())
    else:
        for xb in grid:
            rhs = b - A[:, bi] @ xb
            ub_rows, eq_rows = sign != 0, sign == 0
            A_ub = (A[ub_rows][:, ci] * sign[ub_rows, None])
            b_ub = rhs[ub_rows] * sign[ub_rows]
            res = linprog(c[ci], A_ub=A_ub if ub_rows.any() else None, b_ub=b_ub if ub_rows.any() else None,
                          A_eq=A[eq_rows][:, ci] if eq_rows.any() else None,
                          b_eq=rhs[eq_rows] if eq_rows.any() else None,
                          bounds=list(zip(lb[ci], ub[ci])), method="highs")
            if res.status == 0:
                best = min(best, float(c[bi] @ xb + res.fun))
    if not np.isfinite(best):
        return np.inf
    return -best if model.is_max else best
