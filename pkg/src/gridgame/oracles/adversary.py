"""Adversary best responses: exact MILP, lazy greedy, and the initial top-k set."""
from __future__ import annotations

import heapq
from typing import Iterable

import numpy as np

from gridgame.errors import SolverError
from gridgame.grid.flow import FlowState
from gridgame.grid.model import PowerNetwork
from gridgame.milp import LinExpr, Limits, Model, Status, solve
from gridgame.oracles.actions import AdversaryAction, OperatorAction, OperatorMixedStrategy


def _kept_probability(mixed: OperatorMixedStrategy | None, n_line: int) -> np.ndarray:
    """``kappa_l = sum_o mu_o z^o_{o,l}``: probability line ``l`` is still in service."""
    if mixed is None:
        return np.ones(n_line)
    return mixed.probabilities @ mixed.z_matrix()


def expected_disruption(mixed: OperatorMixedStrategy, adversary: AdversaryAction,
                        flows: FlowState) -> float:
    """``sum_o mu_o * disruption(tripped by adversary  U  tripped by o)``."""
    za = adversary.z(flows.network)
    w = flows.weights
    return float(sum(p * np.dot(w, 1.0 - a.z * za) for a, p in mixed.support))


def payoff_vector(operator_z: np.ndarray, adversary: AdversaryAction, flows: FlowState) -> float:
    return float(np.dot(flows.weights, 1.0 - operator_z * adversary.z(flows.network)))


def chi(network: PowerNetwork, compromised: Iterable[int]) -> np.ndarray:
    """Per-line coverage indicator: 1 when either endpoint is compromised."""
    out = np.zeros(network.n_line)
    for b in compromised:
        out[network.incident[network.check_bus(b)]] = 1.0
    return out


def coverage_objective(network: PowerNetwork, flows: FlowState, mixed: OperatorMixedStrategy | None,
                       compromised: Iterable[int]) -> float:
    """Expected disruption of compromising ``compromised`` and tripping every incident line.

    Written through ``chi``: a line counts when the adversary covers it or the
    operator's sampled action opens it.
    """
    c = chi(network, compromised)
    kappa = _kept_probability(mixed, network.n_line)
    return float(np.dot(flows.weights, 1.0 - (1.0 - c) * kappa))


def _clamp_budget(network: PowerNetwork, budget: int) -> int:
    if budget < 0:
        raise ValueError("budget must be >= 0")
    return min(int(budget), network.n_bus)


def _adversary_model(network: PowerNetwork, flows: FlowState, kappa: np.ndarray, budget: int):
    m = Model("adversary_br")
    y = [m.add_binary(f"y_{s.id}") for s in network.substations]
    za = [m.add_binary(f"za_{ln.from_id}_{ln.to_id}") for ln in network.lines]
    m.add(LinExpr.sum(y) <= budget, "budget")
    for l, (a, b) in enumerate(network.endpoints):
        m.add(za[l] + y[a] + y[b] >= 1, f"cover_{l}")
    w = flows.weights
    m.maximize(float(w.sum()) - LinExpr.sum(za[l] * float(w[l] * kappa[l])
                                            for l in range(network.n_line) if w[l] * kappa[l] != 0.0))
    return m, y


def _compromised(network, sol, y) -> frozenset[int]:
    return frozenset(s.id for s, v in zip(network.substations, y) if sol[v] > 0.5)


def adversary_best_response_exact(network: PowerNetwork, flows: FlowState,
                                  mixed: OperatorMixedStrategy | None, budget: int,
                                  backend: str = "builtin", limits: Limits = Limits()
                                  ) -> AdversaryAction:
    """Exact best response to ``mixed`` (``None`` means the operator trips nothing).

    The action is returned in canonical form: every line incident to a
    compromised substation is tripped.
    """
    budget = _clamp_budget(network, budget)
    m, y = _adversary_model(network, flows, _kept_probability(mixed, network.n_line), budget)
    sol = solve(m, limits, backend=backend)
    if not sol.optimal:
        raise SolverError(f"adversary best response ended with status {sol.status.value}")
    return AdversaryAction.canonical(network, _compromised(network, sol, y))


def adversary_best_response_greedy(network: PowerNetwork, flows: FlowState,
                                   mixed: OperatorMixedStrategy | None, budget: int
                                   ) -> AdversaryAction:
    """Lazy greedy maximisation of :func:`coverage_objective` over ``|B| <= budget``.

    Runs ``budget`` rounds; equal marginal gains go to the lowest substation id.
    """
    budget = _clamp_budget(network, budget)
    gain_w = flows.weights * _kept_probability(mixed, network.n_line)
    covered = np.zeros(network.n_line, dtype=bool)

    def gain(pos: int) -> float:
        lines = [l for l in network.incident[pos] if not covered[l]]
        return float(sum(gain_w[l] for l in lines))

    order = sorted(range(network.n_bus), key=lambda p: network.substations[p].id)
    heap = [(-gain(p), network.substations[p].id, p) for p in order]
    heapq.heapify(heap)
    chosen: list[int] = []
    while len(chosen) < budget and heap:
        _, sid, p = heapq.heappop(heap)
        fresh = (-gain(p), sid, p)
        if heap and fresh > heap[0]:
            heapq.heappush(heap, fresh)  # stale bound: re-queue with the true gain
            continue
        chosen.append(sid)
        covered[network.incident[p]] = True
    return AdversaryAction.canonical(network, chosen)


def adversary_best_response(network, flows, mixed, budget, mode: str = "exact",
                            backend: str = "builtin") -> AdversaryAction:
    if mode == "exact":
        return adversary_best_response_exact(network, flows, mixed, budget, backend)
    if mode == "greedy":
        return adversary_best_response_greedy(network, flows, mixed, budget)
    raise ValueError(f"unknown adversary oracle {mode!r}")


def top_k_adversary_actions(network: PowerNetwork, flows: FlowState, k: int, budget: int,
                            backend: str = "builtin", limits: Limits = Limits()
                            ) -> list[AdversaryAction]:
    """The ``k`` most disruptive attacks on the intact grid, by repeated MILP with no-good cuts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    budget = _clamp_budget(network, budget)
    m, y = _adversary_model(network, flows, np.ones(network.n_line), budget)
    out: list[AdversaryAction] = []
    while len(out) < k:
        sol = solve(m, limits, backend=backend)
        if sol.status is Status.INFEASIBLE:
            break
        if not sol.optimal:
            raise SolverError(f"top-k adversary solve ended with status {sol.status.value}")
        comp = _compromised(network, sol, y)
        out.append(AdversaryAction.canonical(network, comp))
        inside = [y[network.bus_index[b]] for b in sorted(comp)]
        outside = [v for s, v in zip(network.substations, y) if s.id not in comp]
        m.add(LinExpr.sum(inside) - LinExpr.sum(outside) <= len(inside) - 1, f"nogood_{len(out)}")
    return out


def intact_strategy(network: PowerNetwork, flows: FlowState) -> OperatorMixedStrategy:
    return OperatorMixedStrategy.pure(OperatorAction.intact(network, flows))
