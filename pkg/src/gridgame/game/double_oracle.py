"""Double-oracle loop and the adversary-unaware baseline."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from gridgame.errors import InfeasiblePartition, NonConvergence
from gridgame.grid.flow import FlowState
from gridgame.grid.model import CoherencyConfig, PowerNetwork
from gridgame.oracles.actions import AdversaryAction, OperatorAction, OperatorMixedStrategy
from gridgame.oracles.adversary import (
    adversary_best_response,
    adversary_best_response_exact,
    expected_disruption,
    top_k_adversary_actions,
)
from gridgame.oracles.operator import operator_best_response, operator_best_response_mixed
from gridgame.game.restricted import (
    RestrictedGame,
    RestrictedSolution,
    payoff,
    solve_adversary_mix,
    solve_restricted_game,
    solve_restricted_game_lp,
)

DEFAULT_EPSILON = 1e-6
INITIAL_ATTACKS = 4
PRUNE_PROB = 1e-12


@dataclass(frozen=True)
class DOConfig:
    epsilon: float = DEFAULT_EPSILON
    oracle: str = "exact"            # adversary oracle: "exact" or "greedy"
    backend: str = "builtin"         # MILP backend
    max_iterations: int | None = None
    initial_attacks: int = INITIAL_ATTACKS
    cross_check: bool = True         # solve each restricted game by LP as well
    keep_games: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.oracle not in ("exact", "greedy"):
            raise ValueError(f"unknown adversary oracle {self.oracle!r}")


@dataclass(frozen=True)
class IterationRecord:
    restricted_value: float
    minimax_value: float
    operator_oracle_value: float
    adversary_oracle_value: float
    wall_s: float

    def to_dict(self) -> dict:
        return {"restricted_value": self.restricted_value, "minimax_value": self.minimax_value,
                "operator_oracle_value": self.operator_oracle_value,
                "adversary_oracle_value": self.adversary_oracle_value, "wall_s": self.wall_s}


@dataclass
class EquilibriumResult:
    operator_strategy: OperatorMixedStrategy
    adversary_response: AdversaryAction
    value_mw: float
    iterations: int
    per_iteration: list[IterationRecord]
    converged: bool
    approximate: bool
    operator_actions: list[OperatorAction]
    adversary_actions: list[AdversaryAction]
    restricted_feasible: dict[frozenset, bool] = field(default_factory=dict)
    games: list[tuple[RestrictedGame, RestrictedSolution]] = field(default_factory=list)
    wall_s: float = 0.0

    @property
    def broke_grid(self) -> bool:
        """The operator cannot island properly after any attack encountered in the run."""
        return bool(self.restricted_feasible) and not any(self.restricted_feasible.values())

    def to_dict(self) -> dict:
        return {
            "value_mw": self.value_mw,
            "iterations": self.iterations,
            "converged": self.converged,
            "approximate": self.approximate,
            "broke_grid": self.broke_grid,
            "operator_strategy": self.operator_strategy.to_dict(),
            "adversary_response": self.adversary_response.to_dict(),
            "per_iteration": [r.to_dict() for r in self.per_iteration],
            "wall_s": self.wall_s,
        }


def _restricted_br(network, coherency, flows, adversary, backend) -> OperatorAction | None:
    try:
        return operator_best_response(network, coherency, flows, adversary, backend=backend)
    except InfeasiblePartition:
        return None


def compute_baseline(network: PowerNetwork, coherency: CoherencyConfig, flows: FlowState,
                     budget: int, backend: str = "builtin"
                     ) -> tuple[OperatorAction, AdversaryAction, float]:
    """Island as if no adversary existed, then let the adversary best-respond."""
    op = operator_best_response(network, coherency, flows, AdversaryAction.empty(), backend=backend)
    adv = adversary_best_response_exact(network, flows, OperatorMixedStrategy.pure(op), budget,
                                        backend=backend)
    return op, adv, payoff(op, adv, flows)


def double_oracle(network: PowerNetwork, coherency: CoherencyConfig, flows: FlowState,
                  budget: int, config: DOConfig = DOConfig(),
                  baseline: OperatorAction | None = None) -> EquilibriumResult:
    """Stackelberg equilibrium of the islanding game by double oracle.

    Each round solves the restricted game, then asks the operator oracle for
    a best response to the adversary's restricted equilibrium mix and the
    adversary oracle for a best response to the operator's mix.  Actions
    that improve on the restricted value by more than ``epsilon`` are added;
    the loop stops when neither oracle improves.
    """
    start = time.perf_counter()
    eps = config.epsilon
    be = config.backend
    if baseline is None:
        baseline = operator_best_response(network, coherency, flows, AdversaryAction.empty(), backend=be)

    adv_actions = top_k_adversary_actions(network, flows, config.initial_attacks, budget, backend=be)
    op_actions = [baseline]
    op_keys = {baseline.key}
    feasible: dict[frozenset, bool] = {}
    for a in adv_actions:
        br = _restricted_br(network, coherency, flows, a, be)
        feasible[a.compromised] = br is not None
        if br is not None and br.key not in op_keys:
            op_actions.append(br)
            op_keys.add(br.key)
    adv_keys = {a.compromised for a in adv_actions}

    cap = 2 ** network.n_line - 1
    if config.max_iterations is not None:
        cap = min(cap, config.max_iterations)
    trace: list[IterationRecord] = []
    games = []
    converged = False
    sol = None
    it = 0
    while it < cap:
        it += 1
        t0 = time.perf_counter()
        game = RestrictedGame.build(op_actions, adv_actions, flows)
        sol = solve_restricted_game(game, backend=be)
        lp_value = solve_restricted_game_lp(game) if config.cross_check else float("nan")
        if config.keep_games:
            games.append((game, sol))
        sigma, _ = solve_adversary_mix(game)
        mu = OperatorMixedStrategy.from_weights(op_actions, sol.mu, drop=PRUNE_PROB)

        new_op, op_value = operator_best_response_mixed(network, coherency, flows, adv_actions,
                                                        sigma, backend=be)
        new_adv = adversary_best_response(network, flows, mu, budget, mode=config.oracle, backend=be)
        adv_value = expected_disruption(mu, new_adv, flows)
        trace.append(IterationRecord(sol.value, lp_value, op_value, adv_value,
                                     time.perf_counter() - t0))

        added = False
        if sol.value - op_value > eps and new_op.key not in op_keys:
            op_actions.append(new_op)
            op_keys.add(new_op.key)
            added = True
        if adv_value - sol.value > eps and new_adv.compromised not in adv_keys:
            adv_actions.append(new_adv)
            adv_keys.add(new_adv.compromised)
            added = True
        if not added:
            converged = True
            break

    if not converged:
        warnings.warn(f"double oracle stopped at the iteration cap ({cap}) before converging",
                      NonConvergence, stacklevel=2)
        game = RestrictedGame.build(op_actions, adv_actions, flows)
        sol = solve_restricted_game(game, backend=be)

    mu = OperatorMixedStrategy.from_weights(op_actions, sol.mu, drop=PRUNE_PROB)
    tau = adv_actions[sol.tau]
    for a in adv_actions:
        if a.compromised not in feasible:
            feasible[a.compromised] = _restricted_br(network, coherency, flows, a, be) is not None
    return EquilibriumResult(
        operator_strategy=mu,
        adversary_response=tau,
        value_mw=expected_disruption(mu, tau, flows),
        iterations=it,
        per_iteration=trace,
        converged=converged,
        approximate=config.oracle != "exact",
        operator_actions=op_actions,
        adversary_actions=adv_actions,
        restricted_feasible=feasible,
        games=games,
        wall_s=time.perf_counter() - start,
    )
