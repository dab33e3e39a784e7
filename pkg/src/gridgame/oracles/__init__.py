"""Best-response oracles for the grid operator and the adversary."""
from gridgame.oracles.actions import AdversaryAction, OperatorAction, OperatorMixedStrategy
from gridgame.oracles.adversary import (
    adversary_best_response,
    adversary_best_response_exact,
    adversary_best_response_greedy,
    chi,
    coverage_objective,
    expected_disruption,
    top_k_adversary_actions,
)
from gridgame.oracles.operator import (
    is_proper,
    kept_lines_feasible,
    operator_best_response,
    operator_best_response_mixed,
    validate_operator_action,
)
