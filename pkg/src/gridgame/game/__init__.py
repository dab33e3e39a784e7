"""Restricted-game solvers, the double-oracle loop and the baseline."""
from gridgame.game.double_oracle import (
    DOConfig,
    EquilibriumResult,
    IterationRecord,
    compute_baseline,
    double_oracle,
)
from gridgame.game.restricted import (
    LinearizationVars,
    RestrictedGame,
    RestrictedSolution,
    payoff,
    solve_adversary_mix,
    solve_restricted_game,
    solve_restricted_game_lp,
)
