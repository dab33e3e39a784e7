"""Small deterministic MILP engine: model builder, dense simplex, branch and bound."""
from gridgame.milp.bnb import Limits, NodeRecord, certify, solve, solve_lp_relaxation
from gridgame.milp.lpformat import write_lp
from gridgame.milp.model import (
    LinearConstraint,
    LinExpr,
    MilpSolution,
    Model,
    Sense,
    Status,
    VariableRef,
    VarKind,
    build_model,
)

__all__ = [
    "LinExpr", "LinearConstraint", "Limits", "MilpSolution", "Model", "NodeRecord", "Sense",
    "Status", "VarKind", "VariableRef", "build_model", "certify", "solve",
    "solve_lp_relaxation", "write_lp",
]
