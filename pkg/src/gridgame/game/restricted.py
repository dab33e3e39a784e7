"""The restricted game over finite action sets, solved as a MILP and as LPs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gridgame.errors import DegenerateGame, SolverError
from gridgame.grid.flow import FlowState
from gridgame.milp import LinExpr, Limits, Model, solve, solve_lp_relaxation
from gridgame.oracles.actions import AdversaryAction, OperatorAction


def payoff(operator: OperatorAction, adversary: AdversaryAction, flows: FlowState) -> float:
    """Disruption when both players act: lines tripped by either side, counted once."""
    za = adversary.z(flows.network)
    return float(np.dot(flows.weights, 1.0 - operator.z * za))


@dataclass
class RestrictedGame:
    operator_actions: list[OperatorAction]
    adversary_actions: list[AdversaryAction]
    payoff_mw: np.ndarray

    @classmethod
    def build(cls, operator_actions: Sequence[OperatorAction],
              adversary_actions: Sequence[AdversaryAction], flows: FlowState) -> "RestrictedGame":
        net = flows.network
        Zo = np.array([a.z for a in operator_actions]).reshape(len(operator_actions), net.n_line)
        Za = np.array([a.z(net) for a in adversary_actions]).reshape(len(adversary_actions), net.n_line)
        R = flows.weights.sum() - (Zo * flows.weights) @ Za.T
        return cls(list(operator_actions), list(adversary_actions), np.maximum(R, 0.0))

    @classmethod
    def from_matrix(cls, payoff_mw) -> "RestrictedGame":
        """A game known only by its payoff matrix (actions left empty)."""
        R = np.atleast_2d(np.asarray(payoff_mw, dtype=float))
        return cls([], [], R)

    @property
    def shape(self) -> tuple[int, int]:
        return self.payoff_mw.shape


@dataclass
class LinearizationVars:
    """``u[o, a]`` standing in for ``mu(o) * tau(a)``."""
    u: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return self.u.sum(axis=1)


@dataclass
class RestrictedSolution:
    mu: np.ndarray
    tau: int
    value: float
    linearization: LinearizationVars
    milp_objective: float = field(default=float("nan"))


def _check(game: RestrictedGame) -> np.ndarray:
    R = np.asarray(game.payoff_mw, dtype=float)
    if R.ndim != 2 or 0 in R.shape:
        raise DegenerateGame(f"restricted game must be non-empty, got shape {R.shape}")
    return R


def solve_restricted_game(game: RestrictedGame, backend: str = "builtin",
                          limits: Limits = Limits()) -> RestrictedSolution:
    """Leader-optimal commitment over the restricted sets via the linearised MILP.

    Besides the big-M link between ``r`` and the follower choice ``tau``, each
    ``u[o, a]`` is bounded by ``tau[a]`` so the product semantics survive the
    linearisation.
    """
    R = _check(game)
    n_o, n_a = R.shape
    Z = max(float(R.max()), 1.0)
    m = Model("restricted_game")
    u = [[m.add_var(f"u_{o}_{a}", 0.0, 1.0) for a in range(n_a)] for o in range(n_o)]
    tau = [m.add_binary(f"tau_{a}") for a in range(n_a)]
    r = m.add_var("r", 0.0)
    m.add(LinExpr.sum(tau).eq(1), "tau_pure")
    m.add(LinExpr.sum(u[o][a] for o in range(n_o) for a in range(n_a)).eq(1), "u_total")
    for o in range(n_o):
        m.add(LinExpr.sum(u[o]) <= 1, f"u_row_{o}")
        for a in range(n_a):
            m.add(u[o][a] - tau[a] <= 0, f"u_le_tau_{o}_{a}")
    for a in range(n_a):
        expected = LinExpr.sum(u[o][b] * float(R[o, a]) for o in range(n_o) for b in range(n_a))
        m.add(r - expected >= 0, f"r_ge_{a}")
        m.add(r - expected + Z * tau[a] <= Z, f"r_tight_{a}")
    m.minimize(LinExpr.sum(u[o][a] * float(R[o, a]) for o in range(n_o) for a in range(n_a)))
    sol = solve(m, limits, backend=backend)
    if not sol.optimal:
        raise SolverError(f"restricted game MILP ended with status {sol.status.value}")
    U = np.array([[sol[u[o][a]] for a in range(n_a)] for o in range(n_o)])
    U = np.clip(U, 0.0, None)
    mu = U.sum(axis=1)
    mu = mu / mu.sum()
    t = int(np.argmax([sol[v] for v in tau]))
    value = float(mu @ R[:, t])
    return RestrictedSolution(mu, t, value, LinearizationVars(U), sol.objective_value)


def solve_restricted_game_lp(game: RestrictedGame) -> float:
    """Minimax value of the payoff matrix by an independent LP (SciPy HiGHS)."""
    from scipy.optimize import linprog

    R = _check(game)
    n_o, n_a = R.shape
    # variables (mu_1..mu_n, v): min v  s.t.  R^T mu <= v,  sum mu = 1
    c = np.zeros(n_o + 1)
    c[-1] = 1.0
    A_ub = np.hstack([R.T, -np.ones((n_a, 1))])
    A_eq = np.hstack([np.ones((1, n_o)), np.zeros((1, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n_a), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n_o + [(None, None)], method="highs")
    if res.status != 0:
        raise SolverError(f"minimax LP failed: {res.message}")
    return float(res.fun)


def solve_adversary_mix(game: RestrictedGame, limits: Limits = Limits()) -> tuple[np.ndarray, float]:
    """The follower's equilibrium mix ``sigma`` over the restricted adversary set.

    ``max v  s.t.  R sigma >= v,  sum sigma = 1``, solved with the built-in
    simplex; by LP duality ``v`` equals the restricted game value.
    """
    R = _check(game)
    n_o, n_a = R.shape
    m = Model("adversary_mix")
    s = [m.add_var(f"sigma_{a}", 0.0, 1.0) for a in range(n_a)]
    v = m.add_var("v", 0.0)
    m.add(LinExpr.sum(s).eq(1), "sigma_total")
    for o in range(n_o):
        m.add(LinExpr.sum(s[a] * float(R[o, a]) for a in range(n_a)) - v >= 0, f"row_{o}")
    m.maximize(v)
    sol = solve_lp_relaxation(m, limits)
    if not sol.optimal:
        raise SolverError(f"adversary mix LP ended with status {sol.status.value}")
    sigma = np.clip(np.array([sol[x] for x in s]), 0.0, None)
    return sigma / sigma.sum(), sol.objective_value
