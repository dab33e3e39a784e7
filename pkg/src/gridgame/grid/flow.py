"""DC power flow at the initial operating point and the disruption metric."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from gridgame.errors import ImbalancedCase, SingularSystem, UnknownLine, UnknownSubstation
from gridgame.grid.model import CoherencyConfig, PowerNetwork, TransmissionLine, components

BALANCE_TOL = 1e-6  # MW


@dataclass(frozen=True, eq=False)
class FlowState:
    """A DC operating point.

    Flows are stored once per line in from->to orientation; :meth:`flow`
    negates on reverse queries so antisymmetry holds exactly.
    """
    network: PowerNetwork
    flows: np.ndarray      # MW, per line index
    angles: np.ndarray     # rad, per bus position
    dispatch: np.ndarray   # MW, per bus position (0 where no generator)

    def flow(self, i: int, j: int) -> float:
        k = self.network.line_index(i, j)
        p = float(self.flows[k])
        return p if self.network.lines[k].from_id == i else -p

    @property
    def line_flow_mw(self) -> dict[tuple[int, int], float]:
        return {ln.key: float(p) for ln, p in zip(self.network.lines, self.flows)}

    @property
    def angle_rad(self) -> dict[int, float]:
        return {s.id: float(a) for s, a in zip(self.network.substations, self.angles)}

    @property
    def dispatch_mw(self) -> dict[int, float]:
        return {s.id: float(g) for s, g in zip(self.network.substations, self.dispatch)}

    @cached_property
    def weights(self) -> np.ndarray:
        """Per-line disruption weight ``|P_ij|`` in MW."""
        return np.abs(self.flows)

    def balance_residual(self) -> np.ndarray:
        """Per-bus ``sum_in P + g - d`` in MW."""
        net = self.network
        res = self.dispatch - net.loads
        ends = net.endpoints
        np.add.at(res, ends[:, 0], -self.flows)
        np.add.at(res, ends[:, 1], self.flows)
        return res


def laplacian(network: PowerNetwork, lines: Iterable[int] | None = None) -> np.ndarray:
    """Susceptance-weighted Laplacian in MW/rad."""
    n = network.n_bus
    B = np.zeros((n, n))
    S = network.susceptance_mw
    keep = range(network.n_line) if lines is None else lines
    for k in keep:
        a, b = network.endpoints[k]
        B[a, a] += S[k]
        B[b, b] += S[k]
        B[a, b] -= S[k]
        B[b, a] -= S[k]
    return B


def default_slack(network: PowerNetwork, coherency: CoherencyConfig | None = None) -> int:
    if coherency is not None:
        return coherency.reference_generators[0]
    if not network.generators:
        raise UnknownSubstation("network has no generator to act as slack")
    return min(network.generator_at)


def dc_power_flow(network: PowerNetwork, slack: int | None = None,
                  coherency: CoherencyConfig | None = None) -> FlowState:
    """Solve ``B theta = g - d`` with ``theta_slack = 0``.

    The slack generator absorbs any dispatch/load mismatch in the case data
    (as MATPOWER's DC power flow does); :class:`ImbalancedCase` is raised only
    when that would push the slack outside its generation bounds.
    """
    if slack is None:
        slack = default_slack(network, coherency)
    s = network.check_bus(slack)
    if slack not in network.generator_at:
        raise UnknownSubstation(f"slack bus {slack} hosts no generator")
    if len(components(network.n_bus, map(tuple, network.endpoints))) > 1:
        raise SingularSystem("network is disconnected")

    g = np.zeros(network.n_bus)
    for gen in network.generators:
        g[network.bus_index[gen.substation_id]] = gen.initial_dispatch_mw
    mismatch = network.loads.sum() - g.sum()
    if abs(mismatch) > BALANCE_TOL:
        gen = network.generator_at[slack]
        new = g[s] + mismatch
        tol = 1e-9 * max(1.0, gen.gen_max_mw)
        if not gen.gen_min_mw - tol <= new <= gen.gen_max_mw + tol:
            raise ImbalancedCase(
                f"slack {slack} would need {new:.3f} MW, outside "
                f"[{gen.gen_min_mw}, {gen.gen_max_mw}]")
        g[s] = new

    B = laplacian(network)
    keep = [k for k in range(network.n_bus) if k != s]
    theta = np.zeros(network.n_bus)
    if keep:
        sub = B[np.ix_(keep, keep)]
        try:
            theta[keep] = np.linalg.solve(sub, (g - network.loads)[keep])
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from None
    ends = network.endpoints
    flows = network.susceptance_mw * (theta[ends[:, 0]] - theta[ends[:, 1]]) if network.n_line else np.zeros(0)
    return FlowState(network, flows, theta, g)


def line_weight(flows: FlowState, line: TransmissionLine | tuple[int, int]) -> float:
    """Disruption weight ``(|P_ij| + |P_ji|) / 2``, i.e. ``|P_ij|``."""
    i, j = line.key if isinstance(line, TransmissionLine) else line
    k = flows.network.line_index(i, j)
    if isinstance(line, TransmissionLine) and flows.network.lines[k] != line:
        raise UnknownLine(line.key)
    return float(flows.weights[k])


def _line_indices(network: PowerNetwork, lines) -> set[int]:
    out = set()
    for ln in lines:
        if isinstance(ln, TransmissionLine):
            out.add(network.line_index(*ln.key))
        elif isinstance(ln, (int, np.integer)):
            if not 0 <= ln < network.n_line:
                raise UnknownLine(ln)
            out.add(int(ln))
        else:
            out.add(network.line_index(*ln))
    return out


def disruption(flows: FlowState, tripped) -> float:
    """Total weight of the tripped lines (given as keys, lines or indices)."""
    idx = _line_indices(flows.network, tripped)
    return float(sum(flows.weights[k] for k in sorted(idx)))


def incident_lines(network: PowerNetwork, compromised: Iterable[int]) -> frozenset[tuple[int, int]]:
    """Keys of every line with at least one endpoint in ``compromised``."""
    pos = {network.check_bus(b) for b in compromised}
    return frozenset(network.lines[k].key for p in pos for k in network.incident[p])


def incident_line_indices(network: PowerNetwork, compromised: Iterable[int]) -> frozenset[int]:
    pos = {network.check_bus(b) for b in compromised}
    return frozenset(k for p in pos for k in network.incident[p])
