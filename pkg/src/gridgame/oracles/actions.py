"""Pure actions of both players and the operator's mixed strategy."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from gridgame.grid.flow import FlowState, incident_line_indices
from gridgame.grid.model import PowerNetwork

PROB_TOL = 1e-9


@dataclass(frozen=True)
class AdversaryAction:
    """Compromised substations and the lines the adversary trips."""
    compromised: frozenset[int]
    tripped: frozenset[tuple[int, int]]

    @classmethod
    def canonical(cls, network: PowerNetwork, compromised: Iterable[int]) -> "AdversaryAction":
        """Compromise ``compromised`` and trip every incident line."""
        comp = frozenset(int(b) for b in compromised)
        idx = incident_line_indices(network, comp)
        return cls(comp, frozenset(network.lines[k].key for k in idx))

    @classmethod
    def empty(cls) -> "AdversaryAction":
        return cls(frozenset(), frozenset())

    def z(self, network: PowerNetwork) -> np.ndarray:
        """``z^a`` as a 0/1 vector over the network's lines (0 = tripped)."""
        out = np.ones(network.n_line)
        for key in self.tripped:
            out[network.line_index(*key)] = 0.0
        return out

    def violations(self, network: PowerNetwork, budget: int) -> list[str]:
        out = []
        if len(self.compromised) > budget:
            out.append(f"condition (i): {len(self.compromised)} compromised > budget {budget}")
        unknown = [b for b in self.compromised if b not in network.bus_index]
        if unknown:
            out.append(f"unknown substations {sorted(unknown)}")
            return out
        allowed = {network.lines[k].key for k in incident_line_indices(network, self.compromised)}
        for key in sorted(self.tripped):
            try:
                k = network.line_index(*key)
            except KeyError:
                out.append(f"unknown line {key}")
                continue
            if network.lines[k].key not in allowed:
                out.append(f"condition (ii): line {key} not incident to a compromised substation")
        return out

    def to_dict(self) -> dict:
        return {"compromised": sorted(self.compromised),
                "tripped": [list(k) for k in sorted(self.tripped)]}

    @classmethod
    def from_dict(cls, d: dict) -> "AdversaryAction":
        return cls(frozenset(int(b) for b in d["compromised"]),
                   frozenset((int(a), int(b)) for a, b in d["tripped"]))


@dataclass(frozen=True, eq=False)
class OperatorAction:
    """An islanding decision with its post-islanding operating point.

    All vectors follow the network's bus and line order.  ``assignment[b]`` is
    the island of bus ``b`` (``None`` for an isolated, unassigned bus) and
    ``island_lines[l]`` the island owning kept line ``l``.
    """
    network: PowerNetwork
    assignment: tuple[int | None, ...]
    island_lines: tuple[int | None, ...]
    dispatch: tuple[float, ...]
    angles: tuple[float, ...]
    post_flows: tuple[float, ...]

    @cached_property
    def kept(self) -> tuple[int, ...]:
        """``z^o`` (1 = line kept in service)."""
        return tuple(0 if k is None else 1 for k in self.island_lines)

    @cached_property
    def z(self) -> np.ndarray:
        return np.array(self.kept, dtype=float)

    @property
    def key(self) -> tuple[int, ...]:
        return self.kept

    @property
    def tripped(self) -> frozenset[tuple[int, int]]:
        return frozenset(ln.key for ln, k in zip(self.network.lines, self.kept) if not k)

    def __eq__(self, other):
        if not isinstance(other, OperatorAction):
            return NotImplemented
        return self.network == other.network and self.kept == other.kept

    def __hash__(self):
        return hash(self.kept)

    @property
    def assignment_map(self) -> dict[int, int | None]:
        return {s.id: k for s, k in zip(self.network.substations, self.assignment)}

    @property
    def dispatch_mw(self) -> dict[int, float]:
        return {s.id: g for s, g in zip(self.network.substations, self.dispatch)}

    @property
    def angles_rad(self) -> dict[int, float]:
        return {s.id: a for s, a in zip(self.network.substations, self.angles)}

    @property
    def post_flows_mw(self) -> dict[tuple[int, int], float]:
        return {ln.key: p for ln, p in zip(self.network.lines, self.post_flows)}

    @classmethod
    def intact(cls, network: PowerNetwork, flows: FlowState) -> "OperatorAction":
        """Trip nothing, keep the initial operating point, one island."""
        return cls(network, (0,) * network.n_bus, (0,) * network.n_line,
                   tuple(map(float, flows.dispatch)), tuple(map(float, flows.angles)),
                   tuple(map(float, flows.flows)))

    def to_dict(self) -> dict:
        net = self.network
        return {
            "tripped": [list(k) for k in sorted(self.tripped)],
            "assignment": {str(s.id): k for s, k in zip(net.substations, self.assignment)},
            "island_lines": [[ln.from_id, ln.to_id, k] for ln, k in zip(net.lines, self.island_lines)],
            "dispatch_mw": {str(s.id): g for s, g in zip(net.substations, self.dispatch)},
            "angles_rad": {str(s.id): a for s, a in zip(net.substations, self.angles)},
            "post_flows_mw": [[ln.from_id, ln.to_id, p] for ln, p in zip(net.lines, self.post_flows)],
        }

    @classmethod
    def from_dict(cls, network: PowerNetwork, d: dict) -> "OperatorAction":
        ids = [str(s.id) for s in network.substations]
        owner = {(int(a), int(b)): k for a, b, k in d["island_lines"]}
        flows = {(int(a), int(b)): float(p) for a, b, p in d["post_flows_mw"]}
        return cls(network,
                   tuple(d["assignment"][i] for i in ids),
                   tuple(owner[ln.key] for ln in network.lines),
                   tuple(float(d["dispatch_mw"][i]) for i in ids),
                   tuple(float(d["angles_rad"][i]) for i in ids),
                   tuple(flows[ln.key] for ln in network.lines))


@dataclass(frozen=True)
class OperatorMixedStrategy:
    support: tuple[tuple[OperatorAction, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "support", tuple((a, float(p)) for a, p in self.support))
        if not self.support:
            raise ValueError("mixed strategy needs at least one action")
        probs = [p for _, p in self.support]
        if min(probs) < -PROB_TOL:
            raise ValueError("negative probability")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")
        keys = [a.key for a, _ in self.support]
        if len(set(keys)) != len(keys):
            raise ValueError("support actions must have distinct z^o vectors")

    @classmethod
    def pure(cls, action: OperatorAction) -> "OperatorMixedStrategy":
        return cls(((action, 1.0),))

    @classmethod
    def from_weights(cls, actions: Sequence[OperatorAction], weights, drop: float = 0.0
                     ) -> "OperatorMixedStrategy":
        """Normalise ``weights`` (clipping tiny negatives) and drop mass ``<= drop``."""
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        keep = [i for i in range(len(actions)) if w[i] > drop]
        tot = w[keep].sum()
        return cls(tuple((actions[i], w[i] / tot) for i in keep))

    @property
    def actions(self) -> list[OperatorAction]:
        return [a for a, _ in self.support]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.support])

    def z_matrix(self) -> np.ndarray:
        """Rows are the support's ``z^o`` vectors."""
        return np.array([a.z for a in self.actions]).reshape(len(self.support), -1)

    def to_dict(self) -> dict:
        return {"support": [{"probability": p, "action": a.to_dict()} for a, p in self.support]}

    @classmethod
    def from_dict(cls, network: PowerNetwork, d: dict) -> "OperatorMixedStrategy":
        return cls(tuple((OperatorAction.from_dict(network, s["action"]), s["probability"])
                         for s in d["support"]))
