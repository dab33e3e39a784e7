"""Static power-network data: substations, generators, lines, coherent groups."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from gridgame.errors import (
    InconsistentTopology,
    InvalidCoherency,
    UnknownLine,
    UnknownSubstation,
)

DEFAULT_ANGLE_BOUND = 0.6  # rad, used when a case supplies no angle limits


@dataclass(frozen=True)
class Substation:
    id: int
    load_mw: float = 0.0
    angle_min_rad: float = -DEFAULT_ANGLE_BOUND
    angle_max_rad: float = DEFAULT_ANGLE_BOUND

    def __post_init__(self):
        if self.load_mw < 0:
            raise ValueError(f"substation {self.id}: negative load {self.load_mw}")
        if self.angle_min_rad > self.angle_max_rad:
            raise ValueError(f"substation {self.id}: angle bounds reversed")


@dataclass(frozen=True)
class Generator:
    substation_id: int
    gen_min_mw: float
    gen_max_mw: float
    initial_dispatch_mw: float

    def __post_init__(self):
        if not 0 <= self.gen_min_mw <= self.gen_max_mw:
            raise ValueError(f"generator at {self.substation_id}: need 0 <= min <= max")
        tol = 1e-9 * max(1.0, self.gen_max_mw)
        if not self.gen_min_mw - tol <= self.initial_dispatch_mw <= self.gen_max_mw + tol:
            raise ValueError(f"generator at {self.substation_id}: dispatch outside [min, max]")


@dataclass(frozen=True)
class TransmissionLine:
    from_id: int
    to_id: int
    susceptance_pu: float
    flow_min_mw: float = -math.inf
    flow_max_mw: float = math.inf

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError(f"line {self.from_id}-{self.to_id} is a self loop")
        if not self.susceptance_pu > 0:
            raise ValueError(f"line {self.from_id}-{self.to_id}: susceptance must be > 0")
        if not self.flow_min_mw <= 0 <= self.flow_max_mw:
            raise ValueError(f"line {self.from_id}-{self.to_id}: need flow_min <= 0 <= flow_max")

    @property
    def key(self) -> tuple[int, int]:
        return (self.from_id, self.to_id)


@dataclass(frozen=True)
class PowerNetwork:
    substations: tuple[Substation, ...]
    generators: tuple[Generator, ...]
    lines: tuple[TransmissionLine, ...]
    base_mva: float = 100.0
    name: str = field(default="network", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "substations", tuple(self.substations))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "lines", tuple(self.lines))
        if not self.base_mva > 0:
            raise ValueError("base_mva must be positive")
        ids = [s.id for s in self.substations]
        if len(set(ids)) != len(ids):
            raise InconsistentTopology("duplicate substation id")
        known = set(ids)
        for g in self.generators:
            if g.substation_id not in known:
                raise InconsistentTopology(f"generator references unknown bus {g.substation_id}")
        gen_buses = [g.substation_id for g in self.generators]
        if len(set(gen_buses)) != len(gen_buses):
            raise InconsistentTopology("more than one generator record per substation")
        pairs = set()
        for ln in self.lines:
            for end in ln.key:
                if end not in known:
                    raise InconsistentTopology(f"line {ln.key} references unknown bus {end}")
            pair = frozenset(ln.key)
            if pair in pairs:
                raise InconsistentTopology(f"parallel line between {ln.from_id} and {ln.to_id}")
            pairs.add(pair)
        if self.substations and not self.is_connected():
            raise InconsistentTopology("network graph is not connected")

    # -- indexing -------------------------------------------------------------
    @property
    def n_bus(self) -> int:
        return len(self.substations)

    @property
    def n_line(self) -> int:
        return len(self.lines)

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {s.id: k for k, s in enumerate(self.substations)}

    @cached_property
    def _line_lookup(self) -> dict[tuple[int, int], int]:
        out = {}
        for k, ln in enumerate(self.lines):
            out[(ln.from_id, ln.to_id)] = k
            out[(ln.to_id, ln.from_id)] = k
        return out

    def line_index(self, i: int, j: int) -> int:
        try:
            return self._line_lookup[(i, j)]
        except KeyError:
            raise UnknownLine((i, j)) from None

    def bus(self, bus_id: int) -> Substation:
        try:
            return self.substations[self.bus_index[bus_id]]
        except KeyError:
            raise UnknownSubstation(bus_id) from None

    def check_bus(self, bus_id: int) -> int:
        if bus_id not in self.bus_index:
            raise UnknownSubstation(bus_id)
        return self.bus_index[bus_id]

    @cached_property
    def generator_at(self) -> dict[int, Generator]:
        return {g.substation_id: g for g in self.generators}

    @cached_property
    def endpoints(self) -> np.ndarray:
        """``(L, 2)`` array of bus positions for each line."""
        idx = self.bus_index
        return np.array([[idx[ln.from_id], idx[ln.to_id]] for ln in self.lines], dtype=int).reshape(-1, 2)

    @cached_property
    def susceptance_mw(self) -> np.ndarray:
        """Line susceptance in MW per radian."""
        return np.array([ln.susceptance_pu * self.base_mva for ln in self.lines])

    @cached_property
    def loads(self) -> np.ndarray:
        return np.array([s.load_mw for s in self.substations])

    @cached_property
    def incident(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.substations]
        for k, (a, b) in enumerate(self.endpoints):
            out[a].append(k)
            out[b].append(k)
        return out

    def is_connected(self, lines: Iterable[int] | None = None) -> bool:
        keep = range(self.n_line) if lines is None else lines
        return len(components(self.n_bus, [tuple(self.endpoints[k]) for k in keep])) <= 1

    def flow_capacity(self, k: int) -> tuple[float, float]:
        """Line flow limits; unlimited lines are capped at total generation capacity."""
        cap = sum(g.gen_max_mw for g in self.generators) or 1.0
        ln = self.lines[k]
        return max(ln.flow_min_mw, -cap), min(ln.flow_max_mw, cap)


def components(n: int, edges: Iterable[tuple[int, int]]) -> list[list[int]]:
    """Connected components of an ``n``-vertex graph, each sorted, ordered by first vertex."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n
    out = []
    for s in range(n):
        if seen[s]:
            continue
        seen[s] = True
        comp, queue = [], deque([s])
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        out.append(sorted(comp))
    return out


@dataclass(frozen=True)
class CoherencyConfig:
    """Generator coherent groups; group ``k`` must end up in island ``k``."""
    groups: tuple[frozenset[int], ...]
    reference_generators: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(frozenset(g) for g in self.groups))
        object.__setattr__(self, "reference_generators", tuple(self.reference_generators))
        if not self.groups:
            raise InvalidCoherency("need at least one coherent group (K >= 1)")
        if len(self.reference_generators) != len(self.groups):
            raise InvalidCoherency("one reference generator per group required")
        seen: set[int] = set()
        for k, (grp, ref) in enumerate(zip(self.groups, self.reference_generators)):
            if seen & grp:
                raise InvalidCoherency(f"group {k} overlaps an earlier group")
            seen |= grp
            if ref not in grp:
                raise InvalidCoherency(f"reference generator {ref} not in its group {sorted(grp)}")

    @property
    def K(self) -> int:
        return len(self.groups)

    @classmethod
    def from_lists(cls, groups, references=None) -> "CoherencyConfig":
        groups = [frozenset(int(i) for i in g) for g in groups]
        if references is None:
            references = [min(g) for g in groups]
        return cls(tuple(groups), tuple(int(r) for r in references))

    def validate_for(self, network: PowerNetwork) -> None:
        for k, grp in enumerate(self.groups):
            for i in sorted(grp):
                if i not in network.bus_index:
                    raise InvalidCoherency(f"group {k}: unknown substation {i}")
                if i not in network.generator_at:
                    raise InvalidCoherency(f"group {k}: substation {i} hosts no generator")

    def group_of(self, bus_id: int) -> int | None:
        for k, grp in enumerate(self.groups):
            if bus_id in grp:
                return k
        return None

    def to_dict(self) -> dict:
        return {"groups": [sorted(g) for g in self.groups],
                "reference_generators": list(self.reference_generators)}

    @classmethod
    def from_dict(cls, d: dict) -> "CoherencyConfig":
        return cls.from_lists(d["groups"], d.get("reference_generators"))
