"""Case ingestion: MATPOWER text and the native JSON network format."""
from __future__ import annotations

import json
import math
import re
from importlib import resources
from pathlib import Path

import numpy as np

from gridgame.errors import InconsistentTopology, MalformedCase, ZeroReactance
from gridgame.grid.model import Generator, PowerNetwork, Substation, TransmissionLine

# MATPOWER column positions (0-based)
BUS_I, BUS_TYPE, PD = 0, 1, 2
GEN_BUS, PG, GEN_STATUS, PMAX, PMIN = 0, 1, 7, 8, 9
F_BUS, T_BUS, BR_X, RATE_A, BR_STATUS = 0, 1, 3, 5, 10
MIN_COLS = {"bus": 3, "gen": 10, "branch": 11}

_SCALAR = re.compile(r"mpc\.baseMVA\s*=\s*([-+0-9.eE]+)\s*;")
_MATRIX = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;?", re.S)


def _strip_comments(text: str) -> str:
    return "\n".join(line.split("%", 1)[0] for line in text.splitlines())


def _matrix(body: str, name: str) -> np.ndarray:
    rows = []
    for chunk in re.split(r"[;\n]", body):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            rows.append([float(t) for t in re.split(r"[\s,]+", chunk) if t])
        except ValueError as exc:
            raise MalformedCase(f"mpc.{name}: {exc}") from None
    if not rows:
        raise MalformedCase(f"mpc.{name} is empty")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MalformedCase(f"mpc.{name}: rows have different column counts")
    if width < MIN_COLS[name]:
        raise MalformedCase(f"mpc.{name}: expected at least {MIN_COLS[name]} columns, got {width}")
    return np.array(rows)


def parse_matpower_case(text: str, name: str = "case") -> PowerNetwork:
    """Build a :class:`PowerNetwork` from MATPOWER case text.

    Out-of-service generators and branches are dropped, generators sharing a
    bus are merged, parallel branches are merged (susceptances and limits
    summed), ``RATE_A = 0`` means unlimited, and ``PG`` is clipped into
    ``[PMIN, PMAX]``.
    """
    text = _strip_comments(text)
    m = _SCALAR.search(text)
    if not m:
        raise MalformedCase("missing mpc.baseMVA")
    base = float(m.group(1))
    mats = {k: v for k, v in ((mm.group(1), mm.group(2)) for mm in _MATRIX.finditer(text))}
    for key in ("bus", "gen", "branch"):
        if key not in mats:
            raise MalformedCase(f"missing mpc.{key}")
    bus = _matrix(mats["bus"], "bus")
    gen = _matrix(mats["gen"], "gen")
    branch = _matrix(mats["branch"], "branch")

    bus_ids = [int(b) for b in bus[:, BUS_I]]
    known = set(bus_ids)
    if len(known) != len(bus_ids):
        raise InconsistentTopology("duplicate bus id in mpc.bus")
    if any(r[PD] < 0 for r in bus):
        raise MalformedCase("negative load (PD < 0) is not supported")
    subs = [Substation(int(r[BUS_I]), float(r[PD])) for r in bus]

    gens: dict[int, list[float]] = {}
    for r in gen:
        b = int(r[GEN_BUS])
        if b not in known:
            raise InconsistentTopology(f"generator at unknown bus {b}")
        if r[GEN_STATUS] <= 0:
            continue
        lo, hi = max(0.0, float(r[PMIN])), float(r[PMAX])
        if hi < lo:
            raise MalformedCase(f"generator at bus {b}: PMAX < PMIN")
        pg = min(max(float(r[PG]), lo), hi)
        acc = gens.setdefault(b, [0.0, 0.0, 0.0])
        acc[0] += lo
        acc[1] += hi
        acc[2] += pg
    generators = [Generator(b, lo, hi, pg) for b, (lo, hi, pg) in sorted(gens.items())]

    merged: dict[tuple[int, int], list[float]] = {}
    order = []
    for r in branch:
        f, t = int(r[F_BUS]), int(r[T_BUS])
        for end in (f, t):
            if end not in known:
                raise InconsistentTopology(f"branch {f}-{t} references unknown bus {end}")
        if r[BR_STATUS] <= 0:
            continue
        if r[BR_X] == 0:
            raise ZeroReactance(f"branch {f}-{t} has zero reactance")
        if f == t:
            raise InconsistentTopology(f"branch {f}-{t} is a self loop")
        rate = float(r[RATE_A]) if r[RATE_A] > 0 else math.inf
        key = (f, t) if (t, f) not in merged else (t, f)
        if key not in merged:
            merged[key] = [0.0, 0.0]
            order.append(key)
        merged[key][0] += 1.0 / float(r[BR_X])
        merged[key][1] += rate
    lines = []
    for key in order:
        s, rate = merged[key]
        if s <= 0:
            raise MalformedCase(f"branch {key}: non-positive susceptance after merging")
        lines.append(TransmissionLine(key[0], key[1], s, -rate, rate))
    return PowerNetwork(tuple(subs), tuple(generators), tuple(lines), base, name=name)


def load_matpower(path: str | Path) -> PowerNetwork:
    path = Path(path)
    return parse_matpower_case(path.read_text(), name=path.stem)


def bundled_case(name: str) -> PowerNetwork:
    """Load one of the packaged IEEE cases, e.g. ``"case9"``."""
    ref = resources.files("gridgame.data").joinpath("cases", f"{name}.m")
    return parse_matpower_case(ref.read_text(), name=name)


# -- native JSON -------------------------------------------------------------

def _num(x: float):
    return x if math.isfinite(x) else None


def network_to_dict(net: PowerNetwork) -> dict:
    return {
        "name": net.name,
        "base_mva": net.base_mva,
        "substations": [
            {"id": s.id, "load_mw": s.load_mw,
             "angle_min_rad": s.angle_min_rad, "angle_max_rad": s.angle_max_rad}
            for s in net.substations],
        "generators": [
            {"substation_id": g.substation_id, "gen_min_mw": g.gen_min_mw,
             "gen_max_mw": g.gen_max_mw, "initial_dispatch_mw": g.initial_dispatch_mw}
            for g in net.generators],
        # JSON has no infinity: null means unlimited
        "lines": [
            {"from_id": ln.from_id, "to_id": ln.to_id, "susceptance_pu": ln.susceptance_pu,
             "flow_min_mw": _num(ln.flow_min_mw), "flow_max_mw": _num(ln.flow_max_mw)}
            for ln in net.lines],
    }


def network_from_dict(d: dict) -> PowerNetwork:
    try:
        subs = [Substation(int(s["id"]), float(s.get("load_mw", 0.0)),
                           float(s.get("angle_min_rad", -0.6)), float(s.get("angle_max_rad", 0.6)))
                for s in d["substations"]]
        gens = [Generator(int(g["substation_id"]), float(g["gen_min_mw"]), float(g["gen_max_mw"]),
                          float(g["initial_dispatch_mw"])) for g in d.get("generators", [])]
        lines = []
        for ln in d.get("lines", []):
            lo, hi = ln.get("flow_min_mw"), ln.get("flow_max_mw")
            lines.append(TransmissionLine(int(ln["from_id"]), int(ln["to_id"]),
                                          float(ln["susceptance_pu"]),
                                          -math.inf if lo is None else float(lo),
                                          math.inf if hi is None else float(hi)))
        return PowerNetwork(tuple(subs), tuple(gens), tuple(lines),
                            float(d.get("base_mva", 100.0)), name=d.get("name", "network"))
    except (KeyError, TypeError) as exc:
        raise MalformedCase(f"bad network JSON: {exc!r}") from None


def dumps_network(net: PowerNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=2)


def loads_network(text: str) -> PowerNetwork:
    return network_from_dict(json.loads(text))


def load_network(path: str | Path) -> PowerNetwork:
    """Load a ``.m`` MATPOWER case or a native ``.json`` network."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return loads_network(path.read_text())
    return load_matpower(path)


def network_schema() -> dict:
    ref = resources.files("gridgame.data").joinpath("network.schema.json")
    return json.loads(ref.read_text())
