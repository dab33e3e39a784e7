"""Line-oriented dump in CPLEX LP text format, for cross-checking with external solvers.

Layout::

    \\ model name
    Minimize                      (or Maximize)
     obj: 2 x + 3 y + 0 ...
    Subject To
     c0: x + y <= 4
    Bounds
     0 <= x <= 10
     y free
    Binaries
     z
    End

Variable names are sanitised to ``[A-Za-z0-9_.]``; the objective constant is
written as a comment because the format has no portable slot for it.
"""
from __future__ import annotations

import math
import re

from gridgame.milp.model import Model, Sense, VarKind

_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _name(s: str) -> str:
    s = _BAD.sub("_", s)
    return s if s and not s[0].isdigit() and s[0] != "." else f"v_{s}"


def _num(x: float) -> str:
    return repr(float(x))


def _terms(pairs) -> str:
    out = []
    for v, c in pairs:
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {_num(abs(c))} {_name(v.name)}")
    if not out:
        return "0"
    text = " ".join(out)
    return text[2:] if text.startswith("+ ") else text


def write_lp(model: Model) -> str:
    lines = [f"\\ {model.name}"]
    if model.objective.constant:
        lines.append(f"\\ objective constant {_num(model.objective.constant)}")
    lines.append("Maximize" if model.is_max else "Minimize")
    lines.append(f" obj: {_terms(model.objective.terms.items())}")
    lines.append("Subject To")
    op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}
    for con in model.constraints:
        lines.append(f" {_name(con.name)}: {_terms(con.terms)} {op[con.sense]} {_num(con.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind is VarKind.BINARY:
            continue
        lo = "-inf" if v.lower == -math.inf else _num(v.lower)
        hi = "+inf" if v.upper == math.inf else _num(v.upper)
        if v.lower == -math.inf and v.upper == math.inf:
            lines.append(f" {_name(v.name)} free")
        else:
            lines.append(f" {lo} <= {_name(v.name)} <= {hi}")
    bins = [_name(v.name) for v in model.variables if v.kind is VarKind.BINARY]
    if bins:
        lines.append("Binaries")
        lines.extend(f" {b}" for b in bins)
    lines.append("End")
    return "\n".join(lines) + "\n"
