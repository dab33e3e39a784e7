"""Model builder for small mixed-binary linear programs.

Variables are created through :class:`Model` and combined with ordinary
arithmetic into :class:`LinExpr` objects; comparing an expression with
``<=``, ``>=`` (or calling ``.eq``) yields a :class:`LinearConstraint` ready for
:meth:`Model.add`.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from gridgame.errors import DuplicateVariableName, UnknownVariableInTerm

_model_ids = itertools.count()


class VarKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True, eq=False)
class VariableRef:
    index: int
    name: str
    kind: VarKind
    lower: float
    upper: float
    model_id: int = field(repr=False)
    priority: int = field(default=0, repr=False)   # branching order: higher first

    def __hash__(self):
        return hash((self.model_id, self.index))

    def __eq__(self, other):  # identity semantics; == on exprs builds constraints
        if isinstance(other, VariableRef):
            return self.model_id == other.model_id and self.index == other.index
        return NotImplemented

    # arithmetic promotes to LinExpr
    def _expr(self) -> "LinExpr":
        return LinExpr({self: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-self._expr()) + other

    def __mul__(self, k):
        return self._expr() * k

    __rmul__ = __mul__

    def __neg__(self):
        return self._expr() * -1.0

    def __le__(self, other):
        return self._expr() <= other

    def __ge__(self, other):
        return self._expr() >= other

    def eq(self, other) -> "LinearConstraint":
        return self._expr().eq(other)


class LinExpr:
    """Sparse linear expression ``sum(coef * var) + constant``."""

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[VariableRef, float] | None = None, constant: float = 0.0):
        self.terms: dict[VariableRef, float] = dict(terms or {})
        self.constant = float(constant)

    @staticmethod
    def sum(items: Iterable) -> "LinExpr":
        out = LinExpr()
        for it in items:
            out._iadd(it, 1.0)
        return out

    def _iadd(self, other, k: float) -> None:
        if isinstance(other, VariableRef):
            self.terms[other] = self.terms.get(other, 0.0) + k
        elif isinstance(other, LinExpr):
            for v, c in other.terms.items():
                self.terms[v] = self.terms.get(v, 0.0) + k * c
            self.constant += k * other.constant
        else:
            self.constant += k * float(other)

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def __add__(self, other):
        out = self.copy()
        out._iadd(other, 1.0)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        out = self.copy()
        out._iadd(other, -1.0)
        return out

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __mul__(self, k):
        k = float(k)
        return LinExpr({v: c * k for v, c in self.terms.items()}, self.constant * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def _cmp(self, other, sense: Sense) -> "LinearConstraint":
        diff = self - other
        terms = tuple((v, c) for v, c in diff.terms.items() if c != 0.0)
        return LinearConstraint(terms, sense, -diff.constant)

    def __le__(self, other):
        return self._cmp(other, Sense.LE)

    def __ge__(self, other):
        return self._cmp(other, Sense.GE)

    def eq(self, other) -> "LinearConstraint":
        return self._cmp(other, Sense.EQ)

    def value(self, assignment: Mapping[VariableRef, float]) -> float:
        return self.constant + sum(c * assignment[v] for v, c in self.terms.items())


@dataclass(frozen=True)
class LinearConstraint:
    terms: tuple[tuple[VariableRef, float], ...]
    sense: Sense
    rhs: float
    name: str = ""

    def __post_init__(self):
        seen = set()
        for v, c in self.terms:
            if v in seen:
                raise ValueError(f"variable {v.name!r} repeated in constraint {self.name!r}")
            seen.add(v)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient on {v.name!r}")
        if not math.isfinite(self.rhs):
            raise ValueError("non-finite right-hand side")

    def residual(self, assignment: Mapping[VariableRef, float]) -> float:
        """Amount by which the constraint is violated (0 when satisfied)."""
        lhs = sum(c * assignment[v] for v, c in self.terms)
        if self.sense is Sense.LE:
            return max(0.0, lhs - self.rhs)
        if self.sense is Sense.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


class Model:
    """A mixed-binary linear program under construction."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.id = next(_model_ids)
        self.variables: list[VariableRef] = []
        self.constraints: list[LinearConstraint] = []
        self.objective = LinExpr()
        self.is_max = False
        self._names: dict[str, VariableRef] = {}

    # -- variables ---------------------------------------------------------
    def add_var(self, name: str, lower: float = 0.0, upper: float = math.inf,
                binary: bool = False, priority: int = 0) -> VariableRef:
        if name in self._names:
            raise DuplicateVariableName(name)
        kind = VarKind.BINARY if binary else VarKind.CONTINUOUS
        if binary:
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ValueError(f"{name}: lower bound {lower} exceeds upper bound {upper}")
        v = VariableRef(len(self.variables), name, kind, float(lower), float(upper), self.id,
                        int(priority))
        self.variables.append(v)
        self._names[name] = v
        return v

    def add_binary(self, name: str, priority: int = 0) -> VariableRef:
        return self.add_var(name, 0.0, 1.0, binary=True, priority=priority)

    def var(self, name: str) -> VariableRef:
        return self._names[name]

    # -- constraints / objective ------------------------------------------
    def _check(self, terms: Iterable[VariableRef]) -> None:
        for v in terms:
            if v.model_id != self.id or v.index >= len(self.variables):
                raise UnknownVariableInTerm(v.name)

    def add(self, constraint: LinearConstraint, name: str = "") -> LinearConstraint:
        self._check(v for v, _ in constraint.terms)
        if name or not constraint.name:
            constraint = LinearConstraint(constraint.terms, constraint.sense, constraint.rhs,
                                          name or f"c{len(self.constraints)}")
        self.constraints.append(constraint)
        return constraint

    def minimize(self, expr) -> None:
        self._set_objective(expr, maximize=False)

    def maximize(self, expr) -> None:
        self._set_objective(expr, maximize=True)

    def _set_objective(self, expr, maximize: bool) -> None:
        expr = LinExpr() + expr
        self._check(expr.terms)
        self.objective = expr
        self.is_max = maximize

    @property
    def binaries(self) -> list[VariableRef]:
        return [v for v in self.variables if v.kind is VarKind.BINARY]

    # -- dense export for the solvers -------------------------------------
    def to_arrays(self):
        """Return ``(c, A, senses, b, lb, ub, is_binary)`` with a minimisation objective."""
        n, m = len(self.variables), len(self.constraints)
        c = np.zeros(n)
        for v, k in self.objective.terms.items():
            c[v.index] += k
        if self.is_max:
            c = -c
        A = np.zeros((m, n))
        b = np.zeros(m)
        senses = []
        for i, con in enumerate(self.constraints):
            for v, k in con.terms:
                A[i, v.index] = k
            b[i] = con.rhs
            senses.append(con.sense)
        lb = np.array([v.lower for v in self.variables], dtype=float)
        ub = np.array([v.upper for v in self.variables], dtype=float)
        is_bin = np.array([v.kind is VarKind.BINARY for v in self.variables], dtype=bool)
        return c, A, senses, b, lb, ub, is_bin


@dataclass
class MilpSolution:
    status: Status
    objective_value: float
    assignment: dict[VariableRef, float]
    nodes: int = 0
    lp_iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def __getitem__(self, v: VariableRef) -> float:
        return self.assignment[v]

    def value(self, expr) -> float:
        if isinstance(expr, VariableRef):
            return self.assignment[expr]
        return expr.value(self.assignment)


def build_model(data: Mapping) -> tuple[Model, dict[str, VariableRef]]:
    """Build a model from a declarative mapping.

    ``data`` has optional keys ``variables`` (list of ``{name, kind, lower,
    upper}``), ``constraints`` (list of ``{terms: {name: coef}, sense, rhs}``)
    and ``objective`` (``{sense: "min"|"max", terms: {name: coef},
    constant}``).  Returns the model and a name -> handle map.
    """
    model = Model(data.get("name", "model"))
    for vs in data.get("variables", []):
        model.add_var(vs["name"], vs.get("lower", 0.0), vs.get("upper", math.inf),
                      binary=vs.get("kind", "continuous") == "binary")

    def resolve(terms: Mapping[str, float]) -> LinExpr:
        expr = LinExpr()
        for name, coef in terms.items():
            if name not in model._names:
                raise UnknownVariableInTerm(name)
            expr._iadd(model._names[name], float(coef))
        return expr

    for i, cs in enumerate(data.get("constraints", [])):
        lhs = resolve(cs["terms"])
        sense = Sense(cs["sense"] if cs["sense"] != "==" else "=")
        con = {Sense.LE: lhs <= cs["rhs"], Sense.GE: lhs >= cs["rhs"],
               Sense.EQ: lhs.eq(cs["rhs"])}[sense]
        model.add(con, cs.get("name", f"c{i}"))
    obj = data.get("objective")
    if obj:
        expr = resolve(obj.get("terms", {})) + obj.get("constant", 0.0)
        model._set_objective(expr, maximize=obj.get("sense", "min") == "max")
    return model, dict(model._names)
