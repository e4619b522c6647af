"""Affine symbolic expressions and linear constraints.

An AffineExpr is ``constant + sum(coeff * var)`` with a sparse term map; a
concrete value is an expression with no terms. Branch conditions normalize
to two constraint forms: ``expr > 0`` (GT0) and ``expr >= 0`` (GE0).
Conditions over constants never become constraints; they resolve to the
TAUTOLOGY or CONTRADICTION marker at construction time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import UnboundVariableError


@dataclass(frozen=True)
class SymVarId:
    """A symbolic variable with its box bounds."""

    index: int
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"variable index must be non-negative, got {self.index}")
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"bounds of {self.name} must be finite")
        if self.lower > self.upper:
            raise ValueError(f"{self.name}: lower bound {self.lower} > upper bound {self.upper}")


@dataclass(frozen=True)
class AffineExpr:
    """constant + sum of coeff*var; zero coefficients are never stored."""

    constant: float
    terms: tuple[tuple[SymVarId, float], ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.constant):
            raise ValueError("affine constant must be finite")
        for var, coeff in self.terms:
            if coeff == 0.0:
                raise ValueError(f"zero coefficient stored for {var.name}")
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient for {var.name}")

    @classmethod
    def const(cls, value: float) -> AffineExpr:
        return cls(float(value))

    @classmethod
    def var(cls, v: SymVarId, coeff: float = 1.0) -> AffineExpr:
        return make_affine(0.0, {v: coeff})

    @property
    def is_constant(self) -> bool:
        return len(self.terms) == 0

    def term_map(self) -> dict[SymVarId, float]:
        return dict(self.terms)

    def __str__(self) -> str:
        return render_affine(self)


def make_affine(constant: float, terms: dict[SymVarId, float]) -> AffineExpr:
    """Build an AffineExpr, dropping exact-zero coefficients and ordering
    terms by ascending variable index (the stable serialization order)."""
    kept = tuple(sorted(((v, float(c)) for v, c in terms.items() if c != 0.0),
                        key=lambda t: t[0].index))
    return AffineExpr(float(constant) + 0.0, kept)  # +0.0 normalizes -0.0


def affine_add(a: AffineExpr, b: AffineExpr) -> AffineExpr:
    terms = a.term_map()
    for v, c in b.terms:
        terms[v] = terms.get(v, 0.0) + c
    return make_affine(a.constant + b.constant, terms)


def affine_scale(a: AffineExpr, k: float) -> AffineExpr:
    if k == 0.0:
        return AffineExpr.const(0.0)
    return make_affine(a.constant * k, {v: c * k for v, c in a.terms})


def affine_sub(a: AffineExpr, b: AffineExpr) -> AffineExpr:
    return affine_add(a, affine_scale(b, -1.0))


def affine_eval(a: AffineExpr, assignment: dict[SymVarId, float]) -> float:
    total = a.constant
    for v, c in a.terms:
        if v not in assignment:
            raise UnboundVariableError(f"no value for {v.name}")
        total += c * assignment[v]
    return total


def affine_eval_exact(a: AffineExpr, assignment: dict[SymVarId, Fraction]) -> Fraction:
    """Exact rational evaluation; coefficients convert via their exact
    binary-fraction value."""
    total = Fraction(a.constant)
    for v, c in a.terms:
        if v not in assignment:
            raise UnboundVariableError(f"no value for {v.name}")
        total += Fraction(c) * assignment[v]
    return total


class Relation(enum.Enum):
    GT0 = ">"
    GE0 = ">="


class _Tautology:
    """Constraint trivially true; never stored on a path."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Tautology"


class _Contradiction:
    """Constraint trivially false; prunes its branch without a solver call."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Contradiction"


TAUTOLOGY = _Tautology()
CONTRADICTION = _Contradiction()


@dataclass(frozen=True)
class Provenance:
    """Where a constraint came from: layer, unit (neuron or window), and the
    branch that was taken."""

    layer: int
    unit: int
    branch: str

    def as_json(self) -> dict:
        return {"layer": self.layer, "unit": self.unit, "branch": self.branch}


@dataclass(frozen=True)
class LinearConstraint:
    expr: AffineExpr
    relation: Relation
    provenance: Provenance

    def __post_init__(self):
        if self.expr.is_constant:
            raise ValueError("constant conditions must resolve to Tautology/Contradiction")

    def holds(self, assignment: dict[SymVarId, Fraction]) -> bool:
        """Exact check of the constraint under a rational assignment."""
        value = affine_eval_exact(self.expr, assignment)
        return value > 0 if self.relation is Relation.GT0 else value >= 0

    def __str__(self) -> str:
        return f"{render_affine(self.expr)} {self.relation.value} 0"


BranchOutcome = LinearConstraint | _Tautology | _Contradiction


def constraint_gt0(expr: AffineExpr, prov: Provenance) -> BranchOutcome:
    """expr > 0, resolved immediately when expr is constant."""
    if expr.is_constant:
        return TAUTOLOGY if expr.constant > 0.0 else CONTRADICTION
    return LinearConstraint(expr, Relation.GT0, prov)


def constraint_ge0(expr: AffineExpr, prov: Provenance) -> BranchOutcome:
    """expr >= 0, resolved immediately when expr is constant."""
    if expr.is_constant:
        return TAUTOLOGY if expr.constant >= 0.0 else CONTRADICTION
    return LinearConstraint(expr, Relation.GE0, prov)


def constraint_from_branch(pre_activation: AffineExpr, taken_active: bool,
                           prov: Provenance) -> BranchOutcome:
    """The constraint recorded by one ReLU branch.

    The active branch means the pre-activation is strictly positive;
    an exactly-zero pre-activation belongs to the inactive branch.
    """
    if taken_active:
        return constraint_gt0(pre_activation, prov)
    return constraint_ge0(affine_scale(pre_activation, -1.0), prov)


@dataclass
class PathConstraint:
    """Conjunction of constraints along one path, plus the variable table
    whose bounds are implicit in every satisfiability query."""

    variables: tuple[SymVarId, ...]
    constraints: list[LinearConstraint] = field(default_factory=list)

    def append(self, c: LinearConstraint) -> None:
        self.constraints.append(c)

    def copy(self) -> PathConstraint:
        return PathConstraint(self.variables, list(self.constraints))

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def holds(self, assignment: dict[SymVarId, Fraction], with_bounds: bool = True) -> bool:
        if with_bounds:
            for v in self.variables:
                if v in assignment and not (Fraction(v.lower) <= assignment[v] <= Fraction(v.upper)):
                    return False
        return all(c.holds(assignment) for c in self.constraints)


def render_affine(expr: AffineExpr) -> str:
    """``c + a1*v1 + a2*v2`` with terms in ascending variable index."""
    parts = [repr(expr.constant)]
    parts.extend(f"{coeff!r}*{v.name}" for v, coeff in expr.terms)
    return " + ".join(parts)


def render_constraint(c: LinearConstraint) -> str:
    return str(c)
