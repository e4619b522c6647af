"""Feasibility solving for conjunctions of linear inequalities over bounded reals.

The decision core is an exact-rational Phase-I simplex with Bland's pivot
rule, so Unsat answers are never numerically wrong. Strict inequalities are
handled by an adaptive-epsilon scheme: ``e > 0`` is solved as ``e >= delta``
with ``delta`` starting at 1e-6 of the variable range scale and halving up
to 20 times; any Sat witness is re-validated exactly against the original
strict constraints. When the non-strict relaxation is feasible but no tested
delta succeeds, the verdict is Unknown rather than a guess.

Two exact presolve steps run before the simplex: single-variable rows
tighten the box bounds directly, and a pair of proportionally-opposed rows
with at least one strict member (``e > 0`` together with ``-e >= 0``) is an
immediate Unsat. Both are sound inferences; they also keep single-pixel
queries and complementary-branch checks off the tableau entirely.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass
from fractions import Fraction

from .errors import StackUnderflowError, UnboundVariableError
from .symexpr import LinearConstraint, Relation, SymVarId


class Status(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


EPSILON_EXHAUSTED = "epsilon_exhausted"
TIMEOUT = "timeout"


@dataclass(frozen=True)
class SolverResult:
    status: Status
    assignment: dict[SymVarId, Fraction] | None = None
    reason: str | None = None

    @property
    def is_sat(self) -> bool:
        return self.status is Status.SAT

    @property
    def is_unsat(self) -> bool:
        return self.status is Status.UNSAT

    @property
    def is_unknown(self) -> bool:
        return self.status is Status.UNKNOWN


@dataclass
class SolverStats:
    checks: int = 0
    pivots: int = 0
    wall_time: float = 0.0


class _Timeout(Exception):
    pass


class _Row:
    """coeffs . x + const {>, >=} 0 with exact rational coefficients and
    presolve caches, computed once per constraint."""

    __slots__ = ("coeffs", "const", "strict", "uni", "canon_key", "neg_key", "canon")

    def __init__(self, c: LinearConstraint):
        self.coeffs = tuple((v.index, Fraction(coeff)) for v, coeff in c.expr.terms)
        self.const = Fraction(c.expr.constant)
        self.strict = c.relation is Relation.GT0
        # Univariate rows tighten one bound: (index, 1/a, -const/a, is_lower).
        if len(self.coeffs) == 1:
            i, a = self.coeffs[0]
            self.uni = (i, 1 / a, -self.const / a, a > 0)
        else:
            self.uni = None
        # Canonical direction for opposing-pair detection. The float key is a
        # fast hash probe (float division is sign-symmetric, so exact
        # negations always collide); the rational form confirms exactly.
        lead = abs(self.coeffs[0][1])
        self.canon = tuple(c / lead for _, c in self.coeffs) + (self.const / lead,)
        idxs = tuple(i for i, _ in self.coeffs)
        flead = abs(c.expr.terms[0][1])
        self.canon_key = (idxs, tuple(float(co) / flead for _, co in c.expr.terms),
                          c.expr.constant / flead)
        self.neg_key = (idxs, tuple(-f for f in self.canon_key[1]), -self.canon_key[2])


def _row_of(c: LinearConstraint) -> _Row:
    row = c.__dict__.get("_solver_row")
    if row is None:
        row = _Row(c)
        object.__setattr__(c, "_solver_row", row)
    return row


class SolverSession:
    """A push/pop stack of constraints over a fixed variable table.

    Single-owner: one session per exploration worker. Bounds for every
    variable are implicit in every check.
    """

    def __init__(self, variables, timeout_s: float = 10.0):
        self.variables: tuple[SymVarId, ...] = tuple(sorted(variables, key=lambda v: v.index))
        seen = set()
        for v in self.variables:
            if v.index in seen:
                raise ValueError(f"duplicate variable index {v.index}")
            seen.add(v.index)
        self._by_index = {v.index: v for v in self.variables}
        self._lo_frac = {v.index: Fraction(v.lower) for v in self.variables}
        self._hi_frac = {v.index: Fraction(v.upper) for v in self.variables}
        self._frames: list[list[LinearConstraint]] = []
        self.timeout_s = timeout_s
        self.stats = SolverStats()
        self._scale = self._range_scale()

    @property
    def depth(self) -> int:
        return len(self._frames)

    def constraints(self) -> list[LinearConstraint]:
        return [c for frame in self._frames for c in frame]

    def push(self, constraints) -> None:
        frame = list(constraints)
        for c in frame:
            for v, _ in c.expr.terms:
                if v.index not in self._by_index:
                    raise UnboundVariableError(f"{v.name} is not declared in this session")
        self._frames.append(frame)

    def pop(self) -> None:
        if not self._frames:
            raise StackUnderflowError("pop on an empty constraint stack")
        self._frames.pop()

    # -- decision procedure ---------------------------------------------

    def check(self) -> SolverResult:
        start = time.perf_counter()
        self.stats.checks += 1
        deadline = start + self.timeout_s
        try:
            result = self._decide(deadline)
        except _Timeout:
            result = SolverResult(Status.UNKNOWN, reason=TIMEOUT)
        self.stats.wall_time += time.perf_counter() - start
        return result

    def _decide(self, deadline: float) -> SolverResult:
        rows = [_row_of(c) for c in self.constraints()]

        if self._has_opposing_pair(rows):
            return SolverResult(Status.UNSAT)

        relaxed = self._feasible(rows, Fraction(0), deadline)
        if relaxed is None:
            return SolverResult(Status.UNSAT)
        if self._satisfies(rows, relaxed):
            return self._sat(self._interior(rows, relaxed, Fraction(0), deadline), rows)

        delta = Fraction(1, 10**6) * self._scale
        for _ in range(21):
            sol = self._feasible(rows, delta, deadline)
            if sol is not None:
                return self._sat(self._interior(rows, sol, delta, deadline), rows)
            delta /= 2
        return SolverResult(Status.UNKNOWN, reason=EPSILON_EXHAUSTED)

    @property
    def interior_pad(self) -> Fraction:
        """Uniform row slack the solver aims for when choosing witnesses."""
        return Fraction(1, 2 * 10**6) * self._scale

    def _interior(self, rows: list[_Row], fallback: dict[int, Fraction],
                  delta: Fraction, deadline: float) -> dict[int, Fraction]:
        """Prefer a witness with uniform slack on every row over a vertex one.

        A boundary witness (e.g. exactly zero pre-activation) re-executes
        ambiguously under float arithmetic; padding all rows by half the
        epsilon step yields a point concrete re-execution reproduces. When
        the padded system is infeasible the vertex witness stands.
        """
        padded = self._feasible(rows, delta, deadline, pad=self.interior_pad)
        if padded is not None and self._satisfies(rows, padded):
            return padded
        return fallback

    def _sat(self, solution: dict[int, Fraction], rows: list[_Row]) -> SolverResult:
        assert self._satisfies(rows, solution), "witness failed exact re-validation"
        assignment = {self._by_index[i]: val for i, val in solution.items()}
        return SolverResult(Status.SAT, assignment=assignment)

    def _range_scale(self) -> Fraction:
        scale = Fraction(1)
        for v in self.variables:
            span = Fraction(v.upper) - Fraction(v.lower)
            if span > scale:
                scale = span
        return scale

    @staticmethod
    def _satisfies(rows: list[_Row], solution: dict[int, Fraction]) -> bool:
        for row in rows:
            value = row.const + sum(c * solution[i] for i, c in row.coeffs)
            if value < 0 or (row.strict and value == 0):
                return False
        return True

    @staticmethod
    def _has_opposing_pair(rows: list[_Row]) -> bool:
        """Detect e {>,>=} 0 alongside -k*e {>,>=} 0 (k > 0) where either
        side is strict: unsatisfiable regardless of bounds."""
        seen: dict[tuple, list[_Row]] = {}
        for row in rows:
            for other in seen.get(row.neg_key, ()):
                if not (row.strict or other.strict):
                    continue
                neg = tuple(-c for c in row.canon)
                if other.canon == neg:
                    return True
            seen.setdefault(row.canon_key, []).append(row)
        return False

    def _feasible(self, rows: list[_Row], delta: Fraction, deadline: float,
                  pad: Fraction = Fraction(0)) -> dict[int, Fraction] | None:
        """Feasibility of {bounds, coeffs.x >= -const (+delta if strict) (+pad)}.

        Single-variable rows tighten the box; remaining rows go to the
        Phase-I simplex. Returns a full assignment (unconstrained variables
        sit at their lower bound) or None when infeasible.
        """
        lo = {v.index: self._lo_frac[v.index] for v in self.variables}
        hi = {v.index: self._hi_frac[v.index] for v in self.variables}
        multi: list[tuple[tuple[tuple[int, Fraction], ...], Fraction]] = []
        for row in rows:
            shift = (delta if row.strict else 0) + pad
            if row.uni is not None:
                i, inv_a, base, is_lower = row.uni
                bound = base + shift * inv_a if shift else base
                if is_lower:
                    if bound > lo[i]:
                        lo[i] = bound
                else:
                    if bound < hi[i]:
                        hi[i] = bound
            else:
                rhs = -row.const + shift
                multi.append((row.coeffs, rhs))
        for i in lo:
            if lo[i] > hi[i]:
                return None
        solution = dict(lo)
        if not multi:
            return solution
        partial = self._simplex(multi, lo, hi, deadline)
        if partial is None:
            return None
        solution.update(partial)
        return solution

    def _simplex(self, multi, lo, hi, deadline: float) -> dict[int, Fraction] | None:
        """Phase-I simplex (Bland's rule) over the multi-variable rows.

        Variables are shifted to y = x - lo with y in [0, hi - lo]; upper
        bounds become explicit rows, so the tableau is the plain all
        y >= 0 form with slacks and artificials.
        """
        used = sorted({i for coeffs, _ in multi for i, _ in coeffs})
        col_of = {i: j for j, i in enumerate(used)}
        n = len(used)

        # Constraint list as (dense coefficient row over y, rhs).
        constraint_rows: list[tuple[list[Fraction], Fraction]] = []
        for coeffs, rhs in multi:
            dense = [Fraction(0)] * n
            shift = Fraction(0)
            for i, a in coeffs:
                dense[col_of[i]] = a
                shift += a * lo[i]
            constraint_rows.append((dense, rhs - shift))
        for j, i in enumerate(used):
            dense = [Fraction(0)] * n
            dense[j] = Fraction(-1)
            constraint_rows.append((dense, -(hi[i] - lo[i])))

        m = len(constraint_rows)
        art_rows = [k for k, (_, rhs) in enumerate(constraint_rows) if rhs > 0]
        n_art = len(art_rows)
        width = n + m + n_art
        zero = Fraction(0)
        one = Fraction(1)

        # Tableau rows: y columns, slack columns, artificial columns, rhs.
        tableau: list[list[Fraction]] = []
        basis: list[int] = []
        art_col = {}
        for idx, k in enumerate(art_rows):
            art_col[k] = n + m + idx
        for k, (dense, rhs) in enumerate(constraint_rows):
            row = [zero] * (width + 1)
            if rhs > 0:
                # sum a.y - s + t = rhs, artificial t basic
                for j, a in enumerate(dense):
                    row[j] = a
                row[n + k] = -one
                row[art_col[k]] = one
                row[width] = rhs
                basis.append(art_col[k])
            else:
                # -sum a.y + s = -rhs, slack s basic
                for j, a in enumerate(dense):
                    row[j] = -a
                row[n + k] = one
                row[width] = -rhs
                basis.append(n + k)
            tableau.append(row)

        # Reduced-cost row for: minimize sum of artificials.
        z = [zero] * (width + 1)
        for row_idx, b in enumerate(basis):
            if b >= n + m:  # artificial basic: price it out
                row = tableau[row_idx]
                for j in range(width + 1):
                    z[j] -= row[j]
        for k in art_rows:
            z[art_col[k]] += one  # cost coefficient of artificials

        while True:
            if time.perf_counter() > deadline:
                raise _Timeout()
            enter = -1
            for j in range(width):
                if z[j] < 0:
                    enter = j
                    break
            if enter < 0:
                break
            leave = -1
            best = None
            for i in range(m):
                a = tableau[i][enter]
                if a > 0:
                    ratio = tableau[i][width] / a
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best = ratio
                        leave = i
            if leave < 0:
                # Phase-I objective is bounded below by 0; no ratio row would
                # mean an unbounded decrease, which cannot happen here.
                raise AssertionError("unbounded Phase-I objective")
            self._pivot(tableau, z, basis, leave, enter, width)
            self.stats.pivots += 1

        objective = -z[width]
        if objective != 0:
            return None
        y = [zero] * n
        for i, b in enumerate(basis):
            if b < n:
                y[b] = tableau[i][width]
        return {i: lo[i] + y[col_of[i]] for i in used}

    @staticmethod
    def _pivot(tableau, z, basis, leave: int, enter: int, width: int) -> None:
        row = tableau[leave]
        piv = row[enter]
        if piv != 1:
            for j in range(width + 1):
                row[j] /= piv
        for other in tableau:
            if other is row:
                continue
            f = other[enter]
            if f != 0:
                for j in range(width + 1):
                    other[j] -= f * row[j]
        f = z[enter]
        if f != 0:
            for j in range(width + 1):
                z[j] -= f * row[j]
        basis[leave] = enter

    # -- SMT-LIB2 export --------------------------------------------------

    def export_smtlib(self) -> str:
        return render_smtlib(self.variables, self.constraints())


def push(session: SolverSession, constraints) -> None:
    session.push(constraints)


def pop(session: SolverSession) -> None:
    session.pop()


def check(session: SolverSession) -> SolverResult:
    return session.check()


def export_smtlib(session: SolverSession) -> str:
    return session.export_smtlib()


# --- SMT-LIB2 rendering ------------------------------------------------------


def _smt_real(x) -> str:
    f = Fraction(x)
    num, den = f.numerator, f.denominator
    body = f"{abs(num)}.0" if den == 1 else f"(/ {abs(num)}.0 {den}.0)"
    return f"(- {body})" if num < 0 else body


def _smt_sum(expr) -> str:
    parts = [_smt_real(expr.constant)]
    parts.extend(f"(* {_smt_real(c)} v{v.index})" for v, c in expr.terms)
    return f"(+ {' '.join(parts)})" if len(parts) > 1 else parts[0]


def _smt_constraint(c: LinearConstraint) -> str:
    op = ">" if c.relation is Relation.GT0 else ">="
    return f"({op} {_smt_sum(c.expr)} 0.0)"


def render_smtlib(variables, constraints, negated_conjunctions=()) -> str:
    """A QF_LRA script: variable bounds, one assert per constraint, plus an
    optional ``(assert (not (and ...)))`` per negated conjunction.

    Strict constraints stay strict in the export; the epsilon scheme is
    internal to check() only. Literals are exact rationals.
    """
    lines = ["(set-logic QF_LRA)"]
    for v in sorted(variables, key=lambda v: v.index):
        lines.append(f"; v{v.index} = {v.name}")
        lines.append(f"(declare-const v{v.index} Real)")
        lines.append(f"(assert (>= v{v.index} {_smt_real(v.lower)}))")
        lines.append(f"(assert (<= v{v.index} {_smt_real(v.upper)}))")
    for c in constraints:
        lines.append(f"(assert {_smt_constraint(c)})")
    for group in negated_conjunctions:
        group = list(group)
        if not group:
            lines.append("(assert false)")
        elif len(group) == 1:
            lines.append(f"(assert (not {_smt_constraint(group[0])}))")
        else:
            inner = " ".join(_smt_constraint(c) for c in group)
            lines.append(f"(assert (not (and {inner})))")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
