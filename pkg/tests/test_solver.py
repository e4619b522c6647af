import sys
from fractions import Fraction

import pytest

sys.path.insert(0, "tests")

from nnse.errors import StackUnderflowError, UnboundVariableError
from nnse.solver import (
    EPSILON_EXHAUSTED,
    TIMEOUT,
    SolverSession,
    check,
    export_smtlib,
    pop,
    push,
    render_smtlib,
)
from nnse.symexpr import (
    Provenance,
    SymVarId,
    constraint_ge0,
    constraint_gt0,
    make_affine,
)

PROV = Provenance(0, 0, "t")


def var(i, name, lo, hi):
    return SymVarId(i, name, lo, hi)


def ge0(expr):
    c = constraint_ge0(expr, PROV)
    assert hasattr(c, "expr"), "test helper expects a non-constant expression"
    return c


def gt0(expr):
    return constraint_gt0(expr, PROV)


def test_push_pop_check_cycle():
    x = var(0, "x", -1000.0, 1000.0)
    s = SolverSession([x])
    push(s, [ge0(make_affine(-1.0, {x: 1.0}))])   # x >= 1
    push(s, [ge0(make_affine(0.0, {x: -1.0}))])   # x <= 0
    assert check(s).is_unsat
    pop(s)
    result = check(s)
    assert result.is_sat
    assert result.assignment[x] >= 1


def test_pop_underflow():
    s = SolverSession([var(0, "x", 0.0, 1.0)])
    with pytest.raises(StackUnderflowError):
        s.pop()


def test_thousand_push_pop_cycles():
    x = var(0, "x", 0.0, 10.0)
    s = SolverSession([x])
    c = ge0(make_affine(-1.0, {x: 1.0}))
    for _ in range(1000):
        s.push([c])
        s.pop()
    assert s.depth == 0
    assert check(s).is_sat


def test_strict_witness_is_exact():
    x = var(0, "x", 0.0, 255.0)
    s = SolverSession([x])
    s.push([gt0(make_affine(-5.0, {x: 1.0}))])    # x - 5 > 0
    result = s.check()
    assert result.is_sat
    assert result.assignment[x] > 5                # exact rational comparison


def test_unsat_box_conflict():
    x = var(0, "x", 0.0, 255.0)
    s = SolverSession([x])
    s.push([ge0(make_affine(-300.0, {x: 1.0}))])  # x >= 300 out of box
    assert s.check().is_unsat


def test_push_rejects_unknown_variable():
    x = var(0, "x", 0.0, 1.0)
    y = var(1, "y", 0.0, 1.0)
    s = SolverSession([x])
    with pytest.raises(UnboundVariableError):
        s.push([ge0(make_affine(0.0, {y: 1.0}))])


def test_opposing_strict_pair_unsat():
    x = var(0, "x", -10.0, 10.0)
    y = var(1, "y", -10.0, 10.0)
    e = make_affine(-3.0, {x: 1.0, y: 2.0})
    neg = make_affine(3.0, {x: -1.0, y: -2.0})
    s = SolverSession([x, y])
    s.push([gt0(e), ge0(neg)])
    assert s.check().is_unsat


def test_opposing_nonstrict_pair_is_equality_not_unsat():
    x = var(0, "x", -10.0, 10.0)
    y = var(1, "y", -10.0, 10.0)
    e = make_affine(-3.0, {x: 1.0, y: 2.0})
    neg = make_affine(3.0, {x: -1.0, y: -2.0})
    s = SolverSession([x, y])
    s.push([ge0(e), ge0(neg)])
    result = s.check()
    assert result.is_sat
    a = result.assignment
    assert Fraction(-3) + a[x] + 2 * a[y] == 0


def test_epsilon_exhausted_surfaced_as_unknown():
    # sup of x+y is 0 on the feasible closure but never attained strictly
    x = var(0, "x", -10.0, 0.0)
    y = var(1, "y", -10.0, 0.0)
    s = SolverSession([x, y])
    s.push([gt0(make_affine(0.0, {x: 1.0, y: 1.0}))])
    result = s.check()
    assert result.is_unknown
    assert result.reason == EPSILON_EXHAUSTED


def test_timeout_returns_unknown():
    x = var(0, "x", 0.0, 1.0)
    y = var(1, "y", 0.0, 1.0)
    s = SolverSession([x, y], timeout_s=0.0)
    s.push([ge0(make_affine(-0.5, {x: 1.0, y: 1.0}))])  # needs the simplex
    result = s.check()
    assert result.is_unknown and result.reason == TIMEOUT


def _random_system(rng, guaranteed_sat):
    n_vars = int(rng.integers(1, 5))
    variables = []
    for i in range(n_vars):
        lo = float(rng.uniform(-50, 0))
        hi = float(rng.uniform(0, 50))
        variables.append(var(i, f"v{i}", lo, hi))
    point = {v: rng.uniform(v.lower, v.upper) for v in variables}
    constraints = []
    for _ in range(int(rng.integers(1, 8))):
        k = int(rng.integers(1, n_vars + 1))
        chosen = list(rng.choice(n_vars, size=k, replace=False))
        terms = {variables[i]: float(rng.normal()) for i in chosen}
        terms = {v: c for v, c in terms.items() if c != 0.0}
        if not terms:
            continue
        value = sum(c * point[v] for v, c in terms.items())
        strict = bool(rng.integers(0, 2))
        if guaranteed_sat:
            margin = float(rng.uniform(0.001, 1.0)) if strict else float(rng.uniform(0, 1.0))
            const = margin - value
        else:
            const = float(rng.normal())
        c = (constraint_gt0 if strict else constraint_ge0)(make_affine(const, terms), PROV)
        if not hasattr(c, "expr"):
            continue
        constraints.append(c)
    return variables, constraints


def _witness_satisfies(constraints, variables, assignment):
    for v in variables:
        if not Fraction(v.lower) <= assignment[v] <= Fraction(v.upper):
            return False
    return all(c.holds(assignment) for c in constraints)


def test_fifty_point_anchored_systems_all_sat(rng):
    for _ in range(50):
        variables, constraints = _random_system(rng, guaranteed_sat=True)
        s = SolverSession(variables)
        s.push(constraints)
        result = s.check()
        assert result.is_sat
        assert _witness_satisfies(constraints, variables, result.assignment)


def test_incrementality_matches_fresh_session(rng):
    for _ in range(25):
        variables, constraints = _random_system(rng, guaranteed_sat=False)
        s = SolverSession(variables)
        frames = []
        for c in constraints:
            if rng.random() < 0.3 and frames:
                s.pop()
                frames.pop()
            s.push([c])
            frames.append([c])
        fresh = SolverSession(variables)
        for frame in frames:
            fresh.push(frame)
        a = s.check()
        b = fresh.check()
        assert a.status == b.status
        assert a.assignment == b.assignment


def test_determinism_same_stack_same_witness(rng):
    variables, constraints = _random_system(rng, guaranteed_sat=True)
    s = SolverSession(variables)
    s.push(constraints)
    first = s.check()
    second = s.check()
    assert first.status == second.status
    assert first.assignment == second.assignment


def test_stats_accumulate():
    x = var(0, "x", 0.0, 10.0)
    s = SolverSession([x])
    s.check()
    s.check()
    assert s.stats.checks == 2
    assert s.stats.wall_time > 0


def test_export_bounds_only():
    x = var(0, "x", 0.0, 255.0)
    s = SolverSession([x])
    text = export_smtlib(s)
    assert "(set-logic QF_LRA)" in text
    assert "(declare-const v0 Real)" in text
    assert "(assert (>= v0 0.0))" in text
    assert "(assert (<= v0 255.0))" in text
    assert text.rstrip().endswith("(get-model)")
    from smt_oracle import smt_sat
    assert smt_sat(text)


def test_export_strict_not_epsilon_rewritten():
    x = var(0, "x", 0.0, 255.0)
    s = SolverSession([x])
    s.push([gt0(make_affine(-5.0, {x: 1.0}))])
    text = s.export_smtlib()
    assert "(assert (> (+ (- 5.0) (* 1.0 v0)) 0.0))" in text
    assert "1e-06" not in text and "epsilon" not in text


def test_export_exact_rational_literals():
    x = var(0, "x", 0.0, 1.0)
    s = SolverSession([x])
    s.push([ge0(make_affine(-0.1, {x: 1.0}))])
    text = s.export_smtlib()
    # 0.1 is not dyadic: the exact binary fraction must appear, not "0.1"
    assert "(/ " in text


def test_export_negated_conjunction_forms():
    x = var(0, "x", 0.0, 1.0)
    c1 = gt0(make_affine(-0.5, {x: 1.0}))
    c2 = ge0(make_affine(0.25, {x: -1.0}))
    text = render_smtlib([x], [], [[c1, c2]])
    assert "(assert (not (and" in text
    assert render_smtlib([x], [], [[c1]]).count("(assert (not (") == 1
    assert "(assert false)" in render_smtlib([x], [], [[]])


def test_internal_verdicts_agree_with_oracle(rng):
    from smt_oracle import smt_sat
    checked = 0
    for _ in range(40):
        variables, constraints = _random_system(rng, guaranteed_sat=False)
        if not constraints:
            continue
        s = SolverSession(variables)
        s.push(constraints)
        result = s.check()
        if result.is_unknown:
            continue
        assert smt_sat(s.export_smtlib()) == result.is_sat
        checked += 1
    assert checked >= 30
