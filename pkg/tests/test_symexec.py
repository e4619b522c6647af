from fractions import Fraction

import numpy as np
import pytest

from conftest import (
    box_grid,
    dense_stack,
    explored_pattern_keys,
    relu_stack,
    toy_grid_forward,
)
from nnse.concrete import forward
from nnse.errors import ShapeMismatchError
from nnse.solver import SolverSession
from nnse.symexec import (
    ExplorationBudget,
    SymbolicMarking,
    decision_constraint,
    embed_witness,
    explore_paths,
    symbolic_forward_concolic,
)
from nnse.symexpr import (
    CONTRADICTION,
    TAUTOLOGY,
    AffineExpr,
    Relation,
    affine_eval,
    make_affine,
)
from nnse.synth import make_image_classifier, make_toy_net, random_inputs
from nnse.tensor import Tensor


def test_degenerate_marking_concolic():
    model = relu_stack([(np.eye(2), np.zeros(2))])
    x = Tensor([2], [3.0, -1.0])
    pr = symbolic_forward_concolic(model, x, SymbolicMarking.none())
    assert len(pr.constraint) == 0
    concrete = forward(model, x)[0].logits.data
    for expr, want in zip(pr.symbolic_logits, concrete):
        assert expr.is_constant
        assert expr.constant == pytest.approx(want, abs=1e-9)


def test_two_neuron_concolic_example():
    # one symbolic pixel, weights [[1, -1]], bias 0, pixel 5
    model = relu_stack([(np.array([[1.0, -1.0]]), np.zeros(2))])
    x = Tensor([1], [5.0])
    marking = SymbolicMarking.inputs([(0,)], (0.0, 255.0))
    pr = symbolic_forward_concolic(model, x, marking)
    texts = [str(c) for c in pr.constraint]
    assert texts == ["0.0 + 1.0*sym_0 > 0", "0.0 + 1.0*sym_0 >= 0"]
    # the input's own marked value satisfies the constraint
    v = pr.constraint.variables[0]
    assert pr.constraint.holds({v: Fraction(5)})
    assert pr.witness == {v: Fraction(5)}
    assert pr.label == 0


def test_concolic_zero_preactivation_takes_inactive():
    model = relu_stack([(np.array([[1.0]]), np.zeros(1))])
    marking = SymbolicMarking.inputs([(0,)], (-10.0, 10.0))
    pr = symbolic_forward_concolic(model, Tensor([1], [0.0]), marking)
    assert len(pr.constraint) == 1
    assert pr.constraint.constraints[0].relation is Relation.GE0
    assert str(pr.constraint.constraints[0]) == "0.0 + -1.0*sym_0 >= 0"


def test_explore_zero_vars_single_path(rng):
    model = make_toy_net(rng)
    x = Tensor([2], [1.0, -1.0])
    out = explore_paths(model, SymbolicMarking.none(), x, ExplorationBudget())
    assert len(out.paths) == 1
    assert out.complete


def test_explore_single_relu_two_paths():
    model = relu_stack([(np.array([[1.0]]), np.zeros(1))])
    marking = SymbolicMarking.inputs([(0,)], (-10.0, 10.0))
    out = explore_paths(model, marking, Tensor([1], [3.0]), ExplorationBudget())
    assert len(out.paths) == 2 and out.complete
    # seed-followed (active) side first
    assert str(out.paths[0].constraint.constraints[0]).endswith("> 0")
    assert str(out.paths[1].constraint.constraints[0]).endswith(">= 0")
    for p in out.paths:
        assert p.witness is not None
        assert p.constraint.holds(p.witness)


def test_explore_budget_truncates():
    model = relu_stack([(np.array([[1.0]]), np.zeros(1))])
    marking = SymbolicMarking.inputs([(0,)], (-10.0, 10.0))
    out = explore_paths(model, marking, Tensor([1], [3.0]),
                        ExplorationBudget(max_paths=1))
    assert len(out.paths) == 1
    assert not out.complete


def test_explore_interval_fixed_branch_not_forked():
    # pre-activation = x + 100 with x in [0, 10]: always active, no fork
    model = relu_stack([(np.array([[1.0]]), np.array([100.0]))])
    marking = SymbolicMarking.inputs([(0,)], (0.0, 10.0))
    out = explore_paths(model, marking, Tensor([1], [3.0]), ExplorationBudget())
    assert len(out.paths) == 1 and out.complete
    assert len(out.paths[0].constraint) == 0
    assert out.paths[0].pattern.relu_signs[1][0]


def test_concolic_consistency_toy(rng):
    for _ in range(10):
        model = make_toy_net(rng, hidden=(3, 3), classes=3)
        x = Tensor([2], rng.uniform(-2, 2, size=2))
        marking = SymbolicMarking.inputs([(0,), (1,)], (-5.0, 5.0))
        pr = symbolic_forward_concolic(model, x, marking)
        concrete = forward(model, x)[0].logits.data
        sigma = {v: float(x.data[v.index]) for v in pr.constraint.variables}
        for expr, want in zip(pr.symbolic_logits, concrete):
            assert affine_eval(expr, sigma) == pytest.approx(want, abs=1e-9)


def test_concolic_consistency_cnn(rng):
    model = make_image_classifier(rng)
    x = random_inputs(rng, model, 1)[0]
    marking = SymbolicMarking.inputs([(15, 15)], (0.0, 255.0))
    pr = symbolic_forward_concolic(model, x, marking)
    concrete = forward(model, x)[0].logits.data
    v = pr.constraint.variables[0]
    pixel = float(x.nd[15, 15, 0])
    for expr, want in zip(pr.symbolic_logits, concrete):
        assert affine_eval(expr, {v: pixel}) == pytest.approx(want, abs=1e-9)


def test_pixel_shorthand_and_naming(rng):
    model = make_image_classifier(rng)
    x = random_inputs(rng, model, 1)[0]
    marking = SymbolicMarking.inputs([(15, 15)], (0.0, 255.0))
    pr = symbolic_forward_concolic(model, x, marking)
    assert pr.constraint.variables[0].name == "sym_15_15"


def test_marking_validation(rng):
    model = make_toy_net(rng)
    x = Tensor([2], [0.0, 0.0])
    with pytest.raises(ShapeMismatchError):
        symbolic_forward_concolic(model, x, SymbolicMarking.inputs([(7,)], (0.0, 1.0)))
    with pytest.raises(ShapeMismatchError):
        symbolic_forward_concolic(model, x, SymbolicMarking.inputs([(0, 0, 0)], (0.0, 1.0)))
    with pytest.raises(ValueError):
        SymbolicMarking.inputs([(0,), (0,)], (0.0, 1.0))  # duplicate names
    with pytest.raises(ValueError):
        SymbolicMarking.inputs([(0,)], (5.0, 1.0))  # lower > upper


def test_explore_paths_match_grid_patterns(rng):
    for _ in range(5):
        model = make_toy_net(rng, hidden=(3, 2), classes=2)
        seed = Tensor([2], rng.uniform(-2, 2, size=2))
        lo, hi = -3.0, 3.0
        marking = SymbolicMarking.inputs([(0,), (1,)], (lo, hi))
        out = explore_paths(model, marking, seed,
                            ExplorationBudget(max_paths=10**5, max_solver_calls=10**6))
        assert out.complete
        _, grid_bits, _ = toy_grid_forward(model, box_grid(lo, hi, 150))
        grid_keys = {row.tobytes() for row in grid_bits}
        assert grid_keys <= explored_pattern_keys(out.paths)


def test_path_witnesses_reexecute_to_pattern(rng):
    model = make_toy_net(rng, hidden=(3,), classes=2)
    seed = Tensor([2], rng.uniform(-2, 2, size=2))
    marking = SymbolicMarking.inputs([(0,), (1,)], (-3.0, 3.0))
    out = explore_paths(model, marking, seed, ExplorationBudget())
    for p in out.paths:
        embedded, patched = embed_witness(model, seed, marking, p.witness)
        pred, pattern = forward(patched, embedded)
        assert pred.label == p.label
        for li, signs in p.pattern.relu_signs.items():
            assert np.array_equal(signs, pattern.relu_signs[li])


def test_paths_pairwise_unsat(rng):
    model = make_toy_net(rng, hidden=(2, 2), classes=2)
    seed = Tensor([2], rng.uniform(-2, 2, size=2))
    marking = SymbolicMarking.inputs([(0,), (1,)], (-3.0, 3.0))
    out = explore_paths(model, marking, seed, ExplorationBudget())
    paths = out.paths
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            s = SolverSession(marking.variables())
            s.push(list(paths[i].constraint))
            s.push(list(paths[j].constraint))
            assert s.check().is_unsat


def test_sampled_solutions_follow_path(rng):
    model = make_toy_net(rng, hidden=(3,), classes=2)
    seed = Tensor([2], rng.uniform(-2, 2, size=2))
    marking = SymbolicMarking.inputs([(0,), (1,)], (-3.0, 3.0))
    out = explore_paths(model, marking, seed, ExplorationBudget())
    variables = marking.variables()
    for p in out.paths:
        hits = 0
        for _ in range(300):
            sample = {v: Fraction(float(rng.uniform(v.lower, v.upper))) for v in variables}
            if not p.constraint.holds(sample):
                continue
            hits += 1
            embedded, _ = embed_witness(model, seed, marking, sample)
            _, pattern = forward(model, embedded)
            for li, signs in p.pattern.relu_signs.items():
                assert np.array_equal(signs, pattern.relu_signs[li])
        del hits


def test_softmax_transparency(rng):
    w = rng.normal(size=(2, 3))
    b = rng.normal(size=3)
    plain = dense_stack([(w, b)])
    softmaxed = dense_stack([(w, b)], softmax=True)
    seed = Tensor([2], [0.5, -0.5])
    marking = SymbolicMarking.inputs([(0,), (1,)], (-2.0, 2.0))
    out_a = explore_paths(plain, marking, seed, ExplorationBudget())
    out_b = explore_paths(softmaxed, marking, seed, ExplorationBudget())
    texts_a = [[str(c) for c in p.constraint] for p in out_a.paths]
    texts_b = [[str(c) for c in p.constraint] for p in out_b.paths]
    assert texts_a == texts_b


# --- decision constraints ---------------------------------------------------


def test_decision_constraint_relations():
    x = SymbolicMarking.inputs([(0,)], (0.0, 255.0)).variables()[0]
    logits = [make_affine(0.0, {x: 1.0}), AffineExpr.const(3.0)]
    lower = decision_constraint(logits, 0)
    assert len(lower) == 1
    # target 0 must tolerate a tie with the later class: non-strict
    assert lower[0].relation is Relation.GE0
    assert str(lower[0]) == "-3.0 + 1.0*sym_0 >= 0"
    upper = decision_constraint(logits, 1)
    # target 1 must strictly beat the earlier class
    assert upper[0].relation is Relation.GT0
    assert str(upper[0]) == "3.0 + -1.0*sym_0 > 0"


def test_decision_constraint_constant_logits():
    logits = [AffineExpr.const(1.0), AffineExpr.const(2.0), AffineExpr.const(0.0)]
    outcomes = decision_constraint(logits, 1)
    assert all(o is TAUTOLOGY for o in outcomes)
    outcomes0 = decision_constraint(logits, 0)
    assert CONTRADICTION in outcomes0


def test_decision_constraint_partitions_exactly(rng):
    # for any assignment exactly one target's constraints all hold
    x, y = SymbolicMarking.inputs([(0,), (1,)], (-9.0, 9.0)).variables()
    logits = [make_affine(float(rng.normal()), {x: float(rng.normal()), y: float(rng.normal())})
              for _ in range(4)]
    for _ in range(100):
        sigma = {x: Fraction(float(rng.uniform(-9, 9))), y: Fraction(float(rng.uniform(-9, 9)))}
        holders = []
        for target in range(4):
            ok = True
            for o in decision_constraint(logits, target):
                if o is TAUTOLOGY:
                    continue
                if o is CONTRADICTION or not o.holds(sigma):
                    ok = False
                    break
            if ok:
                holders.append(target)
        assert len(holders) == 1
        floats = {v: float(f) for v, f in sigma.items()}
        argmax = int(np.argmax([affine_eval(l, floats) for l in logits]))
        assert holders[0] == argmax


def test_decision_constraint_validation():
    with pytest.raises(ValueError):
        decision_constraint([AffineExpr.const(1.0)], 0)
    with pytest.raises(ValueError):
        decision_constraint([AffineExpr.const(1.0), AffineExpr.const(2.0)], 5)


# --- symbolic parameters ----------------------------------------------------


def test_symbolic_weight_constraint():
    # logits = [w*x] with x=2: pre-activation 2w, relu branch on 2w
    model = relu_stack([(np.array([[1.0]]), np.zeros(1))])
    marking = SymbolicMarking.params(0, [0], (-5.0, 5.0))
    pr = symbolic_forward_concolic(model, Tensor([1], [2.0]), marking)
    assert len(pr.constraint) == 1
    assert str(pr.constraint.constraints[0]) == "0.0 + 2.0*sym_p0_0 > 0"
    v = pr.constraint.variables[0]
    assert pr.witness == {v: Fraction(1)}  # the layer's concrete weight


def test_symbolic_bias_offset_indexes_after_weights():
    model = relu_stack([(np.array([[1.0, 2.0]]), np.array([0.5, -0.5]))])
    marking = SymbolicMarking.params(0, [2], (-5.0, 5.0))  # first bias
    pr = symbolic_forward_concolic(model, Tensor([1], [3.0]), marking)
    v = pr.constraint.variables[0]
    assert v.name == "sym_p0_2"
    assert pr.witness[v] == Fraction(0.5)
    sigma = {v: 0.5}
    concrete = forward(model, Tensor([1], [3.0]))[0].logits.data
    for expr, want in zip(pr.symbolic_logits, concrete):
        assert affine_eval(expr, sigma) == pytest.approx(want, abs=1e-9)


def test_params_explore_and_witness(rng):
    model = relu_stack([(rng.normal(size=(2, 3)), rng.normal(size=3))])
    seed = Tensor([2], [1.0, -2.0])
    marking = SymbolicMarking.params(0, [0, 4], (-3.0, 3.0))
    out = explore_paths(model, marking, seed, ExplorationBudget())
    assert out.complete and len(out.paths) >= 2
    for p in out.paths:
        embedded, patched = embed_witness(model, seed, marking, p.witness)
        pred, pattern = forward(patched, embedded)
        assert pred.label == p.label
        for li, signs in p.pattern.relu_signs.items():
            assert np.array_equal(signs, pattern.relu_signs[li])


def test_params_offset_out_of_range(rng):
    model = make_toy_net(rng, hidden=(2,))
    with pytest.raises(ShapeMismatchError):
        symbolic_forward_concolic(model, Tensor([2], [0.0, 0.0]),
                                  SymbolicMarking.params(0, [999], (0.0, 1.0)))
    with pytest.raises(ShapeMismatchError):
        symbolic_forward_concolic(model, Tensor([2], [0.0, 0.0]),
                                  SymbolicMarking.params(1, [0], (0.0, 1.0)))  # relu layer


def test_conv_params_marking(rng):
    model = make_image_classifier(rng)
    x = random_inputs(rng, model, 1)[0]
    wsize = model.params[0].weights.data.size  # 3*3*1*4 = 36
    marking = SymbolicMarking.params(0, [0, wsize + 2], (-1.0, 1.0))  # weight + bias
    pr = symbolic_forward_concolic(model, x, marking)
    p = model.params[0]
    sigma = {pr.constraint.variables[0]: float(p.weights.data[0]),
             pr.constraint.variables[1]: float(p.biases.data[2])}
    concrete = forward(model, x)[0].logits.data
    for expr, want in zip(pr.symbolic_logits, concrete):
        assert affine_eval(expr, sigma) == pytest.approx(want, abs=1e-7)


def test_budget_validation():
    with pytest.raises(ValueError):
        ExplorationBudget(max_paths=0)
    with pytest.raises(ValueError):
        ExplorationBudget(wall_timeout=-1.0)
