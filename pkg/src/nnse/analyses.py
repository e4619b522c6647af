"""User-facing analyses: adversarial attacks, robustness verdicts, coverage.

An attack explores paths under an input marking (concolic path first) and,
per path, conjoins the path constraint with the constraints that force a
different argmax class. Every solver witness is validated by exact concrete
re-execution before being reported; a witness whose re-execution does not
flip the label falls through to the next candidate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .concrete import forward
from .errors import EmptyDatasetError
from .model import Model
from .solver import SolverSession
from .symexec import (
    ExplorationBudget,
    PathResult,
    SymbolicMarking,
    _BudgetMeter,
    _Stop,
    _SymbolicRun,
    decision_constraint,
    embed_witness,
)
from .symexpr import CONTRADICTION, LinearConstraint, SymVarId
from .tensor import Tensor


@dataclass(frozen=True)
class AttackSpec:
    """An adversarial-example search over symbolically marked inputs."""

    marking: SymbolicMarking
    original_input: Tensor
    target: int | None = None  # None = any misclassification
    budget: ExplorationBudget = field(default_factory=ExplorationBudget)

    def __post_init__(self):
        if self.marking.mode != "inputs":
            raise ValueError("attack requires an input marking; parameters are not attackable")


FOUND = "found"
PROVEN_ROBUST = "proven_robust"
NONE_WITHIN_BUDGET = "none_within_budget"


@dataclass
class AttackResult:
    status: str  # found | proven_robust | none_within_budget
    original_label: int
    adversarial: Tensor | None = None
    new_label: int | None = None
    witness: dict[SymVarId, Fraction] | None = None
    solver_time: float = 0.0
    wall_time: float = 0.0
    paths_explored: int = 0
    solver_calls: int = 0

    @property
    def is_found(self) -> bool:
        return self.status == FOUND


def attack(model: Model, spec: AttackSpec) -> AttackResult:
    """Search the marked box for an input the model labels differently.

    Returns Found with a concretely revalidated adversarial input, or
    ProvenRobust when every feasible path was exhausted without one, or
    NoneWithinBudget when a budget limit stopped the search first.
    """
    t0 = time.perf_counter()
    original_label = forward(model, spec.original_input)[0].label
    if spec.target is not None and spec.target == original_label:
        raise ValueError(f"target class {spec.target} is already the predicted label")
    n_logits = None
    variables = spec.marking.variables()
    session = SolverSession(variables)
    meter = _BudgetMeter(spec.budget)
    found: list[AttackResult] = []

    def on_path(path: PathResult) -> bool:
        nonlocal n_logits
        n_logits = len(path.symbolic_logits)
        targets = ([spec.target] if spec.target is not None
                   else [c for c in range(n_logits) if c != original_label])
        for cls in targets:
            if cls == original_label:
                continue
            outcomes = decision_constraint(path.symbolic_logits, cls)
            if any(o is CONTRADICTION for o in outcomes):
                continue
            constraints = [o for o in outcomes if isinstance(o, LinearConstraint)]
            try:
                meter.charge_check()
            except _Stop:
                return False
            session.push(constraints)
            try:
                result = session.check()
            finally:
                session.pop()
            if not result.is_sat:
                continue
            candidate, patched = embed_witness(model, spec.original_input,
                                               spec.marking, result.assignment)
            new_label = forward(patched, candidate)[0].label
            if new_label != original_label:
                found.append(AttackResult(
                    status=FOUND, original_label=original_label,
                    adversarial=candidate, new_label=new_label,
                    witness=result.assignment))
                return False
            # Float re-execution disagreed with the rational witness near a
            # boundary; try the next candidate class / path.
        return True

    run = _SymbolicRun(model, spec.original_input, spec.marking, explore=True,
                       session=session, meter=meter, on_path=on_path)
    try:
        meter.charge_check()
        root = session.check()
        assert root.is_sat, "bounds-only check must be sat"
        run.witness = root.assignment
        run.run()
    except _Stop:
        pass

    if found:
        result = found[0]
    elif meter.truncated:
        result = AttackResult(status=NONE_WITHIN_BUDGET, original_label=original_label)
    else:
        result = AttackResult(status=PROVEN_ROBUST, original_label=original_label)
    result.solver_time = session.stats.wall_time
    result.wall_time = time.perf_counter() - t0
    result.paths_explored = meter.paths_done
    result.solver_calls = meter.solver_calls
    return result


ROBUST = "robust"
COUNTEREXAMPLE = "counterexample_found"
INCONCLUSIVE = "inconclusive"


@dataclass
class RobustnessVerdict:
    status: str  # robust | counterexample_found | inconclusive
    attack_result: AttackResult


def check_robustness(model: Model, input: Tensor, marking: SymbolicMarking,
                     budget: ExplorationBudget | None = None) -> RobustnessVerdict:
    """Local robustness of one input under the marking's perturbation box."""
    spec = AttackSpec(marking=marking, original_input=input,
                      budget=budget or ExplorationBudget())
    result = attack(model, spec)
    if result.status == FOUND:
        return RobustnessVerdict(COUNTEREXAMPLE, result)
    if result.status == PROVEN_ROBUST:
        return RobustnessVerdict(ROBUST, result)
    return RobustnessVerdict(INCONCLUSIVE, result)


@dataclass
class LayerCoverage:
    layer: int
    covered: int
    total: int

    @property
    def fraction(self) -> float:
        return self.covered / self.total if self.total else 0.0


@dataclass
class CoverageReport:
    neuron_coverage: float
    per_layer: list[LayerCoverage]
    pattern_count: int
    inputs_seen: int


def coverage(model: Model, dataset: list[Tensor]) -> CoverageReport:
    """Fraction of ReLU units observed active (pre-activation > 0) at least
    once across the dataset, with a per-layer breakdown and the number of
    distinct activation patterns."""
    if not dataset:
        raise EmptyDatasetError("coverage needs at least one input")
    seen: dict[int, np.ndarray] = {}
    patterns = set()
    for x in dataset:
        _, pattern = forward(model, x)
        for li, signs in pattern.relu_signs.items():
            if li in seen:
                seen[li] |= signs
            else:
                seen[li] = signs.copy()
        patterns.add(pattern.key())
    per_layer = [LayerCoverage(layer=li, covered=int(signs.sum()), total=int(signs.size))
                 for li, signs in sorted(seen.items())]
    covered = sum(l.covered for l in per_layer)
    total = sum(l.total for l in per_layer)
    return CoverageReport(
        neuron_coverage=covered / total if total else 0.0,
        per_layer=per_layer,
        pattern_count=len(patterns),
        inputs_seen=len(dataset))
