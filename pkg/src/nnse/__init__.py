"""Concrete and symbolic execution of feed-forward neural networks.

Load a model directory, run it concretely, or mark inputs / one layer's
parameters symbolic to collect linear path constraints and solve them:
adversarial example generation, local robustness, path enumeration, and
neuron coverage.
"""

from .analyses import (
    AttackResult,
    AttackSpec,
    CoverageReport,
    RobustnessVerdict,
    attack,
    check_robustness,
    coverage,
)
from .concrete import ActivationPattern, Prediction, evaluate_dataset, forward
from .model import Model, ModelSpec, infer_shapes, load_model, save_model
from .solver import SolverResult, SolverSession, Status, render_smtlib
from .symexec import (
    ExplorationBudget,
    ExplorationOutcome,
    PathResult,
    SymbolicMarking,
    decision_constraint,
    explore_paths,
    symbolic_forward_concolic,
)
from .symexpr import (
    AffineExpr,
    LinearConstraint,
    PathConstraint,
    SymVarId,
    affine_add,
    affine_eval,
    affine_scale,
    constraint_from_branch,
)
from .tensor import Tensor, TensorShape

__version__ = "0.1.0"

__all__ = [
    "ActivationPattern", "AffineExpr", "AttackResult", "AttackSpec",
    "CoverageReport", "ExplorationBudget", "ExplorationOutcome",
    "LinearConstraint", "Model", "ModelSpec", "PathConstraint", "PathResult",
    "Prediction", "RobustnessVerdict", "SolverResult", "SolverSession",
    "Status", "SymVarId", "SymbolicMarking", "Tensor", "TensorShape",
    "affine_add", "affine_eval", "affine_scale", "attack", "check_robustness",
    "constraint_from_branch", "coverage", "decision_constraint",
    "evaluate_dataset", "explore_paths", "forward", "infer_shapes",
    "load_model", "render_smtlib", "save_model", "symbolic_forward_concolic",
]
