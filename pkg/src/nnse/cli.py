"""Command-line interface.

Commands: run | attack | explore | coverage | export-smt. Machine-readable
JSON goes to stdout or the output directory; human summaries go to stderr.

Exit codes: 0 success (attack: Found or ProvenRobust), 2 usage and
load/shape errors, 3 attack NoneWithinBudget, 1 unexpected failure.
The NNSE_LOG environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import report
from .analyses import NONE_WITHIN_BUDGET, AttackSpec, attack, coverage
from .concrete import forward
from .config import AnalysisConfig
from .dataio import read_dataset_dir, read_input_csv
from .errors import EngineError
from .model import load_model
from .solver import render_smtlib
from .symexec import (
    ExplorationBudget,
    SymbolicMarking,
    decision_constraint,
    explore_paths,
    symbolic_forward_concolic,
)
from .symexpr import CONTRADICTION, LinearConstraint

log = logging.getLogger("nnse")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NO_RESULT = 3


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr,
                        level=os.environ.get("NNSE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return args.func(args, cfg, parser)
    except EngineError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # pragma: no cover - unexpected
        log.exception("unexpected failure")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_ERROR


def load_config(args) -> AnalysisConfig:
    cfg = AnalysisConfig.from_file(args.config) if args.config else AnalysisConfig()
    overrides = {}
    for key in ("sym_min", "sym_max", "max_paths", "max_solver_calls",
                "timeout_s", "output_dir", "solver"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "no_figures", False):
        overrides["figures"] = False
    cfg = cfg.override(**overrides)
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nnse",
        description="Concrete and symbolic execution of feed-forward neural networks.")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="classify one input")
    p_run.add_argument("model_dir")
    p_run.add_argument("input_csv")
    p_run.set_defaults(func=cmd_run)

    p_attack = sub.add_parser("attack", help="search for an adversarial example")
    _add_common(p_attack, marking=True, budget=True)
    p_attack.add_argument("--target", type=int, default=None,
                          help="require this misclassification class (default: any)")
    p_attack.set_defaults(func=cmd_attack)

    p_explore = sub.add_parser("explore", help="enumerate feasible decision paths")
    _add_common(p_explore, marking=True, budget=True)
    p_explore.set_defaults(func=cmd_explore)

    p_cov = sub.add_parser("coverage", help="neuron coverage over a dataset directory")
    p_cov.add_argument("model_dir")
    p_cov.add_argument("dataset_dir")
    p_cov.add_argument("-o", "--output-dir", dest="output_dir", default=None)
    p_cov.add_argument("--no-figures", action="store_true")
    p_cov.set_defaults(func=cmd_coverage)

    p_smt = sub.add_parser("export-smt",
                           help="write the concolic path constraint plus the negated "
                                "decision as an SMT-LIB2 script")
    _add_common(p_smt, marking=True, budget=False)
    p_smt.add_argument("--out", default=None, help="output .smt2 path")
    p_smt.set_defaults(func=cmd_export_smt)
    return parser


def _add_common(p: argparse.ArgumentParser, marking: bool, budget: bool) -> None:
    p.add_argument("model_dir")
    p.add_argument("input_csv")
    p.add_argument("-o", "--output-dir", dest="output_dir", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--solver", choices=("internal", "smtlib-export"), default=None)
    if marking:
        p.add_argument("--sym-pixel", action="append", default=[], metavar="R,C[,CH]",
                       help="mark an input position symbolic (repeatable)")
        p.add_argument("--sym-param", action="append", default=[], metavar="LAYER,OFFSET",
                       help="mark one layer parameter symbolic (repeatable; "
                            "offsets index weights row-major, then biases)")
        p.add_argument("--min", dest="sym_min", type=float, default=None,
                       help="lower bound for symbolic variables")
        p.add_argument("--max", dest="sym_max", type=float, default=None,
                       help="upper bound for symbolic variables")
    if budget:
        p.add_argument("--max-paths", dest="max_paths", type=int, default=None)
        p.add_argument("--max-solver-calls", dest="max_solver_calls", type=int, default=None)
        p.add_argument("--timeout", dest="timeout_s", type=float, default=None)


def _parse_marking(args, cfg: AnalysisConfig, parser: argparse.ArgumentParser,
                   allow_params: bool) -> SymbolicMarking:
    bounds = (cfg.sym_min, cfg.sym_max)
    if args.sym_pixel and args.sym_param:
        parser.error("--sym-pixel and --sym-param are mutually exclusive")
    if args.sym_param:
        if not allow_params:
            parser.error("--sym-param is not valid here: attack requires symbolic inputs")
        pairs = [_parse_ints(s, parser, "--sym-param") for s in args.sym_param]
        layers = {p[0] for p in pairs}
        if len(layers) > 1:
            parser.error("--sym-param positions must reference a single layer")
        if any(len(p) != 2 for p in pairs):
            parser.error("--sym-param takes LAYER,OFFSET")
        return SymbolicMarking.params(pairs[0][0], [p[1] for p in pairs], bounds)
    positions = [tuple(_parse_ints(s, parser, "--sym-pixel")) for s in args.sym_pixel]
    return SymbolicMarking.inputs(positions, bounds)


def _parse_ints(s: str, parser, flag: str) -> list[int]:
    try:
        values = [int(tok) for tok in s.split(",")]
    except ValueError:
        parser.error(f"{flag} takes comma-separated integers, got {s!r}")
    if not values or any(v < 0 for v in values):
        parser.error(f"{flag}: indices must be non-negative, got {s!r}")
    return values


def _budget(cfg: AnalysisConfig) -> ExplorationBudget:
    return ExplorationBudget(max_paths=cfg.max_paths,
                             max_solver_calls=cfg.max_solver_calls,
                             wall_timeout=cfg.timeout_s)


# --- commands ---------------------------------------------------------------


def cmd_run(args, cfg, parser) -> int:
    model = load_model(args.model_dir)
    x = read_input_csv(args.input_csv, model.input_shape)
    pred, _ = forward(model, x)
    sys.stdout.write(report.canonical_json(report.prediction_json(pred)))
    print(f"label {pred.label}", file=sys.stderr)
    return EXIT_OK


def cmd_attack(args, cfg, parser) -> int:
    model = load_model(args.model_dir)
    x = read_input_csv(args.input_csv, model.input_shape)
    if not args.sym_pixel and not args.sym_param:
        parser.error("attack needs at least one --sym-pixel")
    marking = _parse_marking(args, cfg, parser, allow_params=False)
    if cfg.solver == "smtlib-export":
        return _attack_smtlib(args, cfg, model, x, marking)
    spec = AttackSpec(marking=marking, original_input=x, target=args.target,
                      budget=_budget(cfg))
    result = attack(model, spec)
    names = [v.name for v in marking.variables()]
    written = report.write_attack_report(cfg.output_dir, result, x, names,
                                         figures=cfg.figures)
    print(f"{result.status}: original label {result.original_label}"
          + (f", new label {result.new_label}" if result.is_found else "")
          + f" ({result.paths_explored} paths, {result.solver_calls} solver calls)",
          file=sys.stderr)
    for kind, path in written.items():
        print(f"  {kind}: {path}", file=sys.stderr)
    if result.status == NONE_WITHIN_BUDGET:
        return EXIT_NO_RESULT
    return EXIT_OK


def _attack_smtlib(args, cfg, model, x, marking) -> int:
    """--solver smtlib-export: dump the concolic-path attack queries instead
    of solving them (one .smt2 per candidate class)."""
    pr = symbolic_forward_concolic(model, x, marking)
    original_label = pr.label
    targets = ([args.target] if args.target is not None
               else [c for c in range(len(pr.symbolic_logits)) if c != original_label])
    os.makedirs(cfg.output_dir, exist_ok=True)
    files = []
    for cls in targets:
        outcomes = decision_constraint(pr.symbolic_logits, cls)
        if any(o is CONTRADICTION for o in outcomes):
            continue
        decision = [o for o in outcomes if isinstance(o, LinearConstraint)]
        text = render_smtlib(pr.constraint.variables,
                             list(pr.constraint) + decision)
        path = os.path.join(cfg.output_dir, f"attack_class{cls}.smt2")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        files.append(path)
    sys.stdout.write(report.canonical_json(
        {"status": "exported", "original_label": original_label, "files": files}))
    print(f"exported {len(files)} attack queries to {cfg.output_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_explore(args, cfg, parser) -> int:
    model = load_model(args.model_dir)
    x = read_input_csv(args.input_csv, model.input_shape)
    marking = _parse_marking(args, cfg, parser, allow_params=True)
    if cfg.solver == "smtlib-export":
        pr = symbolic_forward_concolic(model, x, marking)
        os.makedirs(cfg.output_dir, exist_ok=True)
        path = os.path.join(cfg.output_dir, "concolic_path.smt2")
        with open(path, "w", encoding="utf-8") as f:
            f.write(render_smtlib(pr.constraint.variables, list(pr.constraint)))
        sys.stdout.write(report.canonical_json({"status": "exported", "files": [path]}))
        return EXIT_OK
    outcome = explore_paths(model, marking, x, _budget(cfg))
    os.makedirs(cfg.output_dir, exist_ok=True)
    out_path = os.path.join(cfg.output_dir, "paths.json")
    report.write_json(out_path, report.exploration_json(outcome))
    print(f"{len(outcome.paths)} paths"
          + (" (truncated by budget)" if not outcome.complete else "")
          + f" -> {out_path}", file=sys.stderr)
    return EXIT_OK


def cmd_coverage(args, cfg, parser) -> int:
    model = load_model(args.model_dir)
    inputs, _ = read_dataset_dir(args.dataset_dir, model.input_shape)
    cov = coverage(model, inputs)
    written = report.write_coverage_report(cfg.output_dir, cov, figures=cfg.figures)
    print(f"neuron coverage {cov.neuron_coverage:.4f} over {cov.inputs_seen} inputs, "
          f"{cov.pattern_count} distinct patterns", file=sys.stderr)
    for kind, path in written.items():
        print(f"  {kind}: {path}", file=sys.stderr)
    return EXIT_OK


def cmd_export_smt(args, cfg, parser) -> int:
    model = load_model(args.model_dir)
    x = read_input_csv(args.input_csv, model.input_shape)
    marking = _parse_marking(args, cfg, parser, allow_params=True)
    pr = symbolic_forward_concolic(model, x, marking)
    outcomes = decision_constraint(pr.symbolic_logits, pr.label) \
        if len(pr.symbolic_logits) >= 2 else []
    negated = []
    if not any(o is CONTRADICTION for o in outcomes):
        group = [o for o in outcomes if isinstance(o, LinearConstraint)]
        negated.append(group)
    text = render_smtlib(pr.constraint.variables, list(pr.constraint), negated)
    out = args.out
    if out is None:
        os.makedirs(cfg.output_dir, exist_ok=True)
        out = os.path.join(cfg.output_dir, "constraints.smt2")
    with open(out, "w", encoding="utf-8") as f:
        f.write(text)
    print(f"wrote {out}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
