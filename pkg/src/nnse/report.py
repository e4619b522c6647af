"""Report writers: canonical JSON, delimited outputs, and rendered figures.

All JSON is emitted with sorted keys and a trailing newline so identical
results are byte-identical; wall-clock measurements live under a separate
"metadata" key that comparisons can drop. Figures are rendered with the
Agg backend straight to files next to the delimited outputs.
"""

from __future__ import annotations

import json
import os
import time
from fractions import Fraction

import numpy as np

from .analyses import AttackResult, CoverageReport
from .concrete import Prediction
from .dataio import write_input_csv
from .symexec import ExplorationOutcome, PathResult
from .symexpr import SymVarId
from .tensor import Tensor


def _pyplot():
    # Figures are optional output; keep matplotlib off the import path of
    # plain runs and force the file-rendering backend when it is used.
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def canonical_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path: str | os.PathLike, obj) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as f:
        f.write(canonical_json(obj))


def _metadata(extra: dict | None = None) -> dict:
    meta = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    if extra:
        meta.update(extra)
    return meta


def witness_json(witness: dict[SymVarId, Fraction] | None) -> dict | None:
    if witness is None:
        return None
    out = {}
    for v in sorted(witness, key=lambda v: v.index):
        val = witness[v]
        out[v.name] = {"rational": f"{val.numerator}/{val.denominator}",
                       "value": float(val)}
    return out


def prediction_json(pred: Prediction) -> dict:
    return {
        "label": pred.label,
        "logits": [float(x) for x in pred.logits.data],
        "probabilities": ([float(x) for x in pred.probabilities.data]
                          if pred.probabilities is not None else None),
    }


def path_json(path: PathResult) -> dict:
    return {
        "constraints": [
            {"text": str(c), "relation": c.relation.value,
             "provenance": c.provenance.as_json()}
            for c in path.constraint
        ],
        "witness": witness_json(path.witness),
        "label": path.label,
        "relu_signs": {str(li): [bool(b) for b in signs]
                       for li, signs in sorted(path.pattern.relu_signs.items())},
        "pool_choices": {str(li): [int(c) for c in choices]
                         for li, choices in sorted(path.pattern.pool_choices.items())},
    }


def exploration_json(outcome: ExplorationOutcome) -> dict:
    return {
        "paths": [path_json(p) for p in outcome.paths],
        "path_count": len(outcome.paths),
        "truncated": not outcome.complete,
        "metadata": _metadata({"solver_calls": outcome.solver_calls,
                               "wall_time_s": outcome.wall_time}),
    }


def attack_json(result: AttackResult, marking_names: list[str]) -> dict:
    return {
        "status": result.status,
        "original_label": result.original_label,
        "new_label": result.new_label,
        "marked_positions": marking_names,
        "witness": witness_json(result.witness),
        "paths_explored": result.paths_explored,
        "metadata": _metadata({"solver_time_s": result.solver_time,
                               "wall_time_s": result.wall_time,
                               "solver_calls": result.solver_calls}),
    }


def coverage_json(report: CoverageReport) -> dict:
    return {
        "neuron_coverage": report.neuron_coverage,
        "per_layer": [{"layer": l.layer, "covered": l.covered, "total": l.total,
                       "fraction": l.fraction} for l in report.per_layer],
        "activation_pattern_count": report.pattern_count,
        "inputs_seen": report.inputs_seen,
        "metadata": _metadata(),
    }


# --- attack report path -------------------------------------------------


def write_attack_report(out_dir: str | os.PathLike, result: AttackResult,
                        original: Tensor, marking_names: list[str],
                        figures: bool = True) -> dict[str, str]:
    """attack.json plus, on Found, the adversarial CSV tensor and a
    before/after figure for image-shaped inputs."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    report_path = os.path.join(out_dir, "attack.json")
    write_json(report_path, attack_json(result, marking_names))
    written["report"] = report_path
    if result.is_found:
        adv_path = os.path.join(out_dir, "adversarial.csv")
        write_input_csv(adv_path, result.adversarial)
        written["adversarial"] = adv_path
        if figures:
            fig_path = os.path.join(out_dir, "attack.png")
            if _render_attack_figure(fig_path, original, result):
                written["figure"] = fig_path
    return written


def _as_image(t: Tensor) -> np.ndarray | None:
    dims = t.shape.dims
    if len(dims) == 3 and dims[2] in (1, 3):
        img = t.nd
        return img[:, :, 0] if dims[2] == 1 else img
    if len(dims) == 2:
        return t.nd
    return None


def _render_attack_figure(path: str, original: Tensor, result: AttackResult) -> bool:
    orig = _as_image(original)
    adv = _as_image(result.adversarial)
    if orig is None or adv is None:
        return False
    plt = _pyplot()
    lo = min(orig.min(), adv.min())
    hi = max(orig.max(), adv.max())
    fig, axes = plt.subplots(1, 3, figsize=(9, 3.2))
    for ax, img, title in ((axes[0], orig, f"original: label {result.original_label}"),
                           (axes[1], adv, f"adversarial: label {result.new_label}")):
        ax.imshow(img, cmap="gray", vmin=lo, vmax=hi)
        ax.set_title(title)
        ax.axis("off")
    diff = np.abs(adv - orig)
    axes[2].imshow(diff, cmap="hot")
    axes[2].set_title("|difference|")
    axes[2].axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


# --- coverage report path -----------------------------------------------


def write_coverage_report(out_dir: str | os.PathLike, report: CoverageReport,
                          figures: bool = True) -> dict[str, str]:
    """coverage.json, a per-layer CSV, and a per-layer bar chart."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    report_path = os.path.join(out_dir, "coverage.json")
    write_json(report_path, coverage_json(report))
    written["report"] = report_path

    csv_path = os.path.join(out_dir, "coverage.csv")
    with open(csv_path, "w", encoding="utf-8") as f:
        f.write("layer,covered,total,fraction\n")
        for l in report.per_layer:
            f.write(f"{l.layer},{l.covered},{l.total},{l.fraction:.6f}\n")
    written["table"] = csv_path

    if figures and report.per_layer:
        fig_path = os.path.join(out_dir, "coverage.png")
        plt = _pyplot()
        fig, ax = plt.subplots(figsize=(6, 3.5))
        layers = [f"relu@{l.layer}" for l in report.per_layer]
        ax.bar(layers, [l.fraction for l in report.per_layer], color="#4878d0")
        ax.axhline(report.neuron_coverage, color="#d65f5f", linestyle="--",
                   label=f"overall {report.neuron_coverage:.2f}")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("fraction of units active at least once")
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        written["figure"] = fig_path
    return written
