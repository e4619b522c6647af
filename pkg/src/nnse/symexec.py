"""Symbolic and concolic forward execution.

Chosen input positions (or the parameters of a single layer) become bounded
symbolic variables; every neuron value is then an affine expression in those
variables. Execution keeps the whole network state as a stacked array of
one constant plane plus one coefficient plane per variable, so linear layers
are ordinary batched numpy ops. ReLU units and maxpool windows whose value
depends on a symbolic variable are branch sites: concolic mode replays the
seed input's concrete decisions while recording the matching constraints;
exploration mode runs a depth-first search over all solver-feasible
decision combinations (seed-followed side first).
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .concrete import ActivationPattern, forward
from .errors import NonlinearTermError, ShapeMismatchError
from .model import LayerParams, Model, infer_shapes
from .solver import SolverResult, SolverSession
from .symexpr import (
    CONTRADICTION,
    TAUTOLOGY,
    AffineExpr,
    BranchOutcome,
    LinearConstraint,
    PathConstraint,
    Provenance,
    SymVarId,
    affine_eval_exact,
    affine_sub,
    constraint_from_branch,
    constraint_ge0,
    constraint_gt0,
    make_affine,
)
from .tensor import Tensor

DEFAULT_LOWER = 0.0
DEFAULT_UPPER = 255.0

# Provenance.layer value for constraints produced by the decision layer.
DECISION_LAYER = -1


@dataclass(frozen=True)
class MarkEntry:
    position: tuple[int, ...]
    name: str
    lower: float
    upper: float

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"bounds of {self.name} must be finite")
        if self.lower > self.upper:
            raise ValueError(f"{self.name}: lower bound {self.lower} > upper {self.upper}")


@dataclass(frozen=True)
class SymbolicMarking:
    """Which values are symbolic: input positions or one layer's parameters.

    The two modes are mutually exclusive and parameter markings are confined
    to a single layer; anything else would create products of symbolic
    values, which the linear constraint domain cannot express.
    """

    mode: str  # "inputs" | "params"
    entries: tuple[MarkEntry, ...]
    param_layer: int | None = None

    def __post_init__(self):
        if self.mode not in ("inputs", "params"):
            raise ValueError(f"unknown marking mode {self.mode!r}")
        if self.mode == "params" and self.param_layer is None and self.entries:
            raise NonlinearTermError("parameter marking requires a single layer index")
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("symbolic variable names must be unique")

    @classmethod
    def inputs(cls, positions, bounds=None) -> SymbolicMarking:
        """Mark input tensor positions symbolic.

        positions: sequence of multi-indices (a trailing channel index of 0
        may be omitted for single-channel inputs). bounds: one (lo, hi) pair
        for all, or one pair per position; defaults to [0, 255].
        """
        entries = []
        for pos, (lo, hi) in zip(positions, _per_position(bounds, len(list(positions)))):
            pos = tuple(int(i) for i in pos)
            name = "sym_" + "_".join(str(i) for i in pos)
            entries.append(MarkEntry(pos, name, float(lo), float(hi)))
        return cls(mode="inputs", entries=tuple(entries))

    @classmethod
    def params(cls, layer: int, offsets, bounds=None) -> SymbolicMarking:
        """Mark flat offsets into one layer's parameters symbolic.

        Offsets index the layer's weights tensor (row-major) first, then its
        biases: offset >= weights.size addresses bias[offset - weights.size].
        """
        offsets = [int(o) for o in offsets]
        entries = []
        for off, (lo, hi) in zip(offsets, _per_position(bounds, len(offsets))):
            entries.append(MarkEntry((off,), f"sym_p{layer}_{off}", float(lo), float(hi)))
        return cls(mode="params", entries=tuple(entries), param_layer=int(layer))

    @classmethod
    def none(cls) -> SymbolicMarking:
        return cls(mode="inputs", entries=())

    def variables(self) -> tuple[SymVarId, ...]:
        return tuple(SymVarId(i, e.name, e.lower, e.upper)
                     for i, e in enumerate(self.entries))


def _per_position(bounds, n: int) -> list[tuple[float, float]]:
    if bounds is None:
        return [(DEFAULT_LOWER, DEFAULT_UPPER)] * n
    if isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
        return [bounds] * n
    pairs = [tuple(b) for b in bounds]
    if len(pairs) != n:
        raise ValueError(f"{len(pairs)} bounds for {n} positions")
    return pairs


@dataclass(frozen=True)
class ExplorationBudget:
    max_paths: int = 1000
    max_solver_calls: int = 100000
    wall_timeout: float = 120.0

    def __post_init__(self):
        if self.max_paths < 1 or self.max_solver_calls < 1 or self.wall_timeout <= 0:
            raise ValueError("budget limits must be positive")


@dataclass
class PathResult:
    """One explored path: its constraint, symbolic logits, branch pattern,
    and (when solved) a witness with the label it concretely produces."""

    constraint: PathConstraint
    symbolic_logits: list[AffineExpr]
    pattern: ActivationPattern
    witness: dict[SymVarId, Fraction] | None
    label: int | None


@dataclass
class ExplorationOutcome:
    paths: list[PathResult]
    complete: bool  # False when a budget limit stopped the search early
    solver_calls: int
    wall_time: float


class _Stop(Exception):
    """Unwinds the DFS when a budget limit is reached."""


class _BudgetMeter:
    def __init__(self, budget: ExplorationBudget):
        self.budget = budget
        self.solver_calls = 0
        self.paths_done = 0
        self.deadline = time.monotonic() + budget.wall_timeout
        self.truncated = False

    def ensure_time(self) -> None:
        if time.monotonic() > self.deadline:
            self.truncated = True
            raise _Stop()

    def ensure_paths(self) -> None:
        if self.paths_done >= self.budget.max_paths:
            self.truncated = True
            raise _Stop()

    def charge_check(self) -> None:
        if self.solver_calls >= self.budget.max_solver_calls:
            self.truncated = True
            raise _Stop()
        self.solver_calls += 1

    def try_charge(self) -> bool:
        """Charge a solver call if budget remains; never raises."""
        if (self.solver_calls >= self.budget.max_solver_calls
                or time.monotonic() > self.deadline):
            return False
        self.solver_calls += 1
        return True


# --- marking resolution -------------------------------------------------


def _resolve_input_positions(model: Model, marking: SymbolicMarking) -> list[int]:
    """Flat row-major input offsets per marked entry, validating ranges."""
    dims = model.input_shape.dims
    flat = []
    for e in marking.entries:
        pos = e.position
        if len(pos) == len(dims) - 1 and dims[-1] == 1:
            pos = pos + (0,)
        if len(pos) != len(dims):
            raise ShapeMismatchError(
                f"position {e.position} has rank {len(e.position)}, input is {model.input_shape}")
        if any(not (0 <= p < d) for p, d in zip(pos, dims)):
            raise ShapeMismatchError(f"position {e.position} outside input shape {model.input_shape}")
        flat.append(int(np.ravel_multi_index(pos, dims)))
    if len(set(flat)) != len(flat):
        raise ShapeMismatchError("marked input positions must be unique")
    return flat


def _resolve_param_offsets(model: Model, marking: SymbolicMarking) -> tuple[int, list[int]]:
    li = marking.param_layer
    if li is None or not (0 <= li < len(model.layers)):
        raise ShapeMismatchError(f"no layer {li} in model")
    if li not in model.params:
        raise ShapeMismatchError(f"layer {li} ({model.layers[li].kind}) has no parameters")
    p = model.params[li]
    total = p.weights.data.size + p.biases.data.size
    offsets = []
    for e in marking.entries:
        off = e.position[0]
        if not (0 <= off < total):
            raise ShapeMismatchError(
                f"offset {off} outside layer {li} parameters (size {total})")
        offsets.append(off)
    if len(set(offsets)) != len(offsets):
        raise ShapeMismatchError("marked parameter offsets must be unique")
    return li, offsets


def embed_witness(model: Model, seed_input: Tensor, marking: SymbolicMarking,
                  witness: dict[SymVarId, Fraction]) -> tuple[Tensor, Model]:
    """Substitute witness values at the marked positions.

    Returns the (input, model) pair to re-execute concretely: input marking
    rewrites pixels, parameter marking rewrites one layer's parameters.
    """
    variables = marking.variables()
    if marking.mode == "inputs":
        flat = _resolve_input_positions(model, marking)
        data = seed_input.data.copy()
        for v, off in zip(variables, flat):
            data[off] = float(witness[v])
        return Tensor(seed_input.shape, data), model
    li, offsets = _resolve_param_offsets(model, marking)
    p = model.params[li]
    w = p.weights.data.copy()
    b = p.biases.data.copy()
    for v, off in zip(variables, offsets):
        if off < w.size:
            w[off] = float(witness[v])
        else:
            b[off - w.size] = float(witness[v])
    patched = model.with_params(li, LayerParams(Tensor(p.weights.shape, w),
                                                Tensor(p.biases.shape, b)))
    return seed_input, patched


# --- the executor ---------------------------------------------------------


class _SymbolicRun:
    """One symbolic execution over a model: concolic replay or DFS exploration.

    The network state is an array of shape (k+1, *layer_shape): plane 0 is
    the constant part, plane 1+i the coefficient of variable i. Branch sites
    write single state cells, and because units are visited in order every
    descent rewrites its cell before use, so backtracking needs no undo.
    """

    def __init__(self, model: Model, seed_input: Tensor, marking: SymbolicMarking,
                 explore: bool, session: SolverSession | None = None,
                 meter: _BudgetMeter | None = None, on_path=None):
        if seed_input.shape != model.input_shape:
            raise ShapeMismatchError(
                f"input shape {seed_input.shape} does not match model input {model.input_shape}")
        self.model = model
        self.seed = seed_input
        self.marking = marking
        self.vars = marking.variables()
        self.k = len(self.vars)
        self.explore = explore
        self.meter = meter
        self.on_path = on_path
        self.session = session
        self.shapes = infer_shapes(model.spec)
        self.seed_pred, self.seed_pattern = forward(model, seed_input)

        self.pc = PathConstraint(self.vars)
        self.pattern_relu: dict[int, np.ndarray] = {}
        self.pattern_pool: dict[int, np.ndarray] = {}
        for i, layer in enumerate(model.layers):
            if layer.kind == "relu":
                self.pattern_relu[i] = np.zeros(self.seed_pattern.relu_signs[i].shape, dtype=bool)
            elif layer.kind == "maxpool2d":
                self.pattern_pool[i] = np.zeros(self.seed_pattern.pool_choices[i].shape,
                                                dtype=np.intp)
        self.results: list[PathResult] = []
        self.witness: dict[SymVarId, Fraction] = {}
        self.keep_going = True

    # -- state construction

    def _initial_state(self) -> np.ndarray:
        dims = self.model.input_shape.dims
        aug = np.zeros((self.k + 1,) + dims)
        aug[0] = self.seed.nd
        if self.marking.mode == "inputs" and self.k:
            flat = _resolve_input_positions(self.model, self.marking)
            for vi, off in enumerate(flat):
                aug[0].reshape(-1)[off] = 0.0
                aug[1 + vi].reshape(-1)[off] = 1.0
        return aug

    def run(self) -> None:
        if self.marking.mode == "params" and self.k:
            _resolve_param_offsets(self.model, self.marking)  # validate up front
        # DFS recurses once per symbolic branch site; leave generous headroom.
        branch_sites = sum(a.size for a in self.pattern_relu.values())
        branch_sites += sum(a.size for a in self.pattern_pool.values())
        needed = 1000 + 4 * min(branch_sites, 4000)
        if sys.getrecursionlimit() < needed:
            sys.setrecursionlimit(needed)
        state = self._initial_state()
        try:
            self._layer(0, state)
        except _Stop:
            pass

    # -- layer dispatch

    def _layer(self, li: int, state: np.ndarray) -> None:
        if li == len(self.model.layers):
            self._complete(state)
            return
        layer = self.model.layers[li]
        if layer.kind == "conv2d" or layer.kind == "dense":
            self._layer(li + 1, self._linear(li, layer, state))
        elif layer.kind == "flatten":
            self._layer(li + 1, state.reshape(self.k + 1, -1))
        elif layer.kind == "softmax":
            self._layer(li + 1, state)  # decisions act on logits; softmax is transparent
        elif layer.kind == "relu":
            flat = state.reshape(self.k + 1, -1)
            out = np.zeros_like(flat)
            shape = state.shape[1:]
            if self.explore:
                active, forks = self._relu_plan(flat)
                self._relu_segment(li, 0, flat, out, shape, active, forks, 0)
            else:
                self._relu_concolic(li, flat, out, shape)
        elif layer.kind == "maxpool2d":
            in_shape = state.shape[1:]
            out_shape, windows = kernels.pool_windows(in_shape, layer.pool, layer.strides)
            flat = state.reshape(self.k + 1, -1)
            out = np.zeros((self.k + 1, windows.shape[0]))
            if self.explore:
                choice, forks, pruned = self._pool_plan(flat, windows)
                self._pool_segment(li, 0, flat, out, windows, out_shape,
                                   choice, forks, pruned, 0)
            else:
                self._pool_concolic(li, flat, out, windows, out_shape)

    def _linear(self, li: int, layer, state: np.ndarray) -> np.ndarray:
        if self.marking.mode == "params" and li == self.marking.param_layer and self.k:
            return self._linear_symbolic_params(li, layer, state)
        p = self.model.params[li]
        if layer.kind == "conv2d":
            out = kernels.conv2d(state, p.weights.nd, layer.strides)
        else:
            out = kernels.dense(state, p.weights.nd)
        out[0] += p.biases.nd
        return out

    def _linear_symbolic_params(self, li: int, layer, state: np.ndarray) -> np.ndarray:
        if np.any(state[1:]):
            raise NonlinearTermError(
                f"layer {li}: symbolic parameters applied to a symbolic input "
                "would create nonlinear terms")
        _, offsets = _resolve_param_offsets(self.model, self.marking)
        p = self.model.params[li]
        w = p.weights.nd.copy()
        b = p.biases.nd.copy()
        wsize = w.size
        for off in offsets:
            if off < wsize:
                w.reshape(-1)[off] = 0.0
            else:
                b[off - wsize] = 0.0
        x = state[0]
        if layer.kind == "conv2d":
            base = kernels.conv2d(x, w, layer.strides) + b
        else:
            base = kernels.dense(x, w) + b
        out = np.zeros((self.k + 1,) + base.shape)
        out[0] = base
        for vi, off in enumerate(offsets):
            if off < wsize:
                onehot = np.zeros_like(p.weights.nd)
                onehot.reshape(-1)[off] = 1.0
                if layer.kind == "conv2d":
                    out[1 + vi] = kernels.conv2d(x, onehot, layer.strides)
                else:
                    out[1 + vi] = kernels.dense(x, onehot)
            else:
                j = off - wsize
                if layer.kind == "conv2d":
                    out[1 + vi, ..., j] = 1.0
                else:
                    out[1 + vi, j] = 1.0
        return out

    # -- branch sites

    def _expr_at(self, flat: np.ndarray, idx: int) -> AffineExpr:
        return make_affine(flat[0, idx],
                           {self.vars[vi]: flat[1 + vi, idx] for vi in range(self.k)})

    def _interval(self, arr: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-cell (lo, hi, margin) of constant-plane + coefficient planes
        over the variable box. The margin absorbs float rounding so interval
        decisions are only taken with a safe gap."""
        lo = arr[0].copy()
        hi = arr[0].copy()
        mag = np.abs(arr[0])
        for vi, v in enumerate(self.vars):
            alo = arr[1 + vi] * v.lower
            ahi = arr[1 + vi] * v.upper
            lo += np.minimum(alo, ahi)
            hi += np.maximum(alo, ahi)
            mag = mag + np.maximum(np.abs(alo), np.abs(ahi))
        return lo, hi, 1e-9 * mag

    # -- ReLU layers

    def _relu_plan(self, flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Decided activation signs plus the fork positions: symbolic units
        whose sign is not already fixed by the variable bounds."""
        symbolic = np.any(flat[1:] != 0.0, axis=0)
        const_active = flat[0] > 0.0
        if not symbolic.any():
            return const_active, np.empty(0, dtype=np.intp)
        lo, hi, margin = self._interval(flat)
        forced_active = lo > margin
        forced_inactive = hi < -margin
        fork = symbolic & ~forced_active & ~forced_inactive
        active = np.where(symbolic, forced_active, const_active)
        return active, np.flatnonzero(fork)

    def _relu_segment(self, li: int, pos: int, flat: np.ndarray, out: np.ndarray,
                      shape: tuple, active: np.ndarray, forks: np.ndarray,
                      fi: int) -> None:
        if not self.keep_going:
            raise _Stop()
        n = flat.shape[1]
        nxt = int(forks[fi]) if fi < len(forks) else n
        if nxt > pos:
            seg = slice(pos, nxt)
            out[:, seg] = flat[:, seg] * active[seg]
            self.pattern_relu[li][seg] = active[seg]
        if nxt == n:
            self._layer(li + 1, out.reshape((self.k + 1,) + shape))
            return
        ui = nxt
        expr = self._expr_at(flat, ui)
        seed_active = bool(self.seed_pattern.relu_signs[li][ui])
        for take in (seed_active, not seed_active):
            self.meter.ensure_time()
            self.meter.ensure_paths()
            c = constraint_from_branch(
                expr, take, Provenance(li, ui, "active" if take else "inactive"))
            with _Descend(self, c) as feasible:
                if feasible:
                    self.pattern_relu[li][ui] = take
                    out[:, ui] = flat[:, ui] if take else 0.0
                    self._relu_segment(li, ui + 1, flat, out, shape, active, forks, fi + 1)

    def _relu_concolic(self, li: int, flat: np.ndarray, out: np.ndarray,
                       shape: tuple) -> None:
        symbolic = np.any(flat[1:] != 0.0, axis=0)
        seed_signs = self.seed_pattern.relu_signs[li]
        active = np.where(symbolic, seed_signs, flat[0] > 0.0)
        out[:] = flat * active
        self.pattern_relu[li][:] = active
        for ui in np.flatnonzero(symbolic):
            take = bool(seed_signs[ui])
            c = constraint_from_branch(
                self._expr_at(flat, ui), take,
                Provenance(li, int(ui), "active" if take else "inactive"))
            self.pc.append(c)  # symbolic pre-activation: never constant
        self._layer(li + 1, out.reshape((self.k + 1,) + shape))

    # -- maxpool layers

    def _pool_plan(self, flat: np.ndarray, windows: np.ndarray):
        """Decided choices plus fork windows with their viable candidates.

        A window is decided when no element depends on a variable (plain
        argmax) or one element surely dominates the window over the whole
        box. Candidates that some element surely beats are pruned."""
        cols = flat[:, windows]  # (k+1, n_win, w)
        n_win, w = windows.shape
        const_choice = np.argmax(cols[0], axis=1)
        symbolic_any = self.k and np.any(cols[1:] != 0.0)
        if not symbolic_any:
            return const_choice, np.empty(0, dtype=np.intp), None
        diffs = cols[:, :, :, None] - cols[:, :, None, :]  # (k+1, n_win, w, w)
        lo, hi, margin = self._interval(diffs)
        eye = np.eye(w, dtype=bool)
        beaten = hi < -margin
        beaten[:, eye] = False
        pruned = beaten.any(axis=2)              # (n_win, w)
        dominant = ((lo > margin) | eye).all(axis=2)  # (n_win, w)
        symbolic = np.any(cols[1:] != 0.0, axis=(0, 2))
        has_dominant = dominant.any(axis=1)
        choice = np.where(symbolic, np.argmax(dominant, axis=1), const_choice)
        forks = np.flatnonzero(symbolic & ~has_dominant)
        return choice, forks, pruned

    def _pool_segment(self, li: int, pos: int, flat: np.ndarray, out: np.ndarray,
                      windows: np.ndarray, out_shape: tuple, choice: np.ndarray,
                      forks: np.ndarray, pruned, fi: int) -> None:
        if not self.keep_going:
            raise _Stop()
        n = windows.shape[0]
        nxt = int(forks[fi]) if fi < len(forks) else n
        if nxt > pos:
            idx = np.arange(pos, nxt)
            out[:, idx] = flat[:, windows[idx, choice[idx]]]
            self.pattern_pool[li][idx] = choice[idx]
        if nxt == n:
            self._layer(li + 1, out.reshape((self.k + 1,) + out_shape))
            return
        wi = nxt
        exprs = [self._expr_at(flat, off) for off in windows[wi]]
        seed_choice = int(self.seed_pattern.pool_choices[li][wi])
        order = [seed_choice] + [k for k in range(len(exprs)) if k != seed_choice]
        for take in order:
            if pruned[wi, take]:
                continue  # surely beaten by another window element
            self.meter.ensure_time()
            self.meter.ensure_paths()
            constraints = self._pool_constraints(li, wi, exprs, take,
                                                 prune_contradiction=True)
            if constraints is None:
                continue
            with _Descend(self, constraints) as feasible:
                if feasible:
                    self.pattern_pool[li][wi] = take
                    out[:, wi] = flat[:, windows[wi][take]]
                    self._pool_segment(li, wi + 1, flat, out, windows, out_shape,
                                       choice, forks, pruned, fi + 1)

    def _pool_concolic(self, li: int, flat: np.ndarray, out: np.ndarray,
                       windows: np.ndarray, out_shape: tuple) -> None:
        cols = flat[:, windows]
        symbolic = (np.any(cols[1:] != 0.0, axis=(0, 2)) if self.k
                    else np.zeros(windows.shape[0], dtype=bool))
        seed_choices = self.seed_pattern.pool_choices[li]
        choice = np.where(symbolic, seed_choices, np.argmax(cols[0], axis=1))
        idx = np.arange(windows.shape[0])
        out[:] = flat[:, windows[idx, choice]]
        self.pattern_pool[li][:] = choice
        for wi in np.flatnonzero(symbolic):
            exprs = [self._expr_at(flat, off) for off in windows[wi]]
            # A contradictory comparison can only come from a float-level
            # near-tie; the seed still defines the choice, so drop it.
            for c in self._pool_constraints(li, int(wi), exprs, int(seed_choices[wi]),
                                            prune_contradiction=False):
                self.pc.append(c)
        self._layer(li + 1, out.reshape((self.k + 1,) + out_shape))

    def _pool_constraints(self, li: int, wi: int, exprs: list[AffineExpr], choice: int,
                          prune_contradiction: bool) -> list[LinearConstraint] | None:
        """Constraints making ``choice`` the window argmax under the
        lowest-index tie-break: strictly above earlier elements, at least as
        large as later ones. Tautologies are dropped; None signals a
        contradictory (infeasible) choice when pruning is requested.

        The strict side matters: with non-strict comparisons both ways, a
        window of exactly tied elements would fork one path per tied index,
        and no concrete execution can ever reproduce the higher choices.
        """
        out = []
        for j, other in enumerate(exprs):
            if j == choice:
                continue
            diff = affine_sub(exprs[choice], other)
            prov = Provenance(li, wi, f"choose{choice}")
            c = constraint_gt0(diff, prov) if j < choice else constraint_ge0(diff, prov)
            if c is CONTRADICTION:
                if prune_contradiction:
                    return None
                continue
            if c is TAUTOLOGY:
                continue
            out.append(c)
        return out

    # -- exploration bookkeeping

    def _complete(self, state: np.ndarray) -> None:
        flat = state.reshape(self.k + 1, -1)
        logits = [self._expr_at(flat, i) for i in range(flat.shape[1])]
        pattern = ActivationPattern(
            {li: a.copy() for li, a in self.pattern_relu.items()},
            {li: a.copy() for li, a in self.pattern_pool.items()})
        if self.explore:
            witness = self._polish_witness()
            adv_input, adv_model = embed_witness(self.model, self.seed, self.marking, witness)
            label = forward(adv_model, adv_input)[0].label
        else:
            witness = self._seed_witness()
            label = self.seed_pred.label
        result = PathResult(constraint=self.pc.copy(), symbolic_logits=logits,
                            pattern=pattern, witness=witness, label=label)
        self.results.append(result)
        if self.meter is not None:
            self.meter.paths_done += 1
        if self.on_path is not None and not self.on_path(result):
            self.keep_going = False
            raise _Stop()

    def _polish_witness(self) -> dict[SymVarId, Fraction]:
        """Re-center the completed path's witness off constraint boundaries.

        Witness reuse along the DFS can leave the final witness with zero
        slack on some non-strict row, where float re-execution tie-breaks
        arbitrarily; one fresh budgeted check on the full stack restores the
        solver's interior-point preference.
        """
        witness = dict(self.witness)
        pad = self.session.interior_pad
        near_boundary = any(affine_eval_exact(c.expr, witness) < pad
                            for c in self.pc.constraints)
        if not near_boundary or not self.meter.try_charge():
            return witness
        result = self.session.check()
        if result.is_sat:
            return dict(result.assignment)
        return witness

    def _seed_witness(self) -> dict[SymVarId, Fraction]:
        witness = {}
        if self.marking.mode == "inputs":
            flat = _resolve_input_positions(self.model, self.marking)
            for v, off in zip(self.vars, flat):
                witness[v] = Fraction(float(self.seed.data[off]))
        else:
            li, offsets = _resolve_param_offsets(self.model, self.marking)
            p = self.model.params[li]
            for v, off in zip(self.vars, offsets):
                if off < p.weights.data.size:
                    witness[v] = Fraction(float(p.weights.data[off]))
                else:
                    witness[v] = Fraction(float(p.biases.data[off - p.weights.data.size]))
        return witness


class _Descend:
    """Pushes one branch side's constraints for the duration of a descent.

    Feasibility is decided without a solver call when the current witness
    already satisfies the new constraints exactly; otherwise one budgeted
    check runs on the extended stack. An Unknown verdict prunes the side:
    solver incompleteness narrows the search but never mislabels a path.
    All budget stops raise before any state is mutated, so __exit__ cleanup
    stays balanced.
    """

    def __init__(self, run: _SymbolicRun, outcome):
        self.run = run
        if outcome is TAUTOLOGY:
            self.constraints = []
        elif outcome is CONTRADICTION:
            self.constraints = None
        elif isinstance(outcome, LinearConstraint):
            self.constraints = [outcome]
        else:
            self.constraints = list(outcome)
        self.pushed = False
        self.saved_witness = None

    def __enter__(self) -> bool:
        run = self.run
        if self.constraints is None:
            return False
        if not self.constraints:
            return True
        holds = all(c.holds(run.witness) for c in self.constraints)
        if not holds:
            run.meter.charge_check()  # may raise _Stop; nothing mutated yet
        self.saved_witness = run.witness
        run.session.push(self.constraints)
        for c in self.constraints:
            run.pc.append(c)
        self.pushed = True
        if holds:
            return True
        result: SolverResult = run.session.check()
        if result.is_sat:
            run.witness = result.assignment
            return True
        return False

    def __exit__(self, exc_type, exc, tb) -> bool:
        run = self.run
        if self.pushed:
            run.session.pop()
            for _ in self.constraints:
                run.pc.constraints.pop()
            run.witness = self.saved_witness
        return False


# --- public operations ------------------------------------------------------


def symbolic_forward_concolic(model: Model, input: Tensor,
                              marking: SymbolicMarking) -> PathResult:
    """Execute the path the concrete input takes, collecting its constraint.

    The returned symbolic logits are affine in the marked variables, and the
    input's own marked values satisfy the returned constraint.
    """
    run = _SymbolicRun(model, input, marking, explore=False)
    run.run()
    assert len(run.results) == 1
    return run.results[0]


def explore_paths(model: Model, marking: SymbolicMarking, seed_input: Tensor,
                  budget: ExplorationBudget,
                  session: SolverSession | None = None,
                  on_path=None) -> ExplorationOutcome:
    """Depth-first exploration of all feasible paths under the marking.

    Each branch side is solver-checked (with variable bounds implicit)
    before being entered; the seed input's side is explored first. Every
    returned path carries a Sat witness and the concrete label that witness
    produces. The outcome's ``complete`` flag is False when a budget limit
    stopped the search with work remaining.
    """
    t0 = time.perf_counter()
    meter = _BudgetMeter(budget)
    if session is None:
        session = SolverSession(marking.variables())
    run = _SymbolicRun(model, seed_input, marking, explore=True,
                       session=session, meter=meter, on_path=on_path)
    meter.charge_check()
    root = session.check()
    if not root.is_sat:
        # Bounds-only query over a finite box is always satisfiable.
        raise AssertionError("bounds-only check did not return sat")
    run.witness = root.assignment
    run.run()
    return ExplorationOutcome(paths=run.results,
                              complete=not meter.truncated,
                              solver_calls=meter.solver_calls,
                              wall_time=time.perf_counter() - t0)


def decision_constraint(symbolic_logits: list[AffineExpr], target: int) -> list[BranchOutcome]:
    """Constraints encoding ``argmax(logits) == target`` under lowest-index
    tie-break: strictly greater than earlier classes, at least as large as
    later ones. Constant comparisons resolve to Tautology/Contradiction."""
    n = len(symbolic_logits)
    if n < 2:
        raise ValueError("need at least two logits")
    if not (0 <= target < n):
        raise ValueError(f"target {target} out of range for {n} logits")
    out = []
    for j in range(n):
        if j == target:
            continue
        diff = affine_sub(symbolic_logits[target], symbolic_logits[j])
        prov = Provenance(DECISION_LAYER, j, f"argmax={target}")
        out.append(constraint_gt0(diff, prov) if j < target else constraint_ge0(diff, prov))
    return out
