"""Model architecture description, on-disk format, and validating loader.

On-disk layout of a model directory:

* ``model.json`` -- architecture: ``{"name": str, "input_shape": [int...],
  "layers": [{"kind": ..., ...}]}``. Layer kinds are ``conv2d``, ``dense``,
  ``relu``, ``maxpool2d``, ``flatten``, ``softmax``.
* one ``.bin`` file per parameter tensor: raw little-endian IEEE-754
  float64, row-major, no header. Shapes live in the JSON.

Weight layouts are channels-last: conv2d kernels are ``[kh, kw, in_ch,
filters]``, dense weights are ``[in, out]``. Flatten is row-major over
``[h, w, c]``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MalformedJsonError,
    MissingFileError,
    ModelIOError,
    NonFiniteParameterError,
    ShapeMismatchError,
)
from .tensor import Tensor, TensorShape, shape_of

MODEL_JSON = "model.json"


@dataclass(frozen=True)
class Conv2DSpec:
    kind = "conv2d"
    filters: int
    kernel: tuple[int, int]
    strides: tuple[int, int]
    weights_file: str
    biases_file: str
    padding: str = "valid"

    def __post_init__(self):
        if self.padding != "valid":
            raise ShapeMismatchError(f"only 'valid' padding is supported, got {self.padding!r}")
        if self.filters < 1 or any(k < 1 for k in self.kernel) or any(s < 1 for s in self.strides):
            raise ShapeMismatchError("conv2d filters, kernel and strides must be positive")


@dataclass(frozen=True)
class DenseSpec:
    kind = "dense"
    units: int
    weights_file: str
    biases_file: str

    def __post_init__(self):
        if self.units < 1:
            raise ShapeMismatchError("dense units must be positive")


@dataclass(frozen=True)
class ReLUSpec:
    kind = "relu"


@dataclass(frozen=True)
class MaxPool2DSpec:
    kind = "maxpool2d"
    pool: tuple[int, int]
    strides: tuple[int, int]

    def __post_init__(self):
        if any(p < 1 for p in self.pool) or any(s < 1 for s in self.strides):
            raise ShapeMismatchError("maxpool2d pool and strides must be positive")


@dataclass(frozen=True)
class FlattenSpec:
    kind = "flatten"


@dataclass(frozen=True)
class SoftmaxSpec:
    kind = "softmax"


LayerSpec = Conv2DSpec | DenseSpec | ReLUSpec | MaxPool2DSpec | FlattenSpec | SoftmaxSpec

_PARAM_KINDS = ("conv2d", "dense")


@dataclass(frozen=True)
class ModelSpec:
    name: str
    input_shape: TensorShape
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if len(self.layers) == 0:
            raise ShapeMismatchError("model must have at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.kind == "softmax" and i != len(self.layers) - 1:
                raise ShapeMismatchError(
                    f"softmax may only appear as the final layer, found at layer {i}", layer=i)


@dataclass(frozen=True)
class LayerParams:
    weights: Tensor
    biases: Tensor


@dataclass(frozen=True)
class Model:
    """A loaded model: immutable after construction, safe to share."""

    spec: ModelSpec
    params: dict[int, LayerParams] = field(default_factory=dict)

    @property
    def input_shape(self) -> TensorShape:
        return self.spec.input_shape

    @property
    def layers(self) -> tuple[LayerSpec, ...]:
        return self.spec.layers

    def param_count(self) -> int:
        return sum(p.weights.data.size + p.biases.data.size for p in self.params.values())

    def with_params(self, layer_index: int, params: LayerParams) -> Model:
        """A copy of this model with one layer's parameters replaced."""
        new = dict(self.params)
        new[layer_index] = params
        return Model(self.spec, new)


def infer_shapes(spec: ModelSpec) -> list[TensorShape]:
    """Output shape of every layer in order, or ShapeMismatch where invalid."""
    shapes = []
    cur = spec.input_shape
    for i, layer in enumerate(spec.layers):
        cur = _layer_output_shape(layer, cur, i)
        shapes.append(cur)
    return shapes


def _layer_output_shape(layer: LayerSpec, inp: TensorShape, i: int) -> TensorShape:
    if layer.kind == "conv2d":
        if inp.rank != 3:
            raise ShapeMismatchError(
                f"layer {i}: conv2d needs a rank-3 [h,w,c] input, got {inp}",
                layer=i, expected="rank 3", found=inp.dims)
        h, w, _ = inp.dims
        kh, kw = layer.kernel
        sh, sw = layer.strides
        if h < kh or w < kw:
            raise ShapeMismatchError(
                f"layer {i}: kernel {kh}x{kw} larger than input {h}x{w}",
                layer=i, expected=f"input >= {kh}x{kw}", found=f"{h}x{w}")
        return shape_of(((h - kh) // sh + 1, (w - kw) // sw + 1, layer.filters))
    if layer.kind == "maxpool2d":
        if inp.rank != 3:
            raise ShapeMismatchError(
                f"layer {i}: maxpool2d needs a rank-3 [h,w,c] input, got {inp}",
                layer=i, expected="rank 3", found=inp.dims)
        h, w, c = inp.dims
        ph, pw = layer.pool
        sh, sw = layer.strides
        if h < ph or w < pw:
            raise ShapeMismatchError(
                f"layer {i}: pool {ph}x{pw} larger than input {h}x{w}",
                layer=i, expected=f"input >= {ph}x{pw}", found=f"{h}x{w}")
        return shape_of(((h - ph) // sh + 1, (w - pw) // sw + 1, c))
    if layer.kind == "flatten":
        return shape_of((inp.count,))
    if layer.kind == "dense":
        if inp.rank != 1:
            raise ShapeMismatchError(
                f"layer {i}: dense needs a rank-1 input (flatten first), got {inp}",
                layer=i, expected="rank 1", found=inp.dims)
        return shape_of((layer.units,))
    if layer.kind in ("relu", "softmax"):
        if layer.kind == "softmax" and inp.rank != 1:
            raise ShapeMismatchError(
                f"layer {i}: softmax needs a rank-1 input, got {inp}",
                layer=i, expected="rank 1", found=inp.dims)
        return inp
    raise MalformedJsonError(f"layer {i}: unknown kind {layer.kind!r}")


def param_shapes(spec: ModelSpec) -> dict[int, tuple[TensorShape, TensorShape]]:
    """Expected (weights, biases) shape per parameterized layer index."""
    out: dict[int, tuple[TensorShape, TensorShape]] = {}
    cur = spec.input_shape
    for i, layer in enumerate(spec.layers):
        if layer.kind == "conv2d":
            kh, kw = layer.kernel
            out[i] = (shape_of((kh, kw, cur.dims[2], layer.filters)), shape_of((layer.filters,)))
        elif layer.kind == "dense":
            out[i] = (shape_of((cur.dims[0], layer.units)), shape_of((layer.units,)))
        cur = _layer_output_shape(layer, cur, i)
    return out


# --- JSON (de)serialization -------------------------------------------------

def layer_to_json(layer: LayerSpec) -> dict:
    if layer.kind == "conv2d":
        return {"kind": "conv2d", "filters": layer.filters, "kernel": list(layer.kernel),
                "strides": list(layer.strides), "padding": layer.padding,
                "weights_file": layer.weights_file, "biases_file": layer.biases_file}
    if layer.kind == "dense":
        return {"kind": "dense", "units": layer.units,
                "weights_file": layer.weights_file, "biases_file": layer.biases_file}
    if layer.kind == "maxpool2d":
        return {"kind": "maxpool2d", "pool": list(layer.pool), "strides": list(layer.strides)}
    return {"kind": layer.kind}


def layer_from_json(obj: dict, i: int) -> LayerSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise MalformedJsonError(f"layer {i}: expected an object with a 'kind' key")
    kind = obj["kind"]
    try:
        if kind == "conv2d":
            return Conv2DSpec(
                filters=int(obj["filters"]),
                kernel=_int_pair(obj["kernel"]),
                strides=_int_pair(obj["strides"]),
                padding=obj.get("padding", "valid"),
                weights_file=str(obj["weights_file"]),
                biases_file=str(obj["biases_file"]))
        if kind == "dense":
            return DenseSpec(units=int(obj["units"]),
                             weights_file=str(obj["weights_file"]),
                             biases_file=str(obj["biases_file"]))
        if kind == "maxpool2d":
            return MaxPool2DSpec(pool=_int_pair(obj["pool"]), strides=_int_pair(obj["strides"]))
        if kind == "relu":
            return ReLUSpec()
        if kind == "flatten":
            return FlattenSpec()
        if kind == "softmax":
            return SoftmaxSpec()
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedJsonError(f"layer {i}: bad or missing parameter ({e})") from e
    raise MalformedJsonError(f"layer {i}: unknown layer kind {kind!r}")


def _int_pair(v) -> tuple[int, int]:
    pair = tuple(int(x) for x in v)
    if len(pair) != 2:
        raise ValueError(f"expected a pair, got {v!r}")
    return pair


def spec_to_json(spec: ModelSpec) -> dict:
    return {"name": spec.name,
            "input_shape": list(spec.input_shape.dims),
            "layers": [layer_to_json(l) for l in spec.layers]}


def spec_from_json(obj: dict) -> ModelSpec:
    if not isinstance(obj, dict):
        raise MalformedJsonError("model.json must contain a JSON object")
    try:
        name = str(obj["name"])
        input_shape = shape_of(obj["input_shape"])
        layers = tuple(layer_from_json(l, i) for i, l in enumerate(obj["layers"]))
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedJsonError(f"bad or missing model.json key ({e})") from e
    return ModelSpec(name=name, input_shape=input_shape, layers=layers)


# --- Loading and saving -----------------------------------------------------

def load_model(dir_path: str | os.PathLike) -> Model:
    """Load and validate a model directory.

    Parameter files are read with single streaming binary reads; every value
    is checked finite and every file size checked against the expected
    element count (file bytes / 8).
    """
    dir_path = os.fspath(dir_path)
    json_path = os.path.join(dir_path, MODEL_JSON)
    if not os.path.isfile(json_path):
        raise MissingFileError(json_path)
    try:
        with open(json_path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise MalformedJsonError(f"{json_path}: {e}") from e
    spec = spec_from_json(obj)
    infer_shapes(spec)  # rejects inconsistent architectures before any file I/O

    params: dict[int, LayerParams] = {}
    for i, (wshape, bshape) in param_shapes(spec).items():
        layer = spec.layers[i]
        weights = _read_param(dir_path, layer.weights_file, wshape, i)
        biases = _read_param(dir_path, layer.biases_file, bshape, i)
        params[i] = LayerParams(weights, biases)
    return Model(spec=spec, params=params)


def _read_param(dir_path: str, filename: str, shape: TensorShape, layer: int) -> Tensor:
    path = os.path.join(dir_path, filename)
    if not os.path.isfile(path):
        raise MissingFileError(path)
    nbytes = os.path.getsize(path)
    if nbytes != shape.count * 8:
        raise ShapeMismatchError(
            f"layer {layer}: {filename} holds {nbytes} bytes, "
            f"expected {shape.count * 8} for shape {shape}",
            layer=layer, expected=shape.count, found=nbytes // 8)
    data = np.fromfile(path, dtype="<f8")
    bad = np.flatnonzero(~np.isfinite(data))
    if bad.size:
        raise NonFiniteParameterError(
            f"layer {layer}: {filename} has a non-finite value at offset {bad[0]}",
            layer=layer, offset=int(bad[0]))
    return Tensor(shape, data)


def save_model(model: Model, dir_path: str | os.PathLike) -> None:
    """Write a model directory that load_model reproduces bit-exactly."""
    dir_path = os.fspath(dir_path)
    try:
        os.makedirs(dir_path, exist_ok=True)
        doc = json.dumps(spec_to_json(model.spec), indent=2, sort_keys=True) + "\n"
        with open(os.path.join(dir_path, MODEL_JSON), "w", encoding="utf-8") as f:
            f.write(doc)
        for i, p in model.params.items():
            layer = model.spec.layers[i]
            p.weights.data.astype("<f8").tofile(os.path.join(dir_path, layer.weights_file))
            p.biases.data.astype("<f8").tofile(os.path.join(dir_path, layer.biases_file))
    except OSError as e:
        raise ModelIOError(str(e)) from e


def validate_model(model: Model) -> None:
    """Check parameter presence, shapes, and finiteness for an in-memory model."""
    shapes = param_shapes(model.spec)
    for i, (wshape, bshape) in shapes.items():
        if i not in model.params:
            raise MissingFileError(f"layer {i}: parameters not loaded")
        p = model.params[i]
        if p.weights.shape != wshape or p.biases.shape != bshape:
            raise ShapeMismatchError(
                f"layer {i}: parameter shapes {p.weights.shape}/{p.biases.shape} "
                f"do not match expected {wshape}/{bshape}", layer=i)
        for t in (p.weights, p.biases):
            bad = np.flatnonzero(~np.isfinite(t.data))
            if bad.size:
                raise NonFiniteParameterError(
                    f"layer {i}: non-finite parameter at offset {bad[0]}",
                    layer=i, offset=int(bad[0]))
