import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nnse.model import DenseSpec, LayerParams, Model, ModelSpec, ReLUSpec, SoftmaxSpec
from nnse.tensor import Tensor, shape_of

settings.register_profile(
    "ci", max_examples=100, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_stack(layer_params, relu_between=True, softmax=False, name="toy"):
    """Build a dense model from [(weights, biases), ...] matrices.

    Weights are [in, out]; a ReLU follows every layer except the last.
    """
    layers = []
    params = {}
    idx = 0
    for n, (w, b) in enumerate(layer_params):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        layers.append(DenseSpec(units=w.shape[1], weights_file=f"l{idx}_w.bin",
                                biases_file=f"l{idx}_b.bin"))
        params[idx] = LayerParams(Tensor.from_nd(w), Tensor.from_nd(b))
        idx += 1
        if relu_between and n < len(layer_params) - 1:
            layers.append(ReLUSpec())
            idx += 1
    if softmax:
        layers.append(SoftmaxSpec())
    spec = ModelSpec(name=name, input_shape=shape_of([np.asarray(layer_params[0][0]).shape[0]]),
                     layers=tuple(layers))
    return Model(spec, params)


def relu_stack(layer_params, name="toy-relu"):
    """Dense+ReLU after every layer including the last."""
    layers = []
    params = {}
    idx = 0
    for w, b in layer_params:
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        layers.append(DenseSpec(units=w.shape[1], weights_file=f"l{idx}_w.bin",
                                biases_file=f"l{idx}_b.bin"))
        params[idx] = LayerParams(Tensor.from_nd(w), Tensor.from_nd(b))
        idx += 1
        layers.append(ReLUSpec())
        idx += 1
    spec = ModelSpec(name=name, input_shape=shape_of([np.asarray(layer_params[0][0]).shape[0]]),
                     layers=tuple(layers))
    return Model(spec, params)


def toy_grid_forward(model, grid):
    """Independent dense/relu forward over a (n, d) point matrix.

    Deliberately re-implements the math (plain matmul + maximum) so oracle
    results do not route through the engine's forward pass.
    """
    acts = np.asarray(grid, dtype=np.float64)
    relu_bits = []
    for i, layer in enumerate(model.layers):
        if layer.kind == "dense":
            p = model.params[i]
            acts = acts @ p.weights.nd + p.biases.nd
        elif layer.kind == "relu":
            bits = acts > 0.0
            relu_bits.append(bits)
            acts = np.where(bits, acts, 0.0)
        elif layer.kind == "softmax":
            pass  # argmax-invariant
        else:
            raise AssertionError(f"toy oracle only handles dense/relu, got {layer.kind}")
    labels = np.argmax(acts, axis=1) if acts.ndim == 2 else None
    return acts, (np.concatenate(relu_bits, axis=1) if relu_bits else
                  np.zeros((len(acts), 0), dtype=bool)), labels


def box_grid(lo, hi, n):
    xs = np.linspace(lo, hi, n)
    return np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)


def explored_pattern_keys(paths):
    keys = set()
    for p in paths:
        bits = np.concatenate([p.pattern.relu_signs[li]
                               for li in sorted(p.pattern.relu_signs)])
        keys.add(bits.tobytes())
    return keys
