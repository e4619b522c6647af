"""Random model generation for tests, benchmarks, and exporter-free runs.

The image-classifier generator mirrors a small 10-layer convolutional
architecture (conv/relu/conv/relu/pool/flatten/dense/relu/dense/softmax,
~100k parameters on a 28x28x1 input); the toy generator builds small dense
ReLU stacks whose full path structure is cheap to enumerate.
"""

from __future__ import annotations

import numpy as np

from .model import (
    Conv2DSpec,
    DenseSpec,
    FlattenSpec,
    LayerParams,
    MaxPool2DSpec,
    Model,
    ModelSpec,
    ReLUSpec,
    SoftmaxSpec,
    param_shapes,
)
from .tensor import Tensor, shape_of


def _fill_params(spec: ModelSpec, rng: np.random.Generator, scale: float = 1.0) -> Model:
    params = {}
    for i, (wshape, bshape) in param_shapes(spec).items():
        fan_in = wshape.count // wshape.dims[-1]
        std = scale / np.sqrt(max(fan_in, 1))
        w = rng.normal(0.0, std, size=wshape.count)
        b = rng.normal(0.0, 0.1 * std, size=bshape.count)
        params[i] = LayerParams(Tensor(wshape, w), Tensor(bshape, b))
    return Model(spec, params)


def make_image_classifier(rng: np.random.Generator, name: str = "random-cnn",
                          input_hw: int = 28, classes: int = 10) -> Model:
    """A random-weight 10-layer CNN at MNIST scale (~100k parameters)."""
    spec = ModelSpec(
        name=name,
        input_shape=shape_of([input_hw, input_hw, 1]),
        layers=(
            Conv2DSpec(filters=4, kernel=(3, 3), strides=(1, 1),
                       weights_file="layer0_weights.bin", biases_file="layer0_biases.bin"),
            ReLUSpec(),
            Conv2DSpec(filters=8, kernel=(3, 3), strides=(1, 1),
                       weights_file="layer2_weights.bin", biases_file="layer2_biases.bin"),
            ReLUSpec(),
            MaxPool2DSpec(pool=(2, 2), strides=(2, 2)),
            FlattenSpec(),
            DenseSpec(units=80, weights_file="layer6_weights.bin",
                      biases_file="layer6_biases.bin"),
            ReLUSpec(),
            DenseSpec(units=classes, weights_file="layer8_weights.bin",
                      biases_file="layer8_biases.bin"),
            SoftmaxSpec(),
        ))
    return _fill_params(spec, rng)


def make_toy_net(rng: np.random.Generator, n_inputs: int = 2,
                 hidden: tuple[int, ...] = (3, 3), classes: int = 2,
                 name: str = "toy") -> Model:
    """A small dense/ReLU stack with a linear logits head (no softmax)."""
    layers: list = []
    idx = 0
    for units in hidden:
        layers.append(DenseSpec(units=units, weights_file=f"layer{idx}_weights.bin",
                                biases_file=f"layer{idx}_biases.bin"))
        layers.append(ReLUSpec())
        idx += 2
    layers.append(DenseSpec(units=classes, weights_file=f"layer{idx}_weights.bin",
                            biases_file=f"layer{idx}_biases.bin"))
    spec = ModelSpec(name=name, input_shape=shape_of([n_inputs]), layers=tuple(layers))
    return _fill_params(spec, rng)


def random_inputs(rng: np.random.Generator, model: Model, n: int,
                  lo: float = 0.0, hi: float = 255.0) -> list[Tensor]:
    shape = model.input_shape
    return [Tensor(shape, rng.uniform(lo, hi, size=shape.count)) for _ in range(n)]


def random_toy_net(rng: np.random.Generator, max_layers: int = 3,
                   max_units: int = 4, classes: int | None = None) -> Model:
    """A randomly shaped toy net within the given depth/width limits."""
    depth = int(rng.integers(1, max_layers + 1))
    hidden = tuple(int(rng.integers(1, max_units + 1)) for _ in range(depth))
    n_classes = classes if classes is not None else int(rng.integers(2, 4))
    return make_toy_net(rng, n_inputs=2, hidden=hidden, classes=n_classes)
