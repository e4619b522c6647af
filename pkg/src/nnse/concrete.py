"""Reference forward-pass interpreter.

Produces logits, softmax probabilities, the predicted label, and the
activation pattern (per-ReLU on/off bit, per-pool window choice) that
concolic execution replays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    EmptyDatasetError,
    NonFiniteActivationError,
    ShapeMismatchError,
)
from .model import Model
from .tensor import Tensor


@dataclass(frozen=True)
class ActivationPattern:
    """Branch decisions fixed along one concrete execution.

    relu_signs maps a ReLU layer index to a flat bool array (True where the
    pre-activation was strictly positive). pool_choices maps a maxpool layer
    index to the window-local flat index chosen per window (ties resolve to
    the lowest index).
    """

    relu_signs: dict[int, np.ndarray]
    pool_choices: dict[int, np.ndarray]

    def key(self) -> tuple:
        """Hashable identity of the pattern, for dedup and counting."""
        parts = []
        for i in sorted(self.relu_signs):
            parts.append((i, self.relu_signs[i].tobytes()))
        for i in sorted(self.pool_choices):
            parts.append((i, self.pool_choices[i].tobytes()))
        return tuple(parts)


@dataclass(frozen=True)
class Prediction:
    logits: Tensor
    probabilities: Tensor | None
    label: int


def forward(model: Model, input: Tensor) -> tuple[Prediction, ActivationPattern]:
    """Evaluate the network on one input.

    The label is the argmax of the logits with lowest-index tie-break.
    Raises NonFiniteActivation if any layer output overflows.
    """
    if input.shape != model.input_shape:
        raise ShapeMismatchError(
            f"input shape {input.shape} does not match model input {model.input_shape}")
    if not np.all(np.isfinite(input.data)):
        raise ShapeMismatchError("input contains non-finite values")

    x = input.nd
    relu_signs: dict[int, np.ndarray] = {}
    pool_choices: dict[int, np.ndarray] = {}
    probabilities = None
    for i, layer in enumerate(model.layers):
        if layer.kind == "conv2d":
            p = model.params[i]
            x = kernels.conv2d(x, p.weights.nd, layer.strides) + p.biases.nd
        elif layer.kind == "dense":
            p = model.params[i]
            x = kernels.dense(x, p.weights.nd) + p.biases.nd
        elif layer.kind == "relu":
            relu_signs[i] = (x > 0.0).reshape(-1)
            x = np.maximum(x, 0.0)
        elif layer.kind == "maxpool2d":
            x, choices = kernels.maxpool(x, layer.pool, layer.strides)
            pool_choices[i] = choices
        elif layer.kind == "flatten":
            x = x.reshape(-1)
        elif layer.kind == "softmax":
            probabilities = kernels.softmax(x)
            continue  # logits are the softmax input
        if not np.all(np.isfinite(x)):
            raise NonFiniteActivationError(f"non-finite activation after layer {i}")

    logits = x.reshape(-1)
    label = int(np.argmax(logits))
    pred = Prediction(
        logits=Tensor.from_nd(logits),
        probabilities=Tensor.from_nd(probabilities) if probabilities is not None else None,
        label=label)
    return pred, ActivationPattern(relu_signs, pool_choices)


def predict(model: Model, input: Tensor) -> int:
    return forward(model, input)[0].label


def evaluate_dataset(model: Model, inputs: list[Tensor], labels: list[int]) -> float:
    """Fraction of inputs whose predicted label matches the given label."""
    if len(inputs) == 0:
        raise EmptyDatasetError("dataset is empty")
    if len(inputs) != len(labels):
        raise ShapeMismatchError(
            f"{len(inputs)} inputs but {len(labels)} labels")
    hits = sum(1 for x, y in zip(inputs, labels) if predict(model, x) == int(y))
    return hits / len(inputs)
