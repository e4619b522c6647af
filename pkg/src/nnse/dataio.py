"""CSV input tensors, label files, and dataset directories.

An input tensor is one CSV file of comma-separated float64 values, the
row-major flattening of the model's input shape (line breaks are
insignificant). A labels file holds one integer per line. A dataset
directory holds input CSVs, read in sorted filename order, with an optional
``labels.txt``.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import MalformedJsonError, MissingFileError, ShapeMismatchError
from .tensor import Tensor, TensorShape


def read_input_csv(path: str | os.PathLike, shape: TensorShape) -> Tensor:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFileError(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
        values = [float(tok) for tok in text.replace("\n", ",").split(",") if tok.strip()]
    except ValueError as e:
        raise MalformedJsonError(f"{path}: {e}") from e
    if len(values) != shape.count:
        raise ShapeMismatchError(
            f"{path}: {len(values)} values, input shape {shape} needs {shape.count}")
    return Tensor(shape, values)


def write_input_csv(path: str | os.PathLike, tensor: Tensor) -> None:
    np.savetxt(os.fspath(path), tensor.data.reshape(1, -1), fmt="%.17g", delimiter=",")


def read_labels(path: str | os.PathLike) -> list[int]:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFileError(path)
    labels = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                labels.append(int(line))
    return labels


def write_labels(path: str | os.PathLike, labels) -> None:
    with open(os.fspath(path), "w", encoding="utf-8") as f:
        for y in labels:
            f.write(f"{int(y)}\n")


def read_dataset_dir(dir_path: str | os.PathLike,
                     shape: TensorShape) -> tuple[list[Tensor], list[int] | None]:
    """All ``*.csv`` inputs in sorted name order, plus labels.txt if present."""
    dir_path = os.fspath(dir_path)
    if not os.path.isdir(dir_path):
        raise MissingFileError(dir_path)
    names = sorted(n for n in os.listdir(dir_path) if n.endswith(".csv"))
    inputs = [read_input_csv(os.path.join(dir_path, n), shape) for n in names]
    labels_path = os.path.join(dir_path, "labels.txt")
    labels = read_labels(labels_path) if os.path.isfile(labels_path) else None
    return inputs, labels
