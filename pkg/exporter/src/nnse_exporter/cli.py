"""Exporter command line.

``nnse-export export --model m.h5 --out DIR --golden-n 100 --dataset
mnist|cifar10|random|CSV_DIR`` converts a Keras model to the engine's
on-disk format and writes golden reference inputs/logits/labels.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .export import UnsupportedLayerError, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nnse-export")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="convert a Keras model and emit goldens")
    p.add_argument("--model", required=True, help="Keras model file (.h5 or .keras)")
    p.add_argument("--out", required=True, help="output model directory")
    p.add_argument("--golden-n", type=int, default=100)
    p.add_argument("--dataset", default="random",
                   help="mnist | cifar10 | random | path to a directory of input CSVs")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --dataset random (keeps exports reproducible)")
    p.add_argument("--name", default=None, help="model name recorded in model.json")
    args = parser.parse_args(argv)

    try:
        inputs, labels = load_dataset(args)
        manifest = export(args.model, args.out, inputs, labels, name=args.name)
    except UnsupportedLayerError as e:
        print(str(e), file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"MissingFile: {e}", file=sys.stderr)
        return 2
    print(f"exported {len(manifest.files)} files, {manifest.golden_count} goldens "
          f"-> {args.out}", file=sys.stderr)
    if manifest.accuracy is not None:
        print(f"accuracy on dataset labels: {manifest.accuracy:.4f}", file=sys.stderr)
    return 0


def load_dataset(args):
    from tensorflow import keras

    n = args.golden_n
    if n <= 0:
        return None, None
    model = keras.models.load_model(args.model, compile=False)
    shape = model.input_shape
    if isinstance(shape, list):
        shape = shape[0]
    dims = tuple(int(d) for d in shape[1:])

    if args.dataset == "mnist":
        (_, _), (x, y) = keras.datasets.mnist.load_data()
        x = x.astype(np.float64).reshape((-1,) + dims)
        return x[:n], y[:n]
    if args.dataset == "cifar10":
        (_, _), (x, y) = keras.datasets.cifar10.load_data()
        x = x.astype(np.float64).reshape((-1,) + dims)
        return x[:n], y.reshape(-1)[:n]
    if args.dataset == "random":
        rng = np.random.default_rng(args.seed)
        return rng.uniform(0.0, 255.0, size=(n,) + dims), None
    if os.path.isdir(args.dataset):
        names = sorted(f for f in os.listdir(args.dataset) if f.endswith(".csv"))[:n]
        if not names:
            raise FileNotFoundError(f"no .csv inputs in {args.dataset}")
        rows = [np.loadtxt(os.path.join(args.dataset, f), delimiter=",").reshape(dims)
                for f in names]
        labels_path = os.path.join(args.dataset, "labels.txt")
        labels = None
        if os.path.isfile(labels_path):
            labels = np.loadtxt(labels_path, dtype=np.int64)[:len(rows)]
        return np.stack(rows), labels
    raise FileNotFoundError(f"unknown dataset {args.dataset!r}")


if __name__ == "__main__":
    sys.exit(main())
