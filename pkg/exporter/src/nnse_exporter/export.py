"""Convert a trained Keras model into the engine's on-disk model format.

The target format (shared contract with the engine, see the engine README):

* ``model.json``: ``{"name", "input_shape", "layers": [...]}`` with layer
  kinds conv2d / dense / relu / maxpool2d / flatten / softmax.
* one raw little-endian float64 ``.bin`` per parameter tensor, row-major,
  shapes implied by the JSON. Conv kernels are ``[kh, kw, in_ch, filters]``
  and dense weights ``[in, out]``, which is exactly Keras' channels-last
  layout, so arrays are written as-is (upcast float32 -> float64).

Fused activations (``Conv2D(..., activation="relu")``) are decomposed into
a linear layer plus an explicit activation layer. The golden set (inputs,
pre-softmax logits, labels, accuracy) is computed by Keras itself on an
equivalent decomposed clone, never by re-implementing the math here.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np


class UnsupportedLayerError(Exception):
    code = "UnsupportedLayer"

    def __str__(self) -> str:
        return f"{self.code}: {super().__str__()}"


@dataclass
class ExportManifest:
    source_model: str
    files: list[dict] = field(default_factory=list)
    layer_shapes: list[dict] = field(default_factory=list)
    golden_count: int = 0
    accuracy: float | None = None

    def as_json(self) -> dict:
        return {
            "source_model": self.source_model,
            "files": self.files,
            "layer_shapes": self.layer_shapes,
            "golden": {"count": self.golden_count, "accuracy": self.accuracy,
                       "inputs": "golden/input_*.csv", "logits": "golden/logits_*.csv",
                       "labels": "golden/labels.txt"},
        }


def _activation_name(layer) -> str:
    from tensorflow import keras
    activation = getattr(layer, "activation", None)
    if activation is None:
        return "linear"
    return keras.activations.serialize(activation)


def decompose_layers(model) -> list[dict]:
    """Flatten a Keras model into the target format's layer descriptions.

    Each entry is {"kind": ..., params...} plus, for conv2d/dense, the
    weight arrays under "weights"/"biases". Raises UnsupportedLayer for
    anything outside the supported set.
    """
    from tensorflow import keras

    out: list[dict] = []

    def add_activation(name: str, where: str) -> None:
        if name == "linear":
            return
        if name == "relu":
            out.append({"kind": "relu"})
        elif name == "softmax":
            out.append({"kind": "softmax"})
        else:
            raise UnsupportedLayerError(f"{where}: activation {name!r}")

    for layer in model.layers:
        if isinstance(layer, keras.layers.InputLayer):
            continue
        if isinstance(layer, keras.layers.Conv2D):
            if layer.padding != "valid":
                raise UnsupportedLayerError(f"{layer.name}: padding {layer.padding!r}")
            weights, biases = layer.get_weights()
            out.append({"kind": "conv2d", "filters": int(layer.filters),
                        "kernel": [int(k) for k in layer.kernel_size],
                        "strides": [int(s) for s in layer.strides],
                        "padding": "valid",
                        "weights": weights.astype(np.float64),
                        "biases": biases.astype(np.float64)})
            add_activation(_activation_name(layer), layer.name)
        elif isinstance(layer, keras.layers.Dense):
            weights, biases = layer.get_weights()
            out.append({"kind": "dense", "units": int(layer.units),
                        "weights": weights.astype(np.float64),
                        "biases": biases.astype(np.float64)})
            add_activation(_activation_name(layer), layer.name)
        elif isinstance(layer, keras.layers.MaxPooling2D):
            if layer.padding != "valid":
                raise UnsupportedLayerError(f"{layer.name}: padding {layer.padding!r}")
            out.append({"kind": "maxpool2d",
                        "pool": [int(p) for p in layer.pool_size],
                        "strides": [int(s) for s in layer.strides]})
        elif isinstance(layer, keras.layers.Flatten):
            out.append({"kind": "flatten"})
        elif isinstance(layer, keras.layers.ReLU):
            out.append({"kind": "relu"})
        elif isinstance(layer, keras.layers.Softmax):
            out.append({"kind": "softmax"})
        elif isinstance(layer, keras.layers.Activation):
            add_activation(_activation_name(layer), layer.name)
        else:
            raise UnsupportedLayerError(f"{layer.name}: {type(layer).__name__}")
    if not out:
        raise UnsupportedLayerError("model has no exportable layers")
    for i, entry in enumerate(out[:-1]):
        if entry["kind"] == "softmax":
            raise UnsupportedLayerError(f"softmax at position {i} is not the final layer")
    return out


def build_clone(input_shape, entries):
    """An equivalent Keras model from decomposed entries, plus the same
    model truncated before a final softmax (the logits model)."""
    from tensorflow import keras

    inputs = keras.Input(shape=tuple(input_shape))
    x = inputs
    logits = None
    for entry in entries:
        kind = entry["kind"]
        if kind == "conv2d":
            layer = keras.layers.Conv2D(entry["filters"], tuple(entry["kernel"]),
                                        strides=tuple(entry["strides"]), padding="valid")
            x = layer(x)
            layer.set_weights([entry["weights"], entry["biases"]])
        elif kind == "dense":
            layer = keras.layers.Dense(entry["units"])
            x = layer(x)
            layer.set_weights([entry["weights"], entry["biases"]])
        elif kind == "relu":
            x = keras.layers.ReLU()(x)
        elif kind == "maxpool2d":
            x = keras.layers.MaxPooling2D(tuple(entry["pool"]),
                                          strides=tuple(entry["strides"]))(x)
        elif kind == "flatten":
            x = keras.layers.Flatten()(x)
        elif kind == "softmax":
            logits = x
            x = keras.layers.Softmax()(x)
    full = keras.Model(inputs, x)
    logits_model = keras.Model(inputs, logits if logits is not None else x)
    return full, logits_model


def model_input_shape(model) -> list[int]:
    shape = model.input_shape
    if isinstance(shape, list):
        shape = shape[0]
    dims = [int(d) for d in shape[1:]]
    if not dims or any(d <= 0 for d in dims):
        raise UnsupportedLayerError(f"cannot export input shape {shape}")
    return dims


def export(model_path: str, out_dir: str, golden_inputs: np.ndarray | None = None,
           golden_labels: np.ndarray | None = None, name: str | None = None) -> ExportManifest:
    """Write the model directory and golden reference outputs.

    golden_inputs: (N, *input_shape) float array or None to skip goldens.
    golden_labels: optional ground-truth labels; when given, the manifest
    records the clone's accuracy against them.
    """
    from tensorflow import keras

    model = keras.models.load_model(model_path, compile=False)
    input_shape = model_input_shape(model)
    entries = decompose_layers(model)
    clone, logits_model = build_clone(input_shape, entries)

    os.makedirs(out_dir, exist_ok=True)
    manifest = ExportManifest(source_model=os.path.basename(model_path))

    layers_json = []
    param_index = 0
    for entry in entries:
        doc = {"kind": entry["kind"]}
        if entry["kind"] == "conv2d":
            doc.update(filters=entry["filters"], kernel=entry["kernel"],
                       strides=entry["strides"], padding="valid")
        elif entry["kind"] == "maxpool2d":
            doc.update(pool=entry["pool"], strides=entry["strides"])
        elif entry["kind"] == "dense":
            doc.update(units=entry["units"])
        if entry["kind"] in ("conv2d", "dense"):
            wname = f"layer{param_index}_weights.bin"
            bname = f"layer{param_index}_biases.bin"
            doc.update(weights_file=wname, biases_file=bname)
            for fname, arr in ((wname, entry["weights"]), (bname, entry["biases"])):
                data = np.ascontiguousarray(arr, dtype="<f8")
                data.tofile(os.path.join(out_dir, fname))
                manifest.files.append({"name": fname, "bytes": data.nbytes,
                                       "shape": list(arr.shape)})
            manifest.layer_shapes.append({"layer": param_index, "kind": entry["kind"],
                                          "weights": list(entry["weights"].shape),
                                          "biases": list(entry["biases"].shape)})
        layers_json.append(doc)
        param_index += 1

    model_doc = {"name": name or getattr(model, "name", "exported"),
                 "input_shape": input_shape, "layers": layers_json}
    doc_text = json.dumps(model_doc, indent=2, sort_keys=True) + "\n"
    with open(os.path.join(out_dir, "model.json"), "w", encoding="utf-8") as f:
        f.write(doc_text)
    manifest.files.append({"name": "model.json", "bytes": len(doc_text.encode())})

    if golden_inputs is not None:
        _write_goldens(out_dir, manifest, clone, logits_model,
                       np.asarray(golden_inputs, dtype=np.float64), golden_labels)

    with open(os.path.join(out_dir, "export_manifest.json"), "w", encoding="utf-8") as f:
        f.write(json.dumps(manifest.as_json(), indent=2, sort_keys=True) + "\n")
    return manifest


def _write_goldens(out_dir, manifest, clone, logits_model, inputs, labels) -> None:
    golden_dir = os.path.join(out_dir, "golden")
    os.makedirs(golden_dir, exist_ok=True)
    logits = np.asarray(logits_model.predict(inputs, verbose=0), dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise UnsupportedLayerError("golden logits are not finite")
    predicted = np.argmax(logits, axis=1)
    for i in range(len(inputs)):
        flat = inputs[i].reshape(1, -1)
        np.savetxt(os.path.join(golden_dir, f"input_{i:03d}.csv"), flat,
                   fmt="%.17g", delimiter=",")
        np.savetxt(os.path.join(golden_dir, f"logits_{i:03d}.csv"),
                   logits[i].reshape(1, -1), fmt="%.12e", delimiter=",")
    with open(os.path.join(golden_dir, "labels.txt"), "w", encoding="utf-8") as f:
        for y in predicted:
            f.write(f"{int(y)}\n")
    manifest.golden_count = len(inputs)
    if labels is not None:
        manifest.accuracy = float(np.mean(predicted == np.asarray(labels)))
