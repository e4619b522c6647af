import json
import os

import numpy as np
import pytest

from nnse.errors import (
    MalformedJsonError,
    MissingFileError,
    NonFiniteParameterError,
    ShapeMismatchError,
)
from nnse.model import (
    Conv2DSpec,
    DenseSpec,
    FlattenSpec,
    MaxPool2DSpec,
    Model,
    ModelSpec,
    ReLUSpec,
    SoftmaxSpec,
    infer_shapes,
    load_model,
    param_shapes,
    save_model,
    spec_from_json,
    spec_to_json,
)
from nnse.synth import make_image_classifier, make_toy_net
from nnse.tensor import TensorShape, shape_of


def conv_spec(**kw):
    defaults = dict(filters=4, kernel=(3, 3), strides=(1, 1),
                    weights_file="w.bin", biases_file="b.bin")
    defaults.update(kw)
    return Conv2DSpec(**defaults)


def test_infer_shapes_conv_valid_padding():
    spec = ModelSpec("m", shape_of([28, 28, 1]), (conv_spec(),))
    assert infer_shapes(spec)[-1].dims == (26, 26, 4)


def test_infer_shapes_maxpool():
    spec = ModelSpec("m", shape_of([26, 26, 4]),
                     (MaxPool2DSpec(pool=(2, 2), strides=(2, 2)),))
    assert infer_shapes(spec)[-1].dims == (13, 13, 4)


def test_infer_shapes_dense_needs_flat_input():
    spec = ModelSpec("m", shape_of([13, 13, 4]),
                     (DenseSpec(units=10, weights_file="w.bin", biases_file="b.bin"),))
    with pytest.raises(ShapeMismatchError):
        infer_shapes(spec)


def test_infer_shapes_strided_conv():
    spec = ModelSpec("m", shape_of([28, 28, 1]), (conv_spec(kernel=(5, 5), strides=(2, 3)),))
    # out_h = floor((28-5)/2)+1 = 12, out_w = floor((28-5)/3)+1 = 8
    assert infer_shapes(spec)[-1].dims == (12, 8, 4)


def test_infer_shapes_kernel_too_big():
    spec = ModelSpec("m", shape_of([4, 4, 1]), (conv_spec(kernel=(5, 5)),))
    with pytest.raises(ShapeMismatchError):
        infer_shapes(spec)


def test_softmax_only_final():
    with pytest.raises(ShapeMismatchError):
        ModelSpec("m", shape_of([4]),
                  (SoftmaxSpec(), DenseSpec(units=2, weights_file="w", biases_file="b")))


def test_tensor_shape_invariants():
    with pytest.raises(ShapeMismatchError):
        TensorShape(())
    with pytest.raises(ShapeMismatchError):
        TensorShape((3, 0))
    assert TensorShape((3, 4)).count == 12


def test_conv_weight_shape_is_khkw_in_filters(tmp_path, rng):
    spec = ModelSpec("m", shape_of([5, 5, 1]), (conv_spec(filters=2, kernel=(3, 3)),))
    (wshape, bshape) = param_shapes(spec)[0]
    assert wshape.dims == (3, 3, 1, 2) and wshape.count == 18
    assert bshape.dims == (2,)


def test_load_model_roundtrip_bit_exact(tmp_path, rng):
    model = make_image_classifier(rng)
    save_model(model, tmp_path)
    reloaded = load_model(tmp_path)
    assert reloaded.spec == model.spec  # layer order and parameters preserved
    for i, p in model.params.items():
        q = reloaded.params[i]
        assert np.array_equal(p.weights.data, q.weights.data)
        assert np.array_equal(p.biases.data, q.biases.data)


def test_resave_is_byte_identical(tmp_path, rng):
    model = make_toy_net(rng)
    a, b = tmp_path / "a", tmp_path / "b"
    save_model(model, a)
    save_model(load_model(a), b)
    for name in os.listdir(a):
        with open(a / name, "rb") as f1, open(b / name, "rb") as f2:
            assert f1.read() == f2.read(), name


def test_image_classifier_shapes(tmp_path, rng):
    model = make_image_classifier(rng)
    save_model(model, tmp_path)
    loaded = load_model(tmp_path)
    assert len(loaded.layers) == 10
    assert infer_shapes(loaded.spec)[-1].dims == (10,)
    assert loaded.param_count() > 90_000


def test_missing_model_json(tmp_path):
    with pytest.raises(MissingFileError):
        load_model(tmp_path)


def test_missing_weights_file(tmp_path, rng):
    model = make_toy_net(rng)
    save_model(model, tmp_path)
    os.remove(tmp_path / "layer0_weights.bin")
    with pytest.raises(MissingFileError):
        load_model(tmp_path)


def test_malformed_json(tmp_path):
    (tmp_path / "model.json").write_text("{not json")
    with pytest.raises(MalformedJsonError):
        load_model(tmp_path)


def test_truncated_weights_file(tmp_path, rng):
    model = make_toy_net(rng)
    save_model(model, tmp_path)
    path = tmp_path / "layer0_weights.bin"
    data = path.read_bytes()
    path.write_bytes(data[:-8])  # one value short
    with pytest.raises(ShapeMismatchError) as exc:
        load_model(tmp_path)
    assert exc.value.layer == 0


def test_oversized_weights_file(tmp_path, rng):
    model = make_toy_net(rng)
    save_model(model, tmp_path)
    path = tmp_path / "layer0_weights.bin"
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(ShapeMismatchError):
        load_model(tmp_path)


def test_non_finite_parameter_reports_offset(tmp_path, rng):
    model = make_toy_net(rng)
    save_model(model, tmp_path)
    path = tmp_path / "layer0_weights.bin"
    data = np.fromfile(path, dtype="<f8")
    data[3] = np.nan
    data.tofile(path)
    with pytest.raises(NonFiniteParameterError) as exc:
        load_model(tmp_path)
    assert exc.value.layer == 0 and exc.value.offset == 3


def test_unknown_layer_kind(tmp_path, rng):
    model = make_toy_net(rng)
    save_model(model, tmp_path)
    doc = json.loads((tmp_path / "model.json").read_text())
    doc["layers"][0]["kind"] = "sigmoid"
    (tmp_path / "model.json").write_text(json.dumps(doc))
    with pytest.raises(MalformedJsonError):
        load_model(tmp_path)


def test_json_round_trip_semantics(rng):
    model = make_image_classifier(rng)
    assert spec_from_json(spec_to_json(model.spec)) == model.spec


@pytest.mark.parametrize("mutate", [
    lambda d: d["layers"][0].update(kernel=[40, 40]),          # kernel > input
    lambda d: d["layers"].__setitem__(5, {"kind": "dense", "units": 3,
                                          "weights_file": "w", "biases_file": "b"}),
    lambda d: d.update(input_shape=[28, 28]),                  # conv needs rank 3
    lambda d: d["layers"].insert(3, {"kind": "softmax"}),      # softmax not final
    lambda d: d.update(input_shape=[28, 0, 1]),                # non-positive dim
    lambda d: d["layers"][0].pop("weights_file"),              # missing key
])
def test_mutated_specs_rejected(tmp_path, rng, mutate):
    model = make_image_classifier(rng)
    save_model(model, tmp_path)
    doc = json.loads((tmp_path / "model.json").read_text())
    mutate(doc)
    (tmp_path / "model.json").write_text(json.dumps(doc))
    with pytest.raises((ShapeMismatchError, MalformedJsonError)):
        load_model(tmp_path)


def test_fuzzed_dim_perturbations_rejected(tmp_path, rng):
    model = make_image_classifier(rng)
    save_model(model, tmp_path)
    original = (tmp_path / "model.json").read_text()
    rejected = 0
    for trial in range(30):
        doc = json.loads(original)
        # Grow a conv kernel beyond its input or shrink the input under it.
        if trial % 2 == 0:
            doc["layers"][0]["kernel"] = [int(rng.integers(29, 64))] * 2
        else:
            doc["input_shape"] = [int(rng.integers(1, 3))] * 2 + [1]
        (tmp_path / "model.json").write_text(json.dumps(doc))
        try:
            load_model(tmp_path)
        except (ShapeMismatchError, MalformedJsonError):
            rejected += 1
    assert rejected == 30


def test_with_params_returns_new_model(rng):
    model = make_toy_net(rng)
    patched = model.with_params(0, model.params[0])
    assert patched is not model and patched.spec is model.spec
    assert isinstance(patched, Model)
