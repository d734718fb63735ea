import numpy as np
import pytest

cr = pytest.importorskip("corrrise")
onnx = pytest.importorskip("onnx")
from onnx import TensorProto, helper, numpy_helper  # noqa: E402
from onnx.reference import ReferenceEvaluator  # noqa: E402


def small_model(rng):
    conv_w = rng.normal(scale=0.5, size=(6, 3, 3, 3)).astype(np.float32)
    conv_b = rng.normal(scale=0.1, size=6).astype(np.float32)
    fc_w = rng.normal(size=(8, 6)).astype(np.float32)
    fc_b = rng.normal(scale=0.1, size=8).astype(np.float32)
    nodes = [
        helper.make_node("Conv", ["x", "cw", "cb"], ["c"], kernel_shape=[3, 3], pads=[1, 1, 1, 1], strides=[2, 2]),
        helper.make_node("Relu", ["c"], ["r"]),
        helper.make_node("MaxPool", ["r"], ["m"], kernel_shape=[2, 2], strides=[2, 2]),
        helper.make_node("GlobalAveragePool", ["m"], ["p"]),
        helper.make_node("Flatten", ["p"], ["f"]),
        helper.make_node("Gemm", ["f", "fw", "fb"], ["g"], transB=1),
        helper.make_node("LpNormalization", ["g"], ["y"], axis=1, p=2),
    ]
    graph = helper.make_graph(
        nodes,
        "small",
        [helper.make_tensor_value_info("x", TensorProto.FLOAT, [1, 3, 16, 16])],
        [helper.make_tensor_value_info("y", TensorProto.FLOAT, [1, 8])],
        [numpy_helper.from_array(v, n) for n, v in [("cw", conv_w), ("cb", conv_b), ("fw", fc_w), ("fb", fc_b)]],
    )
    return helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])


def test_unsupported_operator_is_rejected(rng):
    with pytest.raises(cr.BackendError, match="LpNormalization"):
        cr.onnx_backend(small_model(rng).SerializeToString())


def test_interpreter_matches_reference_evaluator(rng):
    model = small_model(rng)
    del model.graph.node[-1]
    model.graph.output[0].name = "g"
    backend = cr.onnx_backend(model.SerializeToString(), "small", mean=[0.5] * 3, std=[0.25] * 3)
    assert backend.input_shape == (16, 16, 3)
    assert backend.embedding_dim == 8
    ref = ReferenceEvaluator(model)
    for _ in range(5):
        img = rng.uniform(size=(16, 16, 3)).astype(np.float32)
        x = ((img - 0.5) / 0.25).transpose(2, 0, 1)[None].astype(np.float32)
        (expected,) = ref.run(None, {"x": x})
        np.testing.assert_allclose(backend.embed(img), expected[0], rtol=1e-4, atol=1e-5)


def test_onnx_file_backend_and_explain(tmp_path, rng):
    model = small_model(rng)
    del model.graph.node[-1]
    model.graph.output[0].name = "g"
    path = tmp_path / "small.onnx"
    onnx.save(model, str(path))
    backend = cr.load_backend(str(path))
    assert backend.id.startswith("onnx(small.onnx,sha256=")
    img = rng.uniform(size=(16, 16, 3)).astype(np.float32)
    r = cr.explain_pair(backend, img, img, num_masks=20)
    assert r["s_a"].shape == (16, 16)
    assert np.abs(r["s_a"]).max() <= 1.0
    rnd = backend.randomized(3)
    assert not np.array_equal(rnd.embed(img), backend.embed(img))
