import math

import numpy as np
import pytest

from ogan import ndnum as nd
from ogan import ortho
from ogan.ndnum import Rng


def _away_from_kinks(a, margin=0.05):
    return np.where(np.abs(a) < margin, np.sign(a + 1e-12) * margin + a, a)


# builders take placeholders named a, b and return a node; inputs are generated per instance
PRIMITIVE_CASES = {
    "add": (lambda a, b: a + b, [(3, 4), (4,)]),
    "sub": (lambda a, b: a - b, [(3, 4), (3, 1)]),
    "mul": (lambda a, b: a * b, [(3, 4), (3, 4)]),
    "div": (lambda a, b: a / b, [(3, 4), (4,)]),
    "matmul": (lambda a, b: nd.matmul(a, b), [(3, 4), (4, 2)]),
    "sum": (lambda a: nd.reduce_sum(a, axis=1, keepdims=True), [(3, 4)]),
    "mean": (lambda a: nd.reduce_mean(a, axis=0), [(3, 4)]),
    "square": (lambda a: nd.square(a), [(5,)]),
    "sqrt": (lambda a: nd.sqrt(a), [(5,)]),
    "exp": (lambda a: nd.exp(a), [(5,)]),
    "softplus": (lambda a: nd.softplus(a), [(5,)]),
    "relu": (lambda a: nd.relu(a), [(5,)]),
    "leaky_relu": (lambda a: nd.leaky_relu(a, 0.2), [(5,)]),
    "tanh": (lambda a: nd.tanh(a), [(5,)]),
    "bias_add": (lambda a, b: nd.bias_add(a, b), [(3, 4), (4,)]),
    "slice": (lambda a: nd.slice_(a, 1, 3, axis=1), [(3, 4)]),
    "concat": (lambda a, b: nd.concat([a, b], axis=0), [(2, 3), (1, 3)]),
}


def _instance(op, shapes, rng):
    arrays = [rng.standard_normal(s) for s in shapes]
    if op == "div":
        arrays[1] = np.sign(arrays[1]) * (0.5 + np.abs(arrays[1]))
    if op == "sqrt":
        arrays[0] = 0.2 + np.abs(arrays[0])
    if op in ("relu", "leaky_relu"):
        arrays[0] = _away_from_kinks(arrays[0])
    return arrays


@pytest.mark.parametrize("op", sorted(PRIMITIVE_CASES))
def test_primitive_gradients_match_central_differences(op):
    build, shapes = PRIMITIVE_CASES[op]
    rng = np.random.default_rng(sum(map(ord, op)))
    names = ["a", "b"][: len(shapes)]
    leaves = [nd.placeholder(n) for n in names]
    out = build(*leaves)
    worst = 0.0
    for _ in range(100):
        arrays = _instance(op, shapes, rng)
        feeds = dict(zip(names, arrays))
        weights = rng.standard_normal(nd.forward(out, feeds, dtype=np.float64).shape)
        root = nd.reduce_sum(out * nd.const(weights))
        for name in names:
            report = nd.grad_check(root, name, feeds, step=1e-3, tolerance=1e-4)
            worst = max(worst, report.max_rel_err)
    assert worst < 1e-4, f"{op}: max relative error {worst}"


def test_primitive_table_is_covered():
    assert set(PRIMITIVE_CASES) | {"stop_gradient"} == set(nd.PRIMITIVES)


def test_forward_examples():
    v = nd.placeholder("v", (2,))
    assert nd.forward(nd.matmul(nd.const(np.eye(2)), v), {"v": [3, 4]}).tolist() == [3, 4]
    assert nd.forward(nd.add(nd.const([1, 2]), nd.const([-1, -2]))).tolist() == [0, 0]
    assert abs(float(nd.forward(nd.softplus(nd.const(0.0)))) - 0.6931472) < 1e-6


def test_forward_shape_errors_name_the_node():
    a = nd.placeholder("a", (None, 3))
    b = nd.placeholder("b", (4, 2))
    with pytest.raises(nd.ShapeError) as info:
        nd.forward(nd.matmul(a, nd.placeholder("c")), {"a": np.ones((2, 3)), "c": np.ones((4, 2))})
    assert "matmul" in str(info.value) and "(2, 3)" in str(info.value)
    with pytest.raises(nd.ShapeError) as info:
        nd.forward(b, {"b": np.ones((3, 2))})
    assert info.value.shapes == ((4, 2), (3, 2))
    with pytest.raises(nd.ShapeError):
        nd.matmul(a, b)  # caught while building, shapes are static


def test_backward_examples():
    v = nd.placeholder("v")
    root = nd.reduce_sum(v)
    nd.forward(root, {"v": [1, 2, 3]})
    assert nd.backward(root)["v"].tolist() == [1, 1, 1]

    root = 0.5 * nd.reduce_sum(nd.square(v))
    nd.forward(root, {"v": [3, -4]})
    assert nd.backward(root)["v"].tolist() == [3, -4]


def test_backward_of_pearson_matches_finite_differences():
    rng = np.random.default_rng(3)
    z, zh = nd.placeholder("z"), nd.placeholder("zh")
    root = ortho.pearson(z, zh)
    feeds = {"z": rng.standard_normal(8), "zh": rng.standard_normal(8)}
    for leaf in feeds:
        assert nd.grad_check(root, leaf, feeds, step=1e-3, tolerance=1e-4).passed


def test_backward_errors():
    v = nd.placeholder("v")
    with pytest.raises(nd.GraphError, match="before forward"):
        nd.backward(nd.reduce_sum(nd.square(v)))
    vec = nd.square(v)
    nd.forward(vec, {"v": [1.0, 2.0]})
    with pytest.raises(nd.GraphError, match="scalar"):
        nd.backward(vec)


def test_every_reachable_node_gets_a_gradient():
    a, b = nd.placeholder("a"), nd.placeholder("b")
    root = nd.reduce_mean(nd.tanh(a) * nd.stop_gradient(b))
    nd.forward(root, {"a": np.ones((2, 3)), "b": np.ones((2, 3))})
    grads = nd.backward(root)
    for node in nd.topological_order([root]):
        assert node.grad is not None and node.grad.shape == node.value.shape
    assert not grads["b"].any()


def test_stop_gradient_blocks_flow():
    a = nd.placeholder("a")
    root = nd.reduce_sum(nd.stop_gradient(a) * a)
    nd.forward(root, {"a": [2.0, 3.0]})
    assert nd.backward(root)["a"].tolist() == [2.0, 3.0]


def test_forward_is_bit_deterministic():
    rng = np.random.default_rng(0)
    x = nd.placeholder("x")
    w = nd.const(rng.standard_normal((5, 7)))
    root = nd.reduce_mean(nd.tanh(nd.matmul(x, w)), axis=0)
    feed = {"x": rng.standard_normal((11, 5)).astype(np.float32)}
    first = nd.forward(root, feed).tobytes()
    assert all(nd.forward(root, feed).tobytes() == first for _ in range(5))


def test_float64_shadow_mode():
    v = nd.placeholder("v")
    assert nd.forward(nd.square(v), {"v": [1.0]}).dtype == np.float32
    assert nd.forward(nd.square(v), {"v": [1.0]}, dtype=np.float64).dtype == np.float64


def test_exact_zero_division_is_a_singularity():
    with pytest.raises(nd.SingularityError):
        nd.forward(nd.div(nd.const(1.0), nd.const(0.0)))


def test_non_finite_values_are_rejected():
    with pytest.raises(nd.NonFiniteError):
        nd.forward(nd.exp(nd.const(1000.0)))


def test_grad_check_examples():
    v = nd.placeholder("v")
    report = nd.grad_check(nd.reduce_sum(nd.square(v)), "v", {"v": [1.0, 2.0]}, tolerance=1e-4)
    assert report.passed and report.analytic.tolist() == [2.0, 4.0]

    w = np.random.default_rng(5).standard_normal(8)
    v8 = np.random.default_rng(6).standard_normal(8)
    assert nd.grad_check(ortho.pearson(v, nd.const(w)), "v", {"v": v8}, tolerance=1e-4).passed

    c = nd.const([1.0, -2.0, 0.5])
    root = nd.reduce_sum(ortho.normalize(v, eps=0.0) * c)
    with pytest.raises(nd.SingularityError):
        nd.grad_check(root, "v", {"v": [5.0, 5.0, 5.0]})


def test_grad_check_rejects_bad_step():
    v = nd.placeholder("v")
    with pytest.raises(ValueError):
        nd.grad_check(nd.reduce_sum(v), "v", {"v": [1.0]}, step=0.0)


def test_grad_check_flags_a_wrong_gradient():
    # stop_gradient hides half the true slope 2v, so the analytic side reports v
    v = nd.placeholder("v")
    root = nd.reduce_sum(nd.stop_gradient(v) * v)
    report = nd.grad_check(root, "v", {"v": [1.0, 2.0]}, tolerance=1e-4)
    assert not report.passed
    np.testing.assert_allclose(report.numeric, [2.0, 4.0], rtol=1e-8)
    assert math.isclose(report.max_rel_err, 1.0, rel_tol=1e-8)


class TestRng:
    def test_equal_seeds_equal_streams(self):
        assert np.array_equal(Rng(9).raw(1000), Rng(9).raw(1000))

    def test_different_seeds_differ(self):
        assert not np.array_equal(Rng(9).raw(1000), Rng(10).raw(1000))

    def test_counter_continuation(self):
        whole = Rng(4).raw(10)
        r = Rng(4)
        head = r.raw(3)
        tail = Rng.from_state(r.state).raw(7)
        assert np.array_equal(np.concatenate([head, tail]), whole)

    def test_matches_pure_python_splitmix(self):
        mask, golden = (1 << 64) - 1, 0x9E3779B97F4A7C15

        def mix(x):
            x &= mask
            x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & mask
            x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & mask
            return x ^ (x >> 31)

        for seed in (0, 1, 42, 2 ** 64 - 1):
            key = mix(seed + golden)
            expected = [mix(key + i * golden) for i in range(5)]
            assert [int(v) for v in Rng(seed).raw(5)] == expected

    def test_known_values_are_frozen(self):
        assert [int(v) for v in Rng(0).raw(2)] == [5197578548964807871, 12035550249420947055]
        assert int(Rng(0).split("a").raw(1)[0]) == 16867043903529022803

    def test_split_streams_are_independent_of_parent_position(self):
        r = Rng(5)
        child = r.split("data", 3).raw(4)
        r.raw(100)
        assert np.array_equal(r.split("data", 3).raw(4), child)
        assert not np.array_equal(r.split("data", 4).raw(4), child)

    def test_normal_moments(self):
        x = Rng(1).normal((20000,), dtype=np.float64)
        assert abs(x.mean()) < 0.03 and abs(x.std() - 1) < 0.03

    def test_uniform_range(self):
        u = Rng(2).uniform(10000)
        assert u.min() >= 0 and u.max() < 1

    def test_rejects_oversized_seed(self):
        with pytest.raises(ValueError):
            Rng(2 ** 64)
