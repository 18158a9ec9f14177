import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedgat import autodiff as ad
from fedgat.autodiff import GradTape, ParamStore, TapeError
from oracles import grad_close, numeric_grad


def run(fn, **inputs):
    tape = GradTape()
    ts = {k: tape.param(k, v) for k, v in inputs.items()}
    return fn(**ts).values


def analytic_and_numeric(fn, inputs, seed=0):
    """Gradients of sum(fn(inputs) * R) for a fixed random R, both ways."""
    rng = np.random.default_rng(seed)
    probe = run(fn, **inputs)
    weights = rng.normal(size=probe.shape)

    def scalar():
        return float((run(fn, **inputs) * weights).sum())

    tape = GradTape()
    ts = {k: tape.param(k, v) for k, v in inputs.items()}
    out = fn(**ts)
    loss = ad.sum_all(ad.mul(out, tape.constant(weights)))
    grads = tape.backward(loss)
    return {k: (grads[k], numeric_grad(scalar, inputs[k])) for k in inputs}


def assert_gradcheck(fn, inputs, seed=0):
    for name, (a, n) in analytic_and_numeric(fn, inputs, seed).items():
        assert a.shape == inputs[name].shape
        assert grad_close(a, n), f"{name}: max |diff| {np.max(np.abs(a - n))}"


class TestMatmul:
    def test_identity(self):
        out = run(lambda a, b: ad.matmul(a, b), a=np.eye(2), b=np.array([[1.0, 2], [3, 4]]))
        np.testing.assert_array_equal(out, [[1, 2], [3, 4]])

    def test_basis_selection(self):
        out = run(lambda a, b: ad.matmul(a, b), a=np.array([[1.0, 0]]), b=np.array([[2.0], [3]]))
        np.testing.assert_array_equal(out, [[2]])

    def test_gradient_of_sum(self, rng):
        a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
        tape = GradTape()
        loss = ad.sum_all(ad.matmul(tape.param("a", a), tape.param("b", b)))
        ga = tape.backward(loss)["a"]
        gn = numeric_grad(lambda: float((a @ b).sum()), a)
        assert np.max(np.abs(ga - gn) / np.maximum(np.abs(gn), 1e-12)) < 1e-6

    def test_shape_mismatch_names_both_shapes(self):
        tape = GradTape()
        with pytest.raises(ad.DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(tape.param("a", np.zeros((2, 3))), tape.param("b", np.zeros((2, 3))))

    def test_sparse_matches_dense(self, rng):
        x = rng.normal(size=(5, 7)) * (rng.random((5, 7)) < 0.3)
        w = rng.normal(size=(7, 3))
        dense = analytic_and_numeric(lambda w: ad.matmul(ad.Tensor(x), w), {"w": w.copy()})["w"][0]
        sparse = analytic_and_numeric(lambda w: ad.sparse_matmul(sp.csr_matrix(x), w), {"w": w.copy()})["w"][0]
        np.testing.assert_allclose(sparse, dense, rtol=1e-12)


class TestActivations:
    def test_leaky_relu_values(self):
        assert run(lambda x: ad.leaky_relu(x, 0.2), x=np.array(-1.0)) == pytest.approx(-0.2)
        assert run(lambda x: ad.leaky_relu(x, 0.2), x=np.array(3.0)) == 3.0

    def test_leaky_relu_gradient(self):
        tape = GradTape()
        x = tape.param("x", np.array(-2.0))
        g = tape.backward(ad.leaky_relu(x, 0.2))["x"]
        assert g == pytest.approx(0.2)
        gn = numeric_grad(lambda: float(run(lambda x: ad.leaky_relu(x, 0.2), x=xv)), xv := np.array(-2.0))
        assert g == pytest.approx(float(gn), rel=1e-8)

    def test_relu_values(self):
        assert run(ad.relu, x=np.array(-5.0)) == 0.0
        assert run(ad.relu, x=np.array(5.0)) == 5.0

    def test_relu_subgradient_at_zero(self):
        tape = GradTape()
        x = tape.param("x", np.array([0.0]))
        assert tape.backward(ad.sum_all(ad.relu(x)))["x"][0] == 0.0

    def test_relu_gradcheck_away_from_zero(self, rng):
        x = rng.uniform(-3, 3, size=(4, 5))
        x[np.abs(x) < 0.1] = 0.5
        assert_gradcheck(ad.relu, {"x": x})

    def test_sigmoid_values(self):
        assert run(ad.sigmoid, x=np.array(0.0)) == 0.5
        xs = np.linspace(-50, 50, 101)
        s = run(ad.sigmoid, x=xs) + run(ad.sigmoid, x=-xs)
        np.testing.assert_allclose(s, 1.0, atol=1e-15)

    def test_sigmoid_extremes_are_finite(self):
        out = run(ad.sigmoid, x=np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(out))
        np.testing.assert_array_equal(out, [0.0, 1.0])

    def test_sigmoid_gradient_at_zero(self):
        tape = GradTape()
        x = tape.param("x", np.array(0.0))
        assert tape.backward(ad.sigmoid(x))["x"] == pytest.approx(0.25)
        assert_gradcheck(ad.sigmoid, {"x": np.array([0.0])})


class TestSoftmax:
    def test_uniform_row(self):
        np.testing.assert_allclose(run(ad.softmax_rows, x=np.zeros((1, 4))), [[0.25] * 4])

    def test_large_logits(self):
        out = run(ad.softmax_rows, x=np.array([[1000.0, 0.0]]))
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [[1.0, 0.0]], atol=1e-9)

    def test_jvp_matches_finite_differences(self, rng):
        x = rng.uniform(-3, 3, size=(1, 6))
        v = rng.normal(size=x.shape)
        y = run(ad.softmax_rows, x=x)
        h = 1e-5
        fd = (run(ad.softmax_rows, x=x + h * v) - run(ad.softmax_rows, x=x - h * v)) / (2 * h)
        jac = np.diag(y[0]) - np.outer(y[0], y[0])
        np.testing.assert_allclose(v @ jac, fd, rtol=1e-6, atol=1e-10)
        assert_gradcheck(ad.softmax_rows, {"x": x})

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)),
                  elements=st.floats(-700, 700, allow_nan=False)))
    def test_rows_are_distributions(self, x):
        y = run(ad.softmax_rows, x=x)
        assert np.all((y >= 0) & (y <= 1))
        np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-9)


class TestConcat:
    def test_columns(self):
        out = run(lambda a, b: ad.concat([a, b], axis=1), a=np.array([[1.0], [2]]), b=np.array([[3.0], [4]]))
        np.testing.assert_array_equal(out, [[1, 3], [2, 4]])

    def test_single_part_is_identity(self):
        tape = GradTape()
        a = tape.param("a", np.ones((2, 2)))
        assert ad.concat([a]) is a

    def test_gradient_of_sum_is_ones(self, rng):
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 4))
        tape = GradTape()
        loss = ad.sum_all(ad.concat([tape.param("a", a), tape.param("b", b)], axis=1))
        grads = tape.backward(loss)
        np.testing.assert_array_equal(grads["a"], np.ones((2, 3)))
        np.testing.assert_array_equal(grads["b"], np.ones((2, 4)))
        gn = numeric_grad(lambda: float(np.concatenate([a, b], axis=1).sum()), a)
        np.testing.assert_allclose(gn, 1.0, rtol=1e-8)

    def test_mismatch_names_part(self):
        tape = GradTape()
        parts = [tape.param("a", np.zeros((2, 1))), tape.param("b", np.zeros((2, 1))),
                 tape.param("c", np.zeros((3, 1)))]
        with pytest.raises(ad.DimensionError, match="part 2"):
            ad.concat(parts, axis=1)


class TestCrossEntropy:
    def test_perfect_prediction(self):
        assert run(lambda p: ad.cross_entropy(p, 0), p=np.array([[1.0, 0, 0, 0]])) == 0.0

    def test_uniform(self):
        for label in range(4):
            out = run(lambda p: ad.cross_entropy(p, label), p=np.full((1, 4), 0.25))
            assert float(out) == pytest.approx(math.log(4), abs=1e-12)

    def test_zero_probability_is_clamped(self):
        out = run(lambda p: ad.cross_entropy(p, 1), p=np.array([[1.0, 0, 0, 0]]))
        assert float(out) == pytest.approx(-math.log(1e-12))

    def test_label_out_of_range(self):
        tape = GradTape()
        with pytest.raises(ValueError):
            ad.cross_entropy(tape.param("p", np.full((1, 4), 0.25)), 4)

    def test_logit_gradient_is_probs_minus_onehot(self, rng):
        z = rng.uniform(-3, 3, size=(1, 4))
        tape = GradTape()
        zt = tape.param("z", z)
        probs = ad.softmax_rows(zt)
        g = tape.backward(ad.cross_entropy(probs, 2))["z"]
        onehot = np.eye(4)[2][None, :]
        np.testing.assert_allclose(g, probs.values - onehot, atol=1e-12)
        gn = numeric_grad(lambda: float(run(lambda z: ad.cross_entropy(ad.softmax_rows(z), 2), z=z)), z)
        assert grad_close(g, gn)


class TestBackward:
    def test_sum_gives_ones(self):
        tape = GradTape()
        W = tape.param("W", np.arange(6.0).reshape(2, 3))
        np.testing.assert_array_equal(tape.backward(ad.sum_all(W))["W"], np.ones((2, 3)))

    def test_zero_times_function(self, rng):
        tape = GradTape()
        W = tape.param("W", rng.normal(size=(3, 3)))
        loss = ad.scale(ad.sum_all(ad.sigmoid(ad.matmul(W, W))), 0.0)
        np.testing.assert_array_equal(tape.backward(loss)["W"], np.zeros((3, 3)))

    def test_non_scalar_loss(self):
        tape = GradTape()
        W = tape.param("W", np.ones((2, 2)))
        with pytest.raises(TapeError, match="scalar"):
            tape.backward(ad.relu(W))

    def test_unused_parameter_gets_zero_gradient(self):
        tape = GradTape()
        a = tape.param("a", np.ones(3))
        tape.param("b", np.ones((2, 2)))
        grads = tape.backward(ad.sum_all(a))
        np.testing.assert_array_equal(grads["b"], np.zeros((2, 2)))

    def test_constants_receive_nothing(self):
        tape = GradTape()
        a = tape.param("a", np.ones(3))
        c = tape.constant(np.full(3, 2.0))
        grads = tape.backward(ad.sum_all(ad.mul(a, c)))
        assert list(grads) == ["a"]
        np.testing.assert_array_equal(grads["a"], [2, 2, 2])

    def test_mixing_tapes_is_rejected(self):
        a = GradTape().param("a", np.ones((1, 1)))
        b = GradTape().param("b", np.ones((1, 1)))
        with pytest.raises(TapeError):
            ad.matmul(a, b)

    def test_disabled_tape_records_nothing(self, rng):
        tape = GradTape(enabled=False)
        W = tape.param("W", rng.normal(size=(2, 2)))
        out = ad.sum_all(ad.sigmoid(W))
        assert len(tape) == 0
        assert out.node_id is None

    def test_topological_order(self, rng):
        tape = GradTape()
        x = tape.param("x", rng.normal(size=(2, 2)))
        ad.sum_all(ad.relu(ad.matmul(x, x)))
        for nid, node in enumerate(tape._nodes):
            assert all(p is None or p < nid for p in node.parents)

    def test_broadcast_add_mul(self, rng):
        assert_gradcheck(lambda a, b: ad.mul(ad.add(a, b), a),
                         {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(4,))})

    def test_segment_ops(self, rng):
        seg = np.array([0, 0, 1, 2, 2, 2])
        assert_gradcheck(lambda x: ad.segment_softmax(x, seg, 3), {"x": rng.uniform(-3, 3, size=(6, 1))})
        assert_gradcheck(lambda x: ad.segment_sum(x, seg, 4), {"x": rng.normal(size=(6, 2))})
        y = run(lambda x: ad.segment_softmax(x, seg, 3), x=rng.normal(size=(6, 1)))
        np.testing.assert_allclose(np.bincount(seg, weights=y[:, 0]), 1.0, atol=1e-12)

    def test_index_with_repeats(self, rng):
        idx = np.array([0, 2, 2, 1, 0])
        assert_gradcheck(lambda x: ad.index(x, idx), {"x": rng.normal(size=(3, 2))})

    def test_pooling_ops(self, rng):
        assert_gradcheck(ad.mean_rows, {"x": rng.normal(size=(4, 3))})
        assert_gradcheck(ad.max_rows, {"x": rng.normal(size=(4, 3))})


ELEMENTWISE = {
    "leaky_relu": lambda x: ad.leaky_relu(x, 0.2),
    "sigmoid": ad.sigmoid,
    "softmax_rows": ad.softmax_rows,
}


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("name", sorted(ELEMENTWISE))
def test_elementwise_gradcheck_over_seeds(name, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-3, 3, size=(3, 4))
    if name == "leaky_relu":
        x[np.abs(x) < 1e-3] = 0.5
    assert_gradcheck(ELEMENTWISE[name], {"x": x}, seed)


class TestParamStore:
    def test_flatten_unflatten_bit_identity(self, rng):
        store = ParamStore([("a", rng.normal(size=(3, 2))), ("b", rng.normal(size=(5,))), ("c", np.array(7.0))])
        back = store.unflatten(store.flatten())
        assert back.schema() == store.schema()
        for k in store:
            assert back[k].tobytes() == store[k].tobytes()

    def test_same_schema_same_length(self, rng):
        s1 = ParamStore([("a", rng.normal(size=(3, 2))), ("b", np.zeros(4))])
        s2 = ParamStore([("a", rng.normal(size=(3, 2))), ("b", np.ones(4))])
        assert len(s1.flatten()) == len(s2.flatten()) == 10

    def test_wrong_length(self):
        with pytest.raises(ad.SchemaError):
            ParamStore([("a", np.zeros(3))]).unflatten(np.zeros(4))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)), min_size=1, max_size=5),
           st.integers(0, 2**32 - 1))
    def test_roundtrip_property(self, shapes, seed):
        rng = np.random.default_rng(seed)
        store = ParamStore((f"p{i}", rng.normal(size=s) * 10.0 ** rng.integers(-300, 300)) for i, s in enumerate(shapes))
        back = ParamStore.from_flat(store.schema(), store.flatten())
        assert all(back[k].tobytes() == store[k].tobytes() for k in store)


def test_determinism_of_composed_graph(rng):
    x = rng.normal(size=(4, 4))

    def once():
        tape = GradTape()
        p = tape.param("x", x)
        loss = ad.sum_all(ad.softmax_rows(ad.matmul(ad.sigmoid(p), p)))
        return loss.values.tobytes(), tape.backward(loss)["x"].tobytes()

    assert once() == once()
