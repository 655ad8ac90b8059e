import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lgta import numerics as nx
from lgta.numerics import Tensor


def central_diff(f, x, h=1e-5):
    """Independent oracle: central differences of scalar f at array x."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        up, down = x.copy(), x.copy()
        up[i] += h
        down[i] -= h
        g[i] = (f(up) - f(down)) / (2 * h)
    return g


def test_softmax_uniform():
    np.testing.assert_array_equal(nx.softmax(np.zeros(2)).value, [0.5, 0.5])


def test_matmul_identity():
    m = np.array([[3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(nx.matmul(np.eye(2), m).value, m)


def test_sigmoid_zero():
    assert nx.sigmoid(0.0).item() == 0.5


def test_square_derivative():
    x = Tensor(3.0, requires_grad=True)
    (g,) = nx.backward(x * x, [x])
    assert g == 6.0


def test_softmax_first_component_gradient():
    # frozen from central differences (h=1e-5): d softmax(x)_0 / dx at 0 = [1/4, -1/4]
    fd = central_diff(lambda v: np.exp(v[0]) / np.exp(v).sum(), [0.0, 0.0])
    np.testing.assert_allclose(fd, [0.25, -0.25], atol=1e-9)

    x = Tensor(np.zeros(2), requires_grad=True)
    (g,) = nx.backward(nx.softmax(x)[0], [x])
    np.testing.assert_allclose(g, [0.25, -0.25], atol=1e-12)


def test_matmul_sum_gradient():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    a = Tensor(A, requires_grad=True)
    (g,) = nx.backward(nx.tsum(a @ B), [a])
    np.testing.assert_allclose(g, np.ones((3, 2)) @ B.T, atol=1e-12)
    fd = central_diff(lambda X: (X @ B).sum(), A)
    np.testing.assert_allclose(g, fd, atol=1e-8)


def test_grad_check_quadratic_form():
    rng = np.random.default_rng(1)
    Q = rng.normal(size=(5, 5))
    Q = Q @ Q.T

    def f(t):
        x = t["x"]
        return nx.tsum(x * nx.reshape(nx.matmul(nx.reshape(x, (1, 5)), Q), (5,)))

    report = nx.grad_check(f, {"x": rng.normal(size=5)}, step=1e-5)
    assert report.max_error < 1e-7
    assert report.passed


def test_grad_check_constant():
    report = nx.grad_check(lambda t: nx.tsum(t["x"] * 0.0) + 3.0, {"x": np.ones(3)})
    np.testing.assert_array_equal(report.analytic["x"], 0.0)
    np.testing.assert_array_equal(report.errors["x"], 0.0)


def test_grad_check_lstm_step():
    rng = np.random.default_rng(2)
    H = 4
    point = {"wx": rng.normal(size=(3, 4 * H)) * 0.5, "wh": rng.normal(size=(H, 4 * H)) * 0.5,
             "b": rng.normal(size=4 * H) * 0.1}
    x = rng.normal(size=(2, 3))
    h0, c0 = rng.normal(size=(2, H)), rng.normal(size=(2, H))
    target = rng.normal(size=(2, H))

    def f(t):
        z = Tensor(x) @ t["wx"] + Tensor(h0) @ t["wh"] + t["b"]
        i, fg = nx.sigmoid(z[:, :H]), nx.sigmoid(z[:, H:2 * H])
        g, o = nx.tanh(z[:, 2 * H:3 * H]), nx.sigmoid(z[:, 3 * H:])
        c = fg * c0 + i * g
        h = o * nx.tanh(c)
        d = h - target
        return nx.tmean(d * d)

    report = nx.grad_check(f, point)
    assert report.max_error < 1e-4


UNARY = {
    "sigmoid": nx.sigmoid,
    "tanh": nx.tanh,
    "exp": nx.exp,
    "expm1": nx.expm1,
    "log": lambda t: nx.log(t * t + 0.5),
    "softmax": nx.softmax,
    "neg": nx.neg,
    "sum_axis": lambda t: nx.tsum(t, axis=0),
    "mean_axis": lambda t: nx.tmean(t, axis=1, keepdims=True),
    "slice": lambda t: t[1:, :2],
    "reshape": lambda t: nx.reshape(t, (6,)),
    "swapaxes": lambda t: nx.swapaxes(t, 0, 1),
}

BINARY = {
    "add_broadcast": lambda a, b: nx.add(a, b[0]),
    "sub": nx.sub,
    "mul": nx.mul,
    "div": lambda a, b: nx.div(a, b * b + 1.0),
    "matmul": lambda a, b: nx.matmul(a, nx.swapaxes(b, 0, 1)),
    "concat": lambda a, b: nx.concat([a, b], axis=0),
    "stack": lambda a, b: nx.stack([a, b], axis=1),
}


def _rel_err(ga, gf):
    return np.max(np.abs(ga - gf) / np.maximum(1.0, np.abs(ga) + np.abs(gf)))


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_primitive_gradients(name):
    op = UNARY[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    weights = rng.normal(size=op(Tensor(np.zeros((2, 3)))).shape)
    for _ in range(100):
        x = rng.normal(size=(2, 3))
        t = Tensor(x, requires_grad=True)
        (g,) = nx.backward(nx.tsum(op(t) * weights), [t])
        fd = central_diff(lambda v: float((op(Tensor(v)).value * weights).sum()), x)
        assert _rel_err(g, fd) < 1e-4


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_primitive_gradients(name):
    op = BINARY[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    weights = rng.normal(size=op(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3)))).shape)
    for _ in range(100):
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 3))
        ta, tb = Tensor(a, requires_grad=True), Tensor(b, requires_grad=True)
        ga, gb = nx.backward(nx.tsum(op(ta, tb) * weights), [ta, tb])
        fa = central_diff(lambda v: float((op(Tensor(v), Tensor(b)).value * weights).sum()), a)
        fb = central_diff(lambda v: float((op(Tensor(a), Tensor(v)).value * weights).sum()), b)
        assert _rel_err(ga, fa) < 1e-4
        assert _rel_err(gb, fb) < 1e-4


def test_batched_matmul_gradient():
    rng = np.random.default_rng(3)
    A, B = rng.normal(size=(2, 3, 4)), rng.normal(size=(4, 5))
    ta, tb = Tensor(A, requires_grad=True), Tensor(B, requires_grad=True)
    w = rng.normal(size=(2, 3, 5))
    ga, gb = nx.backward(nx.tsum((ta @ tb) * w), [ta, tb])
    np.testing.assert_allclose(gb, central_diff(lambda v: ((A @ v) * w).sum(), B), atol=1e-7)
    np.testing.assert_allclose(ga, central_diff(lambda v: ((v @ B) * w).sum(), A), atol=1e-7)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (4, 6), elements=st.floats(-1e3, 1e3)))
def test_softmax_rows_are_distributions(x):
    out = nx.softmax(x).value
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-12)


def test_adjoint_linearity():
    rng = np.random.default_rng(4)
    x = rng.normal(size=3)

    def parts(t):
        return nx.tsum(nx.tanh(t) * 2.0), nx.tsum(nx.exp(t * 0.3))

    t = Tensor(x, requires_grad=True)
    p, q = parts(t)
    (both,) = nx.backward(p + q, [t])
    t1 = Tensor(x, requires_grad=True)
    (g1,) = nx.backward(parts(t1)[0], [t1])
    t2 = Tensor(x, requires_grad=True)
    (g2,) = nx.backward(parts(t2)[1], [t2])
    np.testing.assert_allclose(both, g1 + g2, atol=1e-14)


def test_unreached_leaf_gets_zero():
    a, b = Tensor(np.ones(2), requires_grad=True), Tensor(np.ones(3), requires_grad=True)
    ga, gb = nx.backward(nx.tsum(a * 2.0), [a, b])
    np.testing.assert_array_equal(ga, [2.0, 2.0])
    np.testing.assert_array_equal(gb, np.zeros(3))


def test_non_scalar_root_rejected():
    a = Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        nx.backward(a * 2.0)


def test_repeated_slices_accumulate():
    x = Tensor(np.arange(4.0), requires_grad=True)
    y = nx.tsum(x[1:3]) + nx.tsum(x[2:]) * 2.0 + x[0] * x[0]
    (g,) = nx.backward(y, [x])
    np.testing.assert_array_equal(g, [0.0, 1.0, 3.0, 2.0])


@pytest.mark.parametrize("op, a, b", [
    ("matmul", (2, 3), (2, 3)),
    ("add", (2, 3), (4,)),
    ("mul", (3,), (2,)),
])
def test_shape_errors_name_op_and_shapes(op, a, b):
    fn = getattr(nx, op)
    with pytest.raises(nx.ShapeError) as info:
        fn(np.ones(a), np.ones(b))
    msg = str(info.value)
    assert op in msg and str(a) in msg and str(b) in msg


def test_constant_graph_records_nothing():
    out = nx.tanh(Tensor(np.ones(3)) * 2.0)
    assert not out.requires_grad and out.parents == ()
