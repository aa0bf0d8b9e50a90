import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skilltransfer import numkit as nk
from skilltransfer.numkit.gradcheck import max_relative_error, numerical_grad


def scalar_loop_forward(mlp, x):
    """Evaluate every neuron by explicit loops."""
    out = []
    for row in x:
        h = list(row)
        for li, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
            nxt = []
            for j in range(w.shape[1]):
                acc = b.data[0, j]
                for i in range(w.shape[0]):
                    acc += h[i] * w.data[i, j]
                if li < len(mlp.weights) - 1:
                    acc = acc if acc > 0 else 0.0
                nxt.append(acc)
            h = nxt
        out.append(h)
    return np.array(out)


def test_zero_weight_network_outputs_zero():
    mlp = nk.Mlp([5, 7, 3], np.random.default_rng(0))
    for p in mlp.parameters():
        p.data[...] = 0.0
    out = mlp(np.random.default_rng(1).normal(size=(4, 5)))
    assert np.array_equal(out.data, np.zeros((4, 3)))


def test_identity_single_layer():
    mlp = nk.Mlp([3, 3], np.random.default_rng(0))
    mlp.weights[0].data = np.eye(3)
    x = np.array([[1.0, -2.0, 3.5]])
    assert np.array_equal(mlp(x).data, x)


def test_forward_matches_scalar_loop():
    rng = np.random.default_rng(42)
    mlp = nk.Mlp([4, 8, 3], rng)
    for b in mlp.biases:
        b.data = rng.normal(size=b.shape)
    x = rng.normal(size=(5, 4))
    np.testing.assert_allclose(mlp(x).data, scalar_loop_forward(mlp, x), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(mlp.predict(x), scalar_loop_forward(mlp, x), rtol=1e-12, atol=1e-12)


def test_forward_rejects_shape_mismatch():
    mlp = nk.Mlp([4, 8, 3], np.random.default_rng(0))
    with pytest.raises(nk.DimensionError):
        mlp(np.zeros((2, 5)))
    with pytest.raises(nk.DimensionError):
        nk.matmul(nk.Parameter(np.zeros((2, 3))), np.zeros((4, 2)))
    with pytest.raises(nk.DimensionError):
        nk.add(nk.Parameter(np.zeros((2, 3))), np.zeros((4, 2)))


def test_square_derivative():
    x = nk.Parameter(3.0)
    (x * x).backward()
    assert x.grad == pytest.approx(6.0)


def test_constant_loss_gives_zero_grads():
    mlp = nk.Mlp([2, 4, 1], np.random.default_rng(0))
    loss = nk.sum(mlp(np.ones((3, 2)))) * 0.0 + 5.0
    loss.backward()
    for p in mlp.parameters():
        assert np.all(p.grad == 0)


def test_non_scalar_backward_rejected():
    x = nk.Parameter(np.ones(3))
    with pytest.raises(nk.ContractError):
        (x * 2).backward()


def test_mlp_least_squares_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    mlp = nk.Mlp([4, 8, 8, 2], rng)
    x = rng.normal(size=(6, 4))
    y = rng.normal(size=(6, 2))

    def loss():
        return nk.mean((mlp(x) - y) ** 2)

    loss().backward()
    numeric = numerical_grad(lambda: loss().data, mlp.parameters(), eps=1e-5)
    for p, g in zip(mlp.parameters(), numeric):
        assert max_relative_error(p.grad, g) < 1e-4


UNARY = {
    "exp": nk.exp, "tanh": nk.tanh, "sin": nk.sin, "cos": nk.cos,
    "softplus": nk.softplus, "relu": nk.relu, "abs": nk.absolute, "arcsin": lambda t: nk.arcsin(nk.tanh(t) * 0.8),
    "arctan2": lambda t: nk.arctan2(t, t * t + 0.3),
    "log": lambda t: nk.log(t * t + 1.0), "sqrt": lambda t: nk.sqrt(t * t + 0.5),
    "arctanh": lambda t: nk.arctanh(nk.tanh(t) * 0.9),
    "clip": lambda t: nk.clip(t, -0.7, 0.6), "norm": lambda t: nk.norm(t, axis=-1, keepdims=True),
}


@pytest.mark.parametrize("name", sorted(UNARY))
def test_unary_ops_gradcheck(name):
    rng = np.random.default_rng(3)
    x = nk.Parameter(rng.normal(size=(3, 4)))
    w = rng.normal(size=(3, 4))
    fn = UNARY[name]

    def loss():
        return nk.sum(fn(x) * w)

    loss().backward()
    (num,) = numerical_grad(lambda: loss().data, [x])
    assert max_relative_error(x.grad, num) < 1e-4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_composite_ops_gradcheck(seed):
    rng = np.random.default_rng(seed)
    a = nk.Parameter(rng.normal(size=(4, 3)))
    b = nk.Parameter(rng.normal(size=(3,)))
    m = nk.Parameter(rng.normal(size=(4, 3, 3)))

    def loss():
        c = nk.cross(a, b)
        rot = nk.matmul(m, nk.reshape(a, (4, 3, 1)))[..., 0]
        s = nk.stack([c[:, 0], rot[:, 1], nk.dot(a, b)], axis=-1)
        z = nk.concat([s, a / (nk.norm(a, keepdims=True) + 1.0)], axis=-1)
        z = nk.where(np.arange(6) % 2 == 0, z, -z * 2.0)
        return nk.mean(nk.maximum(z, 0.1 * z) ** 2) + nk.sum(m.T[0]) * 0.3

    loss().backward()
    numeric = numerical_grad(lambda: loss().data, [a, b, m])
    for p, g in zip([a, b, m], numeric):
        assert max_relative_error(p.grad, g) < 1e-4


def test_adam_zero_gradients_leave_params():
    p = nk.Parameter(np.array([1.0, -2.0]))
    state = nk.AdamState(lr=0.1)
    for _ in range(10):
        nk.adam_step([p], state)
    assert np.array_equal(p.data, [1.0, -2.0])
    assert state.step == 10


def test_adam_first_step_magnitude_is_lr():
    p = nk.Parameter(np.array(0.5))
    p.grad = np.array(1.0)
    nk.adam_step([p], nk.AdamState(lr=0.1))
    assert p.data == pytest.approx(0.4, abs=1e-6)


def test_adam_converges_on_convex_quadratic():
    a = np.array([[3.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -2.0])
    target = np.linalg.solve(a, b)
    x = nk.Parameter(np.zeros((2, 1)))
    state = nk.AdamState(lr=0.01)
    for _ in range(5000):
        x.zero_grad()
        loss = 0.5 * nk.sum(x * nk.matmul(a, x)) - nk.sum(x[:, 0] * b)
        loss.backward()
        nk.adam_step([x], state)
    assert np.max(np.abs(x.data[:, 0] - target)) < 1e-3


def test_determinism_same_seed():
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(11)
        mlp = nk.Mlp([3, 5, 2], rng)
        state = nk.AdamState(lr=1e-2)
        x = rng.normal(size=(8, 3))
        for _ in range(20):
            nk.zero_grad(mlp.parameters())
            nk.mean(mlp(x) ** 2).backward()
            nk.adam_step(mlp.parameters(), state)
        runs.append(np.concatenate([p.data.ravel() for p in mlp.parameters()]))
    assert np.array_equal(runs[0], runs[1])


def test_frozen_network_passes_input_gradient_only():
    mlp = nk.Mlp([2, 3, 1], np.random.default_rng(0)).freeze()
    x = nk.Parameter(np.array([[0.3, -0.2]]))
    nk.sum(mlp(x)).backward()
    assert np.any(x.grad != 0)
    assert all(np.all(p.grad == 0) for p in mlp.parameters())
