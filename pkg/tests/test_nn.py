import numpy as np
import pytest

from fsarl.nn import Adam, Mlp, ShapeError, polyak_update


def finite_difference(net, x, g, eps=1e-5):
    """Central differences of sum(g * net(x)) with respect to every parameter."""
    base = net.params.copy()
    out = np.zeros_like(base)
    for i in range(base.size):
        net.params[i] = base[i] + eps
        up = np.sum(g * net.forward(x))
        net.params[i] = base[i] - eps
        down = np.sum(g * net.forward(x))
        net.params[i] = base[i]
        out[i] = (up - down) / (2 * eps)
    return out


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def random_config(rng):
    depth = int(rng.integers(1, 4))
    sizes = [int(rng.integers(1, 6)) for _ in range(depth + 1)]
    scale = None if rng.random() < 0.5 else float(rng.uniform(0.1, 2.0))
    net = Mlp(sizes, scale, rng, final_init=0.5)
    x = rng.normal(size=(int(rng.integers(1, 5)), sizes[0]))
    g = rng.normal(size=(x.shape[0], sizes[-1]))
    return net, x, g


def gradient_check_errors(n_configs=100, seed=0):
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n_configs):
        net, x, g = random_config(rng)
        analytic, _ = net.backward(x, g)
        errs.append(relative_error(analytic, finite_difference(net, x, g)))
    return np.array(errs)


def test_gradient_check_random_configs():
    errs = gradient_check_errors(100)
    assert errs.max() < 1e-4


def test_input_gradient_matches_finite_difference():
    rng = np.random.default_rng(1)
    net = Mlp((3, 7, 2), 1.5, rng, final_init=0.5)
    x = rng.normal(size=(4, 3))
    g = rng.normal(size=(4, 2))
    _, gx = net.backward(x, g)
    eps = 1e-5
    fd = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        fd[idx] = (np.sum(g * net(xp)) - np.sum(g * net(xm))) / (2 * eps)
    assert relative_error(gx, fd) < 1e-6


def test_parameter_count():
    net = Mlp((12, 100, 100, 2))
    assert net.n_params == 13 * 100 + 101 * 100 + 101 * 2
    assert net.params.size == net.n_params


def test_forward_examples():
    net = Mlp((3, 4, 1))
    assert net.forward(np.ones(3)) == pytest.approx([0.0])
    one = Mlp((1, 1), None)
    one.weights[0][0, 0] = 2.0
    one.biases[0][0] = 1.0
    assert one.forward([3.0]) == pytest.approx([7.0])
    relu = Mlp((1, 1, 1))
    relu.weights[0][0, 0] = 2.0
    relu.biases[0][0] = 1.0
    relu.weights[1][0, 0] = 1.0
    assert relu.forward([3.0]) == pytest.approx([7.0])
    bounded = Mlp((2, 3, 2), 0.05, np.random.default_rng(0), final_init=1.0)
    out = bounded.forward(np.full(2, 1e6))
    assert np.all(np.abs(out) <= 0.05)


def test_shape_mismatch():
    net = Mlp((3, 2))
    with pytest.raises(ShapeError):
        net.forward(np.ones(4))
    with pytest.raises(ShapeError):
        net.set_params(np.ones(3))


def test_backward_simple_cases():
    rng = np.random.default_rng(2)
    net = Mlp((3, 5, 2), None, rng)
    x = rng.normal(size=(6, 3))
    grads, gx = net.backward(x, np.zeros((6, 2)))
    assert not grads.any() and not gx.any()
    lin = Mlp((3, 2), None, rng)
    x = rng.normal(size=3)
    g = rng.normal(size=2)
    grads, _ = lin.backward(x, g)
    np.testing.assert_allclose(grads[:6].reshape(3, 2), np.outer(x, g))
    np.testing.assert_allclose(grads[6:], g)


def test_adam():
    p = np.array([1.0, -2.0])
    opt = Adam(2, lr=0.1)
    opt.step(p, np.zeros(2))
    np.testing.assert_array_equal(p, [1.0, -2.0])
    assert opt.t == 1
    for _ in range(50):
        opt.step(p, np.array([1.0, -1.0]))
    assert p[0] < 1.0 and p[1] > -2.0
    assert opt.t == 51


def test_determinism():
    def run(seed):
        rng = np.random.default_rng(seed)
        net = Mlp((4, 8, 2), 1.0, rng)
        opt = Adam(net.n_params, lr=1e-2)
        hist = []
        for _ in range(20):
            x = rng.normal(size=(8, 4))
            grads, _ = net.backward(x, net(x) - 0.3)
            opt.step(net.params, grads)
            hist.append(net.params.copy())
        return np.array(hist)

    assert np.array_equal(run(3), run(3))
    assert not np.array_equal(run(3), run(4))


def test_polyak_and_copy():
    rng = np.random.default_rng(0)
    a = Mlp((2, 3, 1), None, rng)
    b = a.copy()
    assert np.array_equal(a.params, b.params)
    b.params += 1.0
    polyak_update(a, b, 0.25)
    assert np.allclose(a.params, b.params - 0.75)
    # views stay bound to the flat vector
    assert np.shares_memory(a.weights[0], a.params)


def test_checkpoint_roundtrip(tmp_path):
    net = Mlp((4, 6, 2), 0.05, np.random.default_rng(0))
    path = tmp_path / "policy.npz"
    net.save(path)
    back = Mlp.load(path)
    assert back.sizes == net.sizes and back.out_scale == 0.05
    np.testing.assert_array_equal(back.params, net.params)
    critic = Mlp((4, 6, 1), None, np.random.default_rng(0))
    critic.save(path)
    assert Mlp.load(path).out_scale is None
