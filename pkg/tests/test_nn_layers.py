import numpy as np
import pytest

from ms3l.nn.layers import Conv2D, Dense, Flatten, MaxPool2x2, ReLU, Sigmoid, Tanh


def rng64():
    return np.random.default_rng(42)


def fd_layer_grad(layer, x, probe, h=1e-6):
    """d(sum(forward(x) * probe))/dx by central differences, full tensor."""
    g = np.zeros_like(x)
    for i in range(x.size):
        orig = x.flat[i]
        x.flat[i] = orig + h
        lp = float((layer.forward(x) * probe).sum())
        x.flat[i] = orig - h
        lm = float((layer.forward(x) * probe).sum())
        x.flat[i] = orig
        g.flat[i] = (lp - lm) / (2 * h)
    return g


def test_conv_forward_matches_direct_convolution():
    rng = rng64()
    conv = Conv2D("c", 2, 3, rng, dtype=np.float64)
    x = rng.standard_normal((2, 2, 5, 4))
    y = conv.forward(x)
    assert y.shape == (2, 3, 5, 4)
    # direct scalar convolution with zero padding
    xp = np.zeros((2, 2, 7, 6))
    xp[:, :, 1:-1, 1:-1] = x
    for n in range(2):
        for o in range(3):
            for i in range(5):
                for j in range(4):
                    want = conv.b[o]
                    for c in range(2):
                        for di in range(3):
                            for dj in range(3):
                                want += conv.W[o, c, di, dj] * xp[n, c, i + di, j + dj]
                    assert abs(y[n, o, i, j] - want) < 1e-12


def test_conv_backward_gradients():
    rng = rng64()
    conv = Conv2D("c", 2, 3, rng, dtype=np.float64)
    x = rng.standard_normal((2, 2, 4, 4))
    probe = rng.standard_normal((2, 3, 4, 4))
    conv.forward(x)
    gx = conv.backward(probe)
    assert np.allclose(gx, fd_layer_grad(conv, x, probe, h=1e-6), atol=1e-8)
    # weight gradient by FD
    for _ in range(20):
        i = rng.integers(conv.W.size)
        orig = conv.W.flat[i]
        conv.W.flat[i] = orig + 1e-6
        lp = float((conv.forward(x) * probe).sum())
        conv.W.flat[i] = orig - 1e-6
        lm = float((conv.forward(x) * probe).sum())
        conv.W.flat[i] = orig
        conv.forward(x)
        conv.backward(probe)
        assert abs(conv.gW.flat[i] - (lp - lm) / 2e-6) < 1e-8
    # bias gradient is the probe sum per channel
    assert np.allclose(conv.gb, probe.sum(axis=(0, 2, 3)))


def test_maxpool_forward_and_routing():
    x = np.array([[[[1.0, 2.0, 5.0, 4.0],
                    [3.0, 0.0, 1.0, 1.0],
                    [7.0, 2.0, 0.0, 0.0],
                    [1.0, 8.0, 3.0, 9.0]]]])
    pool = MaxPool2x2()
    y = pool.forward(x)
    assert y.shape == (1, 1, 2, 2)
    assert np.array_equal(y[0, 0], [[3.0, 5.0], [8.0, 9.0]])
    g = pool.backward(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
    want = np.zeros((1, 1, 4, 4))
    want[0, 0, 1, 0] = 1.0   # 3 at (1,0)
    want[0, 0, 0, 2] = 2.0   # 5 at (0,2)
    want[0, 0, 3, 1] = 3.0   # 8 at (3,1)
    want[0, 0, 3, 3] = 4.0   # 9 at (3,3)
    assert np.array_equal(g, want)


def test_maxpool_tie_routes_to_first():
    x = np.full((1, 1, 2, 2), 2.5)
    pool = MaxPool2x2()
    pool.forward(x)
    g = pool.backward(np.array([[[[1.0]]]]))
    assert g[0, 0, 0, 0] == 1.0 and g.sum() == 1.0


def test_maxpool_rejects_odd_dims():
    with pytest.raises(ValueError):
        MaxPool2x2().forward(np.zeros((1, 1, 3, 4)))


def test_dense_gradients():
    rng = rng64()
    d = Dense("d", 5, 3, rng, dtype=np.float64)
    x = rng.standard_normal((4, 5))
    probe = rng.standard_normal((4, 3))
    d.forward(x)
    gx = d.backward(probe)
    assert np.allclose(gx, probe @ d.W.T)
    assert np.allclose(d.gW, x.T @ probe)
    assert np.allclose(d.gb, probe.sum(0))
    assert np.allclose(gx, fd_layer_grad(d, x, probe), atol=1e-8)


def test_activations_gradients():
    rng = rng64()
    x = rng.standard_normal((3, 7))
    probe = rng.standard_normal((3, 7))
    for layer in (Tanh(), Sigmoid()):
        layer.forward(x.copy())
        g = layer.backward(probe)
        assert np.allclose(g, fd_layer_grad(layer, x.copy(), probe), atol=1e-7)
    relu = ReLU()
    y = relu.forward(x)
    assert np.array_equal(y, np.maximum(x, 0))
    g = relu.backward(probe)
    assert np.array_equal(g, probe * (x > 0))


def test_sigmoid_extreme_inputs_stable():
    s = Sigmoid()
    y = s.forward(np.array([-800.0, -40.0, 0.0, 40.0, 800.0]))
    assert np.all(np.isfinite(y))
    assert y[0] >= 0.0 and y[-1] <= 1.0
    assert abs(y[2] - 0.5) < 1e-15


def test_flatten_round_trip():
    f = Flatten()
    x = np.arange(24.0).reshape(2, 3, 2, 2)
    y = f.forward(x)
    assert y.shape == (2, 12)
    assert np.array_equal(f.backward(y), x)


def test_init_schemes_bounds():
    rng = rng64()
    c = Conv2D("c", 8, 4, rng, dtype=np.float64, scheme="he")
    lim = np.sqrt(6.0 / (8 * 9))
    assert np.abs(c.W).max() <= lim and c.W.std() > 0.3 * lim
    d = Dense("d", 100, 50, rng, dtype=np.float64, scheme="xavier")
    lim = np.sqrt(6.0 / 150)
    assert np.abs(d.W).max() <= lim
    assert c.b.sum() == 0 and d.b.sum() == 0
