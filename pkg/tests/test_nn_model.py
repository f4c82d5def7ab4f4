import math

import numpy as np
import pytest

from ms3l.nn import Network, NetworkParams, bce_loss, imitation_loss
from ms3l.nn.checkpoint import (
    CheckpointError,
    load_checkpoint,
    network_from_checkpoint,
    save_checkpoint,
)
from ms3l.nn.model import FC5_UNITS

SMALL = NetworkParams(image_size=8, in_channels=2, conv_channels=(3, 3, 4, 4),
                      dtype="float64")


def test_network_shapes():
    net = Network(SMALL, np.random.default_rng(0))
    x = np.random.default_rng(1).standard_normal((3, 2, 8, 8))
    f = net.features(x)
    assert f.shape == (3, FC5_UNITS)
    nav = net.nav_from_features(f)
    assert nav.shape == (3, 2)
    assert np.all(np.abs(nav) <= 1.0)       # tanh range
    rec = net.rec_from_features(f)
    assert rec.shape == (3, 1)
    assert np.all((rec > 0) & (rec < 1))    # sigmoid range


def test_fc5_width_is_pinned():
    # the feature width is a hard architectural constant
    assert FC5_UNITS == 256
    net = Network(SMALL, np.random.default_rng(0))
    assert net.fc5.W.shape[1] == 256
    assert net.nav.W.shape == (256, 2)
    assert net.rec1.W.shape == (256, 64)
    assert net.rec2.W.shape == (64, 1)


def test_network_params_validation():
    with pytest.raises(ValueError):
        NetworkParams(image_size=10)
    with pytest.raises(ValueError):
        NetworkParams(conv_channels=(8, 8, 8))


def test_init_is_deterministic_given_seed():
    a = Network(SMALL, np.random.default_rng(7)).param_dict()
    b = Network(SMALL, np.random.default_rng(7)).param_dict()
    c = Network(SMALL, np.random.default_rng(8)).param_dict()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert any(not np.array_equal(a[k], c[k]) for k in a)


def test_imitation_loss_hand_values():
    pred = np.array([[0.3, -0.2]])
    ref = np.array([[0.1, 0.2]])
    loss, dp = imitation_loss(pred, ref)
    assert abs(loss - 0.2) < 1e-15                  # 0.2^2 + 0.4^2
    assert np.allclose(dp, [[0.4, -0.8]])
    # batch mean
    pred2 = np.array([[1.0, 0.0], [0.0, 0.0]])
    ref2 = np.zeros((2, 2))
    loss2, dp2 = imitation_loss(pred2, ref2)
    assert abs(loss2 - 0.5) < 1e-15
    assert np.allclose(dp2, [[1.0, 0.0], [0.0, 0.0]])


def test_bce_loss_hand_values():
    p = np.array([[0.5]])
    loss, _ = bce_loss(p, np.array([1.0]))
    assert abs(loss - math.log(2.0)) < 1e-15        # the ln 2 unit case
    loss0, _ = bce_loss(p, np.array([0.0]))
    assert abs(loss0 - math.log(2.0)) < 1e-15
    # perfect confidence clamps rather than exploding
    sure = np.array([[1.0]])
    loss1, d1 = bce_loss(sure, np.array([1.0]))
    assert loss1 == pytest.approx(-math.log(1 - 1e-7), rel=1e-9)
    assert d1[0, 0] == 0.0                          # clamped: zero gradient
    # gradient formula inside the clamp
    p2 = np.array([[0.25]])
    _, d2 = bce_loss(p2, np.array([0.0]))
    assert abs(d2[0, 0] - (0.25 / (0.25 * 0.75))) < 1e-12


def test_checkpoint_round_trip_bit_exact(tmp_path):
    cfg = NetworkParams(image_size=8, in_channels=3, conv_channels=(4, 4, 6, 6),
                        dtype="float32")
    net = Network(cfg, np.random.default_rng(3))
    path = tmp_path / "net.ckpt"
    save_checkpoint(path, net, extra={"note": "unit"})
    cfg2, params, extra = load_checkpoint(path)
    assert cfg2 == cfg
    assert extra == {"note": "unit"}
    for name, arr in net.param_dict().items():
        assert params[name].tobytes() == arr.tobytes(), name
    # and a network restored from file produces identical outputs
    net2 = network_from_checkpoint(path)
    x = np.random.default_rng(4).standard_normal((2, 3, 8, 8)).astype(np.float32)
    assert np.array_equal(net.forward_nav(x), net2.forward_nav(x))
    assert np.array_equal(net.forward_rec(x), net2.forward_rec(x))


def test_checkpoint_save_load_twice_identical_bytes(tmp_path):
    net = Network(SMALL, np.random.default_rng(3))
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, net)
    save_checkpoint(p2, network_from_checkpoint(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_corruption_errors(tmp_path):
    net = Network(SMALL, np.random.default_rng(0))
    path = tmp_path / "net.ckpt"
    save_checkpoint(path, net)
    raw = path.read_bytes()
    bad = tmp_path / "bad.ckpt"

    bad.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(bad)

    bad.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(CheckpointError, match="unexpected end"):
        load_checkpoint(bad)

    bad.write_bytes(raw[:10])
    with pytest.raises(CheckpointError, match="unexpected end"):
        load_checkpoint(bad)


def test_load_param_dict_validates_names():
    net = Network(SMALL, np.random.default_rng(0))
    good = net.clone_params()
    bad = dict(good)
    del bad["nav.W"]
    with pytest.raises(ValueError, match="mismatch"):
        net.load_param_dict(bad)
    worse = dict(good)
    worse["nav.W"] = np.zeros((3, 3))
    with pytest.raises(ValueError, match="shape"):
        net.load_param_dict(worse)
