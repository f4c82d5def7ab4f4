import math

import numpy as np
import pytest

from ms3l.nn.optim import Adam


def reference_adam_trace(w0, grads_per_step, lr, beta1, beta2, eps, wd):
    """Scalar 64-bit Adam from the published update rule, one weight at a time.

    Returns the list of weight vectors after each step.
    """
    w = [float(v) for v in w0]
    m = [0.0] * len(w)
    v = [0.0] * len(w)
    out = []
    for t, grads in enumerate(grads_per_step, start=1):
        bc1 = 1.0 - beta1 ** t
        bc2 = 1.0 - beta2 ** t
        for i in range(len(w)):
            g = float(grads[i]) + wd * w[i]
            m[i] = beta1 * m[i] + (1.0 - beta1) * g
            v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g)
            mhat = m[i] / bc1
            vhat = v[i] / bc2
            w[i] = w[i] - lr * mhat / (math.sqrt(vhat) + eps)
        out.append(list(w))
    return out


@pytest.mark.parametrize("wd", [0.0, 1e-4, 0.05])
def test_adam_matches_scalar_reference_10_steps(wd):
    rng = np.random.default_rng(13)
    w0 = rng.standard_normal(12)
    steps = [rng.standard_normal(12) for _ in range(10)]

    params = {"w": w0.copy().astype(np.float64)}
    opt = Adam(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=wd)
    trace = []
    for g in steps:
        opt.step({"w": g.astype(np.float64)})
        trace.append(params["w"].copy())

    want = reference_adam_trace(w0, steps, 1e-3, 0.9, 0.999, 1e-8, wd)
    for got, ref in zip(trace, want):
        assert np.max(np.abs(got - np.array(ref))) < 1e-10


def test_adam_multiple_tensors_and_shapes():
    rng = np.random.default_rng(3)
    a0 = rng.standard_normal((3, 2))
    b0 = rng.standard_normal(5)
    params = {"a": a0.copy(), "b": b0.copy()}
    opt = Adam(params, lr=0.01, weight_decay=1e-4)
    gsteps = [(rng.standard_normal((3, 2)), rng.standard_normal(5)) for _ in range(10)]
    for ga, gb in gsteps:
        opt.step({"a": ga, "b": gb})

    ref_a = reference_adam_trace(a0.ravel(), [g.ravel() for g, _ in gsteps],
                                 0.01, 0.9, 0.999, 1e-8, 1e-4)[-1]
    ref_b = reference_adam_trace(b0, [g for _, g in gsteps],
                                 0.01, 0.9, 0.999, 1e-8, 1e-4)[-1]
    assert np.max(np.abs(params["a"].ravel() - ref_a)) < 1e-10
    assert np.max(np.abs(params["b"] - ref_b)) < 1e-10


def test_adam_updates_in_place():
    w = np.ones(4)
    opt = Adam({"w": w}, lr=0.1)
    opt.step({"w": np.ones(4)})
    assert w is opt.params["w"]
    assert not np.allclose(w, 1.0)   # the caller's array moved


def test_adam_bias_correction_first_step():
    # with m=v=0 the first step moves by ~lr regardless of gradient scale
    # (up to the eps in the denominator)
    for scale in (1e-3, 1.0, 1e4):
        w = np.array([0.0])
        opt = Adam({"w": w}, lr=0.05)
        opt.step({"w": np.array([scale])})
        assert abs(abs(w[0]) - 0.05) < 1e-5


def test_adam_requires_all_grads():
    opt = Adam({"a": np.zeros(2), "b": np.zeros(2)}, lr=0.1)
    with pytest.raises(KeyError):
        opt.step({"a": np.zeros(2)})


def test_weight_decay_folds_into_gradient_not_decoupled():
    # with zero gradient, a decayed weight still moves through the moments:
    # first-step update is -lr * sign(w), not -lr * wd * w
    w = np.array([2.0])
    opt = Adam({"w": w}, lr=0.01, weight_decay=0.1)
    opt.step({"w": np.array([0.0])})
    # folded decay: g = 0.1*2 = 0.2; update ~ -lr*g/|g| = -0.01
    assert abs(w[0] - (2.0 - 0.01)) < 1e-6
