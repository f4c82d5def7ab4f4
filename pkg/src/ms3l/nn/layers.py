"""Neural network layers with explicit forward/backward passes.

Every layer caches what its backward pass needs during forward, so the call
pattern is strictly forward-then-backward on the same batch. Arrays keep the
dtype they are given; float64 mode exists for finite-difference checking.
"""

from __future__ import annotations

import math

import numpy as np


class Layer:
    """Base: parameter-free layers only override forward/backward."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def param_items(self):
        """Yields (name, param_array, grad_array) for trainable layers."""
        return ()


def _uniform_init(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                  scheme: str, dtype, gain: float = 1.0) -> np.ndarray:
    if scheme == "he":
        limit = math.sqrt(6.0 / fan_in)
    elif scheme == "xavier":
        limit = math.sqrt(6.0 / (fan_in + fan_out))
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return rng.uniform(-gain * limit, gain * limit, size=shape).astype(dtype)


class Conv2D(Layer):
    """3x3 convolution, stride 1, same padding, via im2col and one GEMM."""

    def __init__(self, name: str, c_in: int, c_out: int,
                 rng: np.random.Generator, dtype=np.float32, scheme: str = "he"):
        self.name = name
        self.c_in = c_in
        self.c_out = c_out
        self.W = _uniform_init(rng, (c_out, c_in, 3, 3),
                               fan_in=c_in * 9, fan_out=c_out * 9,
                               scheme=scheme, dtype=dtype)
        self.b = np.zeros(c_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._cols = None
        self._x_shape = None

    def forward(self, x):
        n, c, h, w = x.shape
        xp = np.zeros((n, c, h + 2, w + 2), dtype=x.dtype)
        xp[:, :, 1:-1, 1:-1] = x
        # (n, c, h, w, 3, 3) sliding view -> (n*h*w, c*9) patch matrix
        view = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
        cols = view.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * 9)
        self._cols = cols
        self._x_shape = x.shape
        wmat = self.W.reshape(self.c_out, c * 9)
        y = cols @ wmat.T
        y += self.b
        return y.reshape(n, h, w, self.c_out).transpose(0, 3, 1, 2)

    def backward(self, gy):
        n, c, h, w = self._x_shape
        gy_mat = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, self.c_out)
        self.gb = gy_mat.sum(axis=0)
        self.gW = (gy_mat.T @ self._cols).reshape(self.W.shape)
        gcols = gy_mat @ self.W.reshape(self.c_out, c * 9)
        # col2im: scatter-add each kernel tap back onto the padded grid
        gcols = gcols.reshape(n, h, w, c, 3, 3)
        gxp = np.zeros((n, c, h + 2, w + 2), dtype=gy.dtype)
        for di in range(3):
            for dj in range(3):
                gxp[:, :, di:di + h, dj:dj + w] += \
                    gcols[:, :, :, :, di, dj].transpose(0, 3, 1, 2)
        return gxp[:, :, 1:-1, 1:-1]

    def param_items(self):
        yield f"{self.name}.W", self.W, self.gW
        yield f"{self.name}.b", self.b, self.gb


class MaxPool2x2(Layer):
    """2x2 max pooling, stride 2; ties route to the first maximum."""

    def __init__(self):
        self._idx = None
        self._in_shape = None

    def forward(self, x):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError("MaxPool2x2 needs even spatial dims")
        xr = x.reshape(n, c, h // 2, 2, w // 2, 2)
        xr = xr.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        self._idx = xr.argmax(axis=-1)
        self._in_shape = x.shape
        return np.take_along_axis(xr, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, gy):
        n, c, hh, wh = gy.shape
        g = np.zeros((n, c, hh, wh, 4), dtype=gy.dtype)
        np.put_along_axis(g, self._idx[..., None], gy[..., None], axis=-1)
        g = g.reshape(n, c, hh, wh, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return g.reshape(self._in_shape)


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        return gy.reshape(self._shape)


class Dense(Layer):
    def __init__(self, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, dtype=np.float32, scheme: str = "he",
                 gain: float = 1.0):
        self.name = name
        self.W = _uniform_init(rng, (n_in, n_out), fan_in=n_in, fan_out=n_out,
                               scheme=scheme, dtype=dtype, gain=gain)
        self.b = np.zeros(n_out, dtype=dtype)
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.W + self.b

    def backward(self, gy):
        self.gW = self._x.T @ gy
        self.gb = gy.sum(axis=0)
        return gy @ self.W.T

    def param_items(self):
        yield f"{self.name}.W", self.W, self.gW
        yield f"{self.name}.b", self.b, self.gb


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, gy):
        return gy * self._mask


class Tanh(Layer):
    def __init__(self):
        self._x = None

    def forward(self, x):
        self._x = x
        return np.tanh(x)

    def backward(self, gy):
        # sech^2 from the input: 1 - y*y is exactly zero once float tanh
        # rounds to +-1, which would freeze a saturated unit permanently
        s = 1.0 / np.cosh(self._x)
        return gy * s * s


class Sigmoid(Layer):
    def __init__(self):
        self._y = None

    def forward(self, x):
        # numerically symmetric form, stable for large |x|
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        self._y = y
        return y

    def backward(self, gy):
        return gy * self._y * (1.0 - self._y)
