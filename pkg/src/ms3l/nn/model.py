"""The shared-trunk policy network with navigation and recording heads.

Trunk: conv3x3 -> conv3x3 -> pool -> conv3x3 -> conv3x3 -> pool -> fc5(256),
ReLU everywhere. Navigation head maps fc5 to two tanh outputs (the normalized
drive command); the recording head stacks fc(64)+ReLU and fc(1)+sigmoid on
the same features. fc5 width is pinned at 256.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Conv2D, Dense, Flatten, MaxPool2x2, ReLU, Sigmoid, Tanh

FC5_UNITS = 256
BCE_CLAMP = 1e-7
HEAD_GAIN = 0.01


@dataclass(frozen=True)
class NetworkParams:
    image_size: int = 64
    in_channels: int = 3
    conv_channels: tuple[int, int, int, int] = (16, 16, 32, 32)
    dtype: str = "float32"
    single_pool: bool = False     # pool only after conv2 (large-input variant)

    def __post_init__(self):
        div = 2 if self.single_pool else 4
        if self.image_size % div != 0:
            raise ValueError(f"image_size must be divisible by {div}")
        if len(self.conv_channels) != 4:
            raise ValueError("conv_channels must have exactly 4 entries")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def fc5_in(self) -> int:
        s = self.image_size // (2 if self.single_pool else 4)
        return self.conv_channels[3] * s * s


class Network:
    """Policy network; single-threaded, forward caches feed backward."""

    def __init__(self, cfg: NetworkParams, rng: np.random.Generator):
        self.cfg = cfg
        dt = cfg.np_dtype
        ch = cfg.conv_channels
        # canonical parameter order: trunk, nav head, rec head
        self.conv1 = Conv2D("conv1", cfg.in_channels, ch[0], rng, dt, "he")
        self.conv2 = Conv2D("conv2", ch[0], ch[1], rng, dt, "he")
        self.conv3 = Conv2D("conv3", ch[1], ch[2], rng, dt, "he")
        self.conv4 = Conv2D("conv4", ch[2], ch[3], rng, dt, "he")
        self.fc5 = Dense("fc5", cfg.fc5_in, FC5_UNITS, rng, dt, "he")
        # output heads start near zero: the all-positive ReLU features have a
        # dominant mean direction, and a full-gain row can land deep inside
        # tanh/sigmoid saturation for every input
        self.nav = Dense("nav", FC5_UNITS, 2, rng, dt, "xavier", gain=HEAD_GAIN)
        self.rec1 = Dense("rec1", FC5_UNITS, 64, rng, dt, "xavier")
        self.rec2 = Dense("rec2", 64, 1, rng, dt, "xavier", gain=HEAD_GAIN)

        self.trunk = [self.conv1, ReLU(), self.conv2, ReLU(), MaxPool2x2(),
                      self.conv3, ReLU(), self.conv4, ReLU()]
        if not cfg.single_pool:
            self.trunk.append(MaxPool2x2())
        self.trunk += [Flatten(), self.fc5, ReLU()]
        self.nav_head = [self.nav, Tanh()]
        self.rec_head = [self.rec1, ReLU(), self.rec2, Sigmoid()]

    # ------------------------------------------------------------------
    # forward

    def features(self, x: np.ndarray) -> np.ndarray:
        h = x
        for layer in self.trunk:
            h = layer.forward(h)
        return h

    def nav_from_features(self, f: np.ndarray) -> np.ndarray:
        h = f
        for layer in self.nav_head:
            h = layer.forward(h)
        return h

    def rec_from_features(self, f: np.ndarray) -> np.ndarray:
        h = f
        for layer in self.rec_head:
            h = layer.forward(h)
        return h

    def forward_nav(self, x: np.ndarray) -> np.ndarray:
        return self.nav_from_features(self.features(x))

    def forward_rec(self, x: np.ndarray) -> np.ndarray:
        return self.rec_from_features(self.features(x))

    # ------------------------------------------------------------------
    # backward

    def _backward_through(self, layers, gy):
        for layer in reversed(layers):
            gy = layer.backward(gy)
        return gy

    def nav_loss_and_grads(self, x: np.ndarray, ref: np.ndarray):
        """Imitation loss with gradients over trunk + nav head."""
        f = self.features(x)
        pred = self.nav_from_features(f)
        loss, dpred = imitation_loss(pred, ref)
        gf = self._backward_through(self.nav_head, dpred)
        self._backward_through(self.trunk, gf)
        grads = dict(self._grad_items(self.trunk + self.nav_head))
        return loss, grads

    def rec_loss_and_grads(self, x: np.ndarray, eps: np.ndarray,
                           stop_at_features: bool = True):
        """BCE loss; by default gradients stop at the fc5 features."""
        f = self.features(x)
        p = self.rec_from_features(f)
        loss, dp = bce_loss(p, eps)
        gf = self._backward_through(self.rec_head, dp)
        layers = list(self.rec_head)
        if not stop_at_features:
            self._backward_through(self.trunk, gf)
            layers = self.trunk + layers
        grads = dict(self._grad_items(layers))
        return loss, grads

    def rec_head_loss_and_grads(self, f: np.ndarray, eps: np.ndarray):
        """BCE on precomputed trunk features, gradients over the head only.

        Exactly equivalent to rec_loss_and_grads with stopped gradients,
        without repaying the trunk forward pass per step.
        """
        p = self.rec_from_features(f)
        loss, dp = bce_loss(p, eps)
        self._backward_through(self.rec_head, dp)
        grads = dict(self._grad_items(self.rec_head))
        return loss, grads

    @staticmethod
    def _grad_items(layers):
        for layer in layers:
            for name, _, grad in layer.param_items():
                yield name, grad

    # ------------------------------------------------------------------
    # parameter access

    def _layers_with_params(self):
        return [self.conv1, self.conv2, self.conv3, self.conv4,
                self.fc5, self.nav, self.rec1, self.rec2]

    def param_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in self._layers_with_params():
            for name, param, _ in layer.param_items():
                out[name] = param
        return out

    def trunk_and_nav_params(self) -> dict[str, np.ndarray]:
        out = {}
        for layer in (self.conv1, self.conv2, self.conv3, self.conv4,
                      self.fc5, self.nav):
            for name, param, _ in layer.param_items():
                out[name] = param
        return out

    def rec_params(self, include_trunk: bool = False) -> dict[str, np.ndarray]:
        layers = [self.rec1, self.rec2]
        if include_trunk:
            layers = [self.conv1, self.conv2, self.conv3, self.conv4,
                      self.fc5] + layers
        out = {}
        for layer in layers:
            for name, param, _ in layer.param_items():
                out[name] = param
        return out

    def load_param_dict(self, params: dict[str, np.ndarray]) -> None:
        own = self.param_dict()
        if set(own) != set(params):
            missing = set(own) ^ set(params)
            raise ValueError(f"parameter name mismatch: {sorted(missing)}")
        for name, arr in params.items():
            if own[name].shape != arr.shape:
                raise ValueError(f"shape mismatch for {name}")
            own[name][...] = arr.astype(own[name].dtype)

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.param_dict().items()}


# ---------------------------------------------------------------------------
# losses

def imitation_loss(pred: np.ndarray, ref: np.ndarray):
    """Mean over the batch of the squared L2 distance to the reference.

    Returns (loss, dloss/dpred).
    """
    diff = pred - ref.astype(pred.dtype)
    n = pred.shape[0]
    loss = float((diff * diff).sum() / n)
    return loss, (2.0 / n) * diff


def bce_loss(p: np.ndarray, eps: np.ndarray):
    """Binary cross-entropy with probability clamping.

    p is clamped to [BCE_CLAMP, 1 - BCE_CLAMP] before the logs; gradients
    are zero where the clamp is active, matching the computed function.
    Returns (loss, dloss/dp).
    """
    eps = eps.astype(p.dtype).reshape(p.shape)
    pc = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = p.shape[0]
    loss = float(-(eps * np.log(pc) + (1.0 - eps) * np.log1p(-pc)).sum() / n)
    inside = (p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP)
    dp = np.where(inside, (pc - eps) / (pc * (1.0 - pc)) / n, 0.0).astype(p.dtype)
    return loss, dp
