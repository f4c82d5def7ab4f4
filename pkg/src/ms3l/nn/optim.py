"""Adam optimizer.

Weight decay folds into the gradient before the moment updates:
    g   <- g + weight_decay * w
    m   <- b1*m + (1-b1)*g
    v   <- b2*v + (1-b2)*g^2
    w   <- w - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
The decay applies to every parameter tensor uniformly, biases included.
"""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        """Apply one update in place; every managed param needs a gradient."""
        missing = set(self.params) - set(grads)
        if missing:
            raise KeyError(f"missing gradients for {sorted(missing)}")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.t
        bc2 = 1.0 - b2 ** self.t
        for name, w in self.params.items():
            g = grads[name].astype(w.dtype)
            if self.weight_decay != 0.0:
                g = g + self.weight_decay * w
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            w -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
