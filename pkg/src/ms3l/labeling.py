"""Hard-sample quantities: deviation, the record indicator, the beta gate,
and batch labeling of recording-head training pairs.

The deviation weighs the navigation output's distance from the human and
reactive-policy commands; frames past the tolerance tau are the positive
class the recording head learns to flag.
"""

from __future__ import annotations

import numpy as np

from .episode import Frame
from .nn.model import Network
from .sensors import image_to_input
from .world import Action, ContractViolation


def _sqdist(a: Action, b: Action) -> float:
    dv = a.v_norm - b.v_norm
    dw = a.w_norm - b.w_norm
    return dv * dv + dw * dw


def deviation(nav: Action, human: Action | None, sensor: Action | None,
              gamma: float) -> float:
    """Weighted squared deviation of the nav command from its references.

    With both references present the weights are gamma/(1-gamma); with only
    one, that term stands alone (availability-weighted fallback).
    """
    if human is None and sensor is None:
        raise ContractViolation("deviation needs at least one reference label")
    if human is None:
        return _sqdist(nav, sensor)
    if sensor is None:
        return _sqdist(nav, human)
    return gamma * _sqdist(nav, human) + (1.0 - gamma) * _sqdist(nav, sensor)


def record_indicator(e: float, tau: float) -> int:
    """1 iff the deviation strictly exceeds the tolerance."""
    if e < 0:
        raise ContractViolation("deviation must be nonnegative")
    return 1 if e > tau else 0


def gate(p_r: float, beta: float) -> bool:
    """Keep a frame iff the recording probability strictly exceeds beta."""
    return p_r > beta


def label_recording_batch(net: Network, frames: list[Frame], gamma: float,
                          tau: float, chunk: int = 256,
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Recompute nav outputs with the current parameters and derive
    per-frame indicator labels.

    Returns (features, eps): trunk features (N, fc5) and float {0,1} labels
    (N, 1), the training pairs of the recording head.
    """
    feats = []
    eps = []
    for lo in range(0, len(frames), chunk):
        part = frames[lo:lo + chunk]
        x = np.stack([image_to_input(f.image) for f in part])
        f5 = net.features(x)
        nav = net.nav_from_features(f5)
        for i, fr in enumerate(part):
            out = Action(float(nav[i, 0]), float(nav[i, 1]))
            e = deviation(out, fr.human_label, fr.sensor_label, gamma)
            eps.append(record_indicator(e, tau))
        feats.append(f5)
    dtype = net.cfg.np_dtype
    if not frames:
        return (np.zeros((0, net.fc5.W.shape[1]), dtype=dtype),
                np.zeros((0, 1), dtype=dtype))
    return np.concatenate(feats), np.array(eps, dtype=dtype)[:, None]
