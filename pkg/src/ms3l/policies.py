"""Policy wrappers: who turns observations into drive commands.

A policy declares which sensors it needs so the episode loop can skip
rendering work nothing will read. Observations are the pre-action sensor
readings for the current tick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.model import Network
from .sensor_policy import (
    DEFAULT_SENSOR_CFG,
    SensorPolicyConfig,
    branch_action,
    decide,
    depth_reject,
)
from .sensors import DepthMap, image_to_input
from .world import Action, RobotState, WorldMap


@dataclass
class Observation:
    image: np.ndarray | None = None          # uint8 (S, S, 3)
    depth: DepthMap | None = None
    us: tuple[float, float] | None = None


class BasePolicy:
    needs_image = False
    needs_depth = False
    needs_us = False

    def act(self, world: WorldMap, state: RobotState, obs: Observation,
            rng: np.random.Generator) -> Action:
        raise NotImplementedError


class NetworkNavPolicy(BasePolicy):
    """Drives with the navigation head; exposes the recording head's
    probability for the same frame so collection can gate on it without a
    second trunk pass."""

    needs_image = True

    def __init__(self, net: Network):
        self.net = net
        self.last_p_r: float = 1.0

    def act(self, world, state, obs, rng) -> Action:
        x = image_to_input(obs.image)[None]
        f = self.net.features(x)
        nav = self.net.nav_from_features(f)[0]
        self.last_p_r = float(self.net.rec_from_features(f)[0, 0])
        return Action(float(nav[0]), float(nav[1]))


class ScriptedSensorPolicy(BasePolicy):
    """The reactive depth/ultrasonic FSM acting as a driver."""

    needs_depth = True
    needs_us = True

    def __init__(self, cfg: SensorPolicyConfig = DEFAULT_SENSOR_CFG):
        self.cfg = cfg

    def act(self, world, state, obs, rng) -> Action:
        summary = depth_reject(obs.depth)
        branch = decide(summary, obs.us[0], obs.us[1], self.cfg)
        return branch_action(branch, self.cfg)


class NoisyPolicy(BasePolicy):
    """Adds zero-mean Gaussian noise to another policy's command.

    Noise draws come from the episode's command-noise stream, two values per
    tick, whether or not sigma is zero, so enabling noise never shifts other
    streams.
    """

    def __init__(self, base: BasePolicy, sigma: float):
        self.base = base
        self.sigma = float(sigma)
        self.needs_image = base.needs_image
        self.needs_depth = base.needs_depth
        self.needs_us = base.needs_us

    def act(self, world, state, obs, rng) -> Action:
        a = self.base.act(world, state, obs, rng)
        n = rng.standard_normal(2)
        return Action(a.v_norm + self.sigma * n[0], a.w_norm + self.sigma * n[1])


class FixedPolicy(BasePolicy):
    """Constant command; test and bridge-idle helper."""

    def __init__(self, action: Action):
        self.action = action

    def act(self, world, state, obs, rng) -> Action:
        return self.action
