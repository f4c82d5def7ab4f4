"""Reactive sensor policy: depth-image triage plus an ultrasonic fallback FSM.

The depth stage decides whether the camera can be trusted this tick. When it
can, forward clearance drives speed and the freer image side drives steering.
When too many pixels are rejected the policy falls back to the ultrasonic
pair. All comparisons at the published thresholds are strict in the stated
direction; ties on side selection break toward image-left.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .sensors import DEPTH_SENTINEL, DepthMap, read_ultrasonic, render_depth
from .world import Action, RobotState, WorldMap

REJECT_RATIO = 0.3      # trusted iff rejected/total <= this
D_AVOID = 0.8           # m, mid clearance below which we steer away
D_DECEL = 1.6           # m, mid clearance below which we slow down
US_BACK_DIST = 0.2      # m, min ultrasonic below which we reverse
US_SIDE_DIST = 0.5      # m, single-side ultrasonic turn threshold
V_SLOW = 0.3
V_FWD = 0.6
V_BACK = 0.4
W_TURN = 0.4


class Branch(enum.IntEnum):
    FORWARD = 0
    DECEL = 1
    AVOID_LEFT = 2
    AVOID_RIGHT = 3
    US_FORWARD = 4
    US_TURN_LEFT = 5
    US_TURN_RIGHT = 6
    US_BACK_LEFT = 7    # backing up while turning left (right side nearer)
    US_BACK_RIGHT = 8   # backing up while turning right (left side nearer)


@dataclass(frozen=True)
class SensorPolicyConfig:
    """Thresholds and command magnitudes of the reactive policy."""

    reject_fraction: float = REJECT_RATIO
    avoid_depth: float = D_AVOID
    decel_depth: float = D_DECEL
    back_dist: float = US_BACK_DIST
    safe_side_dist: float = US_SIDE_DIST
    v_fwd: float = V_FWD
    v_slow: float = V_SLOW
    v_back: float = V_BACK
    w_turn: float = W_TURN

    def __post_init__(self):
        if not 0.0 < self.reject_fraction < 1.0:
            raise ValueError("reject_fraction must be in (0, 1)")
        if not 0.0 < self.back_dist < self.safe_side_dist:
            raise ValueError("need 0 < back_dist < safe_side_dist")
        if not 0.5 <= self.avoid_depth < self.decel_depth <= 20.0:
            raise ValueError("need 0.5 <= avoid_depth < decel_depth <= 20")
        for mag in (self.v_fwd, self.v_slow, self.v_back, self.w_turn):
            if not 0.0 < mag <= 1.0:
                raise ValueError("command magnitudes must be in (0, 1]")


DEFAULT_SENSOR_CFG = SensorPolicyConfig()


def _branch_actions(cfg: SensorPolicyConfig) -> dict[Branch, Action]:
    return {
        Branch.FORWARD: Action(cfg.v_fwd, 0.0),
        Branch.DECEL: Action(cfg.v_slow, 0.0),
        Branch.AVOID_LEFT: Action(cfg.v_slow, cfg.w_turn),
        Branch.AVOID_RIGHT: Action(cfg.v_slow, -cfg.w_turn),
        Branch.US_FORWARD: Action(cfg.v_fwd, 0.0),
        Branch.US_TURN_LEFT: Action(cfg.v_slow, cfg.w_turn),
        Branch.US_TURN_RIGHT: Action(cfg.v_slow, -cfg.w_turn),
        Branch.US_BACK_LEFT: Action(-cfg.v_back, cfg.w_turn),
        Branch.US_BACK_RIGHT: Action(-cfg.v_back, -cfg.w_turn),
    }


_BRANCH_ACTION = _branch_actions(DEFAULT_SENSOR_CFG)


@dataclass(frozen=True)
class DepthSummary:
    """Per-third mean clearance after pixel rejection.

    A third with every pixel rejected reports math.inf: no depth evidence
    is read as no obstacle evidence, and the trust ratio already guards the
    fully-blind case.
    """

    left: float
    mid: float
    right: float
    rejected_frac: float

    @property
    def trusted(self) -> bool:
        return self.rejected_frac <= REJECT_RATIO


def depth_reject(dm: DepthMap) -> DepthSummary:
    """Reject sentinel and far-outlier pixels, then summarize thirds.

    The outlier gate is value > mean + 2*std, with the statistics taken in
    float64 over every non-sentinel pixel of the whole image.
    """
    values = dm.values.astype(np.float64)
    h, w = values.shape
    total = values.size
    valid = values != DEPTH_SENTINEL
    if valid.any():
        mu = float(values[valid].mean())
        sigma = float(values[valid].std())
        keep = valid & ~(values > mu + 2.0 * sigma)
    else:
        keep = np.zeros_like(valid)
    rejected_frac = 1.0 - keep.sum() / total

    third = w // 3
    cuts = (slice(0, third), slice(third, w - third), slice(w - third, w))
    means = []
    for sl in cuts:
        block = values[:, sl]
        kb = keep[:, sl]
        means.append(float(block[kb].mean()) if kb.any() else math.inf)
    return DepthSummary(left=means[0], mid=means[1], right=means[2],
                        rejected_frac=float(rejected_frac))


def decide(summary: DepthSummary, us_left: float, us_right: float,
           cfg: SensorPolicyConfig = DEFAULT_SENSOR_CFG) -> Branch:
    """Pure decision function over the depth summary and ultrasonic pair."""
    if summary.rejected_frac <= cfg.reject_fraction:
        if summary.mid < cfg.avoid_depth:
            return Branch.AVOID_LEFT if summary.left >= summary.right \
                else Branch.AVOID_RIGHT
        if summary.mid < cfg.decel_depth:
            return Branch.DECEL
        return Branch.FORWARD
    if min(us_left, us_right) < cfg.back_dist:
        # ties treat the left side as nearer, so we back off turning right
        return Branch.US_BACK_RIGHT if us_left <= us_right else Branch.US_BACK_LEFT
    if us_left < cfg.safe_side_dist:
        return Branch.US_TURN_RIGHT
    if us_right < cfg.safe_side_dist:
        return Branch.US_TURN_LEFT
    return Branch.US_FORWARD


def branch_action(branch: Branch,
                  cfg: SensorPolicyConfig = DEFAULT_SENSOR_CFG) -> Action:
    if cfg is DEFAULT_SENSOR_CFG:
        return _BRANCH_ACTION[branch]
    return _branch_actions(cfg)[branch]


def sensor_action(world: WorldMap, state: RobotState, rng: np.random.Generator,
                  cfg: SensorPolicyConfig = DEFAULT_SENSOR_CFG,
                  ) -> tuple[Action, Branch, DepthSummary, tuple[float, float]]:
    """Full pipeline: render sensors at the pose, summarize, decide."""
    dm = render_depth(world, state, rng)
    us = read_ultrasonic(world, state, rng)
    summary = depth_reject(dm)
    branch = decide(summary, us[0], us[1], cfg)
    return branch_action(branch, cfg), branch, summary, us
