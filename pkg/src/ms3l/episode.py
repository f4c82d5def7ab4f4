"""Episode rollout loop: sensing, labeling, gating, stepping.

Tick order is pinned for determinism: render (depth then ultrasonic, each
only if needed), label, act, gate/record, move pedestrians, move the robot.
Sensor noise and command noise draw from the one episode stream in that
fixed order, so a configuration that renders the same sensors consumes the
same draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .policies import BasePolicy, NetworkNavPolicy, Observation
from .sensor_policy import (
    DEFAULT_SENSOR_CFG,
    Branch,
    DepthSummary,
    SensorPolicyConfig,
    branch_action,
    decide,
    depth_reject,
)
from .sensors import SensorNoise, read_ultrasonic, render_depth, render_image
from .world import (
    Action,
    RobotState,
    WorldMap,
    spawn_state,
    step,
    step_pedestrians,
)

DEFAULT_FPS = 30.0


@dataclass
class Frame:
    """One recorded observation with its labels."""

    image: np.ndarray                 # uint8 (S, S, 3)
    depth_summary: DepthSummary
    us: tuple[float, float]
    sensor_label: Action
    branch: Branch
    human_label: Action | None
    p_r: float                        # recording-head prob at collection
    iteration: int

    @property
    def training_label(self) -> Action:
        """Demonstrated frames train on the human command, self-collected
        frames on the reactive policy's label."""
        return self.human_label if self.human_label is not None \
            else self.sensor_label


@dataclass
class EpisodeResult:
    frames: list[Frame] = field(default_factory=list)
    ticks: int = 0
    sim_seconds: float = 0.0
    distance: float = 0.0
    collisions: int = 0
    time_to_collision: float | None = None
    end_state: RobotState | None = None
    actions: list[Action] = field(default_factory=list)
    trajectory: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def collided(self) -> bool:
        return self.collisions > 0

    def ttc_or(self, cap: float) -> float:
        return self.time_to_collision if self.time_to_collision is not None else cap


def run_episode(world: WorldMap, policy: BasePolicy, rng: np.random.Generator, *,
                seconds: float, fps: float = DEFAULT_FPS, image_size: int = 32,
                record: bool = False, labeler: BasePolicy | None = None,
                gate_beta: float | None = None, iteration: int = 0,
                on_collision: str = "stop",
                sensor_cfg: SensorPolicyConfig = DEFAULT_SENSOR_CFG,
                noise: SensorNoise = SensorNoise()) -> EpisodeResult:
    """Roll the policy in the world for a fixed sim duration.

    record: capture frames (image + depth summary + ultrasonic + labels).
    labeler: optional expert queried every tick for the human label.
    gate_beta: keep a frame only if the driving policy's recording-head
        probability strictly exceeds beta (requires a NetworkNavPolicy).
    on_collision: "stop" ends the episode (evaluation semantics); "respawn"
        teleports back to spawn with the clock still running (collection).
    """
    if on_collision not in ("stop", "respawn"):
        raise ValueError("on_collision must be 'stop' or 'respawn'")
    if gate_beta is not None and not isinstance(policy, NetworkNavPolicy):
        raise ValueError("gating needs the recording head of a NetworkNavPolicy")

    dt = 1.0 / fps
    n_ticks = int(round(seconds * fps))
    state = spawn_state(world)
    res = EpisodeResult()
    res.trajectory.append(state.pose)

    need_image = policy.needs_image or record
    need_depth = policy.needs_depth or record
    need_us = policy.needs_us or record

    for _ in range(n_ticks):
        obs = Observation()
        if need_image:
            obs.image = render_image(world, state, size=image_size)
        if need_depth:
            obs.depth = render_depth(world, state, rng,
                                     noise_sigma=noise.depth_sigma,
                                     dropout_p=noise.dropout_p)
        if need_us:
            obs.us = read_ultrasonic(world, state, rng,
                                     noise_sigma=noise.us_sigma)

        human_label = labeler.act(world, state, obs, rng) if labeler else None
        action = policy.act(world, state, obs, rng)
        p_r = policy.last_p_r if isinstance(policy, NetworkNavPolicy) else 1.0

        if record:
            summary = depth_reject(obs.depth)
            branch = decide(summary, obs.us[0], obs.us[1], sensor_cfg)
            if gate_beta is None or p_r > gate_beta:
                res.frames.append(Frame(
                    image=obs.image, depth_summary=summary, us=obs.us,
                    sensor_label=branch_action(branch, sensor_cfg), branch=branch,
                    human_label=human_label, p_r=p_r, iteration=iteration))

        world = step_pedestrians(world, dt)
        prev_x, prev_y = state.x, state.y
        state = step(world, state, action, dt)
        res.distance += math.hypot(state.x - prev_x, state.y - prev_y)
        res.trajectory.append(state.pose)
        res.actions.append(action)
        res.ticks += 1
        res.sim_seconds = res.ticks * dt

        if state.collided:
            res.collisions += 1
            if res.time_to_collision is None:
                res.time_to_collision = state.t
            if on_collision == "stop":
                break
            state = RobotState(x=world.spawn[0], y=world.spawn[1],
                               heading=world.spawn[2], t=state.t)
            res.trajectory.append(state.pose)

    res.end_state = state
    return res
