"""Evaluation harness: distance / time-to-collision metrics, the three
benchmark tasks, the gate-threshold ablation, and delimited-text reports.

Episodes run with collision-stop semantics. Each episode perturbs the spawn
pose slightly (resampling while the perturbed pose collides) so repeated
episodes of a deterministic policy measure more than one rollout.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .config import ExperimentConfig, load_map_named
from .dataset import Dataset
from .episode import Frame, run_episode
from .policies import BasePolicy, NetworkNavPolicy, NoisyPolicy
from .sensor_policy import DEFAULT_SENSOR_CFG, SensorPolicyConfig
from .sensors import SensorNoise
from .trainer import IterationReport, run_ms3l, stream
from .world import WorldMap, pose_collides, wrap_angle

HISTOGRAM_BINS = 20

# canonical report orderings
COMPARISON_POLICIES = ("MS3L", "sensor", "oracle", "DAgger")
COMPARISON_TASKS = ("hallway-peds", "classroom", "noise")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    """One benchmark setting: where to drive and under what interference."""

    name: str
    map_name: str
    pedestrians: bool = True
    control_noise_sigma: float = 0.0   # applied to normalized commands
    episodes: int = 5
    max_seconds: float = 60.0
    fps: float = 10.0
    image_size: int = 64
    jitter_pos: float = 0.10
    jitter_heading: float = 0.15

    def __post_init__(self):
        if self.control_noise_sigma < 0:
            raise EvaluationError("control_noise_sigma must be >= 0")
        if self.episodes < 1:
            raise EvaluationError("episodes must be >= 1")
        if self.max_seconds <= 0 or self.fps <= 0:
            raise EvaluationError("max_seconds and fps must be > 0")


@dataclass(frozen=True)
class EvalEpisode:
    distance: float
    time_to_collision: float   # == max_seconds when the episode never collided
    collided: bool
    trajectory: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class EvalResult:
    task: TaskSpec
    episodes: tuple[EvalEpisode, ...]
    mean_distance: float
    mean_time: float


PolicyLike = BasePolicy | Callable[[WorldMap], BasePolicy]


def standard_tasks(cfg: ExperimentConfig) -> dict[str, TaskSpec]:
    """The three benchmark tasks at this configuration's scale."""
    base = dict(episodes=cfg.eval.episodes, max_seconds=cfg.eval.max_seconds,
                fps=cfg.train.fps, image_size=cfg.image_size,
                jitter_pos=cfg.eval.spawn_jitter_pos,
                jitter_heading=cfg.eval.spawn_jitter_heading)
    # both hallway tasks run on the heavy-traffic variant of the training
    # hallway: the policy trains among light traffic and is tested against
    # denser, partly novel pedestrian routes, with the noise task differing
    # from hallway-peds only by the command noise
    return {
        "hallway-peds": TaskSpec("hallway-peds", "hallway_busy.map", **base),
        "classroom": TaskSpec("classroom", "classroom.map", **base),
        "noise": TaskSpec("noise", "hallway_busy.map",
                          control_noise_sigma=cfg.eval.noise_sigma, **base),
    }


def _jittered_world(world: WorldMap, task: TaskSpec,
                    rng: np.random.Generator) -> WorldMap:
    """Perturb the spawn pose; keep resampling while the new pose collides."""
    x0, y0, th0 = world.spawn
    for _ in range(32):
        dx, dy = rng.uniform(-task.jitter_pos, task.jitter_pos, size=2)
        dth = rng.uniform(-task.jitter_heading, task.jitter_heading)
        if not pose_collides(world, x0 + dx, y0 + dy):
            return replace(world, spawn=(x0 + dx, y0 + dy,
                                         wrap_angle(th0 + dth)))
    return world


def evaluate(policy: PolicyLike, task: TaskSpec, seed: int, *,
             sensor_cfg: SensorPolicyConfig = DEFAULT_SENSOR_CFG,
             noise: SensorNoise = SensorNoise()) -> EvalResult:
    """Run the task's episodes and aggregate distance / time-to-collision.

    policy may be a policy instance or a factory taking the loaded world
    (the route-following expert needs the map it will drive in).
    """
    world = load_map_named(task.map_name)
    if not task.pedestrians:
        world = replace(world, pedestrians=())
    episodes = []
    for ep in range(task.episodes):
        rng = stream(seed, "eval", task.name, ep)
        ep_world = _jittered_world(world, task, rng)
        pol = policy(ep_world) if not isinstance(policy, BasePolicy) else policy
        if task.control_noise_sigma > 0:
            pol = NoisyPolicy(pol, task.control_noise_sigma)
        res = run_episode(ep_world, pol, rng, seconds=task.max_seconds,
                          fps=task.fps, image_size=task.image_size,
                          on_collision="stop", sensor_cfg=sensor_cfg,
                          noise=noise)
        ttc = min(res.ttc_or(task.max_seconds), task.max_seconds)
        episodes.append(EvalEpisode(distance=res.distance,
                                    time_to_collision=ttc,
                                    collided=res.collided,
                                    trajectory=tuple(res.trajectory)))
    return EvalResult(
        task=task, episodes=tuple(episodes),
        mean_distance=float(np.mean([e.distance for e in episodes])),
        mean_time=float(np.mean([e.time_to_collision for e in episodes])))


def trajectory_length(trajectory: Sequence[tuple[float, float, float]]) -> float:
    total = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(trajectory, trajectory[1:]):
        total += math.hypot(x1 - x0, y1 - y0)
    return total


# ---------------------------------------------------------------------------
# distribution and ablation analyses

def angular_histogram(frames: Sequence[Frame],
                      bins: int = HISTOGRAM_BINS) -> tuple[np.ndarray, float]:
    """Histogram of training-label angular commands over [-1, 1] and the
    Shannon entropy (nats) of its normalization."""
    if len(frames) == 0:
        raise EvaluationError("angular_histogram needs a nonempty slice")
    w = np.array([f.training_label.w_norm for f in frames], dtype=np.float64)
    hist, _ = np.histogram(w, bins=bins, range=(-1.0, 1.0))
    p = hist / hist.sum()
    nz = p[p > 0]
    return hist, float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class BetaRow:
    beta: float
    recorded: int        # frames kept across the self-supervised iterations
    mean_distance: float


def beta_ablation(world: WorldMap, cfg: ExperimentConfig,
                  betas: Sequence[float] = (0.99, 0.5, 0.1),
                  iterations: int = 3,
                  task: TaskSpec | None = None) -> list[BetaRow]:
    """Retrain with each gate threshold (shared seeds) and measure how far
    the resulting policy drives."""
    if task is None:
        task = TaskSpec("ablation", cfg.map_name, pedestrians=False,
                        episodes=cfg.eval.episodes,
                        max_seconds=cfg.eval.max_seconds, fps=cfg.train.fps,
                        image_size=cfg.image_size,
                        jitter_pos=cfg.eval.spawn_jitter_pos,
                        jitter_heading=cfg.eval.spawn_jitter_heading)
    rows = []
    for beta in betas:
        cfg_b = replace(cfg, train=replace(cfg.train, beta=float(beta)))
        run = run_ms3l(world, cfg_b, k=iterations)
        recorded = sum(r.recorded for r in run.reports[1:])
        res = evaluate(NetworkNavPolicy(run.net), task, cfg.train.seed,
                       sensor_cfg=cfg.sensor, noise=cfg.noise)
        rows.append(BetaRow(beta=float(beta), recorded=recorded,
                            mean_distance=res.mean_distance))
    return rows


# ---------------------------------------------------------------------------
# report files

def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_table(path: str, header: Sequence[str],
                 rows: Sequence[Sequence]) -> None:
    lines = ["\t".join(header)]
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def export_report(out_dir: str, reports: Sequence[IterationReport],
                  nav_dataset: Dataset | None = None,
                  comparison: dict[tuple[str, str], tuple[float, float]]
                  | None = None,
                  ablation: Sequence[BetaRow] | None = None) -> list[str]:
    """Write the delimited-text analysis tables; byte-stable for equal inputs.

    comparison maps (policy name, task name) to (mean distance m, mean time s).
    Returns the paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path_of(name: str) -> str:
        p = os.path.join(out_dir, name)
        written.append(p)
        return p

    _write_table(
        path_of("losses.tsv"),
        ["iteration", "encountered", "recorded", "nav_val_loss",
         "rec_val_loss", "no_new_frames"],
        [[r.iteration, r.encountered, r.recorded, r.nav_val_loss,
          r.rec_val_loss, r.no_new_frames] for r in reports])

    iters = [r.iteration for r in reports]
    cum = np.cumsum([r.recorded for r in reports]).tolist()
    _write_table(
        path_of("counts.tsv"),
        ["metric"] + [str(i) for i in iters],
        [["encountered"] + [r.encountered for r in reports],
         ["recorded"] + [r.recorded for r in reports],
         ["aggregate"] + cum])

    if nav_dataset is not None and len(nav_dataset) > 0:
        by_iter = sorted(nav_dataset.counts_by_iteration())
        edges = np.linspace(-1.0, 1.0, HISTOGRAM_BINS + 1)
        cols: dict[str, np.ndarray] = {}
        entropies: dict[str, float] = {}
        for i in by_iter:
            frames = [f for f in nav_dataset.samples if f.iteration == i]
            cols[f"iter{i}"], entropies[f"iter{i}"] = angular_histogram(frames)
        later = [f for f in nav_dataset.samples if f.iteration >= 1]
        if later:
            cols["pooled1plus"], entropies["pooled1plus"] = \
                angular_histogram(later)
        names = list(cols)
        rows: list[list] = []
        for b in range(HISTOGRAM_BINS):
            rows.append([edges[b], edges[b + 1]]
                        + [int(cols[n][b]) for n in names])
        rows.append(["entropy", "-"] + [entropies[n] for n in names])
        _write_table(path_of("histograms.tsv"),
                     ["bin_lo", "bin_hi"] + names, rows)

    if comparison is not None:
        rows = []
        for pol in COMPARISON_POLICIES:
            for tname in COMPARISON_TASKS:
                if (pol, tname) in comparison:
                    d, t = comparison[(pol, tname)]
                    rows.append([pol, tname, d, t])
        # anything outside the canonical grid still gets reported, at the end
        for key in sorted(set(comparison) - {(p, t) for p in
                          COMPARISON_POLICIES for t in COMPARISON_TASKS}):
            d, t = comparison[key]
            rows.append([key[0], key[1], d, t])
        _write_table(path_of("comparison.tsv"),
                     ["policy", "task", "mean_distance_m", "mean_time_s"],
                     rows)

    if ablation is not None:
        _write_table(path_of("ablation.tsv"),
                     ["beta", "recorded", "mean_distance_m"],
                     [[r.beta, r.recorded, r.mean_distance]
                      for r in ablation])

    summary = [
        "Training summary",
        "================",
        f"iterations: {len(reports) - 1} after pretraining",
        f"frames encountered: {sum(r.encountered for r in reports)}",
        f"frames recorded: {sum(r.recorded for r in reports)}",
    ]
    last = reports[-1]
    summary.append(f"final nav validation loss: {_fmt(last.nav_val_loss)}")
    summary.append(f"final rec validation loss: {_fmt(last.rec_val_loss)}")
    if comparison is not None:
        summary.append("")
        summary.append("Task means (distance m / time s)")
        for pol in COMPARISON_POLICIES:
            for tname in COMPARISON_TASKS:
                if (pol, tname) in comparison:
                    d, t = comparison[(pol, tname)]
                    summary.append(f"  {pol} on {tname}: "
                                   f"{d:.2f} m / {t:.2f} s")
    with open(path_of("summary.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("\n".join(summary) + "\n")
    return written
