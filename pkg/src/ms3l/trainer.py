"""Training protocol: demonstration pretraining, gated self-supervised
iterations, and a record-everything baseline under the same budgets.

Every random draw comes from a named stream spawned off the config seed, so
a run is bit-reproducible and a k=1 run is a prefix of a k=4 run. Reports
serialize to canonical bytes without wall times; timings go to a sidecar.
"""

from __future__ import annotations

import json
import os
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig, canonical_text, config_digest
from .dataset import Dataset, save_dataset
from .episode import EpisodeResult, Frame, run_episode
from .labeling import label_recording_batch
from .nn import Adam, Network, save_checkpoint
from .nn.model import bce_loss, imitation_loss
from .oracle import forward_expert, reverse_expert
from .policies import NetworkNavPolicy
from .sensors import image_to_input

EVAL_CHUNK = 64


class TrainingError(RuntimeError):
    pass


def stream(seed: int, *key) -> np.random.Generator:
    """Named deterministic RNG stream derived from the run seed."""
    parts = tuple(zlib.crc32(k.encode("utf-8")) if isinstance(k, str) else int(k)
                  for k in key)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                        spawn_key=parts))


@dataclass
class IterationReport:
    iteration: int
    encountered: int
    recorded: int
    nav_val_loss: float | None
    rec_val_loss: float | None
    no_new_frames: bool
    config_digest: str
    wall_time: float = 0.0            # excluded from canonical bytes

    def canonical(self) -> bytes:
        body = {
            "iteration": self.iteration,
            "encountered": self.encountered,
            "recorded": self.recorded,
            "nav_val_loss": self.nav_val_loss,
            "rec_val_loss": self.rec_val_loss,
            "no_new_frames": self.no_new_frames,
            "config_digest": self.config_digest,
        }
        return json.dumps(body, sort_keys=True,
                          separators=(",", ":")).encode("utf-8")


@dataclass
class TrainRun:
    net: Network
    nav_dataset: Dataset
    rec_dataset: Dataset
    reports: list[IterationReport]
    pretrain_nav_losses: list[float] = field(default_factory=list)
    checkpoint_files: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# batch helpers

def _stack_images(frames: list[Frame]) -> np.ndarray:
    return np.stack([image_to_input(f.image) for f in frames])


def _nav_labels(frames: list[Frame]) -> np.ndarray:
    return np.array([[f.training_label.v_norm, f.training_label.w_norm]
                     for f in frames], dtype=np.float32)


def _forward_nav_chunked(net: Network, x: np.ndarray) -> np.ndarray:
    outs = [net.forward_nav(x[lo:lo + EVAL_CHUNK])
            for lo in range(0, len(x), EVAL_CHUNK)]
    return np.concatenate(outs)


def train_nav(net: Network, dataset: Dataset, cfg: ExperimentConfig,
              rng: np.random.Generator) -> tuple[float | None, list[float]]:
    """Imitation training over the dataset's train split; fresh Adam.

    Returns (validation loss, mean training loss per epoch).
    """
    train_frames, val_frames = dataset.train_val_split()
    if not train_frames:
        raise TrainingError("navigation training needs at least one frame")
    x = _stack_images(train_frames)
    y = _nav_labels(train_frames)
    tc = cfg.train
    adam = Adam(net.trunk_and_nav_params(), lr=tc.lr_nav,
                weight_decay=tc.weight_decay)
    n = len(train_frames)
    epoch_losses = []
    for _ in range(tc.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, tc.batch_size):
            idx = order[lo:lo + tc.batch_size]
            loss, grads = net.nav_loss_and_grads(x[idx], y[idx])
            adam.step(grads)
            total += loss * len(idx)
        epoch_losses.append(total / n)
    if not val_frames:
        return None, epoch_losses
    pred = _forward_nav_chunked(net, _stack_images(val_frames))
    val_loss, _ = imitation_loss(pred, _nav_labels(val_frames))
    return val_loss, epoch_losses


def train_rec(net: Network, rec_ds: Dataset, nav_ds: Dataset,
              cfg: ExperimentConfig, rng: np.random.Generator) -> float | None:
    """Retrain the recording head on the demo-reverse set plus the current
    navigation aggregate, with indicator labels recomputed against the
    current navigation parameters."""
    combined = Dataset(header="")
    combined.append(rec_ds.samples)
    combined.append(nav_ds.samples)
    train_frames, val_frames = combined.train_val_split()
    if not train_frames:
        raise TrainingError("recording training needs at least one frame")
    tc = cfg.train
    feats, eps = label_recording_batch(net, train_frames, tc.gamma, tc.tau)
    n = len(train_frames)

    if cfg.rec_train_trunk:
        x = _stack_images(train_frames)
        adam = Adam(net.rec_params(include_trunk=True), lr=tc.lr_rec,
                    weight_decay=tc.weight_decay)
        for _ in range(tc.rec_epochs_effective):
            order = rng.permutation(n)
            for lo in range(0, n, tc.batch_size):
                idx = order[lo:lo + tc.batch_size]
                _, grads = net.rec_loss_and_grads(x[idx], eps[idx],
                                                  stop_at_features=False)
                adam.step(grads)
    else:
        # gradients stop at the features, so one trunk pass serves all epochs
        adam = Adam(net.rec_params(), lr=tc.lr_rec,
                    weight_decay=tc.weight_decay)
        for _ in range(tc.rec_epochs_effective):
            order = rng.permutation(n)
            for lo in range(0, n, tc.batch_size):
                idx = order[lo:lo + tc.batch_size]
                _, grads = net.rec_head_loss_and_grads(feats[idx], eps[idx])
                adam.step(grads)

    if not val_frames:
        return None
    vfeats, veps = label_recording_batch(net, val_frames, tc.gamma, tc.tau)
    val_loss, _ = bce_loss(net.rec_from_features(vfeats), veps)
    return val_loss


# ---------------------------------------------------------------------------
# stages

def collect_demo(world, cfg: ExperimentConfig, direction: str,
                 rng: np.random.Generator) -> list[Frame]:
    """One clean demonstration episode along the route; collision aborts."""
    make = forward_expert if direction == "forward" else reverse_expert
    expert = make(world, loop=cfg.oracle.loop, cfg=cfg.oracle)
    res = run_episode(world, expert, rng, seconds=cfg.train.episode_seconds,
                      fps=cfg.train.fps, image_size=cfg.image_size,
                      record=True, labeler=expert, iteration=0,
                      on_collision="stop", sensor_cfg=cfg.sensor,
                      noise=cfg.noise)
    if res.collided:
        raise TrainingError(
            f"{direction} demonstration collided at t={res.time_to_collision:.2f}s;"
            " demonstrations must be collision-free")
    return res.frames


def pretrain(world, cfg: ExperimentConfig) -> tuple[Network, Dataset, Dataset,
                                                    IterationReport,
                                                    list[float]]:
    t0 = time.perf_counter()
    seed = cfg.train.seed
    net = Network(cfg.network_params(), stream(seed, "init"))
    nav_frames = collect_demo(world, cfg, "forward", stream(seed, "demo", 0))
    rec_frames = collect_demo(world, cfg, "reverse", stream(seed, "demo", 1))
    header = canonical_text(cfg)
    nav_ds = Dataset(header=header)
    nav_ds.append(nav_frames)
    rec_ds = Dataset(header=header)
    rec_ds.append(rec_frames)
    nav_val, nav_losses = train_nav(net, nav_ds, cfg, stream(seed, "train-nav", 0))
    rec_val = train_rec(net, rec_ds, nav_ds, cfg, stream(seed, "train-rec", 0))
    report = IterationReport(
        iteration=0, encountered=len(nav_frames), recorded=len(nav_frames),
        nav_val_loss=nav_val, rec_val_loss=rec_val, no_new_frames=False,
        config_digest=config_digest(cfg), wall_time=time.perf_counter() - t0)
    return net, nav_ds, rec_ds, report, nav_losses


def self_supervised_iteration(i: int, world, net: Network, nav_ds: Dataset,
                              rec_ds: Dataset, cfg: ExperimentConfig,
                              dagger: bool = False) -> IterationReport:
    """Collect with the current navigation policy, gate (or record all for
    the baseline), aggregate, retrain."""
    if i < 1:
        raise ValueError("self-supervised iterations start at 1")
    t0 = time.perf_counter()
    seed = cfg.train.seed
    policy = NetworkNavPolicy(net)
    labeler = forward_expert(world, loop=cfg.oracle.loop, cfg=cfg.oracle) \
        if dagger else None
    res: EpisodeResult = run_episode(
        world, policy, stream(seed, "collect", i),
        seconds=cfg.train.episode_seconds, fps=cfg.train.fps,
        image_size=cfg.image_size, record=True, labeler=labeler,
        gate_beta=None if dagger else cfg.train.beta, iteration=i,
        on_collision="respawn", sensor_cfg=cfg.sensor, noise=cfg.noise)
    kept = res.frames

    if cfg.train.aggregate_full:
        nav_ds.append(kept)
        train_ds = nav_ds
    else:
        # literal variant: retrain on the pre-aggregation dataset
        train_ds = Dataset(header=nav_ds.header, samples=list(nav_ds.samples))
        nav_ds.append(kept)

    if not cfg.train.warm_start:
        fresh = Network(cfg.network_params(), stream(seed, "reinit", i))
        net.load_param_dict(fresh.param_dict())

    nav_val, _ = train_nav(net, train_ds, cfg, stream(seed, "train-nav", i))
    rec_val = None if dagger else train_rec(net, rec_ds, nav_ds, cfg,
                                            stream(seed, "train-rec", i))
    return IterationReport(
        iteration=i, encountered=res.ticks, recorded=len(kept),
        nav_val_loss=nav_val, rec_val_loss=rec_val,
        no_new_frames=len(kept) == 0, config_digest=config_digest(cfg),
        wall_time=time.perf_counter() - t0)


def _persist(run: TrainRun, cfg: ExperimentConfig, out_dir: str,
             label: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(canonical_text(cfg))
    save_dataset(run.nav_dataset, os.path.join(out_dir, f"{label}_nav.ms3ld"))
    save_dataset(run.rec_dataset, os.path.join(out_dir, f"{label}_rec.ms3ld"))
    timings = {}
    for rep in run.reports:
        name = f"{label}_report_iter{rep.iteration}.json"
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(rep.canonical())
        timings[str(rep.iteration)] = rep.wall_time
    with open(os.path.join(out_dir, f"{label}_timings.json"), "w",
              encoding="utf-8") as fh:
        json.dump(timings, fh, indent=1, sort_keys=True)


def _checkpoint(net: Network, cfg: ExperimentConfig, out_dir: str, label: str,
                iteration: int, run: TrainRun) -> None:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{label}_iter{iteration}.ckpt")
    save_checkpoint(path, net, extra={"iteration": iteration,
                                      "config_digest": config_digest(cfg)})
    run.checkpoint_files.append(path)


def run_ms3l(world, cfg: ExperimentConfig, out_dir: str | None = None,
             dagger: bool = False, k: int | None = None,
             on_report=None) -> TrainRun:
    """The full protocol: pretrain, then k collect-aggregate-retrain rounds.

    dagger=True switches to the baseline: oracle labels, no gating, no
    recording-head retraining. on_report, when given, is called with each
    IterationReport as it completes (progress displays, status feeds).
    """
    label = "dagger" if dagger else "ms3l"
    net, nav_ds, rec_ds, rep0, nav_losses = pretrain(world, cfg)
    run = TrainRun(net=net, nav_dataset=nav_ds, rec_dataset=rec_ds,
                   reports=[rep0], pretrain_nav_losses=nav_losses)
    if on_report:
        on_report(rep0)
    if out_dir:
        _checkpoint(net, cfg, out_dir, label, 0, run)
    for i in range(1, (k if k is not None else cfg.train.k) + 1):
        rep = self_supervised_iteration(i, world, net, nav_ds, rec_ds, cfg,
                                        dagger=dagger)
        run.reports.append(rep)
        if on_report:
            on_report(rep)
        if out_dir:
            _checkpoint(net, cfg, out_dir, label, i, run)
    if out_dir:
        _persist(run, cfg, out_dir, label)
    return run


def run_dagger(world, cfg: ExperimentConfig,
               out_dir: str | None = None, k: int | None = None) -> TrainRun:
    return run_ms3l(world, cfg, out_dir=out_dir, dagger=True, k=k)
