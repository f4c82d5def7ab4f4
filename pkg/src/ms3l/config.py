"""Experiment configuration: one INI document drives every stage.

Every tunable named by the trainer, the sensor models, the reactive policy,
the oracle, and the evaluator lives in a single config file so a run is
reproducible from (config, seed) alone. The canonical rendering of the
parsed values (not the raw file bytes) is hashed, and that digest is
embedded in datasets, checkpoints, and reports.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field, fields
from importlib import resources

from .nn.model import NetworkParams
from .oracle import OracleConfig
from .sensor_policy import SensorPolicyConfig
from .sensors import SensorNoise
from .world import WorldMap, load_map


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr_nav: float = 1e-4
    lr_rec: float = 1e-3
    epochs: int = 50
    rec_epochs: int = 0              # 0: same as epochs
    weight_decay: float = 1e-4
    k: int = 4
    episode_seconds: float = 60.0
    fps: float = 10.0
    batch_size: int = 32
    gamma: float = 0.8
    tau: float = 0.00025
    beta: float = 0.99
    seed: int = 0
    warm_start: bool = True          # retrain from previous params
    aggregate_full: bool = True      # retrain on D^i, not the literal D^{i-1}

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.episode_seconds * self.fps < self.batch_size:
            raise ConfigError("episode must supply at least one batch of frames")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must be in [0, 1]")
        if self.tau <= 0.0:
            raise ConfigError("tau must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ConfigError("beta must be in (0, 1)")
        if self.lr_nav <= 0 or self.lr_rec <= 0 or self.weight_decay < 0:
            raise ConfigError("bad optimizer constants")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.rec_epochs < 0:
            raise ConfigError("rec_epochs must be >= 0 (0: same as epochs)")

    @property
    def rec_epochs_effective(self) -> int:
        return self.rec_epochs if self.rec_epochs else self.epochs


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 5
    max_seconds: float = 60.0
    noise_sigma: float = 1.0         # command noise of the noise task
    spawn_jitter_pos: float = 0.10   # m, per-episode start perturbation
    spawn_jitter_heading: float = 0.15

    def __post_init__(self):
        if self.episodes < 1:
            raise ConfigError("eval episodes must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    map_name: str = "hallway.map"
    image_size: int = 64
    conv_channels: tuple[int, int, int, int] = (16, 16, 32, 32)
    single_pool: bool = False
    rec_train_trunk: bool = False    # let BCE gradients reach the trunk
    noise: SensorNoise = field(default_factory=SensorNoise)
    sensor: SensorPolicyConfig = field(default_factory=SensorPolicyConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def network_params(self) -> NetworkParams:
        return NetworkParams(image_size=self.image_size,
                             conv_channels=self.conv_channels,
                             single_pool=self.single_pool)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        from dataclasses import replace
        return replace(self, train=replace(self.train, seed=seed))


# ---------------------------------------------------------------------------
# section/key schema: (section, key) -> (target dataclass field path, type)

_SCHEMA = {
    ("world", "map"): ("map_name", str),
    ("network", "image_size"): ("image_size", int),
    ("network", "conv_channels"): ("conv_channels", "channels"),
    ("network", "single_pool"): ("single_pool", bool),
    ("network", "rec_train_trunk"): ("rec_train_trunk", bool),
    ("sensor_noise", "depth_sigma"): ("noise.depth_sigma", float),
    ("sensor_noise", "us_sigma"): ("noise.us_sigma", float),
    ("sensor_noise", "dropout_p"): ("noise.dropout_p", float),
    ("sensor_policy", "reject_fraction"): ("sensor.reject_fraction", float),
    ("sensor_policy", "avoid_depth"): ("sensor.avoid_depth", float),
    ("sensor_policy", "decel_depth"): ("sensor.decel_depth", float),
    ("sensor_policy", "back_dist"): ("sensor.back_dist", float),
    ("sensor_policy", "safe_side_dist"): ("sensor.safe_side_dist", float),
    ("sensor_policy", "v_fwd"): ("sensor.v_fwd", float),
    ("sensor_policy", "v_slow"): ("sensor.v_slow", float),
    ("sensor_policy", "v_back"): ("sensor.v_back", float),
    ("sensor_policy", "w_turn"): ("sensor.w_turn", float),
    ("oracle", "lookahead"): ("oracle.lookahead", float),
    ("oracle", "cruise"): ("oracle.cruise", float),
    ("oracle", "slow_radius"): ("oracle.slow_radius", float),
    ("oracle", "slow_factor"): ("oracle.slow_factor", float),
    ("oracle", "stop_dist"): ("oracle.stop_dist", float),
    ("oracle", "loop"): ("oracle.loop", bool),
    ("train", "lr_nav"): ("train.lr_nav", float),
    ("train", "lr_rec"): ("train.lr_rec", float),
    ("train", "epochs"): ("train.epochs", int),
    ("train", "rec_epochs"): ("train.rec_epochs", int),
    ("train", "weight_decay"): ("train.weight_decay", float),
    ("train", "k"): ("train.k", int),
    ("train", "episode_seconds"): ("train.episode_seconds", float),
    ("train", "fps"): ("train.fps", float),
    ("train", "batch_size"): ("train.batch_size", int),
    ("train", "gamma"): ("train.gamma", float),
    ("train", "tau"): ("train.tau", float),
    ("train", "beta"): ("train.beta", float),
    ("train", "seed"): ("train.seed", int),
    ("train", "warm_start"): ("train.warm_start", bool),
    ("train", "aggregate_full"): ("train.aggregate_full", bool),
    ("eval", "episodes"): ("eval.episodes", int),
    ("eval", "max_seconds"): ("eval.max_seconds", float),
    ("eval", "noise_sigma"): ("eval.noise_sigma", float),
    ("eval", "spawn_jitter_pos"): ("eval.spawn_jitter_pos", float),
    ("eval", "spawn_jitter_heading"): ("eval.spawn_jitter_heading", float),
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, kind, where: str):
    raw = raw.strip()
    try:
        if kind is str:
            return raw
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is bool:
            low = raw.lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "channels":
            parts = tuple(int(p) for p in raw.split(","))
            if len(parts) != 4:
                raise ValueError("conv_channels needs 4 integers")
            return parts
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise AssertionError(f"unknown schema kind {kind}")


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    flat: dict[str, object] = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            spec = _SCHEMA.get((section, key))
            if spec is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            path, kind = spec
            flat[path] = _convert(raw, kind, f"[{section}] {key}")

    def take(prefix: str, cls):
        sub = {p.split(".", 1)[1]: v for p, v in flat.items()
               if p.startswith(prefix + ".")}
        try:
            return cls(**sub)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    top = {p: v for p, v in flat.items() if "." not in p}
    try:
        return ExperimentConfig(
            noise=take("noise", SensorNoise),
            sensor=take("sensor", SensorPolicyConfig),
            oracle=take("oracle", OracleConfig),
            train=take("train", TrainConfig),
            eval=take("eval", EvalConfig),
            **top,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _value_str(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def canonical_text(cfg: ExperimentConfig) -> str:
    """Deterministic rendering of every parameter; the digest input."""
    groups: dict[str, object] = {
        "world.map": cfg.map_name,
        "network.image_size": cfg.image_size,
        "network.conv_channels": cfg.conv_channels,
        "network.single_pool": cfg.single_pool,
        "network.rec_train_trunk": cfg.rec_train_trunk,
    }
    for section, obj in (("sensor_noise", cfg.noise), ("sensor_policy", cfg.sensor),
                         ("oracle", cfg.oracle), ("train", cfg.train),
                         ("eval", cfg.eval)):
        for f in fields(obj):
            groups[f"{section}.{f.name}"] = getattr(obj, f.name)

    by_section: dict[str, list[str]] = {}
    for dotted in sorted(groups):
        section, key = dotted.split(".", 1)
        by_section.setdefault(section, []).append(
            f"{key} = {_value_str(groups[dotted])}")
    lines = []
    for section in sorted(by_section):
        lines.append(f"[{section}]")
        lines.extend(by_section[section])
        lines.append("")
    return "\n".join(lines)


def config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()


def load_map_named(name: str) -> WorldMap:
    """Resolve a map name: a filesystem path or a packaged map."""
    if os.path.sep in name or os.path.exists(name):
        with open(name, "r", encoding="utf-8") as fh:
            return load_map(fh.read(), name=name)
    return load_map((resources.files("ms3l") / "maps" / name).read_text(),
                    name=name)


def load_world(cfg: ExperimentConfig) -> WorldMap:
    return load_map_named(cfg.map_name)
