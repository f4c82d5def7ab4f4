"""Command-line front end.

Subcommands cover the whole workflow: demonstration pretraining, the gated
self-supervised iterations (separately or as one run), the record-everything
baseline, policy evaluation on the benchmark tasks, report generation, and
the teleop bridge server.
"""

from __future__ import annotations

import argparse
import glob
import json
import logging
import os
import re
import sys
import threading
from dataclasses import replace

from .config import (
    ExperimentConfig,
    config_digest,
    load_config,
    load_world,
)
from .dataset import load_dataset
from .evaluation import EvalResult, evaluate, standard_tasks
from .nn.checkpoint import load_checkpoint, network_from_checkpoint
from .oracle import forward_expert
from .policies import NetworkNavPolicy, ScriptedSensorPolicy
from .trainer import (
    IterationReport,
    TrainRun,
    run_dagger,
    run_ms3l,
    self_supervised_iteration,
)

log = logging.getLogger("ms3l")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config file (.ini)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's training seed")
    p.add_argument("--out", help="directory for run artifacts")
    p.add_argument("--headless", action="store_true",
                   help="suppress progress output (runs never open a "
                        "display; the flag quiets the console)")


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise SystemExit("error: --config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, train=replace(cfg.train, seed=args.seed))
    return cfg


def _report_line(rep: IterationReport) -> None:
    rec = "-" if rep.rec_val_loss is None else f"{rep.rec_val_loss:.4f}"
    nav = "-" if rep.nav_val_loss is None else f"{rep.nav_val_loss:.4f}"
    log.info("iter %d: encountered=%d recorded=%d nav_val=%s rec_val=%s "
             "(%.1fs)", rep.iteration, rep.encountered, rep.recorded,
             nav, rec, rep.wall_time)


def _iter_index(path: str) -> int:
    m = re.search(r"_iter(\d+)\.ckpt$", path)
    return int(m.group(1)) if m else -1


def _latest_checkpoint(out_dir: str, label: str) -> str | None:
    paths = glob.glob(os.path.join(out_dir, f"{label}_iter*.ckpt"))
    paths = [p for p in paths if _iter_index(p) >= 0]
    return max(paths, key=_iter_index) if paths else None


def _load_reports(out_dir: str, label: str) -> list[IterationReport]:
    reports = []
    for path in glob.glob(os.path.join(out_dir, f"{label}_report_iter*.json")):
        with open(path, "rb") as fh:
            body = json.load(fh)
        reports.append(IterationReport(**body, wall_time=0.0))
    reports.sort(key=lambda r: r.iteration)
    return reports


# ---------------------------------------------------------------------------
# training commands

def cmd_pretrain(args) -> int:
    cfg = _config(args)
    world = load_world(cfg)
    run_ms3l(world, cfg, out_dir=args.out, k=0, on_report=_report_line)
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    world = load_world(cfg)
    run_ms3l(world, cfg, out_dir=args.out, on_report=_report_line)
    return 0


def cmd_dagger(args) -> int:
    cfg = _config(args)
    world = load_world(cfg)
    run_dagger(world, cfg, out_dir=args.out)
    return 0


def cmd_selftrain(args) -> int:
    """Resume the self-supervised iterations from a pretrained run directory.

    Stage seeding makes the resumed run identical to one that never stopped.
    """
    if not args.out:
        raise SystemExit("error: --out must name the pretrained run directory")
    if not args.config:
        args.config = os.path.join(args.out, "config.ini")
    cfg = _config(args)
    label = "ms3l"
    ckpt = _latest_checkpoint(args.out, label)
    if ckpt is None:
        raise SystemExit(f"error: no {label} checkpoint in {args.out}; "
                         "run pretrain first")
    _, _, meta = load_checkpoint(ckpt)
    if meta.get("config_digest") not in ("", None, config_digest(cfg)):
        log.warning("config digest differs from the checkpoint's; the resumed "
                    "run will not match a straight-through run")
    net = network_from_checkpoint(ckpt)
    nav_ds = load_dataset(os.path.join(args.out, f"{label}_nav.ms3ld"))
    rec_ds = load_dataset(os.path.join(args.out, f"{label}_rec.ms3ld"))
    run = TrainRun(net=net, nav_dataset=nav_ds, rec_dataset=rec_ds,
                   reports=_load_reports(args.out, label))
    world = load_world(cfg)
    start = _iter_index(ckpt)
    if start >= cfg.train.k:
        log.info("nothing to do: checkpoint is already at iteration %d", start)
        return 0
    from .trainer import _checkpoint, _persist
    for i in range(start + 1, cfg.train.k + 1):
        rep = self_supervised_iteration(i, world, net, nav_ds, rec_ds, cfg)
        run.reports.append(rep)
        _report_line(rep)
        _checkpoint(net, cfg, args.out, label, i, run)
    _persist(run, cfg, args.out, label)
    return 0


# ---------------------------------------------------------------------------
# evaluation and reports

def _resolve_policy(spec: str, cfg: ExperimentConfig, run_dir: str | None):
    if spec == "sensor":
        return ScriptedSensorPolicy(cfg.sensor)
    if spec == "oracle":
        return lambda w: forward_expert(w, loop=cfg.oracle.loop,
                                        cfg=cfg.oracle)
    if spec in ("ms3l", "dagger"):
        if not run_dir:
            raise SystemExit(f"error: --policy {spec} needs --run <dir> "
                             "holding its checkpoints")
        ckpt = _latest_checkpoint(run_dir, spec)
        if ckpt is None:
            raise SystemExit(f"error: no {spec} checkpoint in {run_dir}")
        return NetworkNavPolicy(network_from_checkpoint(ckpt))
    if os.path.exists(spec):
        return NetworkNavPolicy(network_from_checkpoint(spec))
    raise SystemExit(f"error: --policy must be sensor, oracle, ms3l, dagger, "
                     f"or a checkpoint path (got {spec!r})")


def _print_eval(name: str, task: str, res: EvalResult) -> None:
    for i, ep in enumerate(res.episodes):
        end = f"collided at {ep.time_to_collision:.2f}s" if ep.collided \
            else "no collision"
        log.info("  episode %d: %.2f m, %s", i, ep.distance, end)
    print(f"{name} on {task}: mean distance {res.mean_distance:.2f} m, "
          f"mean time-to-collision {res.mean_time:.2f} s")


def cmd_eval(args) -> int:
    cfg = _config(args)
    tasks = standard_tasks(cfg)
    if args.task not in tasks:
        raise SystemExit(f"error: unknown task {args.task!r}; choose from "
                         f"{', '.join(sorted(tasks))}")
    policy = _resolve_policy(args.policy, cfg, args.run)
    res = evaluate(policy, tasks[args.task], cfg.train.seed,
                   sensor_cfg=cfg.sensor, noise=cfg.noise)
    _print_eval(args.policy, args.task, res)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"eval_{args.policy_slug}_"
                                      f"{args.task}.tsv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("episode\tdistance_m\ttime_to_collision_s\tcollided\n")
            for i, ep in enumerate(res.episodes):
                fh.write(f"{i}\t{ep.distance!r}\t{ep.time_to_collision!r}\t"
                         f"{str(ep.collided).lower()}\n")
        log.info("wrote %s", path)
    return 0


def cmd_report(args) -> int:
    from .evaluation import export_report
    run_dir = args.run or args.out
    if not run_dir:
        raise SystemExit("error: --run must name a training run directory")
    label = args.label
    if label == "auto":
        label = "ms3l" if glob.glob(os.path.join(
            run_dir, "ms3l_report_iter*.json")) else "dagger"
    reports = _load_reports(run_dir, label)
    if not reports:
        raise SystemExit(f"error: no {label} reports in {run_dir}")
    ds_path = os.path.join(run_dir, f"{label}_nav.ms3ld")
    nav_ds = load_dataset(ds_path) if os.path.exists(ds_path) else None
    out = args.out or os.path.join(run_dir, "report")
    written = export_report(out, reports, nav_dataset=nav_ds)
    for path in written:
        log.info("wrote %s", path)
    print(f"{len(written)} report files in {out}")
    return 0


# ---------------------------------------------------------------------------
# bridge server

def cmd_serve(args) -> int:
    import uvicorn

    from .bridge import TeleopSession, build_app

    cfg = _config(args)
    net = None
    if args.ckpt:
        net = network_from_checkpoint(args.ckpt)
    session = TeleopSession(cfg, net=net, time_scale=args.time_scale,
                            seed=args.seed)
    app = build_app(session, static_dir=args.static)
    server = app.state.bridge

    if args.train:
        world = load_world(cfg)

        def publish(rep: IterationReport) -> None:
            _report_line(rep)
            loop = getattr(server, "loop", None)
            if loop is not None:
                loop.call_soon_threadsafe(server.publish_status, rep)

        def train() -> None:
            run_ms3l(world, cfg, out_dir=args.out, on_report=publish)

        threading.Thread(target=train, name="trainer", daemon=True).start()

    log.info("bridge on ws://%s:%d/ws", args.host, args.port)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ms3l",
        description="multi-sensory semi-supervised imitation learning")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="collect demonstrations and train "
                                        "the initial policy heads")
    _add_common(p)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("selftrain", help="resume gated self-supervised "
                                         "iterations from a pretrained run")
    _add_common(p)
    p.set_defaults(fn=cmd_selftrain)

    p = sub.add_parser("run", help="full protocol: pretrain plus k gated "
                                   "iterations")
    _add_common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("dagger", help="record-everything baseline with "
                                      "oracle labels")
    _add_common(p)
    p.set_defaults(fn=cmd_dagger)

    p = sub.add_parser("eval", help="run a policy on a benchmark task")
    _add_common(p)
    p.add_argument("--policy", required=True,
                   help="sensor | oracle | ms3l | dagger | checkpoint path")
    p.add_argument("--task", required=True,
                   help="hallway-peds | classroom | noise")
    p.add_argument("--run", help="training run directory holding checkpoints "
                                 "(for --policy ms3l/dagger)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("report", help="write analysis tables for a run")
    _add_common(p)
    p.add_argument("--run", help="training run directory (tables go to "
                                 "--out, default <run>/report)")
    p.add_argument("--label", default="auto",
                   choices=("auto", "ms3l", "dagger"))
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("serve", help="teleop/monitor bridge server")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--static", help="directory of UI files to serve at /")
    p.add_argument("--ckpt", help="navigation checkpoint for the recording-"
                                  "probability display")
    p.add_argument("--time-scale", type=float, default=1.0,
                   help="simulation speed multiplier")
    p.add_argument("--train", action="store_true",
                   help="run the training protocol in the background and "
                        "publish status messages")
    p.set_defaults(fn=cmd_serve)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        format="%(message)s",
        level=logging.WARNING if args.headless else logging.INFO)
    if getattr(args, "policy", None):
        args.policy_slug = re.sub(r"[^A-Za-z0-9_-]+", "_",
                                  os.path.basename(args.policy))
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
