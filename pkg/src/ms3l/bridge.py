"""WebSocket bridge between the simulator and the teleop/monitor UI.

One server owns one TeleopSession. The session's tick loop is the single
writer of simulation state; socket handlers run on the same event loop and
only set the pending command or toggle flags, so no locking is needed.
Messages are UTF-8 JSON text frames, one object per frame, with a strictly
increasing seq per direction per connection.

Wire schema (kind -> payload):
  state:   {kind, seq, t, pose:{x,y,th}, image:{w,h,b64}, depth:{left,mid,
            right,trusted}, us:{l,r}, p_r, recording, counts:{iter,kept,total}}
  command: {kind, seq, v, w}            client -> server, driver only
  control: {kind, seq, op}              client -> server, driver only
  status:  {kind, seq, iteration, frames_kept, nav_loss, rec_loss}
  error:   {kind, seq, ref_seq, message}

image.b64 is base64 of raw row-major RGB bytes (w*h*3). Depth means are
meters (inf encoded as null); a fully rejected third carries no obstacle
evidence. p_r is 0.0 when the session has no recording head loaded.
"""

from __future__ import annotations

import asyncio
import base64
import contextlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .config import ExperimentConfig, canonical_text, load_world
from .dataset import Dataset, save_dataset
from .episode import Frame
from .nn.model import Network
from .policies import Observation
from .sensor_policy import branch_action, decide, depth_reject
from .sensors import image_to_input, read_ultrasonic, render_depth, render_image
from .trainer import IterationReport, stream
from .world import Action, RobotState, WorldMap, spawn_state, step, \
    step_pedestrians

MESSAGE_KINDS = ("state", "command", "control", "status", "error")
CONTROL_OPS = ("start", "stop", "record_start", "record_stop", "reset")
BACKLOG_LIMIT = 64       # queued outbound messages before an observer is cut


class BridgeError(RuntimeError):
    pass


def _finite_or_none(x: float) -> float | None:
    # also strips numpy scalar types, which json refuses to serialize
    return float(x) if math.isfinite(x) else None


@dataclass
class TeleopSession:
    """A driveable simulator instance plus the demonstration it records.

    The tick order matches the trainer's episode loop (sense, label, record,
    move pedestrians, move robot), so a logged command stream replayed
    through replay_command_log reconstructs the identical trajectory.
    """

    cfg: ExperimentConfig
    net: Network | None = None
    time_scale: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        if self.time_scale <= 0:
            raise BridgeError("time_scale must be > 0")
        self.base_world: WorldMap = load_world(self.cfg)
        self.world: WorldMap = self.base_world
        self.state: RobotState = spawn_state(self.world)
        self.rng = stream(self.seed if self.seed is not None
                          else self.cfg.train.seed, "bridge")
        self.running = False
        self.recording = False
        self.tick_index = 0
        self.pending = Action(0.0, 0.0)
        self.dataset = Dataset(header=canonical_text(self.cfg))
        self.stretch_kept = 0            # frames in the current record stretch
        self.command_log: list[dict] = []
        self.trajectory: list[tuple[float, float, float]] = [self.state.pose]
        self.collisions = 0
        self.last_obs: Observation | None = None
        self.last_p_r = 0.0

    @property
    def fps(self) -> float:
        return self.cfg.train.fps

    @property
    def tick_period(self) -> float:
        return 1.0 / (self.fps * self.time_scale)

    def reset(self) -> None:
        """Back to spawn with pristine pedestrians; the demo dataset stays."""
        self.world = self.base_world
        self.state = spawn_state(self.world)
        self.recording = False
        self.command_log.append({"tick": self.tick_index, "reset": True})
        self.trajectory.append(self.state.pose)

    def tick(self) -> None:
        obs = Observation()
        obs.image = render_image(self.world, self.state,
                                 size=self.cfg.image_size)
        obs.depth = render_depth(self.world, self.state, self.rng,
                                 noise_sigma=self.cfg.noise.depth_sigma,
                                 dropout_p=self.cfg.noise.dropout_p)
        obs.us = read_ultrasonic(self.world, self.state, self.rng,
                                 noise_sigma=self.cfg.noise.us_sigma)
        self.last_obs = obs
        if self.net is not None:
            x = image_to_input(obs.image)[None]
            self.last_p_r = float(self.net.forward_rec(x)[0, 0])

        action = self.pending
        if self.recording:
            summary = depth_reject(obs.depth)
            branch = decide(summary, obs.us[0], obs.us[1], self.cfg.sensor)
            self.dataset.append([Frame(
                image=obs.image, depth_summary=summary, us=obs.us,
                sensor_label=branch_action(branch, self.cfg.sensor),
                branch=branch, human_label=action, p_r=self.last_p_r,
                iteration=0)])
            self.stretch_kept += 1

        self.command_log.append({"tick": self.tick_index,
                                 "v": action.v_norm, "w": action.w_norm})
        self.world = step_pedestrians(self.world, 1.0 / self.fps)
        self.state = step(self.world, self.state, action, 1.0 / self.fps)
        self.trajectory.append(self.state.pose)
        if self.state.collided:
            self.collisions += 1
        self.tick_index += 1

    def snapshot(self) -> dict:
        """The state-message payload for the current instant (no seq)."""
        obs = self.last_obs
        if obs is None or obs.image is None:
            img = render_image(self.world, self.state,
                               size=self.cfg.image_size)
            depth = render_depth(self.world, self.state, self.rng,
                                 noise_sigma=self.cfg.noise.depth_sigma,
                                 dropout_p=self.cfg.noise.dropout_p)
            us = read_ultrasonic(self.world, self.state, self.rng,
                                 noise_sigma=self.cfg.noise.us_sigma)
        else:
            img, depth, us = obs.image, obs.depth, obs.us
        summary = depth_reject(depth)
        return {
            "kind": "state",
            "t": self.tick_index / self.fps,
            "pose": {"x": self.state.x, "y": self.state.y,
                     "th": self.state.heading},
            "image": {"w": int(img.shape[1]), "h": int(img.shape[0]),
                      "b64": base64.b64encode(
                          np.ascontiguousarray(img).tobytes()).decode()},
            "depth": {"left": _finite_or_none(summary.left),
                      "mid": _finite_or_none(summary.mid),
                      "right": _finite_or_none(summary.right),
                      "trusted": summary.trusted},
            "us": {"l": float(us[0]), "r": float(us[1])},
            "p_r": self.last_p_r,
            "recording": self.recording,
            "counts": {"iter": 0, "kept": self.stretch_kept,
                       "total": len(self.dataset)},
        }

    def export_command_log(self) -> dict:
        return {"map": self.cfg.map_name, "fps": self.fps,
                "spawn": list(self.base_world.spawn),
                "entries": list(self.command_log)}

    def save_demos(self, path) -> None:
        save_dataset(self.dataset, path)


def replay_command_log(log: dict, world: WorldMap) -> list[tuple[float, float, float]]:
    """Re-run a logged command stream headlessly.

    Returns the pose trajectory, which is bit-identical to the live
    session's: the dynamics consume no randomness, and pedestrians move
    deterministically per tick.
    """
    fps = log["fps"]
    base = world
    state = spawn_state(world)
    poses = [state.pose]
    for entry in log["entries"]:
        if entry.get("reset"):
            world = base
            state = spawn_state(world)
            poses.append(state.pose)
            continue
        action = Action(entry["v"], entry["w"])
        world = step_pedestrians(world, 1.0 / fps)
        state = step(world, state, action, 1.0 / fps)
        poses.append(state.pose)
    return poses


@dataclass
class _Connection:
    ws: object
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(
        maxsize=BACKLOG_LIMIT))
    out_seq: int = 0
    in_seq: int = 0
    dead: bool = False

    def offer(self, payload: dict) -> bool:
        """Queue a message; a full backlog marks the connection dead."""
        if self.dead:
            return False
        try:
            self.queue.put_nowait(payload)
            return True
        except asyncio.QueueFull:
            self.dead = True
            return False

    async def writer(self):
        while True:
            payload = await self.queue.get()
            self.out_seq += 1
            await self.ws.send_text(json.dumps({**payload,
                                                "seq": self.out_seq}))


class BridgeServer:
    """Connection fan-out around one TeleopSession.

    The first live connection is the driver; everyone later observes. When
    the driver leaves, the oldest remaining connection inherits the role.
    """

    def __init__(self, session: TeleopSession):
        self.session = session
        self.connections: list[_Connection] = []
        self.loop: asyncio.AbstractEventLoop | None = None   # set at startup

    # ------------------------------------------------------------------
    # outbound

    def broadcast(self, payload: dict) -> None:
        for conn in list(self.connections):
            if not conn.offer(payload):
                self._cut(conn)

    def publish_status(self, report: IterationReport) -> None:
        self.broadcast({
            "kind": "status",
            "iteration": report.iteration,
            "frames_kept": report.recorded,
            "nav_loss": report.nav_val_loss,
            "rec_loss": report.rec_val_loss,
        })

    def _cut(self, conn: _Connection) -> None:
        conn.dead = True
        if conn in self.connections:
            self.connections.remove(conn)

    # ------------------------------------------------------------------
    # ticking

    async def run(self) -> None:
        """Pace the simulation and publish a state frame per tick."""
        while True:
            await asyncio.sleep(self.session.tick_period)
            if self.session.running:
                self.session.tick()
                self.broadcast(self.session.snapshot())

    # ------------------------------------------------------------------
    # inbound

    def _error(self, conn: _Connection, ref_seq, message: str) -> None:
        conn.offer({"kind": "error", "ref_seq": ref_seq, "message": message})

    def _is_driver(self, conn: _Connection) -> bool:
        return bool(self.connections) and self.connections[0] is conn

    def handle_text(self, conn: _Connection, text: str) -> None:
        try:
            msg = json.loads(text)
        except json.JSONDecodeError:
            self._error(conn, None, "not valid JSON")
            return
        if not isinstance(msg, dict):
            self._error(conn, None, "message must be an object")
            return
        seq = msg.get("seq")
        ref = seq if isinstance(seq, int) else None
        kind = msg.get("kind")
        if kind not in MESSAGE_KINDS:
            self._error(conn, ref, f"unknown kind {kind!r}")
            return
        if not isinstance(seq, int) or seq <= conn.in_seq:
            self._error(conn, ref, "seq must be a strictly increasing integer")
            return
        conn.in_seq = seq
        if kind == "command":
            self._on_command(conn, msg)
        elif kind == "control":
            self._on_control(conn, msg)
        else:
            self._error(conn, seq, f"kind {kind!r} is not accepted from clients")

    def _on_command(self, conn: _Connection, msg: dict) -> None:
        if not self._is_driver(conn):
            self._error(conn, msg["seq"], "not driver")
            return
        v, w = msg.get("v"), msg.get("w")
        ok = all(isinstance(u, (int, float)) and not isinstance(u, bool)
                 and math.isfinite(u) and -1.0 <= u <= 1.0 for u in (v, w))
        if not ok:
            self._error(conn, msg["seq"], "v and w must be numbers in [-1, 1]")
            return
        self.session.pending = Action(float(v), float(w))

    def _on_control(self, conn: _Connection, msg: dict) -> None:
        if not self._is_driver(conn):
            self._error(conn, msg["seq"], "not driver")
            return
        op = msg.get("op")
        if op not in CONTROL_OPS:
            self._error(conn, msg["seq"], f"unknown control op {op!r}")
            return
        s = self.session
        if op == "start":
            s.running = True
        elif op == "stop":
            s.running = False
            s.recording = False
        elif op == "record_start":
            s.recording = True
            s.stretch_kept = 0
        elif op == "record_stop":
            s.recording = False
        elif op == "reset":
            s.running = False
            s.reset()
        # reflect the new mode immediately, even while paused
        self.broadcast(s.snapshot())

    # ------------------------------------------------------------------
    # connection lifecycle (framework-facing)

    async def serve_connection(self, ws) -> None:
        """Drive one accepted WebSocket until it disconnects."""
        conn = _Connection(ws=ws)
        self.connections.append(conn)
        writer = asyncio.create_task(conn.writer())
        conn.offer(self.session.snapshot())
        try:
            while True:
                text = await ws.receive_text()
                self.handle_text(conn, text)
                if conn.dead:
                    break
        finally:
            writer.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await writer
            was_driver = self._is_driver(conn)
            self._cut(conn)
            if was_driver and self.session.recording:
                self.session.recording = False
                self.broadcast({"kind": "error", "ref_seq": None,
                                "message": "driver disconnected; "
                                           "recording paused"})
                self.broadcast(self.session.snapshot())


def build_app(session: TeleopSession, static_dir=None):
    """FastAPI application: /ws plus optional static UI files at /."""
    from contextlib import asynccontextmanager

    server = BridgeServer(session)

    @asynccontextmanager
    async def lifespan(app):
        server.loop = asyncio.get_running_loop()
        task = asyncio.create_task(server.run())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(lifespan=lifespan)
    app.state.bridge = server

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        try:
            await server.serve_connection(ws)
        except WebSocketDisconnect:
            pass

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True))
    return app


def serve(cfg: ExperimentConfig, *, host: str = "127.0.0.1", port: int = 8765,
          net: Network | None = None, static_dir=None, time_scale: float = 1.0,
          seed: int | None = None) -> None:
    """Run the bridge until interrupted (the CLI entry point)."""
    import uvicorn

    session = TeleopSession(cfg, net=net, time_scale=time_scale, seed=seed)
    app = build_app(session, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
