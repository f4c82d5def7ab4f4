/**
 * Application wiring: one WebSocket, one UiSessionState, one render loop.
 *
 * The socket handler and input listeners only feed the session reducer;
 * a single requestAnimationFrame loop repaints when the state is dirty.
 */

import { Commander } from "./commander.js";
import { gamepadToCommand, KeyboardDriver, Vector } from "./input.js";
import { ControlOp } from "./protocol.js";
import { renderAll, Dom } from "./render.js";
import { apply, createSession, UiSessionState } from "./session.js";

const PUMP_MS = 50;
const RECONNECT_MS = 1000;

function grab(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing #${id}`);
  return el;
}

const dom: Dom = {
  connection: grab("connection"),
  banner: grab("banner"),
  toast: grab("toast"),
  topdown: grab("topdown") as HTMLCanvasElement,
  camera: grab("camera") as HTMLCanvasElement,
  depthBars: grab("depth-bars") as HTMLCanvasElement,
  trust: grab("trust"),
  usL: grab("us-l") as HTMLCanvasElement,
  usR: grab("us-r") as HTMLCanvasElement,
  dial: grab("dial") as HTMLCanvasElement,
  recording: grab("recording"),
  counts: grab("counts"),
  navChart: grab("nav-chart") as HTMLCanvasElement,
  recChart: grab("rec-chart") as HTMLCanvasElement,
  keptChart: grab("kept-chart") as HTMLCanvasElement,
};

let session: UiSessionState = createSession();
let commander = new Commander();
const keyboard = new KeyboardDriver();
let ws: WebSocket | null = null;

function connect(): void {
  session = createSession();
  commander = new Commander();
  const proto = location.protocol === "https:" ? "wss" : "ws";
  ws = new WebSocket(`${proto}://${location.host}/ws`);
  ws.onopen = () => apply(session, { type: "open" }, performance.now());
  ws.onmessage = (ev) =>
    apply(session, { type: "message", text: String(ev.data) },
          performance.now());
  ws.onclose = () => {
    apply(session, { type: "closed" }, performance.now());
    setTimeout(connect, RECONNECT_MS);
  };
}

function send(msg: object): void {
  if (ws !== null && ws.readyState === WebSocket.OPEN)
    ws.send(JSON.stringify(msg));
}

// ---------------------------------------------------------------------------
// input

window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  if (keyboard.keyDown(ev.key)) {
    if (session.inputMode !== "keyboard")
      apply(session, { type: "inputMode", mode: "keyboard" },
            performance.now());
    ev.preventDefault();
  }
});
window.addEventListener("keyup", (ev) => keyboard.keyUp(ev.key));
window.addEventListener("gamepadconnected", () =>
  apply(session, { type: "inputMode", mode: "gamepad" }, performance.now()));

function readGamepad(): Vector | null {
  const pads = navigator.getGamepads ? navigator.getGamepads() : [];
  const gp = pads[0];
  if (gp == null) return null;
  // stick up reads -1 on the hardware axis; forward is +v on the wire
  return gamepadToCommand(-gp.axes[1], -gp.axes[0]);
}

let lastPump = performance.now();
setInterval(() => {
  const now = performance.now();
  const dt = (now - lastPump) / 1000;
  lastPump = now;
  let vec = keyboard.step(dt);
  if (session.inputMode === "gamepad") {
    const g = readGamepad();
    if (g !== null) vec = g;
  }
  const cmd = commander.nextCommand(session, vec, now);
  if (cmd !== null) send(cmd);
}, PUMP_MS);

// ---------------------------------------------------------------------------
// controls

const CONTROL_BUTTONS: Array<[string, ControlOp]> = [
  ["btn-start", "start"],
  ["btn-stop", "stop"],
  ["btn-rec-start", "record_start"],
  ["btn-rec-stop", "record_stop"],
  ["btn-reset", "reset"],
];
for (const [id, op] of CONTROL_BUTTONS) {
  grab(id).addEventListener("click", () => {
    send(commander.control(op));
    apply(session, { type: "sentControl", op }, performance.now());
  });
}

const betaInput = grab("beta") as HTMLInputElement;

// ---------------------------------------------------------------------------
// render loop

function frame(): void {
  if (session.dirty) {
    const beta = Number.parseFloat(betaInput.value);
    renderAll(dom, session, Number.isFinite(beta) ? beta : 0.99);
    session.dirty = false;
  }
  requestAnimationFrame(frame);
}

connect();
requestAnimationFrame(frame);
