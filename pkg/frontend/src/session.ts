/**
 * Client-side session state and its reducer.
 *
 * All mutable UI state lives in one UiSessionState object; socket events
 * and input-mode switches funnel through apply(). The render loop only
 * reads. Messages with a seq at or below the highest seen are stale and
 * are discarded, so the rendered frame always reflects the newest state.
 */

import {
  parseServerMessage,
  StateMessage,
  StatusMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";
export type InputMode = "keyboard" | "gamepad";

export interface SeriesPoint {
  seq: number;
  value: number;
}

export interface UiSessionState {
  connection: ConnectionStatus;
  latest: StateMessage | null;
  inputMode: InputMode;
  recording: boolean;
  /** nav loss, rec loss and kept-frame counts from status messages */
  navLoss: SeriesPoint[];
  recLoss: SeriesPoint[];
  keptCounts: SeriesPoint[];
  /** highest seq seen on this connection */
  lastSeq: number;
  /** false once the server refuses a command with "not driver" */
  driver: boolean;
  banner: string | null;
  toast: string | null;
  /** true only while state frames arrive with advancing t */
  episodeRunning: boolean;
  lastStateAtMs: number;
  /** ms without a state frame after which the episode counts as stalled */
  staleAfterMs: number;
  trail: Array<[number, number]>;
  dirty: boolean;
}

const TRAIL_CAP = 4000;
const SERIES_CAP = 512;

export function createSession(staleAfterMs = 500): UiSessionState {
  return {
    connection: "connecting",
    latest: null,
    inputMode: "keyboard",
    recording: false,
    navLoss: [],
    recLoss: [],
    keptCounts: [],
    lastSeq: 0,
    driver: true,
    banner: null,
    toast: null,
    episodeRunning: false,
    lastStateAtMs: 0,
    staleAfterMs,
    trail: [],
    dirty: false,
  };
}

export type SessionEvent =
  | { type: "open" }
  | { type: "closed" }
  | { type: "message"; text: string }
  | { type: "sentControl"; op: string }
  | { type: "inputMode"; mode: InputMode };

function pushPoint(series: SeriesPoint[], seq: number, value: number): void {
  series.push({ seq, value });
  if (series.length > SERIES_CAP) series.shift();
}

function applyState(s: UiSessionState, msg: StateMessage, nowMs: number): void {
  const prevT = s.latest === null ? null : s.latest.t;
  s.latest = msg;
  s.recording = msg.recording;
  if (prevT !== null && msg.t > prevT) s.episodeRunning = true;
  s.lastStateAtMs = nowMs;
  s.trail.push([msg.pose.x, msg.pose.y]);
  if (s.trail.length > TRAIL_CAP) s.trail.splice(0, s.trail.length - TRAIL_CAP);
}

function applyStatus(s: UiSessionState, msg: StatusMessage): void {
  pushPoint(s.navLoss, msg.seq, msg.nav_loss);
  pushPoint(s.recLoss, msg.seq, msg.rec_loss);
  pushPoint(s.keptCounts, msg.seq, msg.frames_kept);
}

export function apply(
  s: UiSessionState,
  ev: SessionEvent,
  nowMs: number
): void {
  s.dirty = true;
  switch (ev.type) {
    case "open":
      s.connection = "open";
      return;
    case "closed":
      s.connection = "closed";
      s.episodeRunning = false;
      return;
    case "inputMode":
      s.inputMode = ev.mode;
      return;
    case "sentControl":
      // conservative: never claim the episode runs until ticks prove it
      if (ev.op === "stop" || ev.op === "reset") s.episodeRunning = false;
      return;
    case "message":
      break;
  }
  const msg = parseServerMessage(ev.text);
  if (msg.kind === "invalid") {
    s.toast = msg.error;
    return;
  }
  if (msg.seq <= s.lastSeq) return; // stale, discard
  s.lastSeq = msg.seq;
  switch (msg.kind) {
    case "state":
      applyState(s, msg, nowMs);
      return;
    case "status":
      applyStatus(s, msg);
      return;
    case "error":
      if (msg.message === "not driver") {
        s.driver = false;
        s.banner = "observer mode: this connection is not the driver";
      } else {
        s.toast = msg.message;
      }
      return;
  }
}

/**
 * Whether a command message may go out right now. Commands are suppressed
 * unless this connection drives, the socket is open, and state frames with
 * advancing t are still arriving (a stopped episode sends none).
 */
export function maySendCommand(s: UiSessionState, nowMs: number): boolean {
  return (
    s.connection === "open" &&
    s.driver &&
    s.episodeRunning &&
    nowMs - s.lastStateAtMs <= s.staleAfterMs
  );
}
