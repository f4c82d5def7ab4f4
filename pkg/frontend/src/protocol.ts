/**
 * Wire protocol shared with the bridge server.
 *
 * Every frame is one UTF-8 JSON object with a `kind` and a per-direction,
 * per-connection strictly increasing `seq`. The server emits state, status
 * and error messages; the client emits command and control messages.
 */

export interface Pose {
  x: number;
  y: number;
  th: number;
}

export interface WireImage {
  w: number;
  h: number;
  /** base64 of raw row-major RGB bytes, w*h*3 */
  b64: string;
}

export interface DepthSummary {
  left: number | null;
  mid: number | null;
  right: number | null;
  trusted: boolean;
}

export interface StateMessage {
  kind: "state";
  seq: number;
  t: number;
  pose: Pose;
  image: WireImage;
  depth: DepthSummary;
  us: { l: number; r: number };
  p_r: number;
  recording: boolean;
  counts: { iter: number; kept: number; total: number };
}

export interface StatusMessage {
  kind: "status";
  seq: number;
  iteration: number;
  frames_kept: number;
  nav_loss: number;
  rec_loss: number;
}

export interface ErrorMessage {
  kind: "error";
  seq: number;
  ref_seq: number | null;
  message: string;
}

export type ServerMessage = StateMessage | StatusMessage | ErrorMessage;

export interface CommandMessage {
  kind: "command";
  seq: number;
  v: number;
  w: number;
}

export type ControlOp =
  | "start"
  | "stop"
  | "record_start"
  | "record_stop"
  | "reset";

export interface ControlMessage {
  kind: "control";
  seq: number;
  op: ControlOp;
}

export type ClientMessage = CommandMessage | ControlMessage;

export interface ParseFailure {
  kind: "invalid";
  error: string;
}

const isNum = (x: unknown): x is number =>
  typeof x === "number" && Number.isFinite(x);
const isNumOrNull = (x: unknown): x is number | null => x === null || isNum(x);

function checkState(m: Record<string, unknown>): string | null {
  const pose = m.pose as Record<string, unknown> | undefined;
  if (!pose || !isNum(pose.x) || !isNum(pose.y) || !isNum(pose.th))
    return "bad pose";
  const img = m.image as Record<string, unknown> | undefined;
  if (!img || !isNum(img.w) || !isNum(img.h) || typeof img.b64 !== "string")
    return "bad image";
  const d = m.depth as Record<string, unknown> | undefined;
  if (
    !d ||
    !isNumOrNull(d.left) ||
    !isNumOrNull(d.mid) ||
    !isNumOrNull(d.right) ||
    typeof d.trusted !== "boolean"
  )
    return "bad depth";
  const us = m.us as Record<string, unknown> | undefined;
  if (!us || !isNum(us.l) || !isNum(us.r)) return "bad us";
  if (!isNum(m.t) || !isNum(m.p_r) || typeof m.recording !== "boolean")
    return "bad scalar field";
  const c = m.counts as Record<string, unknown> | undefined;
  if (!c || !isNum(c.iter) || !isNum(c.kept) || !isNum(c.total))
    return "bad counts";
  return null;
}

function checkStatus(m: Record<string, unknown>): string | null {
  if (
    !isNum(m.iteration) ||
    !isNum(m.frames_kept) ||
    !isNum(m.nav_loss) ||
    !isNum(m.rec_loss)
  )
    return "bad status field";
  return null;
}

function checkError(m: Record<string, unknown>): string | null {
  if (typeof m.message !== "string") return "bad error message";
  if (m.ref_seq !== null && !isNum(m.ref_seq)) return "bad ref_seq";
  return null;
}

/**
 * Parse one inbound text frame. Never throws: malformed input comes back
 * as {kind: "invalid"} so the caller can surface a toast instead of
 * crashing the render loop.
 */
export function parseServerMessage(text: string): ServerMessage | ParseFailure {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return { kind: "invalid", error: "not valid JSON" };
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw))
    return { kind: "invalid", error: "message must be an object" };
  const m = raw as Record<string, unknown>;
  if (!isNum(m.seq)) return { kind: "invalid", error: "missing seq" };
  switch (m.kind) {
    case "state": {
      const err = checkState(m);
      return err ? { kind: "invalid", error: err } : (m as unknown as StateMessage);
    }
    case "status": {
      const err = checkStatus(m);
      return err
        ? { kind: "invalid", error: err }
        : (m as unknown as StatusMessage);
    }
    case "error": {
      const err = checkError(m);
      return err
        ? { kind: "invalid", error: err }
        : (m as unknown as ErrorMessage);
    }
    default:
      return { kind: "invalid", error: `unknown kind ${String(m.kind)}` };
  }
}

export const clamp = (x: number, lo = -1, hi = 1): number =>
  Math.min(hi, Math.max(lo, x));
