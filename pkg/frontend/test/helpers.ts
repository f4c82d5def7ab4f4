import { StateMessage, StatusMessage } from "../src/protocol.js";

let autoSeq = 0;

/** A valid synthetic state message; override any field per test. */
export function makeState(over: Partial<StateMessage> = {}): StateMessage {
  autoSeq += 1;
  return {
    kind: "state",
    seq: autoSeq,
    t: 0.1 * autoSeq,
    pose: { x: 1.0, y: 2.0, th: 0.3 },
    image: { w: 2, h: 2, b64: btoa("\x01".repeat(12)) },
    depth: { left: 1.2, mid: 2.0, right: null, trusted: true },
    us: { l: 1.5, r: 0.4 },
    p_r: 0.5,
    recording: false,
    counts: { iter: 1, kept: 10, total: 600 },
    ...over,
  };
}

export function makeStatus(over: Partial<StatusMessage> = {}): StatusMessage {
  autoSeq += 1;
  return {
    kind: "status",
    seq: autoSeq,
    iteration: 1,
    frames_kept: 88,
    nav_loss: 0.01,
    rec_loss: 0.1,
    ...over,
  };
}

export function resetSeq(start = 0): void {
  autoSeq = start;
}
