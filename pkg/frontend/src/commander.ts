/**
 * Mints outbound messages with one strictly increasing seq per connection.
 *
 * Drive commands are gated: none go out while this connection is not the
 * driver or while the episode is stopped. Control ops are not gated (the
 * driver needs "start" while stopped; an observer's attempt just draws a
 * "not driver" error, which flips the session into observer mode).
 */

import { CommandMessage, ControlMessage, ControlOp } from "./protocol.js";
import { maySendCommand, UiSessionState } from "./session.js";
import { Vector } from "./input.js";

export class Commander {
  private seq = 0;
  private lastSent: Vector | null = null;

  /** The drive command to send this tick, or null when suppressed. */
  nextCommand(
    s: UiSessionState,
    vec: Vector,
    nowMs: number
  ): CommandMessage | null {
    if (!maySendCommand(s, nowMs)) return null;
    const idle = vec.v === 0 && vec.w === 0;
    const wasIdle =
      this.lastSent !== null && this.lastSent.v === 0 && this.lastSent.w === 0;
    if (idle && wasIdle) return null; // at rest, stop repeating (0,0)
    this.lastSent = { ...vec };
    return { kind: "command", seq: ++this.seq, v: vec.v, w: vec.w };
  }

  control(op: ControlOp): ControlMessage {
    return { kind: "control", seq: ++this.seq, op };
  }
}
