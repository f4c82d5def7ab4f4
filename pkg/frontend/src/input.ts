/**
 * Driving input: keyboard with ramp/decay, gamepad with direct axes.
 *
 * Keyboard keys are binary, so the command eases toward the held target
 * and smoothly decays to zero on release; that approximates joystick
 * centering and keeps demonstrations imitable. Gamepad axes pass through
 * unshaped. Both are clamped to [-1, 1].
 */

import { clamp } from "./protocol.js";

export interface Vector {
  v: number;
  w: number;
}

export interface KeyboardTuning {
  /** units per second toward the held target */
  rampRate: number;
  /** exponential decay rate (1/s) once released */
  decayRate: number;
  /** magnitude below which a decaying axis snaps to exactly 0 */
  snapEps: number;
}

export const DEFAULT_TUNING: KeyboardTuning = {
  rampRate: 3.0,
  decayRate: 6.0,
  snapEps: 0.005,
};

const KEY_AXES: Record<string, Partial<Vector>> = {
  w: { v: 1 },
  ArrowUp: { v: 1 },
  s: { v: -1 },
  ArrowDown: { v: -1 },
  a: { w: 1 },
  ArrowLeft: { w: 1 },
  d: { w: -1 },
  ArrowRight: { w: -1 },
};

export class KeyboardDriver {
  private held = new Set<string>();
  private cur: Vector = { v: 0, w: 0 };

  constructor(private tuning: KeyboardTuning = DEFAULT_TUNING) {}

  keyDown(key: string): boolean {
    if (!(key in KEY_AXES)) return false;
    this.held.add(key);
    return true;
  }

  keyUp(key: string): void {
    this.held.delete(key);
  }

  /** Target per axis from the currently held keys (opposites cancel). */
  target(): Vector {
    let v = 0;
    let w = 0;
    for (const key of this.held) {
      const ax = KEY_AXES[key];
      v += ax.v ?? 0;
      w += ax.w ?? 0;
    }
    return { v: clamp(v), w: clamp(w) };
  }

  /** Advance the eased command by dt seconds and return it. */
  step(dt: number): Vector {
    const t = this.target();
    this.cur.v = this.stepAxis(this.cur.v, t.v, dt);
    this.cur.w = this.stepAxis(this.cur.w, t.w, dt);
    return { ...this.cur };
  }

  current(): Vector {
    return { ...this.cur };
  }

  private stepAxis(cur: number, target: number, dt: number): number {
    if (target !== 0) {
      const step = this.tuning.rampRate * dt;
      const next = cur + Math.sign(target - cur) * Math.min(step, Math.abs(target - cur));
      return clamp(next);
    }
    const decayed = cur * Math.exp(-this.tuning.decayRate * dt);
    return Math.abs(decayed) < this.tuning.snapEps ? 0 : decayed;
  }
}

/** Gamepad sticks map straight through: (0.5, -0.25) -> (0.5, -0.25). */
export function gamepadToCommand(axisV: number, axisW: number): Vector {
  return { v: clamp(axisV), w: clamp(axisW) };
}
