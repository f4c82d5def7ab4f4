import { describe, expect, it } from "vitest";

import { gamepadToCommand, KeyboardDriver } from "../src/input.js";

const settle = (kb: KeyboardDriver, seconds: number, dt = 0.05) => {
  let out = kb.current();
  for (let t = 0; t < seconds; t += dt) out = kb.step(dt);
  return out;
};

describe("keyboard driver", () => {
  it("no input decays to exactly (0, 0)", () => {
    const kb = new KeyboardDriver();
    kb.keyDown("w");
    kb.keyDown("d");
    settle(kb, 1.0);
    kb.keyUp("w");
    kb.keyUp("d");
    const out = settle(kb, 2.0);
    expect(out.v).toBe(0);
    expect(out.w).toBe(0);
  });

  it("holding forward ramps v to +1 and holds, w stays 0", () => {
    const kb = new KeyboardDriver();
    kb.keyDown("w");
    const mid = kb.step(0.1);
    expect(mid.v).toBeGreaterThan(0);
    expect(mid.v).toBeLessThan(1);
    const out = settle(kb, 1.0);
    expect(out.v).toBe(1);
    expect(out.w).toBe(0);
    expect(settle(kb, 0.5).v).toBe(1); // holds at the cap
  });

  it("decay toward zero is smooth and monotone", () => {
    const kb = new KeyboardDriver();
    kb.keyDown("ArrowUp");
    settle(kb, 1.0);
    kb.keyUp("ArrowUp");
    let prev = kb.current().v;
    for (let i = 0; i < 20; i++) {
      const v = kb.step(0.05).v;
      expect(v).toBeLessThanOrEqual(prev);
      expect(v).toBeGreaterThanOrEqual(0);
      expect(prev - v).toBeLessThan(0.5); // no instantaneous drop
      prev = v;
    }
  });

  it("opposing keys cancel and arrows map like WASD", () => {
    const kb = new KeyboardDriver();
    kb.keyDown("w");
    kb.keyDown("s");
    expect(kb.target()).toEqual({ v: 0, w: 0 });
    kb.keyUp("s");
    kb.keyDown("ArrowLeft");
    expect(kb.target()).toEqual({ v: 1, w: 1 });
    expect(kb.keyDown("x")).toBe(false); // unbound key ignored
  });
});

describe("gamepad mapping", () => {
  it("maps stick axes directly: (0.5, -0.25) -> (0.5, -0.25)", () => {
    expect(gamepadToCommand(0.5, -0.25)).toEqual({ v: 0.5, w: -0.25 });
  });

  it("clamps out-of-range axes to [-1, 1]", () => {
    expect(gamepadToCommand(1.7, -2)).toEqual({ v: 1, w: -1 });
  });
});
