import { beforeEach, describe, expect, it } from "vitest";

import {
  GamepadSample,
  InputLoop,
  KEY_SPEED,
  SEND_INTERVAL_MS,
} from "../src/input.js";
import type { InputMessage } from "../src/protocol.js";

let sent: InputMessage[];
let resets: number;
let loop: InputLoop;

beforeEach(() => {
  sent = [];
  resets = 0;
  loop = new InputLoop({
    send: (msg) => sent.push(msg),
    reset: () => resets++,
  });
});

describe("velocity mapping", () => {
  it("sends explicit zeros when nothing is held", () => {
    loop.tick(0);
    expect(sent).toEqual([{ type: "input", v: [0, 0, 0], gripper: "hold" }]);
  });

  it("maps WASD and QE onto the three axes", () => {
    const cases: [string, [number, number, number]][] = [
      ["KeyW", [KEY_SPEED, 0, 0]],
      ["KeyS", [-KEY_SPEED, 0, 0]],
      ["KeyA", [0, KEY_SPEED, 0]],
      ["KeyD", [0, -KEY_SPEED, 0]],
      ["KeyQ", [0, 0, KEY_SPEED]],
      ["KeyE", [0, 0, -KEY_SPEED]],
    ];
    let t = 0;
    for (const [code, v] of cases) {
      loop.keyDown(code);
      loop.tick(t);
      expect(sent.at(-1)!.v).toEqual(v);
      loop.keyUp(code);
      t += SEND_INTERVAL_MS + 1;
    }
  });

  it("cancels opposing keys and combines axes", () => {
    loop.keyDown("KeyW");
    loop.keyDown("KeyS");
    loop.keyDown("KeyA");
    loop.tick(0);
    expect(sent.at(-1)!.v).toEqual([0, KEY_SPEED, 0]);
  });

  it("stops the axis on key release", () => {
    loop.keyDown("KeyW");
    loop.tick(0);
    loop.keyUp("KeyW");
    loop.tick(SEND_INTERVAL_MS + 1);
    expect(sent.at(-1)!.v).toEqual([0, 0, 0]);
  });
});

describe("rate limiting", () => {
  it("coalesces to at most one send per interval", () => {
    for (let t = 0; t < 100; t += 1) loop.tick(t);
    // 100 ms of 1 ms ticks: sends at 0, then every ~33.3 ms.
    expect(sent.length).toBe(3);
  });

  it("keeps only the latest state between sends", () => {
    loop.tick(0);
    loop.keyDown("KeyW");
    loop.keyUp("KeyW");
    loop.keyDown("KeyA");
    loop.tick(SEND_INTERVAL_MS + 1);
    expect(sent.length).toBe(2);
    expect(sent.at(-1)!.v).toEqual([0, KEY_SPEED, 0]);
  });

  it("sustains 30 Hz over a simulated second", () => {
    for (let t = 0; t <= 1000; t += 4) loop.tick(t);
    expect(sent.length).toBeGreaterThanOrEqual(28);
    expect(sent.length).toBeLessThanOrEqual(31);
  });
});

describe("gripper toggle", () => {
  it("toggles on the keydown edge only, then holds", () => {
    expect(loop.gripperOpen()).toBe(true);
    loop.keyDown("Space");
    loop.keyDown("Space"); // key repeat while held
    loop.tick(0);
    expect(sent.at(-1)!.gripper).toBe("close");
    loop.tick(SEND_INTERVAL_MS + 1);
    expect(sent.at(-1)!.gripper).toBe("hold");
    loop.keyUp("Space");
    loop.keyDown("Space");
    loop.tick(2 * SEND_INTERVAL_MS + 2);
    expect(sent.at(-1)!.gripper).toBe("open");
  });

  it("a toggle between sends is not lost", () => {
    loop.keyDown("Space");
    loop.keyUp("Space");
    loop.tick(0);
    expect(sent[0].gripper).toBe("close");
  });
});

describe("reset and lockout", () => {
  it("R fires the reset callback immediately", () => {
    loop.keyDown("KeyR");
    expect(resets).toBe(1);
    expect(sent.length).toBe(0);
  });

  it("lockout sends one zero and then goes quiet", () => {
    loop.keyDown("KeyW");
    loop.setLocked(true);
    loop.tick(0);
    loop.tick(SEND_INTERVAL_MS + 1);
    loop.tick(2 * SEND_INTERVAL_MS + 2);
    expect(sent).toEqual([{ type: "input", v: [0, 0, 0], gripper: "hold" }]);
  });

  it("lockout ignores gripper toggles but allows reset", () => {
    loop.setLocked(true);
    loop.keyDown("Space");
    expect(loop.gripperOpen()).toBe(true);
    loop.keyDown("KeyR");
    expect(resets).toBe(1);
  });

  it("resumes normal sending after unlock", () => {
    loop.setLocked(true);
    loop.tick(0);
    loop.setLocked(false);
    loop.keyDown("KeyW");
    loop.tick(SEND_INTERVAL_MS + 1);
    expect(sent.at(-1)!.v).toEqual([KEY_SPEED, 0, 0]);
  });
});

describe("gamepad", () => {
  function withPad(sample: GamepadSample | null): void {
    loop.setGamepadSampler(() => sample);
  }

  it("maps the left stick to x/y with stick-up as forward", () => {
    withPad({ axes: [0, -1], buttons: [] });
    loop.tick(0);
    expect(sent.at(-1)!.v).toEqual([KEY_SPEED, 0, 0]);
    withPad({ axes: [1, 0], buttons: [] });
    loop.tick(SEND_INTERVAL_MS + 1);
    expect(sent.at(-1)!.v).toEqual([0, -KEY_SPEED, 0]);
  });

  it("applies a deadzone to small deflections", () => {
    withPad({ axes: [0.05, -0.1], buttons: [] });
    loop.tick(0);
    expect(sent.at(-1)!.v).toEqual([0, 0, 0]);
  });

  it("drives z with the triggers", () => {
    withPad({ axes: [0, 0], buttons: [0, 0, 0, 0, 0, 0, 0.25, 1.0] });
    loop.tick(0);
    const v = sent.at(-1)!.v!;
    expect(Math.abs(v[2] - 0.75 * KEY_SPEED)).toBeLessThan(1e-12);
  });

  it("adds stick motion onto held keys", () => {
    loop.keyDown("KeyQ");
    withPad({ axes: [0, -1], buttons: [] });
    loop.tick(0);
    expect(sent.at(-1)!.v).toEqual([KEY_SPEED, 0, KEY_SPEED]);
  });

  it("toggles the gripper on the south button edge", () => {
    const pad: GamepadSample = { axes: [0, 0], buttons: [1] };
    withPad(pad);
    loop.tick(0);
    expect(sent.at(-1)!.gripper).toBe("close");
    // Held button: no second toggle.
    loop.tick(SEND_INTERVAL_MS + 1);
    expect(sent.at(-1)!.gripper).toBe("hold");
    pad.buttons = [0];
    loop.tick(2 * SEND_INTERVAL_MS + 2);
    pad.buttons = [1];
    loop.tick(3 * SEND_INTERVAL_MS + 3);
    expect(sent.at(-1)!.gripper).toBe("open");
  });

  it("fires reset on the east button edge", () => {
    withPad({ axes: [0, 0], buttons: [0, 1] });
    loop.tick(0);
    expect(resets).toBe(1);
  });
});
