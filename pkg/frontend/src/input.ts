/**
 * Translation input for the operator side of the shared-control loop.
 *
 * Keyboard: W/S move +x/-x, A/D move +y/-y, Q/E move +z/-z, Space toggles the
 * gripper, R requests a scene reset. Gamepad: left stick drives x/y, the
 * triggers drive z, the south button toggles the gripper, the east button
 * resets. Whatever arrives between sends is coalesced to the latest state and
 * shipped at most 30 times a second; with nothing held the loop still sends
 * an explicit zero velocity so the server never keeps acting on stale motion.
 *
 * The loop owns no session state beyond what it needs to rate-limit: a
 * success lockout is imposed from outside and silences everything except the
 * reset request.
 */

import type { GripperCommand, InputMessage, Vec3 } from "./protocol.js";

export const SEND_INTERVAL_MS = 1000 / 30;
export const KEY_SPEED = 0.12;
const DEADZONE = 0.15;

export interface GamepadSample {
  axes: number[];
  /** Button values in [0, 1]; analog triggers included. */
  buttons: number[];
}

interface Callbacks {
  send(msg: InputMessage): void;
  reset(): void;
}

export class InputLoop {
  private pressed = new Set<string>();
  private wantOpen = true;
  private pendingGripper: GripperCommand | null = null;
  private lastSent = -Infinity;
  private locked = false;
  private zeroSentWhileLocked = false;
  private padButtons: number[] = [];
  private sampler: (() => GamepadSample | null) | null = null;

  constructor(private cb: Callbacks) {}

  setGamepadSampler(fn: (() => GamepadSample | null) | null): void {
    this.sampler = fn;
  }

  /** Success lockout: freeze inputs until released (reset still works). */
  setLocked(locked: boolean): void {
    if (locked && !this.locked) this.zeroSentWhileLocked = false;
    this.locked = locked;
  }

  isLocked(): boolean {
    return this.locked;
  }

  gripperOpen(): boolean {
    return this.wantOpen;
  }

  /** Handle a KeyboardEvent.code press. Returns true if consumed. */
  keyDown(code: string): boolean {
    if (code === "KeyR") {
      this.cb.reset();
      return true;
    }
    if (this.pressed.has(code)) return true; // key repeat
    this.pressed.add(code);
    if (code === "Space") {
      if (!this.locked) this.toggleGripper();
      return true;
    }
    return ["KeyW", "KeyA", "KeyS", "KeyD", "KeyQ", "KeyE"].includes(code);
  }

  keyUp(code: string): void {
    this.pressed.delete(code);
  }

  private toggleGripper(): void {
    this.wantOpen = !this.wantOpen;
    this.pendingGripper = this.wantOpen ? "open" : "close";
  }

  private keyboardVelocity(): Vec3 {
    const v: Vec3 = [0, 0, 0];
    const has = (c: string) => this.pressed.has(c);
    if (has("KeyW")) v[0] += KEY_SPEED;
    if (has("KeyS")) v[0] -= KEY_SPEED;
    if (has("KeyA")) v[1] += KEY_SPEED;
    if (has("KeyD")) v[1] -= KEY_SPEED;
    if (has("KeyQ")) v[2] += KEY_SPEED;
    if (has("KeyE")) v[2] -= KEY_SPEED;
    return v;
  }

  private applyGamepad(v: Vec3): Vec3 {
    if (!this.sampler) return v;
    const pad = this.sampler();
    if (!pad) return v;
    const dz = (x: number) => (Math.abs(x) > DEADZONE ? x : 0);
    const ax = dz(pad.axes[1] ?? 0);
    const ay = dz(pad.axes[0] ?? 0);
    // Stick up is negative on the hardware axis; up means forward (+x).
    const out: Vec3 = [v[0] - ax * KEY_SPEED, v[1] - ay * KEY_SPEED, v[2]];
    const lower = pad.buttons[6] ?? 0;
    const raise = pad.buttons[7] ?? 0;
    out[2] += (raise - lower) * KEY_SPEED;
    const edge = (i: number) =>
      (pad.buttons[i] ?? 0) > 0.5 && (this.padButtons[i] ?? 0) <= 0.5;
    if (edge(0) && !this.locked) this.toggleGripper();
    if (edge(1)) this.cb.reset();
    this.padButtons = pad.buttons.slice();
    return out;
  }

  /**
   * Pump once per animation frame with a monotonic clock in ms. Sends at most
   * every SEND_INTERVAL_MS.
   */
  tick(now: number): void {
    if (now - this.lastSent < SEND_INTERVAL_MS) return;
    if (this.locked) {
      if (!this.zeroSentWhileLocked) {
        this.cb.send({ type: "input", v: [0, 0, 0], gripper: "hold" });
        this.zeroSentWhileLocked = true;
        this.lastSent = now;
      }
      return;
    }
    const v = this.applyGamepad(this.keyboardVelocity());
    const gripper = this.pendingGripper ?? "hold";
    this.pendingGripper = null;
    this.cb.send({ type: "input", v, gripper });
    this.lastSent = now;
  }
}
