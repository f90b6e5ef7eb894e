/**
 * HUD state derived from session data. Pure: feed it the latest frame plus
 * connection info and read back display strings; no DOM, no timers, so the
 * mapping from session state to what the operator sees is directly testable.
 */

import type { ConnState } from "./net.js";
import type { ErrorFrame, EventFrame, StateFrame } from "./protocol.js";

export interface HudView {
  connection: string;
  status: string;
  banner: string | null;
  bannerKind: "success" | "stale" | "error" | null;
  log: string[];
  lockInput: boolean;
}

const LOG_LIMIT = 8;

export class HudModel {
  private log: string[] = [];
  private lastError: string | null = null;

  pushNotices(notices: (ErrorFrame | EventFrame)[]): void {
    for (const n of notices) {
      if (n.type === "error") {
        this.lastError = n.message;
        this.append(`error: ${n.message}`);
      } else {
        const detail = n.detail ? ` ${JSON.stringify(n.detail)}` : "";
        this.append(`event: ${n.event}${detail}`);
      }
    }
  }

  pushFrameEvents(frame: StateFrame): void {
    // Simulator event entries name themselves under "type"
    // (e.g. {"type": "attach", "object": "screwdriver"}).
    for (const ev of frame.events) {
      const name = typeof ev.type === "string" ? ev.type : "event";
      const obj = typeof ev.object === "string" ? ` ${ev.object}` : "";
      this.append(`tick ${frame.tick}: ${name}${obj}`);
    }
  }

  clearError(): void {
    this.lastError = null;
  }

  private append(line: string): void {
    this.log.push(line);
    if (this.log.length > LOG_LIMIT) this.log.shift();
  }

  view(
    frame: StateFrame | null,
    conn: ConnState,
    stale: boolean,
    backoffMs: number,
  ): HudView {
    const connection = conn === "open"
      ? (stale ? "connected (no frames)" : "connected")
      : conn === "retrying"
      ? `reconnecting in ${(backoffMs / 1000).toFixed(1)} s`
      : conn === "connecting"
      ? "connecting"
      : "disconnected";

    let status = "no session";
    if (frame) {
      const held = frame.gripper.attached ? ` holding ${frame.gripper.attached}` : "";
      const pred = frame.predicted_orientation
        ? (frame.stale_prediction ? " · assist STALE" : " · assist on")
        : "";
      status = `${frame.status} · tick ${frame.tick} · resets ${frame.resets}` +
        `${held}${pred}`;
    }

    let banner: string | null = null;
    let bannerKind: HudView["bannerKind"] = null;
    const success = frame?.status === "success";
    if (success) {
      banner = "Task complete. Inputs locked; press R to reset.";
      bannerKind = "success";
    } else if (conn === "open" && stale) {
      banner = "No frames from server for over a second.";
      bannerKind = "stale";
    } else if (this.lastError) {
      banner = this.lastError;
      bannerKind = "error";
    }

    return {
      connection,
      status,
      banner,
      bannerKind,
      log: this.log.slice(),
      lockInput: success,
    };
  }
}
