/**
 * Headless protocol client: the same validation and message flow as the
 * browser UI, minus rendering. Drives scripted sessions against a live
 * server from node, recording everything sent and received so a session can
 * be replayed input for input and compared tick for tick.
 */

import type { WsLike } from "./net.js";
import {
  ClientMessage,
  ServerMessage,
  StateFrame,
  validateServerMessage,
} from "./protocol.js";

export class TimeoutError extends Error {}

export class HeadlessClient {
  /** Every validated state frame, in arrival order. */
  frames: StateFrame[] = [];
  /** Every message sent, in order; the replay script for this session. */
  sent: ClientMessage[] = [];
  invalidCount = 0;

  private queue: ServerMessage[] = [];
  private waiters: ((m: ServerMessage) => void)[] = [];
  private closed = false;

  constructor(private ws: WsLike) {
    ws.onmessage = (ev) => {
      const msg = validateServerMessage(
        typeof ev.data === "string" ? ev.data : String(ev.data),
      );
      if (msg === null) {
        this.invalidCount += 1;
        return;
      }
      if (msg.type === "state") this.frames.push(msg);
      const waiter = this.waiters.shift();
      if (waiter) waiter(msg);
      else this.queue.push(msg);
    };
    ws.onclose = () => {
      this.closed = true;
      // Wake pending waiters so awaiting code fails fast instead of hanging.
      for (const w of this.waiters.splice(0)) {
        w({ type: "error", message: "connection closed" });
      }
    };
  }

  static connect(
    url: string,
    factory: (url: string) => WsLike,
    timeoutMs = 10000,
  ): Promise<HeadlessClient> {
    return new Promise((resolve, reject) => {
      const ws = factory(url);
      const timer = setTimeout(() => {
        ws.close();
        reject(new TimeoutError(`no connection to ${url}`));
      }, timeoutMs);
      ws.onopen = () => {
        clearTimeout(timer);
        resolve(new HeadlessClient(ws));
      };
      ws.onerror = () => {
        clearTimeout(timer);
        reject(new Error(`websocket error for ${url}`));
      };
    });
  }

  send(msg: ClientMessage): void {
    this.sent.push(msg);
    this.ws.send(JSON.stringify(msg));
  }

  /** Next validated message of any type. */
  next(timeoutMs = 5000): Promise<ServerMessage> {
    const queued = this.queue.shift();
    if (queued) return Promise.resolve(queued);
    if (this.closed) {
      return Promise.resolve({ type: "error", message: "connection closed" });
    }
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        const i = this.waiters.indexOf(handler);
        if (i >= 0) this.waiters.splice(i, 1);
        reject(new TimeoutError("no message within timeout"));
      }, timeoutMs);
      const handler = (m: ServerMessage) => {
        clearTimeout(timer);
        resolve(m);
      };
      this.waiters.push(handler);
    });
  }

  async nextState(timeoutMs = 5000): Promise<StateFrame> {
    for (;;) {
      const msg = await this.next(timeoutMs);
      if (msg.type === "state") return msg;
      if (msg.type === "error" && msg.message === "connection closed") {
        throw new Error("connection closed while waiting for a state frame");
      }
    }
  }

  /** Wait until a state frame satisfies pred, bounded by maxFrames. */
  async stateWhere(
    pred: (f: StateFrame) => boolean,
    maxFrames = 400,
    timeoutMs = 5000,
  ): Promise<StateFrame> {
    for (let i = 0; i < maxFrames; i++) {
      const f = await this.nextState(timeoutMs);
      if (pred(f)) return f;
    }
    throw new TimeoutError(`no matching frame within ${maxFrames} frames`);
  }

  async waitEvent(name: string, timeoutMs = 5000): Promise<ServerMessage> {
    for (;;) {
      const msg = await this.next(timeoutMs);
      if (msg.type === "event" && msg.event === name) return msg;
    }
  }

  close(): void {
    this.ws.close();
  }
}
