/**
 * WebSocket session management: validation at the boundary, a latest-frame
 * buffer, reconnection with exponential backoff, and staleness tracking.
 *
 * The render loop runs free of the network: it asks for the newest validated
 * state frame each animation tick, so a burst of frames never queues work and
 * a silent server is detected by age rather than by blocking. All time and
 * socket construction is injected to keep the logic testable.
 */

import {
  ClientMessage,
  ErrorFrame,
  EventFrame,
  StateFrame,
  validateServerMessage,
} from "./protocol.js";

export interface WsLike {
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  send(data: string): void;
  close(): void;
}

export interface SessionOptions {
  wsFactory?: (url: string) => WsLike;
  now?: () => number;
  schedule?: (fn: () => void, ms: number) => () => void;
}

export const BACKOFF_INITIAL_MS = 500;
export const BACKOFF_CAP_MS = 8000;
export const STALE_AFTER_MS = 1000;

export type ConnState = "idle" | "connecting" | "open" | "retrying";

function defaultSchedule(fn: () => void, ms: number): () => void {
  const id = setTimeout(fn, ms);
  return () => clearTimeout(id);
}

export class SessionSocket {
  private ws: WsLike | null = null;
  private state: ConnState = "idle";
  private backoff = BACKOFF_INITIAL_MS;
  private cancelRetry: (() => void) | null = null;
  private latest: StateFrame | null = null;
  private lastFrameAt = -Infinity;
  private openedAt = -Infinity;
  private notices: (ErrorFrame | EventFrame)[] = [];
  private dropped = 0;
  private closedByUser = false;

  private wsFactory: (url: string) => WsLike;
  private now: () => number;
  private schedule: (fn: () => void, ms: number) => () => void;

  constructor(private url: string, opts: SessionOptions = {}) {
    this.wsFactory = opts.wsFactory ??
      ((u) => new WebSocket(u) as unknown as WsLike);
    this.now = opts.now ?? (() => Date.now());
    this.schedule = opts.schedule ?? defaultSchedule;
  }

  connect(): void {
    if (this.state === "open" || this.state === "connecting") return;
    this.closedByUser = false;
    this.cancelRetry?.();
    this.cancelRetry = null;
    this.state = "connecting";
    const ws = this.wsFactory(this.url);
    this.ws = ws;
    ws.onopen = () => {
      if (ws !== this.ws) return;
      this.state = "open";
      this.backoff = BACKOFF_INITIAL_MS;
      this.openedAt = this.now();
    };
    ws.onmessage = (ev) => {
      if (ws !== this.ws) return;
      this.handlePayload(ev.data);
    };
    const onDrop = () => {
      if (ws !== this.ws) return;
      this.ws = null;
      if (this.closedByUser) {
        this.state = "idle";
        return;
      }
      this.state = "retrying";
      const wait = this.backoff;
      this.backoff = Math.min(BACKOFF_CAP_MS, this.backoff * 2);
      this.cancelRetry = this.schedule(() => {
        this.cancelRetry = null;
        this.state = "idle";
        this.connect();
      }, wait);
    };
    ws.onclose = onDrop;
    ws.onerror = () => {
      // Browsers fire error then close; a bare error still means the
      // connection is done for our purposes.
      try {
        ws.close();
      } catch {
        // already gone
      }
    };
  }

  private handlePayload(data: unknown): void {
    const msg = validateServerMessage(
      typeof data === "string" ? data : String(data),
    );
    if (msg === null) {
      this.dropped += 1;
      return;
    }
    if (msg.type === "state") {
      this.latest = msg;
      this.lastFrameAt = this.now();
    } else {
      this.notices.push(msg);
      if (this.notices.length > 64) this.notices.shift();
    }
  }

  /** Newest validated state frame; the buffer holds exactly one. */
  latestFrame(): StateFrame | null {
    return this.latest;
  }

  /** Drain queued error/event messages (oldest first). */
  takeNotices(): (ErrorFrame | EventFrame)[] {
    const out = this.notices;
    this.notices = [];
    return out;
  }

  droppedCount(): number {
    return this.dropped;
  }

  connectionState(): ConnState {
    return this.state;
  }

  /** Current wait before the next reconnect attempt, for HUD display. */
  currentBackoffMs(): number {
    return this.backoff;
  }

  /**
   * True when connected but no state frame has arrived for STALE_AFTER_MS.
   * Counts from the connection opening so a server that never sends frames
   * also trips the banner.
   */
  isStale(): boolean {
    if (this.state !== "open") return false;
    const ref = Math.max(this.lastFrameAt, this.openedAt);
    return this.now() - ref > STALE_AFTER_MS;
  }

  send(msg: ClientMessage): boolean {
    if (this.state !== "open" || !this.ws) return false;
    this.ws.send(JSON.stringify(msg));
    return true;
  }

  close(): void {
    this.closedByUser = true;
    this.cancelRetry?.();
    this.cancelRetry = null;
    const ws = this.ws;
    this.ws = null;
    this.state = "idle";
    ws?.close();
  }
}
