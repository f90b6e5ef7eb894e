/**
 * Wire protocol types and validation for the hitld teleop server.
 *
 * The server's JSON Schemas (src/hitld/schemas/ in the repository) are the
 * authoritative contract; the guards here re-state them field by field so the
 * client renders only frames it has fully validated. Anything that fails
 * validation is dropped, never partially displayed. The checks are strict:
 * unknown keys are rejected exactly as additionalProperties=false would.
 */

export type Vec3 = [number, number, number];
export type QuatWxyz = [number, number, number, number];

export interface GripperView {
  position: Vec3;
  orientation: QuatWxyz;
  open: boolean;
  attached: string | null;
}

export interface ObjectView {
  id: string;
  shape: string;
  dims: number[];
  position: Vec3;
  orientation: QuatWxyz;
  color: Vec3;
}

export interface CloudView {
  positions: Vec3[];
  colors: Vec3[];
}

export type SessionStatus = "idle" | "running" | "success" | "reset";

export interface StateFrame {
  type: "state";
  session: number;
  tick: number;
  elapsed_ticks: number;
  status: SessionStatus;
  gripper: GripperView;
  objects: ObjectView[];
  cloud: CloudView;
  events: Record<string, unknown>[];
  resets: number;
  predicted_orientation?: Vec3;
  stale_prediction?: boolean;
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export interface EventFrame {
  type: "event";
  event: string;
  session?: number;
  detail?: Record<string, unknown>;
}

export type ServerMessage = StateFrame | ErrorFrame | EventFrame;

export type GripperCommand = "open" | "close" | "hold";
export type CartMode = "translate" | "rotate";

export interface InputMessage {
  type: "input";
  v?: Vec3;
  rotation?: Vec3;
  gripper?: GripperCommand;
  cart_mode?: CartMode;
}

export type ClientMessage =
  | { type: "start" }
  | { type: "reset" }
  | { type: "export" }
  | InputMessage;

const STATUSES = ["idle", "running", "success", "reset"];

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function onlyKeys(x: Record<string, unknown>, allowed: string[]): boolean {
  return Object.keys(x).every((k) => allowed.includes(k));
}

function isUint(x: unknown): x is number {
  return typeof x === "number" && Number.isInteger(x) && x >= 0;
}

function isNum(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isVec3(x: unknown): x is Vec3 {
  return Array.isArray(x) && x.length === 3 && x.every(isNum);
}

function isQuat(x: unknown): x is QuatWxyz {
  return Array.isArray(x) && x.length === 4 && x.every(isNum);
}

function isRgb(x: unknown): x is Vec3 {
  return Array.isArray(x) && x.length === 3 &&
    x.every((v) => isNum(v) && v >= 0 && v <= 1);
}

function isGripper(x: unknown): x is GripperView {
  return isRecord(x) &&
    onlyKeys(x, ["position", "orientation", "open", "attached"]) &&
    isVec3(x.position) && isQuat(x.orientation) &&
    typeof x.open === "boolean" &&
    (x.attached === null || typeof x.attached === "string");
}

function isObjectView(x: unknown): x is ObjectView {
  return isRecord(x) &&
    onlyKeys(x, ["id", "shape", "dims", "position", "orientation", "color"]) &&
    typeof x.id === "string" && typeof x.shape === "string" &&
    Array.isArray(x.dims) && x.dims.every(isNum) &&
    isVec3(x.position) && isQuat(x.orientation) && isRgb(x.color);
}

function isCloud(x: unknown): x is CloudView {
  if (!isRecord(x) || !onlyKeys(x, ["positions", "colors"])) return false;
  const p = x.positions;
  const c = x.colors;
  if (!Array.isArray(p) || !Array.isArray(c)) return false;
  if (p.length > 512 || c.length > 512) return false;
  return p.every(isVec3) && c.every(isRgb);
}

const STATE_KEYS = [
  "type", "session", "tick", "elapsed_ticks", "status", "gripper", "objects",
  "cloud", "events", "resets", "predicted_orientation", "stale_prediction",
];

function isStateFrame(x: Record<string, unknown>): boolean {
  if (x.type !== "state" || !onlyKeys(x, STATE_KEYS)) return false;
  if (!isUint(x.session) || !isUint(x.tick) || !isUint(x.elapsed_ticks) ||
      !isUint(x.resets)) {
    return false;
  }
  if (!STATUSES.includes(x.status as string)) return false;
  if (!isGripper(x.gripper)) return false;
  if (!Array.isArray(x.objects) || !x.objects.every(isObjectView)) return false;
  if (!isCloud(x.cloud)) return false;
  if (!Array.isArray(x.events) || !x.events.every(isRecord)) return false;
  if ("predicted_orientation" in x && !isVec3(x.predicted_orientation)) {
    return false;
  }
  if ("stale_prediction" in x && typeof x.stale_prediction !== "boolean") {
    return false;
  }
  return true;
}

/** Parse one server payload; null means the frame must be discarded. */
export function validateServerMessage(raw: unknown): ServerMessage | null {
  let data: unknown = raw;
  if (typeof raw === "string") {
    try {
      data = JSON.parse(raw);
    } catch {
      return null;
    }
  }
  if (!isRecord(data)) return null;
  if (data.type === "state") {
    return isStateFrame(data) ? (data as unknown as StateFrame) : null;
  }
  if (data.type === "error") {
    return onlyKeys(data, ["type", "message"]) &&
        typeof data.message === "string"
      ? { type: "error", message: data.message }
      : null;
  }
  if (data.type === "event") {
    if (!onlyKeys(data, ["type", "event", "session", "detail"])) return null;
    if (typeof data.event !== "string") return null;
    if ("session" in data && !isUint(data.session)) return null;
    if ("detail" in data && !isRecord(data.detail)) return null;
    return data as unknown as EventFrame;
  }
  return null;
}

export function inputMessage(v: Vec3, gripper: GripperCommand): InputMessage {
  return { type: "input", v, gripper };
}
