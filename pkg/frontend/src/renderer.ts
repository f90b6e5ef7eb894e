/**
 * Canvas painting for the workbench view. Everything here draws through the
 * narrow Ctx2D interface below rather than CanvasRenderingContext2D directly,
 * so tests can substitute a recording stub and assert on the draw stream.
 *
 * The view is diagnostic rather than photoreal: objects are wireframe
 * silhouettes of their true dimensions, the point cloud is painted as colored
 * dots, and the gripper is an axis triad. When the session runs in shared
 * control the predicted orientation is overlaid as a ghost triad at the
 * gripper; it is display only, nothing in the renderer feeds back into input.
 */

import {
  add,
  Camera,
  eulerToMatrix,
  Mat3,
  matVec,
  quatToMatrix,
  scale,
} from "./camera.js";
import type { ObjectView, StateFrame, Vec3 } from "./protocol.js";

/** Subset of CanvasRenderingContext2D the renderer relies on. */
export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  setLineDash(segments: number[]): void;
}

const BG = "#10141a";
const GRID = "#232b36";
const AXIS_COLORS = ["#e5534b", "#57ab5a", "#539bf5"];
const GHOST = "#d4a72c";
const GHOST_STALE = "#e5534b";

function rgbCss(c: Vec3, alpha = 1): string {
  const [r, g, b] = c.map((v) => Math.round(255 * Math.min(1, Math.max(0, v))));
  return `rgba(${r},${g},${b},${alpha})`;
}

/** Corner offsets of an axis-aligned box with full extents dims. */
export function boxCorners(dims: Vec3): Vec3[] {
  const [hx, hy, hz] = [dims[0] / 2, dims[1] / 2, dims[2] / 2];
  const out: Vec3[] = [];
  for (const sx of [-1, 1]) {
    for (const sy of [-1, 1]) {
      for (const sz of [-1, 1]) {
        out.push([sx * hx, sy * hy, sz * hz]);
      }
    }
  }
  return out;
}

// Corner indexing above is (sx, sy, sz) in binary order; these pairs trace
// the 12 edges.
const BOX_EDGES: [number, number][] = [
  [0, 1], [0, 2], [0, 4], [1, 3], [1, 5], [2, 3],
  [2, 6], [3, 7], [4, 5], [4, 6], [5, 7], [6, 7],
];

function strokeSegments(
  ctx: Ctx2D,
  cam: Camera,
  segments: [Vec3, Vec3][],
  color: string,
  width = 1,
  dash: number[] = [],
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.setLineDash(dash);
  ctx.beginPath();
  for (const [a, b] of segments) {
    const pa = cam.worldToScreen(a);
    const pb = cam.worldToScreen(b);
    if (!pa || !pb) continue;
    ctx.moveTo(pa.x, pa.y);
    ctx.lineTo(pb.x, pb.y);
  }
  ctx.stroke();
  ctx.setLineDash([]);
}

function wireBox(
  ctx: Ctx2D,
  cam: Camera,
  center: Vec3,
  rot: Mat3,
  dims: Vec3,
  color: string,
): void {
  const corners = boxCorners(dims).map((c) => add(center, matVec(rot, c)));
  const segs: [Vec3, Vec3][] = BOX_EDGES.map(
    ([i, j]) => [corners[i], corners[j]],
  );
  strokeSegments(ctx, cam, segs, color, 1.2);
}

/** Wireframe extents for each simulator shape. */
export function shapeBoxes(obj: ObjectView): { offset: Vec3; dims: Vec3 }[] {
  const d = obj.dims;
  switch (obj.shape) {
    case "box":
      return [{ offset: [0, 0, 0], dims: [d[0], d[1], d[2]] }];
    case "cylinder": {
      // dims = (radius, height); a square prism silhouette is close enough.
      const [r, h] = [d[0], d[1]];
      return [{ offset: [0, 0, 0], dims: [2 * r, 2 * r, h] }];
    }
    case "cross_prism": {
      // dims = (arm, width, height): two crossed bars.
      const [arm, w, h] = [d[0], d[1], d[2]];
      return [
        { offset: [0, 0, 0], dims: [2 * arm, w, h] },
        { offset: [0, 0, 0], dims: [w, 2 * arm, h] },
      ];
    }
    case "plate_with_cross_hole": {
      // dims = (sx, sy, sz, hole_arm, hole_width): outline plus the hole.
      const [sx, sy, sz, ha, hw] = [d[0], d[1], d[2], d[3], d[4]];
      return [
        { offset: [0, 0, 0], dims: [sx, sy, sz] },
        { offset: [0, 0, 0], dims: [ha, hw, sz] },
        { offset: [0, 0, 0], dims: [hw, ha, sz] },
      ];
    }
    default:
      // Unknown shapes still get a marker so nothing silently vanishes.
      return [{ offset: [0, 0, 0], dims: [0.04, 0.04, 0.04] }];
  }
}

function drawGrid(ctx: Ctx2D, cam: Camera): void {
  const segs: [Vec3, Vec3][] = [];
  const span = 0.6;
  const step = 0.1;
  for (let i = -6; i <= 6; i++) {
    const t = i * step;
    segs.push([[t, -span, 0], [t, span, 0]]);
    segs.push([[-span, t, 0], [span, t, 0]]);
  }
  strokeSegments(ctx, cam, segs, GRID, 1);
}

function drawCloud(ctx: Ctx2D, cam: Camera, frame: StateFrame): void {
  const { positions, colors } = frame.cloud;
  for (let i = 0; i < positions.length; i++) {
    const p = cam.worldToScreen(positions[i]);
    if (!p) continue;
    ctx.fillStyle = rgbCss(colors[i], 0.85);
    const r = Math.max(1, Math.min(3, p.scale * 0.004));
    ctx.fillRect(p.x - r / 2, p.y - r / 2, r, r);
  }
}

function drawTriad(
  ctx: Ctx2D,
  cam: Camera,
  origin: Vec3,
  rot: Mat3,
  len: number,
  dash: number[] = [],
  colorOverride?: string,
): void {
  for (let axis = 0; axis < 3; axis++) {
    const dir: Vec3 = [0, 0, 0];
    dir[axis] = len;
    const tip = add(origin, matVec(rot, dir));
    strokeSegments(
      ctx, cam, [[origin, tip]],
      colorOverride ?? AXIS_COLORS[axis], 2, dash,
    );
  }
}

function drawGripper(ctx: Ctx2D, cam: Camera, frame: StateFrame): void {
  const g = frame.gripper;
  const rot = quatToMatrix(g.orientation);
  drawTriad(ctx, cam, g.position, rot, 0.07);
  // Jaw marks along local y; spread shows open vs closed.
  const gap = g.open ? 0.035 : 0.012;
  const jawDir = matVec(rot, [0, gap, 0]);
  const down = matVec(rot, [0, 0, -0.04]);
  const left = add(g.position, jawDir);
  const right = add(g.position, scale(jawDir, -1));
  strokeSegments(
    ctx, cam,
    [[left, add(left, down)], [right, add(right, down)]],
    g.attached ? "#d4a72c" : "#adbac7", 2.5,
  );
}

/**
 * Ghost triad for the policy's predicted orientation. Drawn only when the
 * frame carries a prediction; dashed, and recolored when the prediction is a
 * held-over stale value.
 */
function drawPrediction(ctx: Ctx2D, cam: Camera, frame: StateFrame): void {
  if (!frame.predicted_orientation) return;
  const rot = eulerToMatrix(frame.predicted_orientation);
  const color = frame.stale_prediction ? GHOST_STALE : GHOST;
  drawTriad(ctx, cam, frame.gripper.position, rot, 0.1, [4, 3], color);
}

export function renderFrame(
  ctx: Ctx2D,
  cam: Camera,
  frame: StateFrame | null,
): void {
  ctx.globalAlpha = 1;
  ctx.fillStyle = BG;
  ctx.fillRect(0, 0, cam.width, cam.height);
  drawGrid(ctx, cam);
  if (!frame) return;
  drawCloud(ctx, cam, frame);
  for (const obj of frame.objects) {
    const rot = quatToMatrix(obj.orientation);
    for (const part of shapeBoxes(obj)) {
      wireBox(
        ctx, cam,
        add(obj.position, matVec(rot, part.offset)),
        rot, part.dims, rgbCss(obj.color),
      );
    }
  }
  drawPrediction(ctx, cam, frame);
  drawGripper(ctx, cam, frame);
}
