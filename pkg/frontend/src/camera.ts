/**
 * Minimal 3D math for the workbench view: rotation conversions matching the
 * server's conventions (quaternions are wxyz; euler angles are intrinsic
 * X-Y-Z, so R = Rx(roll) * Ry(pitch) * Rz(yaw)) and an orbiting camera that
 * projects world points to canvas pixels in either perspective or
 * orthographic mode.
 */

import type { QuatWxyz, Vec3 } from "./protocol.js";

export type Mat3 = [Vec3, Vec3, Vec3];

export function quatToMatrix(q: QuatWxyz): Mat3 {
  const [w, x, y, z] = q;
  const n = Math.hypot(w, x, y, z) || 1;
  const [qw, qx, qy, qz] = [w / n, x / n, y / n, z / n];
  return [
    [
      1 - 2 * (qy * qy + qz * qz),
      2 * (qx * qy - qw * qz),
      2 * (qx * qz + qw * qy),
    ],
    [
      2 * (qx * qy + qw * qz),
      1 - 2 * (qx * qx + qz * qz),
      2 * (qy * qz - qw * qx),
    ],
    [
      2 * (qx * qz - qw * qy),
      2 * (qy * qz + qw * qx),
      1 - 2 * (qx * qx + qy * qy),
    ],
  ];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out: number[][] = [[0, 0, 0], [0, 0, 0], [0, 0, 0]];
  for (let i = 0; i < 3; i++) {
    for (let j = 0; j < 3; j++) {
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return out as Mat3;
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [
    m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
    m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
    m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
  ];
}

/** Intrinsic X-Y-Z euler angles to a rotation matrix. */
export function eulerToMatrix(rpy: Vec3): Mat3 {
  const [r, p, y] = rpy;
  const [cr, sr] = [Math.cos(r), Math.sin(r)];
  const [cp, sp] = [Math.cos(p), Math.sin(p)];
  const [cy, sy] = [Math.cos(y), Math.sin(y)];
  const rx: Mat3 = [[1, 0, 0], [0, cr, -sr], [0, sr, cr]];
  const ry: Mat3 = [[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]];
  const rz: Mat3 = [[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]];
  return matMul(rx, matMul(ry, rz));
}

export interface Projected {
  x: number;
  y: number;
  /** Camera-space depth; larger is further away. Negative means behind. */
  depth: number;
  /** Pixel scale factor at this depth, for sizing sprites. */
  scale: number;
}

export type ProjectionMode = "perspective" | "ortho";

/**
 * Orbit camera around a target point. Azimuth rotates about world +z,
 * elevation tilts toward it; the view is right-handed with +z up on screen.
 */
export class Camera {
  target: Vec3 = [0, 0, 0.08];
  azimuth = -2.1;
  elevation = 0.5;
  distance = 1.25;
  mode: ProjectionMode = "perspective";
  /** Vertical field of view (perspective) in radians. */
  fov = Math.PI / 4;
  /** Half-height of the view volume (ortho) in world units. */
  orthoHalf = 0.45;

  width = 800;
  height = 600;

  setViewport(width: number, height: number): void {
    this.width = Math.max(1, width);
    this.height = Math.max(1, height);
  }

  orbit(dAzimuth: number, dElevation: number): void {
    this.azimuth += dAzimuth;
    const lim = Math.PI / 2 - 0.05;
    this.elevation = Math.min(lim, Math.max(-lim, this.elevation + dElevation));
  }

  zoom(factor: number): void {
    this.distance = Math.min(6, Math.max(0.2, this.distance * factor));
    this.orthoHalf = Math.min(3, Math.max(0.05, this.orthoHalf * factor));
  }

  toggleMode(): void {
    this.mode = this.mode === "perspective" ? "ortho" : "perspective";
  }

  eye(): Vec3 {
    const ce = Math.cos(this.elevation);
    return [
      this.target[0] + this.distance * ce * Math.cos(this.azimuth),
      this.target[1] + this.distance * ce * Math.sin(this.azimuth),
      this.target[2] + this.distance * Math.sin(this.elevation),
    ];
  }

  /** World point to camera space: x right, y up, z depth away from the eye. */
  toCamera(p: Vec3): Vec3 {
    const eye = this.eye();
    const d: Vec3 = [p[0] - eye[0], p[1] - eye[1], p[2] - eye[2]];
    // Forward axis points from eye to target.
    const f = this.forward();
    const rgt = this.right();
    const up = cross(rgt, f);
    return [dot(d, rgt), dot(d, up), dot(d, f)];
  }

  forward(): Vec3 {
    const eye = this.eye();
    return normalize([
      this.target[0] - eye[0],
      this.target[1] - eye[1],
      this.target[2] - eye[2],
    ]);
  }

  right(): Vec3 {
    // World up is +z; degenerate straight-down views are avoided by the
    // elevation clamp in orbit().
    return normalize(cross(this.forward(), [0, 0, 1]));
  }

  /** Project to pixels. Returns null for points behind the eye. */
  worldToScreen(p: Vec3): Projected | null {
    const c = this.toCamera(p);
    const cx = this.width / 2;
    const cy = this.height / 2;
    if (this.mode === "perspective") {
      if (c[2] <= 1e-6) return null;
      const focal = this.height / 2 / Math.tan(this.fov / 2);
      const s = focal / c[2];
      return { x: cx + c[0] * s, y: cy - c[1] * s, depth: c[2], scale: s };
    }
    const s = this.height / 2 / this.orthoHalf;
    return { x: cx + c[0] * s, y: cy - c[1] * s, depth: c[2], scale: s };
  }
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]) || 1;
  return [v[0] / n, v[1] / n, v[2] / n];
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function scale(v: Vec3, s: number): Vec3 {
  return [v[0] * s, v[1] * s, v[2] * s];
}
