"""Rotation and pose math shared by the whole stack.

Conventions
-----------
- Euler angles are intrinsic X-Y-Z (roll about x, pitch about the rotated y,
  yaw about the twice-rotated z), each wrapped to (-pi, pi].
- Quaternions are Hamilton, stored (w, x, y, z), unit norm, canonicalized so
  w >= 0 (sign ties broken by the first nonzero component).
- Positions and linear velocities are meters / m/s; angles and angular
  velocities are radians / rad/s.
- Angular velocity is a world-frame axis-angle rate; pose integration
  pre-multiplies the orientation by its exp map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(x: float) -> float:
    """Wrap a finite angle to (-pi, pi]."""
    y = math.fmod(x, TWO_PI)
    if y > math.pi:
        y -= TWO_PI
    elif y <= -math.pi:
        y += TWO_PI
    return y


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def as_vec3(v, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float (3,) array, rejecting anything else."""
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite, got {a}")
    return a


@dataclass(frozen=True)
class EulerRPY:
    """Intrinsic X-Y-Z Euler angles, each component wrapped to (-pi, pi]."""

    roll: float
    pitch: float
    yaw: float

    def __post_init__(self):
        for name in ("roll", "pitch", "yaw"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"EulerRPY.{name} must be finite, got {v}")
            object.__setattr__(self, name, wrap_angle(float(v)))

    def to_array(self) -> np.ndarray:
        return np.array([self.roll, self.pitch, self.yaw], dtype=float)

    @classmethod
    def from_array(cls, a) -> "EulerRPY":
        a = as_vec3(a, "euler array")
        return cls(float(a[0]), float(a[1]), float(a[2]))


UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class UnitQuat:
    """Unit quaternion (w, x, y, z), canonical sign w >= 0."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        comps = (self.w, self.x, self.y, self.z)
        if not all(math.isfinite(c) for c in comps):
            raise ValueError(f"quaternion components must be finite, got {comps}")
        norm = math.sqrt(sum(c * c for c in comps))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"quaternion norm {norm} is not unit within {UNIT_NORM_TOL}")
        # Canonical sign: w >= 0, ties broken by first nonzero component.
        flip = False
        for c in comps:
            if c > 0.0:
                break
            if c < 0.0:
                flip = True
                break
        if flip:
            object.__setattr__(self, "w", -self.w)
            object.__setattr__(self, "x", -self.x)
            object.__setattr__(self, "y", -self.y)
            object.__setattr__(self, "z", -self.z)

    @classmethod
    def identity(cls) -> "UnitQuat":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def normalized(cls, w: float, x: float, y: float, z: float) -> "UnitQuat":
        """Build a UnitQuat from possibly drifted components by renormalizing."""
        norm = math.sqrt(w * w + x * x + y * y + z * z)
        if norm < 1e-12 or not math.isfinite(norm):
            raise ValueError(f"cannot normalize quaternion with norm {norm}")
        return cls(w / norm, x / norm, y / norm, z / norm)

    def to_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    def conjugate(self) -> "UnitQuat":
        return UnitQuat(self.w, -self.x, -self.y, -self.z)

    def rotation_matrix(self) -> np.ndarray:
        """3x3 matrix R such that R @ v rotates v by this quaternion."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ],
            dtype=float,
        )

    def rotate(self, v) -> np.ndarray:
        return self.rotation_matrix() @ as_vec3(v)


def quat_mul(a: UnitQuat, b: UnitQuat) -> UnitQuat:
    """Hamilton product a * b (b is applied first when rotating vectors)."""
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    return UnitQuat.normalized(w, x, y, z)


def quat_from_axis_angle(axis, angle: float) -> UnitQuat:
    a = as_vec3(axis, "axis")
    n = float(np.linalg.norm(a))
    if n < 1e-12:
        raise ValueError("axis must be nonzero")
    half = 0.5 * angle
    s = math.sin(half) / n
    return UnitQuat.normalized(math.cos(half), s * a[0], s * a[1], s * a[2])


def quat_exp(rotvec) -> UnitQuat:
    """Exp map: axis-angle vector (radians) to unit quaternion."""
    v = as_vec3(rotvec, "rotation vector")
    theta = float(np.linalg.norm(v))
    if theta < 1e-12:
        # Second-order series keeps tiny steps exact to double precision.
        return UnitQuat.normalized(1.0 - theta * theta / 8.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2])
    s = math.sin(0.5 * theta) / theta
    return UnitQuat.normalized(math.cos(0.5 * theta), s * v[0], s * v[1], s * v[2])


def quat_log(q: UnitQuat) -> np.ndarray:
    """Log map: unit quaternion to axis-angle vector, magnitude in [0, pi]."""
    # Canonical w >= 0 guarantees the short way around.
    vn = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    if vn < 1e-15:
        return np.zeros(3)
    theta = 2.0 * math.atan2(vn, q.w)
    return (theta / vn) * np.array([q.x, q.y, q.z])


def quat_angle_between(a: UnitQuat, b: UnitQuat) -> float:
    """Geodesic angle between two rotations, in [0, pi]."""
    return float(np.linalg.norm(angular_error(a, b)))


def euler_to_quat(e: EulerRPY) -> UnitQuat:
    """Quaternion of the intrinsic X-Y-Z rotation (roll, pitch, yaw)."""
    qx = quat_from_axis_angle([1.0, 0.0, 0.0], e.roll)
    qy = quat_from_axis_angle([0.0, 1.0, 0.0], e.pitch)
    qz = quat_from_axis_angle([0.0, 0.0, 1.0], e.yaw)
    return quat_mul(quat_mul(qx, qy), qz)


def quat_to_euler(q: UnitQuat) -> EulerRPY:
    """Invert euler_to_quat. At gimbal lock (|pitch| = pi/2) roll is set to 0."""
    r = q.rotation_matrix()
    # R = Rx(roll) Ry(pitch) Rz(yaw): R[0,2] = sin(pitch).
    sp = max(-1.0, min(1.0, float(r[0, 2])))
    if abs(sp) >= 1.0 - 1e-10:
        pitch = math.copysign(0.5 * math.pi, sp)
        roll = 0.0
        yaw = math.atan2(r[1, 0], r[1, 1])
    else:
        pitch = math.asin(sp)
        roll = math.atan2(-r[1, 2], r[2, 2])
        yaw = math.atan2(-r[0, 1], r[0, 0])
    return EulerRPY(roll, pitch, yaw)


def angular_error(current: UnitQuat, target: UnitQuat) -> np.ndarray:
    """Axis-angle of the world-frame rotation taking current to target.

    Returns log(target * current^-1); magnitude is in [0, pi], so q and -q
    (the same rotation) give a zero error.
    """
    rel = quat_mul(target, current.conjugate())
    return quat_log(rel)


@dataclass(frozen=True)
class Pose:
    """Position (m) plus orientation of the end effector in the base frame."""

    position: np.ndarray
    orientation: UnitQuat

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, "position"))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), UnitQuat.identity())

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation)


@dataclass(frozen=True)
class Twist:
    """Linear (m/s) and angular (rad/s, world-frame axis-angle rate) velocity."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", as_vec3(self.linear, "linear velocity"))
        object.__setattr__(self, "angular", as_vec3(self.angular, "angular velocity"))

    @classmethod
    def zero(cls) -> "Twist":
        return cls(np.zeros(3), np.zeros(3))


def integrate_pose(p: Pose, t: Twist, dt: float) -> Pose:
    """Advance a pose by a twist over dt seconds (dt must be positive)."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    position = p.position + t.linear * dt
    step = quat_exp(t.angular * dt)
    orientation = quat_mul(step, p.orientation)
    return Pose(position, orientation)


def clamp_twist(t: Twist, linear_cap: float, angular_cap: float) -> Twist:
    """Rescale each of linear/angular (direction preserved) iff its norm exceeds its cap."""
    if not (linear_cap > 0.0) or not (angular_cap > 0.0):
        raise ValueError(f"velocity caps must be positive, got {linear_cap}, {angular_cap}")
    linear = t.linear
    angular = t.angular
    # The relative guard keeps clamping idempotent: rescaling to the cap can
    # overshoot it by 1 ulp, which must not trigger a second rescale.
    ln = float(np.linalg.norm(linear))
    if ln > linear_cap * (1.0 + 1e-12):
        linear = linear * (linear_cap / ln)
    an = float(np.linalg.norm(angular))
    if an > angular_cap * (1.0 + 1e-12):
        angular = angular * (angular_cap / an)
    return Twist(linear, angular)
