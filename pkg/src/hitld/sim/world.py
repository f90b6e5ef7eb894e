"""Deterministic kinematic desk world: shapes, grasping, settling, bumping.

The world is energy free: nothing moves unless it is grasped (it then follows
the gripper rigidly), released (it settles vertically onto the highest support
below), or bumped (a carried object or the closed empty gripper overlaps it
and pushes it horizontally). There is no friction, no momentum, and no
gravity beyond the settle rule, which keeps every trajectory an exact
function of the command sequence.

Shapes are boxes, cylinders, cross prisms (two orthogonal boxes sharing a
center, extruded along local z), and plates with a cross-shaped through hole.
Dimensions are meters; see SceneObject for the per-shape dims layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..geometry import (
    Pose,
    Twist,
    UnitQuat,
    as_vec3,
    integrate_pose,
    quat_angle_between,
    quat_from_axis_angle,
    quat_mul,
)

SHAPES = ("box", "cylinder", "cross_prism", "plate_with_cross_hole")

GRASP_DISTANCE = 0.02   # m, gripper-to-feature gate for a successful close
GRASP_ALIGNMENT = 0.35  # rad, symmetry-reduced orientation gate for a close

# Entry gates used by settle(): a part only drops into a container when it is
# roughly aligned with it, otherwise it rests on top. The yaw gate for the
# cross hole is computed from the dimensions (arm-end lateral travel within
# the clearance); the tilt gates are fixed angles.
CUP_ENTRY_TILT = 0.35   # rad, max handle-axis tilt for sliding into a cup
HOLE_ENTRY_TILT = 0.1   # rad, max prism-axis tilt for passing a cross hole

# The closed empty gripper acts as a small fist for bump purposes; the open
# gripper straddles geometry and never bumps anything.
FIST_RADIUS = 0.02

_WORLD_Z = np.array([0.0, 0.0, 1.0])


def _require_shape(shape: str) -> None:
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}, expected one of {SHAPES}")


@dataclass(frozen=True)
class SceneObject:
    """One rigid object.

    dims per shape:
      box:                   (lx, ly, lz) full edge lengths
      cylinder:              (radius, height), axis along local z
      cross_prism:           (arm_length, arm_width, height); the footprint is
                             the union of arm_length x arm_width and
                             arm_width x arm_length rectangles, extruded along
                             local z by height
      plate_with_cross_hole: (lx, ly, lz, hole_arm_length, hole_arm_width);
                             the hole footprint is a cross centered on the
                             plate, cut through the full thickness
    """

    id: str
    shape: str
    dims: Tuple[float, ...]
    pose: Pose
    color: np.ndarray
    graspable: bool = True
    container: bool = False  # cup-like cylinder parts can receive a tool tip

    def __post_init__(self):
        _require_shape(self.shape)
        dims = tuple(float(d) for d in self.dims)
        if any(not (d > 0.0) for d in dims):
            raise ValueError(f"dimensions must be positive, got {dims}")
        expected = {"box": 3, "cylinder": 2, "cross_prism": 3, "plate_with_cross_hole": 5}
        if len(dims) != expected[self.shape]:
            raise ValueError(
                f"{self.shape} needs {expected[self.shape]} dims, got {len(dims)}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "color", np.clip(as_vec3(self.color, "color"), 0.0, 1.0))

    @property
    def position(self) -> np.ndarray:
        return self.pose.position

    @property
    def orientation(self) -> UnitQuat:
        return self.pose.orientation

    def moved_to(self, pose: Pose) -> "SceneObject":
        return replace(self, pose=pose)


@dataclass
class SceneState:
    """Mutable-by-replacement world snapshot; step() never edits in place."""

    objects: Dict[str, SceneObject]
    gripper: Pose
    gripper_open: bool = True
    attached: Optional[str] = None
    attach_rel: Optional[Pose] = None  # object pose in the gripper frame
    tick: int = 0

    def __post_init__(self):
        if self.attached is not None and self.attached not in self.objects:
            raise ValueError(f"attached id {self.attached!r} not in scene")
        if (self.attached is None) != (self.attach_rel is None):
            raise ValueError("attached and attach_rel must be set together")

    def copy(self) -> "SceneState":
        return SceneState(
            objects=dict(self.objects),
            gripper=self.gripper.copy(),
            gripper_open=self.gripper_open,
            attached=self.attached,
            attach_rel=None if self.attach_rel is None else self.attach_rel.copy(),
            tick=self.tick,
        )

    def obj(self, oid: str) -> SceneObject:
        return self.objects[oid]


# ---------------------------------------------------------------------------
# per-shape geometry helpers


def _component_boxes(obj: SceneObject) -> List[Tuple[float, float, float]]:
    """Full-edge box dims whose union makes up the object (local frame)."""
    if obj.shape == "box":
        return [obj.dims]
    if obj.shape == "cross_prism":
        arm, width, height = obj.dims
        return [(arm, width, height), (width, arm, height)]
    if obj.shape == "plate_with_cross_hole":
        return [obj.dims[:3]]
    raise ValueError(f"{obj.shape} has no box decomposition")


def _box_extent_z(dims: Tuple[float, float, float], rot: np.ndarray) -> float:
    """Half-extent of a rotated box along world z (support function)."""
    half = 0.5 * np.asarray(dims)
    return float(np.abs(rot[2, :]) @ half)


def extent_down(obj: SceneObject) -> float:
    """Distance from the object origin to its lowest point, >= 0."""
    rot = obj.orientation.rotation_matrix()
    if obj.shape == "cylinder":
        radius, height = obj.dims
        axis_z = abs(float(rot[2, 2]))
        return 0.5 * height * axis_z + radius * math.sqrt(max(0.0, 1.0 - axis_z * axis_z))
    return max(_box_extent_z(dims, rot) for dims in _component_boxes(obj))


def extent_up(obj: SceneObject) -> float:
    """Distance from the object origin to its highest point (symmetric shapes)."""
    return extent_down(obj)


def top_height(obj: SceneObject) -> float:
    return float(obj.position[2]) + extent_up(obj)


def bottom_height(obj: SceneObject) -> float:
    return float(obj.position[2]) - extent_down(obj)


def support_radius(obj: SceneObject) -> float:
    """Horizontal radius within which a dropped object rests on this one."""
    if obj.shape == "box" or obj.shape == "plate_with_cross_hole":
        return 0.45 * min(obj.dims[0], obj.dims[1])
    if obj.shape == "cylinder":
        return 0.9 * obj.dims[0]
    if obj.shape == "cross_prism":
        return 0.45 * obj.dims[1]
    raise ValueError(obj.shape)


def bounding_radius(obj: SceneObject) -> float:
    """Circumscribed-sphere radius."""
    if obj.shape == "cylinder":
        radius, height = obj.dims
        return math.hypot(radius, 0.5 * height)
    return max(
        0.5 * math.sqrt(dx * dx + dy * dy + dz * dz)
        for dx, dy, dz in _component_boxes(obj)
    )


def horizontal_radius(obj: SceneObject) -> float:
    """Radius of the smallest vertical cylinder around the object's origin
    containing it at its current orientation; used by the bump overlap test
    together with the [bottom, top] vertical interval, so that stacked
    objects (touching vertically, no horizontal overlap work to do) never
    read as colliding."""
    rot = obj.orientation.rotation_matrix()
    if obj.shape == "cylinder":
        radius, height = obj.dims
        axis = rot[:, 2]
        return 0.5 * height * float(np.hypot(axis[0], axis[1])) + radius
    best = 0.0
    for dims in _component_boxes(obj):
        half = 0.5 * np.asarray(dims)
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                for sz in (-1.0, 1.0):
                    corner = rot @ (half * np.array([sx, sy, sz]))
                    best = max(best, float(np.hypot(corner[0], corner[1])))
    return best


def surface_area(obj: SceneObject) -> float:
    """Total outer surface area before any union/hole rejection."""
    if obj.shape == "cylinder":
        radius, height = obj.dims
        return 2.0 * math.pi * radius * height + 2.0 * math.pi * radius * radius
    total = 0.0
    for dx, dy, dz in _component_boxes(obj):
        total += 2.0 * (dx * dy + dy * dz + dz * dx)
    return total


def axis_world(obj: SceneObject) -> np.ndarray:
    """The object's local +z axis in world coordinates."""
    return obj.orientation.rotation_matrix()[:, 2].copy()


def tilt_from_vertical(obj: SceneObject) -> float:
    """Angle between the object's local z axis and world up, in [0, pi]."""
    c = float(np.clip(axis_world(obj)[2], -1.0, 1.0))
    return math.acos(c)


def yaw_of(q: UnitQuat) -> float:
    """Heading of the rotated local x axis, projected to the table plane."""
    x_axis = q.rotation_matrix()[:, 0]
    return math.atan2(float(x_axis[1]), float(x_axis[0]))


def yaw_residual(q: UnitQuat, reference_yaw: float, fold: int = 4) -> float:
    """Signed yaw error to the nearest of `fold` symmetric headings."""
    period = 2.0 * math.pi / fold
    delta = yaw_of(q) - reference_yaw
    return delta - period * round(delta / period)


def tool_axis(gripper: Pose) -> np.ndarray:
    """Direction the tool points: local -z, straight down at the home pose."""
    return -gripper.orientation.rotation_matrix()[:, 2]


def cylinder_tip(obj: SceneObject) -> np.ndarray:
    """The lower end of a cylinder's axis (the screwdriver tip when held)."""
    radius, height = obj.dims
    axis = axis_world(obj)
    sign = -1.0 if axis[2] > 0.0 else 1.0
    return obj.position + sign * (0.5 * height) * axis


def _align_quat(from_dir: np.ndarray, to_dir: np.ndarray) -> UnitQuat:
    """Minimal rotation taking unit vector from_dir to unit vector to_dir."""
    cross = np.cross(from_dir, to_dir)
    dot = float(np.dot(from_dir, to_dir))
    norm = float(np.linalg.norm(cross))
    if norm < 1e-12:
        if dot > 0.0:
            return UnitQuat.identity()
        # Antipodal: rotate pi about any axis perpendicular to from_dir.
        perp = np.cross(from_dir, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(from_dir, np.array([0.0, 1.0, 0.0]))
        return quat_from_axis_angle(perp, math.pi)
    return quat_from_axis_angle(cross, math.atan2(norm, dot))


# ---------------------------------------------------------------------------
# grasp features


def grasp_point(obj: SceneObject) -> np.ndarray:
    """Where the gripper must be to close on the object."""
    if obj.shape == "cylinder":
        # Tools are gripped by the handle: the axis end pointing most upward.
        radius, height = obj.dims
        axis = axis_world(obj)
        sign = 1.0 if axis[2] >= 0.0 else -1.0
        return obj.position + sign * (0.5 * height) * axis
    return obj.position.copy()


def grasp_alignment_error(obj: SceneObject, gripper: Pose) -> float:
    """Orientation gate for closing, reduced over the object's symmetry.

    Boxes and cross prisms accept four yaw branches (pi/2 symmetry);
    cylinders are free about their own axis, so only the angle between the
    tool axis and the handle direction counts.
    """
    if obj.shape == "cylinder":
        axis = axis_world(obj)
        if axis[2] < 0.0:
            axis = -axis
        t = tool_axis(gripper)
        c = float(np.clip(np.dot(t, -axis), -1.0, 1.0))
        return math.acos(c)
    best = math.inf
    for m in range(4):
        branch = quat_mul(obj.orientation, quat_from_axis_angle(_WORLD_Z, m * 0.5 * math.pi))
        best = min(best, quat_angle_between(gripper.orientation, branch))
    return best


def _snap_pose(obj: SceneObject, gripper: Pose) -> Pose:
    """Canonical in-hand pose at the moment the jaws close.

    Parallel jaws self-center the part: the grasp feature lands on the
    gripper origin and the orientation snaps to the nearest symmetry branch,
    so everything downstream depends on the gripper alone.
    """
    if obj.shape == "cylinder":
        radius, height = obj.dims
        t = tool_axis(gripper)
        axis = axis_world(obj)
        if axis[2] < 0.0:
            axis = -axis
        orientation = quat_mul(_align_quat(axis, -t), obj.orientation)
        position = gripper.position + (0.5 * height) * t
        return Pose(position, orientation)
    best_m, best_err = 0, math.inf
    for m in range(4):
        branch = quat_mul(obj.orientation, quat_from_axis_angle(_WORLD_Z, m * 0.5 * math.pi))
        err = quat_angle_between(gripper.orientation, branch)
        if err < best_err:
            best_m, best_err = m, err
    orientation = quat_mul(
        gripper.orientation, quat_from_axis_angle(_WORLD_Z, -best_m * 0.5 * math.pi))
    return Pose(gripper.position.copy(), orientation)


def _relative_pose(base: Pose, target: Pose) -> Pose:
    """target expressed in base's frame."""
    inv_q = base.orientation.conjugate()
    rel_p = inv_q.rotate(target.position - base.position)
    rel_q = quat_mul(inv_q, target.orientation)
    return Pose(rel_p, rel_q)


def _compose_pose(base: Pose, rel: Pose) -> Pose:
    return Pose(
        base.position + base.orientation.rotate(rel.position),
        quat_mul(base.orientation, rel.orientation),
    )


# ---------------------------------------------------------------------------
# settling


def hole_yaw_tolerance(plate: SceneObject, part: SceneObject) -> float:
    """Max 4-fold yaw residual that still lets the part pass the hole.

    A yaw error rotates the arm ends sideways by about (arm/2) * yaw, which
    must fit in the per-side clearance.
    """
    hole_width = plate.dims[4]
    arm, width, _ = part.dims
    clearance = 0.5 * (hole_width - width)
    return 2.0 * clearance / arm


def _hole_accepts(plate: SceneObject, part: SceneObject) -> bool:
    """True when a cross prism released over the hole passes through it."""
    lx, ly, lz, hole_arm, hole_width = plate.dims
    if part.shape != "cross_prism":
        return False
    arm, width, height = part.dims
    clearance = 0.5 * (hole_width - width)
    if clearance <= 0.0 or hole_arm < arm:
        return False
    lateral = part.position[:2] - plate.position[:2]
    if float(np.linalg.norm(lateral)) > clearance:
        return False
    if tilt_from_vertical(part) > HOLE_ENTRY_TILT:
        return False
    if abs(yaw_residual(part.orientation, yaw_of(plate.orientation))) > hole_yaw_tolerance(plate, part):
        return False
    # Must be released at the hole mouth, not dropped from height.
    if bottom_height(part) > top_height(plate) + 0.02:
        return False
    return True


def _cup_accepts(cup: SceneObject, part: SceneObject) -> Optional[float]:
    """Inner floor height if the part's tip slides into the cup, else None."""
    if part.shape != "cylinder" or not cup.container:
        return None
    cup_r, cup_h = cup.dims
    part_r, part_h = part.dims
    wall = 0.15 * cup_r
    inner_r = cup_r - wall
    if part_r >= inner_r:
        return None
    tip = cylinder_tip(part)
    if float(np.linalg.norm(tip[:2] - cup.position[:2])) > inner_r - part_r:
        return None
    if tilt_from_vertical(part) > CUP_ENTRY_TILT:
        return None
    rim = top_height(cup)
    if tip[2] > rim + 0.02:
        return None
    return bottom_height(cup) + wall


def settle(scene: SceneState, oid: str) -> SceneObject:
    """Drop an object vertically onto the highest support below it.

    Containers are checked first: a tool tip over an open cup slides to the
    cup floor and an aligned cross prism over the hole falls through to the
    table; otherwise the object rests on the highest eligible support
    (another object's top within its support radius, or the table at z = 0),
    preserving its orientation throughout.
    """
    obj = scene.objects[oid]
    for other in scene.objects.values():
        if other.id == oid:
            continue
        floor = _cup_accepts(other, obj)
        if floor is not None:
            tip = cylinder_tip(obj)
            drop = tip[2] - floor
            pos = obj.position - np.array([0.0, 0.0, drop])
            return obj.moved_to(Pose(pos, obj.orientation))
        if other.shape == "plate_with_cross_hole" and _hole_accepts(other, obj):
            z = extent_down(obj)
            pos = np.array([obj.position[0], obj.position[1], z])
            return obj.moved_to(Pose(pos, obj.orientation))

    bottom = bottom_height(obj)
    best_top = 0.0  # the table
    for other in scene.objects.values():
        if other.id == oid or other.id == scene.attached:
            continue
        gap = float(np.linalg.norm(obj.position[:2] - other.position[:2]))
        if gap > support_radius(other):
            continue
        t = top_height(other)
        if t <= bottom + 1e-6 and t > best_top:
            best_top = t
    z = best_top + extent_down(obj)
    pos = np.array([obj.position[0], obj.position[1], z])
    return obj.moved_to(Pose(pos, obj.orientation))


# ---------------------------------------------------------------------------
# stepping


def step(scene: SceneState, twist: Twist, gripper_cmd: str, dt: float
         ) -> Tuple[SceneState, List[dict]]:
    """Advance one tick. Returns a new scene and the events that occurred.

    Order within a tick: integrate the gripper (the attached object follows
    rigidly), apply the gripper command (close may attach, open detaches and
    settles), then resolve bumps. Events are dicts with a "type" key in
    {attach, detach, bump, topple} plus an "object" id.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    if gripper_cmd not in ("open", "close", "hold"):
        raise ValueError(f"unknown gripper command {gripper_cmd!r}")

    out = scene.copy()
    events: List[dict] = []
    out.gripper = integrate_pose(out.gripper, twist, dt)
    if out.attached is not None:
        carried = out.objects[out.attached]
        out.objects[out.attached] = carried.moved_to(
            _compose_pose(out.gripper, out.attach_rel))

    if gripper_cmd == "close":
        if out.gripper_open and out.attached is None:
            candidate = _grasp_candidate(out)
            if candidate is not None:
                snapped = out.objects[candidate].moved_to(
                    _snap_pose(out.objects[candidate], out.gripper))
                out.objects[candidate] = snapped
                out.attached = candidate
                out.attach_rel = _relative_pose(out.gripper, snapped.pose)
                events.append({"type": "attach", "object": candidate})
        out.gripper_open = False
    elif gripper_cmd == "open":
        if out.attached is not None:
            released = out.attached
            out.attached = None
            out.attach_rel = None
            out.objects[released] = settle(out, released)
            events.append({"type": "detach", "object": released})
        out.gripper_open = True

    events.extend(_resolve_bumps(out))
    out.tick = scene.tick + 1
    return out, events


def _grasp_candidate(scene: SceneState) -> Optional[str]:
    best_id, best_d = None, math.inf
    for obj in scene.objects.values():
        if not obj.graspable:
            continue
        d = float(np.linalg.norm(scene.gripper.position - grasp_point(obj)))
        if d > GRASP_DISTANCE:
            continue
        if grasp_alignment_error(obj, scene.gripper) > GRASP_ALIGNMENT:
            continue
        if d < best_d:
            best_id, best_d = obj.id, d
    return best_id


def _resolve_bumps(scene: SceneState) -> List[dict]:
    """Push free objects out of the way of the carried object or the fist.

    Only graspable objects move (fixtures are clamped to the desk). Two
    bodies collide when their horizontal discs overlap AND their vertical
    extents overlap; the push is horizontal, along the center line, just
    enough to separate the discs. Objects merely resting on one another
    (vertical extents touching, not overlapping) are left alone. The pushed
    object then re-settles; if it ends up lower than it started, it toppled.
    """
    movers: List[Tuple[np.ndarray, float, float, float]] = []
    if scene.attached is not None:
        carried = scene.objects[scene.attached]
        movers.append((carried.position, horizontal_radius(carried),
                       bottom_height(carried), top_height(carried)))
    elif not scene.gripper_open:
        g = scene.gripper.position
        movers.append((g, FIST_RADIUS, float(g[2]) - FIST_RADIUS,
                       float(g[2]) + FIST_RADIUS))
    if not movers:
        return []

    events: List[dict] = []
    for oid in list(scene.objects):
        obj = scene.objects[oid]
        if not obj.graspable or oid == scene.attached:
            continue
        for center, radius, mover_bottom, mover_top in movers:
            v_overlap = (min(mover_top, top_height(obj))
                         - max(mover_bottom, bottom_height(obj)))
            if v_overlap <= 1e-9:
                continue
            clearance = radius + horizontal_radius(obj)
            delta = obj.position[:2] - center[:2]
            dist = float(np.linalg.norm(delta))
            if dist >= clearance - 1e-9:
                continue
            if dist < 1e-9:
                direction = np.array([1.0, 0.0])
            else:
                direction = delta / dist
            slide = clearance - dist
            old_support = bottom_height(obj)
            pushed_pos = obj.position + np.array(
                [slide * direction[0], slide * direction[1], 0.0])
            scene.objects[oid] = obj.moved_to(Pose(pushed_pos, obj.orientation))
            scene.objects[oid] = settle(scene, oid)
            events.append({"type": "bump", "object": oid})
            if bottom_height(scene.objects[oid]) < old_support - 1e-6:
                events.append({"type": "topple", "object": oid})
            break
    return events
