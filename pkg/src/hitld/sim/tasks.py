"""The three desk-scale task analogs: layouts, success and reset predicates.

All three share one free-flying gripper that starts at HOME, a reach radius
that bounds where dropped parts stay recoverable, and a per-task crop box
that frames the work area for perception. Layout jitter defaults to zero
(fixed arrangement, fresh renders per episode); bounds are config knobs on
the spec objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from ..geometry import Pose, UnitQuat, quat_from_axis_angle, quat_mul, vec3
from ..pointcloud import CropBox
from .world import (
    HOLE_ENTRY_TILT,
    SceneObject,
    SceneState,
    bottom_height,
    cylinder_tip,
    hole_yaw_tolerance,
    tilt_from_vertical,
    top_height,
    yaw_of,
    yaw_residual,
)

TASKS = ("unstack", "screwdriver", "shape_match")

HOME = Pose(vec3(0.0, 0.0, 0.25), UnitQuat.identity())
REACH_RADIUS = 0.6  # m, horizontal distance from home before a part is lost

CUBE_EDGE = 0.05
PLATE_DIMS = (0.22, 0.22, 0.012)
SCREWDRIVER_DIMS = (0.012, 0.20)
SCREWDRIVER_LEAN = 0.45  # rad; propped against its stand, handle up
CUP_DIMS = (0.075, 0.12)
CROSS_DIMS = (0.10, 0.03, 0.12)
HOLE_PLATE_DIMS = (0.24, 0.24, 0.03, 0.116, 0.056)
HOLE_PLATE_Z = 0.10  # slab center height; the hole plane is its top face

_COLORS = {
    "cube0": vec3(0.85, 0.15, 0.15),
    "cube1": vec3(0.15, 0.65, 0.2),
    "cube2": vec3(0.2, 0.3, 0.85),
    "plate": vec3(0.8, 0.8, 0.75),
    "screwdriver": vec3(0.95, 0.55, 0.1),
    "cup": vec3(0.25, 0.25, 0.3),
    "cross": vec3(0.7, 0.2, 0.7),
    "hole_plate": vec3(0.55, 0.55, 0.55),
}


@dataclass(frozen=True)
class TaskSpec:
    """Immutable description of one task analog."""

    task: str
    max_ticks: int
    crop_box: CropBox
    point_budget: int = 256
    position_jitter: float = 0.0  # m, uniform bound on layout xy offsets
    yaw_jitter: float = 0.0       # rad, uniform bound on part yaw offsets
    # Success tolerances.
    plate_margin: float = 0.02       # cube center inset from the plate edge
    rest_height_tol: float = 0.008   # bottom-vs-support height slack
    cube_separation: float = CUBE_EDGE
    handle_up_tol: float = 0.35      # screwdriver handle axis vs vertical
    hole_tilt_tol: float = HOLE_ENTRY_TILT

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}, expected one of {TASKS}")
        if self.max_ticks < 1:
            raise ValueError("max_ticks must be >= 1")


def make_task(name: str, **overrides) -> TaskSpec:
    """Build a TaskSpec with the canonical defaults for one of the analogs."""
    if name not in TASKS:
        raise ValueError(f"unknown task {name!r}, expected one of {TASKS}")
    crop = CropBox(vec3(-0.55, -0.55, -0.02), vec3(0.55, 0.55, 0.45))
    defaults = {
        "unstack": dict(task="unstack", max_ticks=6000, crop_box=crop),
        "screwdriver": dict(task="screwdriver", max_ticks=3000, crop_box=crop),
        "shape_match": dict(task="shape_match", max_ticks=3000, crop_box=crop),
    }[name]
    defaults.update(overrides)
    return TaskSpec(**defaults)


def _tilted(axis_azimuth: float, tilt: float, yaw: float) -> UnitQuat:
    """Orientation with local z tilted from vertical, then yawed about it.

    The tilt axis lies in the table plane at the given azimuth, so the part
    leans toward azimuth + pi/2.
    """
    axis = vec3(math.cos(axis_azimuth), math.sin(axis_azimuth), 0.0)
    lean = quat_from_axis_angle(axis, tilt)
    spin = quat_from_axis_angle(vec3(0.0, 0.0, 1.0), yaw)
    return quat_mul(lean, spin)


def _rest_pose(obj: SceneObject, support_top: float = 0.0) -> SceneObject:
    """Place the object so its lowest point touches the given support."""
    lift = support_top + (obj.position[2] - bottom_height(obj))
    pos = np.array([obj.position[0], obj.position[1], lift])
    return obj.moved_to(Pose(pos, obj.orientation))


def reset(task: TaskSpec, seed: int = 0) -> SceneState:
    """Deterministic initial scene for the task, gripper at HOME.

    The jitter bounds on the spec perturb part positions and yaws; at the
    default zero bounds the scene equals the canonical layout exactly and
    the seed has no effect.
    """
    rng = np.random.default_rng(seed)

    def jit_xy() -> np.ndarray:
        j = rng.uniform(-task.position_jitter, task.position_jitter, size=2)
        return np.array([j[0], j[1], 0.0]) if task.position_jitter > 0.0 else np.zeros(3)

    def jit_yaw() -> float:
        return float(rng.uniform(-task.yaw_jitter, task.yaw_jitter)) if task.yaw_jitter > 0.0 else 0.0

    objects: Dict[str, SceneObject] = {}
    if task.task == "unstack":
        base = vec3(0.32, -0.18, 0.0) + jit_xy()
        yaws = (0.55, -0.35, 0.2)
        for i, yaw in enumerate(yaws):
            z = (i + 0.5) * CUBE_EDGE
            objects[f"cube{i}"] = SceneObject(
                id=f"cube{i}", shape="box", dims=(CUBE_EDGE,) * 3,
                pose=Pose(base + vec3(0.0, 0.0, z),
                          quat_from_axis_angle(vec3(0, 0, 1), yaw + jit_yaw())),
                color=_COLORS[f"cube{i}"])
        objects["plate"] = SceneObject(
            id="plate", shape="box", dims=PLATE_DIMS,
            pose=Pose(vec3(0.30, 0.22, 0.5 * PLATE_DIMS[2]), UnitQuat.identity()),
            color=_COLORS["plate"], graspable=False)
    elif task.task == "screwdriver":
        tool = SceneObject(
            id="screwdriver", shape="cylinder", dims=SCREWDRIVER_DIMS,
            pose=Pose(vec3(0.38, -0.12, 0.1) + jit_xy(),
                      _tilted(0.4 + jit_yaw(), SCREWDRIVER_LEAN, 0.0)),
            color=_COLORS["screwdriver"])
        objects["screwdriver"] = _rest_pose(tool)
        objects["cup"] = SceneObject(
            id="cup", shape="cylinder", dims=CUP_DIMS,
            pose=Pose(vec3(-0.28, 0.18, 0.5 * CUP_DIMS[1]), UnitQuat.identity()),
            color=_COLORS["cup"], graspable=False, container=True)
    else:
        cross = SceneObject(
            id="cross", shape="cross_prism", dims=CROSS_DIMS,
            pose=Pose(vec3(0.33, -0.10, 0.1) + jit_xy(),
                      _tilted(1.0, 0.12, 0.55 + jit_yaw())),
            color=_COLORS["cross"])
        objects["cross"] = _rest_pose(cross)
        objects["hole_plate"] = SceneObject(
            id="hole_plate", shape="plate_with_cross_hole", dims=HOLE_PLATE_DIMS,
            pose=Pose(vec3(-0.30, 0.16, HOLE_PLATE_Z), UnitQuat.identity()),
            color=_COLORS["hole_plate"], graspable=False)

    return SceneState(objects=objects, gripper=HOME.copy())


def _beyond_reach(scene: SceneState, oid: str) -> bool:
    obj = scene.objects[oid]
    if scene.attached == oid:
        return False
    gap = float(np.linalg.norm(obj.position[:2] - HOME.position[:2]))
    return gap > REACH_RADIUS


def check_success(scene: SceneState, task: TaskSpec) -> bool:
    """Pure geometric success predicate, evaluated on the current scene."""
    if task.task == "unstack":
        plate = scene.objects["plate"]
        plate_top = top_height(plate)
        half = 0.5 * PLATE_DIMS[0] - task.plate_margin
        cubes = [scene.objects[f"cube{i}"] for i in range(3)]
        for cube in cubes:
            if scene.attached == cube.id:
                return False
            offset = cube.position[:2] - plate.position[:2]
            if np.any(np.abs(offset) > half):
                return False
            if abs(bottom_height(cube) - plate_top) > task.rest_height_tol:
                return False
        for i in range(3):
            for j in range(i + 1, 3):
                gap = float(np.linalg.norm(
                    cubes[i].position[:2] - cubes[j].position[:2]))
                if gap < task.cube_separation:
                    return False
        return True
    if task.task == "screwdriver":
        tool = scene.objects["screwdriver"]
        cup = scene.objects["cup"]
        if scene.attached == "screwdriver":
            return False
        if tilt_from_vertical(tool) > task.handle_up_tol:
            return False
        tip = cylinder_tip(tool)
        inner_r = CUP_DIMS[0] * 0.85
        if float(np.linalg.norm(tip[:2] - cup.position[:2])) > inner_r:
            return False
        return bottom_height(cup) <= tip[2] <= top_height(cup)
    # shape_match
    cross = scene.objects["cross"]
    plate = scene.objects["hole_plate"]
    if scene.attached == "cross":
        return False
    hole_plane = top_height(plate)
    if cross.position[2] >= hole_plane:
        return False
    if tilt_from_vertical(cross) > task.hole_tilt_tol:
        return False
    if abs(yaw_residual(cross.orientation, yaw_of(plate.orientation))) > hole_yaw_tolerance(plate, cross):
        return False
    clearance = 0.5 * (HOLE_PLATE_DIMS[4] - CROSS_DIMS[1])
    lateral = float(np.linalg.norm(cross.position[:2] - plate.position[:2]))
    return lateral <= clearance


def check_reset(scene: SceneState, task: TaskSpec) -> bool:
    """True when a part has left the recoverable workspace."""
    if task.task == "unstack":
        return any(_beyond_reach(scene, f"cube{i}") for i in range(3))
    if task.task == "screwdriver":
        return _beyond_reach(scene, "screwdriver") and not check_success(scene, task)
    return _beyond_reach(scene, "cross") and not check_success(scene, task)
