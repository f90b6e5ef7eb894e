"""Scripted operators: deterministic stand-ins for human study participants.

Every persona follows the same task plan, a list of stages with
scene-dependent position targets, orientation targets, and advance gates.
What differs is how they issue commands:

- direct: pursues the current waypoint at a fixed speed and (when driving
  all six degrees of freedom) slews orientation toward the stage target. In
  assisted modes its rotation output is simply ignored, which turns it into
  a translation-only operator that waits for the assistance to align.
- noisy: direct plus seeded bounded jitter on the translation axes.
- mode_switching: a two-mode device user. Only one of translation/rotation
  is live at a time; toggling costs a fixed delay during which nothing is
  commanded, and every toggle is counted.

Stage advances read scene truth only (poses, attachment), never controller
internals, so the same plan drives manual, assisted, and baseline runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from ..geometry import (
    Pose,
    UnitQuat,
    angular_error,
    quat_angle_between,
    quat_from_axis_angle,
    quat_mul,
    vec3,
)
from .tasks import (
    CROSS_DIMS,
    CUBE_EDGE,
    CUP_DIMS,
    HOLE_PLATE_DIMS,
    HOME,
    SCREWDRIVER_DIMS,
    TaskSpec,
)
from .world import (
    GRASP_ALIGNMENT,
    GRASP_DISTANCE,
    SceneObject,
    SceneState,
    bottom_height,
    cylinder_tip,
    grasp_alignment_error,
    grasp_point,
    hole_yaw_tolerance,
    tilt_from_vertical,
    top_height,
    yaw_of,
    yaw_residual,
)

PERSONAS = ("direct", "noisy", "mode_switching")

POS_TOL = 0.008      # m, waypoint-reached radius
HOVER = 0.10         # m, approach height above grasp points
_Z = vec3(0.0, 0.0, 1.0)

TargetFn = Callable[[SceneState], np.ndarray]
OrientFn = Callable[[SceneState, Pose], Optional[UnitQuat]]
GateFn = Callable[[SceneState, Pose], bool]


@dataclass(frozen=True)
class Stage:
    """One plan step. kind: move | grasp | release."""

    name: str
    kind: str
    target: TargetFn
    orient: Optional[OrientFn] = None
    gate: Optional[GateFn] = None
    rot_enter: float = 0.3  # two-mode users rotate when error exceeds this
    obj: Optional[str] = None
    # Freeze the target where the stage began. Required when the target is
    # derived from a carried object, which would otherwise chase the gripper.
    latch: bool = False


@dataclass
class OperatorInput:
    """Per-tick user input as handed to the control layer (pre-clamp)."""

    translation: np.ndarray
    rotation: np.ndarray
    gripper: str
    cart_mode: str = "translate"  # which axes a two-mode device is driving
    switching: bool = False
    stage: str = "done"
    switches: int = 0


def _level(q: UnitQuat) -> UnitQuat:
    """The zero-tilt orientation keeping q's heading."""
    return quat_from_axis_angle(_Z, yaw_of(q))


def _grasp_orient(obj: SceneObject, gripper: Pose) -> UnitQuat:
    """The nearest gripper orientation that passes the object's grasp gate."""
    if obj.shape == "cylinder":
        axis = obj.orientation.rotation_matrix()[:, 2]
        if axis[2] < 0.0:
            axis = -axis
        # Tool axis (local -z) onto -axis == local +z onto +axis.
        current_z = gripper.orientation.rotation_matrix()[:, 2]
        cross = np.cross(current_z, axis)
        dot = float(np.dot(current_z, axis))
        norm = float(np.linalg.norm(cross))
        if norm < 1e-12:
            return gripper.orientation
        turn = quat_from_axis_angle(cross, math.atan2(norm, dot))
        return quat_mul(turn, gripper.orientation)
    best_q, best_err = obj.orientation, math.inf
    for m in range(4):
        branch = quat_mul(obj.orientation, quat_from_axis_angle(_Z, m * 0.5 * math.pi))
        err = quat_angle_between(gripper.orientation, branch)
        if err < best_err:
            best_q, best_err = branch, err
    return best_q


def _yaw_branch(q: UnitQuat, reference_yaw: float) -> UnitQuat:
    """Level orientation at the 4-fold branch of reference_yaw nearest q."""
    period = 0.5 * math.pi
    delta = yaw_of(q) - reference_yaw
    return quat_from_axis_angle(_Z, reference_yaw + period * round(delta / period))


def build_plan(task: TaskSpec) -> List[Stage]:
    """The stage sequence an operator follows for one task."""
    if task.task == "unstack":
        return _unstack_plan()
    if task.task == "screwdriver":
        return _screwdriver_plan()
    return _shape_match_plan()


def _unstack_plan() -> List[Stage]:
    spots = {2: (-0.06, -0.06), 1: (0.06, -0.06), 0: (0.0, 0.06)}
    stages: List[Stage] = []
    for i in (2, 1, 0):  # top of the tower first
        cid = f"cube{i}"

        def above_cube(scene, cid=cid):
            return grasp_point(scene.objects[cid]) + HOVER * _Z

        def at_cube(scene, cid=cid):
            return grasp_point(scene.objects[cid])

        def cube_orient(scene, gripper, cid=cid):
            return _grasp_orient(scene.objects[cid], gripper)

        def aligned(scene, gripper, cid=cid):
            return grasp_alignment_error(scene.objects[cid], gripper) <= 0.3

        def place_at(scene, i=i, lift=0.0):
            plate = scene.objects["plate"]
            dx, dy = spots[i]
            z = top_height(plate) + 0.5 * CUBE_EDGE + lift
            return vec3(plate.position[0] + dx, plate.position[1] + dy, z)

        def level_orient(scene, gripper):
            return _level(gripper.orientation)

        def carried_level(scene, gripper, cid=cid):
            return (scene.attached == cid
                    and tilt_from_vertical(scene.objects[cid]) <= 0.15)

        stages += [
            Stage(f"hover_{cid}", "move", above_cube, cube_orient, aligned),
            Stage(f"descend_{cid}", "move", at_cube, cube_orient, aligned),
            Stage(f"grasp_{cid}", "grasp", at_cube, cube_orient, obj=cid),
            Stage(f"lift_{cid}", "move", above_cube, level_orient, latch=True),
            Stage(f"carry_{cid}", "move",
                  lambda scene, i=i: place_at(scene, i, lift=0.06),
                  level_orient, carried_level, rot_enter=0.12),
            Stage(f"lower_{cid}", "move",
                  lambda scene, i=i: place_at(scene, i, lift=0.004),
                  level_orient, carried_level, rot_enter=0.12),
            Stage(f"release_{cid}", "release",
                  lambda scene, i=i: place_at(scene, i, lift=0.004),
                  level_orient, carried_level, obj=cid),
            Stage(f"clear_{cid}", "move",
                  lambda scene, i=i: place_at(scene, i, lift=0.1)),
        ]
    return stages


def _screwdriver_plan() -> List[Stage]:
    part_r, part_h = SCREWDRIVER_DIMS
    cup_r = CUP_DIMS[0]
    inner_r = 0.85 * cup_r

    def above_tool(scene):
        return grasp_point(scene.objects["screwdriver"]) + HOVER * _Z

    def at_tool(scene):
        return grasp_point(scene.objects["screwdriver"])

    def tool_orient(scene, gripper):
        return _grasp_orient(scene.objects["screwdriver"], gripper)

    def aligned(scene, gripper):
        return grasp_alignment_error(scene.objects["screwdriver"], gripper) <= 0.3

    def above_cup(scene):
        cup = scene.objects["cup"]
        return vec3(cup.position[0], cup.position[1], top_height(cup) + part_h + 0.03)

    def insert_depth(scene):
        cup = scene.objects["cup"]
        floor = bottom_height(cup) + 0.15 * cup_r
        return vec3(cup.position[0], cup.position[1], floor + part_h + 0.006)

    def level_orient(scene, gripper):
        return _level(gripper.orientation)

    def tool_in_mouth(scene, gripper):
        if scene.attached != "screwdriver":
            return False
        tool = scene.objects["screwdriver"]
        cup = scene.objects["cup"]
        if tilt_from_vertical(tool) > 0.3:
            return False
        tip = cylinder_tip(tool)
        if float(np.linalg.norm(tip[:2] - cup.position[:2])) > 0.9 * (inner_r - part_r):
            return False
        return tip[2] <= top_height(cup) + 0.01

    def carried_upright(scene, gripper):
        return (scene.attached == "screwdriver"
                and tilt_from_vertical(scene.objects["screwdriver"]) <= 0.3)

    return [
        Stage("hover_tool", "move", above_tool, tool_orient, aligned),
        Stage("descend_tool", "move", at_tool, tool_orient, aligned),
        Stage("grasp_tool", "grasp", at_tool, tool_orient, obj="screwdriver"),
        Stage("lift_tool", "move", above_tool, level_orient, latch=True),
        Stage("carry_tool", "move", above_cup, level_orient, carried_upright,
              rot_enter=0.2),
        Stage("insert_tool", "move", insert_depth, level_orient, tool_in_mouth,
              rot_enter=0.2),
        Stage("release_tool", "release", insert_depth, level_orient,
              tool_in_mouth, obj="screwdriver"),
        Stage("retreat", "move", above_cup),
    ]


def _shape_match_plan() -> List[Stage]:
    width, height = CROSS_DIMS[1], CROSS_DIMS[2]
    clearance = 0.5 * (HOLE_PLATE_DIMS[4] - width)

    def above_cross(scene):
        return grasp_point(scene.objects["cross"]) + HOVER * _Z

    def at_cross(scene):
        return grasp_point(scene.objects["cross"])

    def cross_orient(scene, gripper):
        return _grasp_orient(scene.objects["cross"], gripper)

    def aligned(scene, gripper):
        return grasp_alignment_error(scene.objects["cross"], gripper) <= 0.3

    def above_hole(scene):
        plate = scene.objects["hole_plate"]
        return vec3(plate.position[0], plate.position[1],
                    top_height(plate) + 0.5 * height + 0.07)

    def insert_pose(scene):
        plate = scene.objects["hole_plate"]
        return vec3(plate.position[0], plate.position[1],
                    top_height(plate) - 0.01 + 0.5 * height)

    def hole_orient(scene, gripper):
        plate = scene.objects["hole_plate"]
        return _yaw_branch(gripper.orientation, yaw_of(plate.orientation))

    def cross_fits(scene, gripper):
        if scene.attached != "cross":
            return False
        cross = scene.objects["cross"]
        plate = scene.objects["hole_plate"]
        if tilt_from_vertical(cross) > 0.8 * 0.1:
            return False
        yaw_tol = hole_yaw_tolerance(plate, cross)
        if abs(yaw_residual(cross.orientation, yaw_of(plate.orientation))) > 0.8 * yaw_tol:
            return False
        lateral = float(np.linalg.norm(cross.position[:2] - plate.position[:2]))
        return lateral <= 0.8 * clearance

    return [
        Stage("hover_cross", "move", above_cross, cross_orient, aligned),
        Stage("descend_cross", "move", at_cross, cross_orient, aligned),
        Stage("grasp_cross", "grasp", at_cross, cross_orient, obj="cross"),
        Stage("lift_cross", "move", above_cross,
              lambda scene, gripper: _level(gripper.orientation), latch=True),
        Stage("carry_cross", "move", above_hole, hole_orient,
              lambda scene, gripper: (scene.attached == "cross"
                                      and tilt_from_vertical(scene.objects["cross"]) <= 0.12),
              rot_enter=0.15),
        Stage("insert_cross", "move", insert_pose, hole_orient, cross_fits,
              rot_enter=0.1),
        Stage("release_cross", "release", insert_pose, hole_orient, cross_fits,
              obj="cross"),
        Stage("retreat", "move", above_hole),
    ]


# ---------------------------------------------------------------------------
# personas


class ScriptedOperator:
    """The direct persona (noise_bound = 0) and its noisy variant.

    Emits full 6-DoF input every tick; assisted modes simply ignore the
    rotation channel, manual mode consumes it.
    """

    persona = "direct"

    def __init__(self, task: TaskSpec, dt: float = 0.05, speed: float = 0.18,
                 slew_rate: float = 0.4, noise_bound: float = 0.0, seed: int = 0):
        self.task = task
        self.dt = dt
        self.speed = speed
        self.slew_rate = slew_rate
        self.noise_bound = float(noise_bound)
        self.seed = seed
        if self.noise_bound > 0.0:
            self.persona = "noisy"
        self.reset()

    def reset(self) -> None:
        self.plan = build_plan(self.task)
        self.index = 0
        self.switches = 0
        self._latched: dict = {}
        self._rng = np.random.default_rng(self.seed)

    def _target(self, stage: Stage, scene: SceneState) -> np.ndarray:
        if not stage.latch:
            return stage.target(scene)
        if self.index not in self._latched:
            self._latched[self.index] = np.array(stage.target(scene), dtype=float)
        return self._latched[self.index]

    def _advance(self, scene: SceneState, gripper: Pose) -> Stage:
        while self.index < len(self.plan):
            stage = self.plan[self.index]
            if not self._stage_done(stage, scene, gripper):
                return stage
            self.index += 1
        return Stage("done", "move", lambda scene: HOME.position + HOVER * _Z)

    def _stage_done(self, stage: Stage, scene: SceneState, gripper: Pose) -> bool:
        if stage.kind == "grasp":
            return scene.attached == stage.obj
        if stage.kind == "release":
            return scene.attached is None
        pos_ok = float(np.linalg.norm(gripper.position - self._target(stage, scene))) <= POS_TOL
        if not pos_ok:
            return False
        return stage.gate is None or stage.gate(scene, gripper)

    def _pursuit(self, gripper: Pose, target: np.ndarray) -> np.ndarray:
        delta = target - gripper.position
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            return np.zeros(3)
        return delta * min(1.0 / self.dt, self.speed / dist)

    def _slew(self, gripper: Pose, target: Optional[UnitQuat]) -> np.ndarray:
        if target is None:
            return np.zeros(3)
        err = angular_error(gripper.orientation, target)
        mag = float(np.linalg.norm(err))
        if mag < 1e-12:
            return np.zeros(3)
        return err * min(1.0 / self.dt, self.slew_rate / mag)

    def _gripper_cmd(self, stage: Stage, scene: SceneState, gripper: Pose) -> str:
        if stage.kind == "grasp":
            obj = scene.objects[stage.obj]
            near = float(np.linalg.norm(gripper.position - grasp_point(obj))) <= 0.6 * GRASP_DISTANCE
            aligned = grasp_alignment_error(obj, gripper) <= 0.9 * GRASP_ALIGNMENT
            if near and aligned:
                return "close"
            return "open"  # keep the jaws clear while waiting for alignment
        if stage.kind == "release":
            pos_ok = float(np.linalg.norm(gripper.position - self._target(stage, scene))) <= POS_TOL
            gate_ok = stage.gate is None or stage.gate(scene, gripper)
            if pos_ok and gate_ok:
                return "open"
            return "hold"
        return "hold"

    def step(self, scene: SceneState) -> OperatorInput:
        gripper = scene.gripper
        stage = self._advance(scene, gripper)
        translation = self._pursuit(gripper, self._target(stage, scene))
        if self.noise_bound > 0.0:
            translation = translation + self._rng.uniform(
                -self.noise_bound, self.noise_bound, size=3)
        orient_target = stage.orient(scene, gripper) if stage.orient else None
        rotation = self._slew(gripper, orient_target)
        return OperatorInput(
            translation=translation,
            rotation=rotation,
            gripper=self._gripper_cmd(stage, scene, gripper),
            stage=stage.name,
            switches=self.switches,
        )


class ModeSwitchingOperator(ScriptedOperator):
    """A two-mode device user: translation or rotation, never both.

    Each toggle costs switch_delay idle ticks (device fumbling plus
    re-orienting), the model of low-DoF Cartesian teleoperation whose
    workload motivates orientation assistance in the first place.
    """

    persona = "mode_switching"

    def __init__(self, task: TaskSpec, dt: float = 0.05, speed: float = 0.18,
                 rotate_rate: float = 0.15, switch_delay: int = 60,
                 rot_exit: float = 0.05, seed: int = 0):
        super().__init__(task, dt=dt, speed=speed, slew_rate=rotate_rate, seed=seed)
        self.persona = "mode_switching"
        self.switch_delay = int(switch_delay)
        self.rot_exit = rot_exit
        self.reset()

    def reset(self) -> None:
        super().reset()
        self.cart_mode = "translate"
        self._cooldown = 0

    def step(self, scene: SceneState) -> OperatorInput:
        gripper = scene.gripper
        stage = self._advance(scene, gripper)
        orient_target = stage.orient(scene, gripper) if stage.orient else None
        err = (quat_angle_between(gripper.orientation, orient_target)
               if orient_target is not None else 0.0)

        if self._cooldown > 0:
            self._cooldown -= 1
            return OperatorInput(
                translation=np.zeros(3), rotation=np.zeros(3), gripper="hold",
                cart_mode=self.cart_mode, switching=True,
                stage=stage.name, switches=self.switches)

        toggled = False
        if self.cart_mode == "translate" and orient_target is not None and err > stage.rot_enter:
            self.cart_mode = "rotate"
            toggled = True
        elif self.cart_mode == "rotate" and err <= self.rot_exit:
            self.cart_mode = "translate"
            toggled = True
        if toggled:
            self.switches += 1
            # The toggle tick is the first of switch_delay idle ticks.
            self._cooldown = max(0, self.switch_delay - 1)
            if self.switch_delay > 0:
                return OperatorInput(
                    translation=np.zeros(3), rotation=np.zeros(3), gripper="hold",
                    cart_mode=self.cart_mode, switching=True,
                    stage=stage.name, switches=self.switches)

        if self.cart_mode == "rotate":
            return OperatorInput(
                translation=np.zeros(3),
                rotation=self._slew(gripper, orient_target),
                gripper="hold", cart_mode="rotate",
                stage=stage.name, switches=self.switches)
        return OperatorInput(
            translation=self._pursuit(gripper, self._target(stage, scene)),
            rotation=np.zeros(3),
            gripper=self._gripper_cmd(stage, scene, gripper),
            cart_mode="translate", stage=stage.name, switches=self.switches)


def make_operator(persona: str, task: TaskSpec, seed: int = 0, dt: float = 0.05,
                  **kwargs) -> ScriptedOperator:
    """Factory for the three personas."""
    if persona == "direct":
        return ScriptedOperator(task, dt=dt, seed=seed, **kwargs)
    if persona == "noisy":
        kwargs.setdefault("noise_bound", 0.02)
        return ScriptedOperator(task, dt=dt, seed=seed, **kwargs)
    if persona == "mode_switching":
        return ModeSwitchingOperator(task, dt=dt, seed=seed, **kwargs)
    raise ValueError(f"unknown persona {persona!r}, expected one of {PERSONAS}")
