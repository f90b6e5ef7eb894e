"""Deterministic kinematic workbench: world stepping, tasks, rendering, operators."""

from .operators import (
    PERSONAS,
    ModeSwitchingOperator,
    OperatorInput,
    ScriptedOperator,
    Stage,
    build_plan,
    make_operator,
)
from .render import DEFAULT_DENSITY, render_cloud
from .tasks import (
    HOME,
    TASKS,
    TaskSpec,
    check_reset,
    check_success,
    make_task,
    reset,
)
from .world import (
    FIST_RADIUS,
    GRASP_ALIGNMENT,
    GRASP_DISTANCE,
    SceneObject,
    SceneState,
    bottom_height,
    grasp_alignment_error,
    grasp_point,
    hole_yaw_tolerance,
    settle,
    step,
    tilt_from_vertical,
    top_height,
    yaw_of,
    yaw_residual,
)

__all__ = [
    "PERSONAS",
    "ModeSwitchingOperator",
    "OperatorInput",
    "ScriptedOperator",
    "Stage",
    "build_plan",
    "make_operator",
    "DEFAULT_DENSITY",
    "render_cloud",
    "HOME",
    "TASKS",
    "TaskSpec",
    "check_reset",
    "check_success",
    "make_task",
    "reset",
    "FIST_RADIUS",
    "GRASP_ALIGNMENT",
    "GRASP_DISTANCE",
    "SceneObject",
    "SceneState",
    "bottom_height",
    "grasp_alignment_error",
    "grasp_point",
    "hole_yaw_tolerance",
    "settle",
    "step",
    "tilt_from_vertical",
    "top_height",
    "yaw_of",
    "yaw_residual",
]
