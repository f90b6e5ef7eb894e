"""The shared-control loop and its baselines.

Three control modes over the same simulator:

- hitl_d: the user commands translation only; a diffusion policy watches the
  rendered cloud and supplies the target orientation, tracked by a
  proportional controller (angular velocity = gain x axis-angle error).
- cartesian: full manual control through a low-DoF device, one of
  translation/rotation live at a time (the operator persona pays the
  mode-switch cost).
- full_manual_6dof: all six axes live at once; used to record expert
  demonstrations.

Safety contract: in every mode the linear velocity is exactly the user's
translation input (clamped). The policy can never move the gripper, only
reorient it, so the position trace is a pure function of user input.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .geometry import (
    Twist,
    angular_error,
    clamp_twist,
    euler_to_quat,
    quat_to_euler,
    vec3,
)
from .pointcloud import CropBox
from .policy import (
    ActionOrientation,
    PerceptionError,
    TrainedPolicy,
    assemble_observation,
)
from .sim import (
    TaskSpec,
    check_reset,
    check_success,
    make_operator,
    render_cloud,
    reset,
)
from .sim import step as sim_step
from .sim.render import DEFAULT_DENSITY

CONTROL_MODES = ("hitl_d", "cartesian", "full_manual_6dof")

_SEED_STRIDE = 1_000_003  # spreads per-tick seeds across the 32-bit space


@dataclass(frozen=True)
class LoopConfig:
    """Control-loop parameters shared by all modes.

    The gain is unitless: angular velocity (rad/s) = gain x orientation
    error (rad), refreshed every tick, which makes corrections fast when the
    discrepancy is large and gentle near convergence.
    """

    gain: float = 0.05
    linear_cap: float = 0.2    # m/s
    angular_cap: float = 0.5   # rad/s
    dt: float = 0.05           # s per tick
    density: float = DEFAULT_DENSITY  # render density, points/m^2
    point_budget: int = 256
    crop_box: CropBox = field(
        default_factory=lambda: CropBox(vec3(-0.55, -0.55, -0.02), vec3(0.55, 0.55, 0.45)))
    seed: int = 0              # base of the per-tick inference seed chain

    def __post_init__(self):
        if not (self.gain > 0.0):
            raise ValueError(f"gain must be positive, got {self.gain}")
        if not (self.linear_cap > 0.0 and self.angular_cap > 0.0):
            raise ValueError("velocity caps must be positive")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (self.density > 0.0):
            raise ValueError(f"density must be positive, got {self.density}")
        if self.point_budget < 1:
            raise ValueError("point_budget must be >= 1")

    @classmethod
    def for_task(cls, task: TaskSpec, **overrides) -> "LoopConfig":
        """Config whose perception fields mirror the task's."""
        base = dict(crop_box=task.crop_box, point_budget=task.point_budget)
        base.update(overrides)
        return cls(**base)


def tick_seeds(base_seed: int, tick: int) -> Tuple[int, int]:
    """Deterministic (render_seed, predict_seed) for one control tick.

    Every tick of every episode draws from its own stream; the two halves
    never collide because one is even and the other odd.
    """
    t = (base_seed * _SEED_STRIDE + tick) & 0xFFFFFFFF
    return (2 * t) & 0xFFFFFFFF, (2 * t + 1) & 0xFFFFFFFF


@dataclass(frozen=True)
class EpisodeMetrics:
    """Scored outcome of one episode."""

    task: str
    mode: str
    persona: str
    seed: int
    success: bool
    completion_ticks: int
    max_ticks: int
    resets: int
    switches: int
    trace: Tuple[dict, ...]

    def __post_init__(self):
        if self.success and self.completion_ticks > self.max_ticks:
            raise ValueError("success implies completion within max_ticks")

    def to_row(self) -> dict:
        """Flat summary row (the trace stays out of tabular exports)."""
        return {
            "task": self.task,
            "mode": self.mode,
            "persona": self.persona,
            "seed": self.seed,
            "success": int(self.success),
            "completion_ticks": self.completion_ticks,
            "completion_seconds": round(self.completion_ticks * 0.05, 4),
            "resets": self.resets,
            "switches": self.switches,
        }


def hitl_step(user_translation, gripper_cmd: str, scene, policy: TrainedPolicy,
              cfg: LoopConfig) -> Tuple[Twist, Optional[ActionOrientation]]:
    """One assisted tick: user translation plus policy-tracked orientation.

    Renders the scene, assembles the observation, predicts the target
    orientation, and converts the error to an angular velocity. A perception
    failure (nothing inside the crop) zeroes the angular command for this
    tick and is reported as predicted = None; translation always passes
    through, so the user never loses positional control.
    """
    if gripper_cmd not in ("open", "close", "hold"):
        raise ValueError(f"unknown gripper command {gripper_cmd!r}")
    if policy.perception.point_budget != cfg.point_budget:
        raise ValueError(
            f"policy expects a point budget of {policy.perception.point_budget}, "
            f"the loop is configured for {cfg.point_budget}")
    user_translation = np.asarray(user_translation, dtype=float)
    render_seed, predict_seed = tick_seeds(cfg.seed, scene.tick)
    raw = render_cloud(scene, cfg.density, render_seed)
    try:
        obs = assemble_observation(raw, cfg.crop_box, cfg.point_budget, 0,
                                   scene.gripper.position)
    except PerceptionError:
        return clamp_twist(Twist(user_translation, np.zeros(3)),
                           cfg.linear_cap, cfg.angular_cap), None
    predicted = policy.predict(obs, predict_seed)
    err = angular_error(scene.gripper.orientation, euler_to_quat(predicted))
    twist = clamp_twist(Twist(user_translation, cfg.gain * err),
                        cfg.linear_cap, cfg.angular_cap)
    return twist, predicted


def cartesian_step(mode: str, user_axes, gripper_cmd: str, cfg: LoopConfig) -> Twist:
    """One low-DoF manual tick: the axes drive translation or rotation."""
    if mode not in ("translate", "rotate"):
        raise ValueError(f"unknown cartesian mode {mode!r}")
    if gripper_cmd not in ("open", "close", "hold"):
        raise ValueError(f"unknown gripper command {gripper_cmd!r}")
    user_axes = np.asarray(user_axes, dtype=float)
    if mode == "translate":
        twist = Twist(user_axes, np.zeros(3))
    else:
        twist = Twist(np.zeros(3), user_axes)
    return clamp_twist(twist, cfg.linear_cap, cfg.angular_cap)


def _manual_step(translation, rotation, cfg: LoopConfig) -> Twist:
    return clamp_twist(
        Twist(np.asarray(translation, dtype=float), np.asarray(rotation, dtype=float)),
        cfg.linear_cap, cfg.angular_cap)


def run_episode(task: TaskSpec, persona: str, mode: str,
                policy: Optional[TrainedPolicy], cfg: LoopConfig, seed: int,
                keep_scenes: bool = False,
                operator_kwargs: Optional[dict] = None) -> EpisodeMetrics:
    """Run one scored episode to success, exhaustion, or through resets.

    The single seed drives the whole chain: scene jitter, operator noise,
    and the per-tick render/inference streams. Triggering the reset
    predicate restarts the scene and the operator's plan but the tick count
    keeps running, so resets cost time exactly as they did in the study.

    With keep_scenes the returned metrics grow a `scenes` attribute holding
    the initial scene plus one snapshot per tick (demo recording reads it).
    """
    if mode not in CONTROL_MODES:
        raise ValueError(f"unknown control mode {mode!r}, expected one of {CONTROL_MODES}")
    if mode == "hitl_d" and policy is None:
        raise ValueError("hitl_d requires a trained policy")

    run_cfg = cfg if cfg.seed == seed else replace(cfg, seed=seed)
    scene = reset(task, seed)
    operator = make_operator(persona, task, seed=seed, dt=run_cfg.dt,
                             **(operator_kwargs or {}))
    trace: List[dict] = []
    scenes = [scene] if keep_scenes else None
    resets = 0
    success = False
    completion = task.max_ticks

    for t in range(task.max_ticks):
        inp = operator.step(scene)
        predicted = None
        perception_failed = False
        if mode == "hitl_d":
            twist, predicted = hitl_step(inp.translation, inp.gripper, scene,
                                         policy, run_cfg)
            perception_failed = predicted is None
        elif mode == "cartesian":
            axes = inp.translation if inp.cart_mode == "translate" else inp.rotation
            twist = cartesian_step(inp.cart_mode, axes, inp.gripper, run_cfg)
        else:
            twist = _manual_step(inp.translation, inp.rotation, run_cfg)

        scene, events = sim_step(scene, twist, inp.gripper, run_cfg.dt)
        if perception_failed:
            events = events + [{"type": "perception_error"}]
        record = {
            "tick": t,
            "stage": inp.stage,
            "position": tuple(float(v) for v in scene.gripper.position),
            "orientation": tuple(float(v) for v in scene.gripper.orientation.to_array()),
            "attached": scene.attached,
            "gripper_cmd": inp.gripper,
            "linear": tuple(float(v) for v in twist.linear),
            "angular": tuple(float(v) for v in twist.angular),
            "cart_mode": inp.cart_mode,
            "switching": bool(inp.switching),
            "events": events,
        }
        if predicted is not None:
            record["predicted_rpy"] = tuple(float(v) for v in predicted.to_array())
        trace.append(record)
        if keep_scenes:
            scenes.append(scene)

        if check_success(scene, task):
            success = True
            completion = t + 1
            break
        if check_reset(scene, task):
            resets += 1
            scene = reset(task, seed)
            operator.reset()
            if keep_scenes:
                scenes.append(scene)

    metrics = EpisodeMetrics(
        task=task.task, mode=mode, persona=persona, seed=seed,
        success=success, completion_ticks=completion, max_ticks=task.max_ticks,
        resets=resets, switches=operator.switches, trace=tuple(trace))
    if keep_scenes:
        object.__setattr__(metrics, "scenes", tuple(scenes))
    return metrics


def executed_orientation(record: dict) -> ActionOrientation:
    """The absolute orientation reached on a trace tick, as Euler angles."""
    from .geometry import UnitQuat

    w, x, y, z = (float(v) for v in record["orientation"])
    return quat_to_euler(UnitQuat.normalized(w, x, y, z))
