"""Live teleoperation bridge: the control loop in wall-clock time over WebSocket.

One session per connection. The server ticks at the loop rate (20 Hz at the
default dt), applies the most recent client input each tick (hold-latest,
never a queue), and broadcasts one JSON state frame per tick. Malformed
messages get an error frame and the connection survives; a disconnect simply
stops the clock, so the episode pauses.

The wire protocol is documented by the JSON Schemas in `hitld/schemas/`:
client -> server `start`, `input`, `reset`, `export`; server -> client
`state`, `error`, `event`. Sessions record every executed input, so a live
episode can be replayed headlessly (`replay_session`) or exported as a
demonstration dataset in the exact format the trainer reads.
"""

from __future__ import annotations

import asyncio
import itertools
import time
from dataclasses import replace
from typing import Callable, List, Optional

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .demo import DEMO_FRAMES, DemoDataset, DemoFrame, save as save_demos
from .geometry import Twist, angular_error, clamp_twist, euler_to_quat, quat_to_euler
from .policy import ActionOrientation, TrainedPolicy, assemble_observation
from .shared_control import LoopConfig, cartesian_step, hitl_step, tick_seeds
from .sim import TaskSpec, check_reset, check_success, render_cloud, reset
from .sim import step as sim_step

VIZ_POINT_CAP = 512

_session_ids = itertools.count()


def _vec(v) -> list:
    return [float(x) for x in v]


def _parse_vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be three finite numbers")
    return arr


class TeleopSession:
    """State machine for one live episode; all methods are synchronous.

    The WebSocket layer owns the clock and calls `tick()` at the loop rate;
    everything here is deterministic given the inputs it was handed, which
    is what makes the live/headless replay bridge possible.
    """

    def __init__(self, task: TaskSpec, mode: str, policy: Optional[TrainedPolicy],
                 cfg: LoopConfig, seed: int, session_id: Optional[int] = None,
                 clock: Callable[[], float] = time.perf_counter):
        if mode == "hitl_d" and policy is None:
            raise ValueError("hitl_d requires a trained policy")
        self.task = task
        self.mode = mode
        self.policy = policy
        self.cfg = cfg if cfg.seed == seed else replace(cfg, seed=seed)
        self.seed = seed
        self.session_id = next(_session_ids) if session_id is None else session_id
        self._clock = clock

        self.scene = reset(task, seed)
        self.running = False
        self.finished = False
        self.resets = 0
        self.elapsed = 0
        self.recorded: List[dict] = []
        self.scenes = [self.scene]
        self._input = {"translation": np.zeros(3), "rotation": np.zeros(3),
                       "gripper": "hold", "cart_mode": "translate"}
        self._last_predicted: Optional[ActionOrientation] = None
        self._overran = False

    # -- protocol ----------------------------------------------------------

    def handle_message(self, msg) -> Optional[dict]:
        """Apply one client message; returns a reply frame or None."""
        if not isinstance(msg, dict) or "type" not in msg:
            return {"type": "error", "message": "message must be an object with a 'type'"}
        kind = msg["type"]
        if kind == "start":
            self.running = True
            return {"type": "event", "event": "started", "session": self.session_id}
        if kind == "reset":
            self.scene = reset(self.task, self.seed)
            self.scenes.append(self.scene)
            self.recorded.append({"reset": True})
            self.resets += 1
            self.finished = False
            self._last_predicted = None
            return {"type": "event", "event": "reset_done", "session": self.session_id}
        if kind == "export":
            try:
                path = f"session_{self.session_id}.demo"
                save_demos(self.export_dataset(), path)
            except ValueError as e:
                return {"type": "error", "message": str(e)}
            return {"type": "event", "event": "exported", "session": self.session_id,
                    "detail": {"path": path}}
        if kind == "input":
            try:
                new = dict(self._input)
                if "v" in msg:
                    new["translation"] = _parse_vec3(msg["v"], "v")
                if "rotation" in msg:
                    new["rotation"] = _parse_vec3(msg["rotation"], "rotation")
                if "gripper" in msg:
                    if msg["gripper"] not in ("open", "close", "hold"):
                        raise ValueError(f"unknown gripper command {msg['gripper']!r}")
                    new["gripper"] = msg["gripper"]
                if "cart_mode" in msg:
                    if msg["cart_mode"] not in ("translate", "rotate"):
                        raise ValueError(f"unknown cartesian mode {msg['cart_mode']!r}")
                    new["cart_mode"] = msg["cart_mode"]
            except (ValueError, TypeError) as e:
                return {"type": "error", "message": str(e)}
            self._input = new
            return None
        return {"type": "error", "message": f"unknown message type {kind!r}"}

    # -- control loop ------------------------------------------------------

    def tick(self) -> dict:
        """Advance one control tick if running; always returns a state frame."""
        if not self.running or self.finished:
            return self._frame("idle", [], None, False)

        t0 = self._clock()
        inp = self._input
        predicted = None
        stale = False
        events_extra = []

        if self.mode == "hitl_d":
            if self._overran and self._last_predicted is not None:
                # Inference missed the last deadline: hold the previous
                # prediction this tick instead of stalling the loop.
                stale = True
                predicted = self._last_predicted
                err = angular_error(self.scene.gripper.orientation,
                                    euler_to_quat(predicted))
                twist = clamp_twist(Twist(inp["translation"], self.cfg.gain * err),
                                    self.cfg.linear_cap, self.cfg.angular_cap)
            else:
                twist, predicted = hitl_step(inp["translation"], inp["gripper"],
                                             self.scene, self.policy, self.cfg)
                if predicted is None:
                    events_extra.append({"type": "perception_error"})
            self._last_predicted = predicted if predicted is not None else self._last_predicted
        elif self.mode == "cartesian":
            axes = inp["translation"] if inp["cart_mode"] == "translate" else inp["rotation"]
            twist = cartesian_step(inp["cart_mode"], axes, inp["gripper"], self.cfg)
        else:
            twist = clamp_twist(Twist(inp["translation"], inp["rotation"]),
                                self.cfg.linear_cap, self.cfg.angular_cap)

        self.scene, events = sim_step(self.scene, twist, inp["gripper"], self.cfg.dt)
        events = events + events_extra
        self.elapsed += 1
        self.recorded.append({
            "translation": _vec(inp["translation"]),
            "rotation": _vec(inp["rotation"]),
            "gripper": inp["gripper"],
            "cart_mode": inp["cart_mode"],
            "held": stale,
        })
        self.scenes.append(self.scene)

        status = "running"
        if check_success(self.scene, self.task):
            status = "success"
            self.finished = True
        elif check_reset(self.scene, self.task):
            status = "reset"
            self.resets += 1
            self.scene = reset(self.task, self.seed)
            self.recorded.append({"reset": True})
            self.scenes.append(self.scene)
        self._overran = (self._clock() - t0) > self.cfg.dt
        return self._frame(status, events, predicted, stale)

    def _frame(self, status: str, events: List[dict],
               predicted: Optional[ActionOrientation], stale: bool) -> dict:
        scene = self.scene
        render_seed, _ = tick_seeds(self.cfg.seed, scene.tick)
        cloud = render_cloud(scene, self.cfg.density, render_seed)
        if len(cloud) > VIZ_POINT_CAP:
            keep = np.random.default_rng(render_seed).choice(
                len(cloud), VIZ_POINT_CAP, replace=False)
            keep.sort()
            positions, colors = cloud.positions[keep], cloud.colors[keep]
        else:
            positions, colors = cloud.positions, cloud.colors
        frame = {
            "type": "state",
            "session": self.session_id,
            "tick": scene.tick,
            "elapsed_ticks": self.elapsed,
            "status": status,
            "gripper": {
                "position": _vec(scene.gripper.position),
                "orientation": _vec(scene.gripper.orientation.to_array()),
                "open": scene.gripper_open,
                "attached": scene.attached,
            },
            "objects": [
                {
                    "id": o.id,
                    "shape": o.shape,
                    "dims": _vec(o.dims),
                    "position": _vec(o.position),
                    "orientation": _vec(o.orientation.to_array()),
                    "color": _vec(np.clip(o.color, 0.0, 1.0)),
                }
                for o in scene.objects.values()
            ],
            "cloud": {
                "positions": [_vec(p) for p in positions],
                "colors": [_vec(np.clip(c, 0.0, 1.0)) for c in colors],
            },
            "events": events,
            "resets": self.resets,
        }
        if self.mode == "hitl_d" and predicted is not None:
            frame["predicted_orientation"] = _vec(predicted.to_array())
        if stale:
            frame["stale_prediction"] = True
        return frame

    # -- recording ---------------------------------------------------------

    def export_dataset(self, frames: int = DEMO_FRAMES) -> DemoDataset:
        """The session so far as a demonstration, executed orientations as actions."""
        total = len(self.scenes) - 1
        if total < 1:
            raise ValueError("nothing recorded yet")
        n = min(frames, total)
        ticks = np.unique(np.linspace(0, total - 1, n).round().astype(int))
        out = []
        for t in ticks:
            scene = self.scenes[t]
            render_seed, _ = tick_seeds(self.cfg.seed, scene.tick)
            raw = render_cloud(scene, self.cfg.density, render_seed)
            obs = assemble_observation(raw, self.cfg.crop_box, self.cfg.point_budget,
                                       0, scene.gripper.position)
            action = quat_to_euler(self.scenes[t + 1].gripper.orientation)
            out.append(DemoFrame(observation=obs, action=action, tick=int(t)))
        return DemoDataset(demos=(tuple(out),), task=self.task.task, seed=self.seed,
                           point_budget=self.cfg.point_budget, crop_box=self.cfg.crop_box)


def replay_session(task: TaskSpec, mode: str, policy: Optional[TrainedPolicy],
                   cfg: LoopConfig, seed: int, recorded: List[dict]):
    """Re-execute a session's recorded inputs headlessly; returns the final scene.

    Deterministic given the same artifacts: per-tick render and inference
    seeds are keyed by scene tick exactly as in the live loop.
    """
    session = TeleopSession(task, mode, policy, cfg, seed, session_id=-1)
    session.running = True
    for rec in recorded:
        if rec.get("reset"):
            session.scene = reset(task, seed)
            session._last_predicted = None
            continue
        session._input = {
            "translation": np.asarray(rec["translation"], dtype=float),
            "rotation": np.asarray(rec["rotation"], dtype=float),
            "gripper": rec["gripper"],
            "cart_mode": rec["cart_mode"],
        }
        session._overran = bool(rec.get("held"))
        session.finished = False
        session.tick()
    return session.scene


# ---------------------------------------------------------------------------
# network layer


def build_app(task: TaskSpec, mode: str, policy: Optional[TrainedPolicy],
              cfg: LoopConfig, seed: int, static_dir: Optional[str] = None):
    """FastAPI app with the /ws endpoint; one fresh session per connection.

    With `static_dir` set, the directory is served at the root path (after
    /health and /ws, which keep priority), so the browser client's asset
    bundle ships from the same origin as its WebSocket.
    """
    app = FastAPI(title="hitld teleop")

    @app.get("/health")
    def health():
        return {"ok": True, "task": task.task, "mode": mode}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session = TeleopSession(task, mode, policy, cfg, seed)
        await ws.send_json({"type": "event", "event": "connected",
                            "session": session.session_id,
                            "detail": {"task": task.task, "mode": mode,
                                       "dt": cfg.dt}})
        recv = asyncio.ensure_future(ws.receive_json())
        next_tick = time.monotonic() + cfg.dt
        try:
            while True:
                timeout = max(0.0, next_tick - time.monotonic())
                done, _ = await asyncio.wait({recv}, timeout=timeout)
                if recv in done:
                    try:
                        msg = recv.result()
                    except WebSocketDisconnect:
                        break
                    except ValueError:
                        await ws.send_json({"type": "error",
                                            "message": "frame is not valid JSON"})
                        recv = asyncio.ensure_future(ws.receive_json())
                        continue
                    reply = session.handle_message(msg)
                    if reply is not None:
                        await ws.send_json(reply)
                    recv = asyncio.ensure_future(ws.receive_json())
                    continue
                frame = session.tick()
                await ws.send_json(frame)
                next_tick += cfg.dt
        except (WebSocketDisconnect, RuntimeError):
            pass  # connection tore down mid-send
        finally:
            recv.cancel()

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def serve(host: str, port: int, task: TaskSpec, mode: str,
          policy: Optional[TrainedPolicy], cfg: LoopConfig, seed: int,
          static_dir: Optional[str] = None) -> None:
    """Run the teleoperation server until interrupted."""
    import uvicorn

    app = build_app(task, mode, policy, cfg, seed, static_dir=static_dir)
    extra = f", ui from {static_dir}" if static_dir else ""
    print(f"task {task.task}, mode {mode}, ws://{host}:{port}/ws{extra}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
