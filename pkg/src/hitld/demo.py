"""Demonstration recording and storage.

A dataset is a list of demonstrations, each a list of frames carrying the
observation (cloud + end-effector position), the absolute orientation action,
and the tick index. Frames quantize their floats to 32-bit on construction so
the binary round trip is exact.

File layout (little-endian throughout):

    magic   8 bytes  b"HITLDEMO"
    version u32      currently 1
    mlen    u32      manifest byte length
    manifest         UTF-8 JSON: task, seed, point budget, crop box,
                     frame counts per demo, normalization hints
    frames           per frame: n_points u32, tick u32,
                     positions n*3 f32, colors n*3 f32,
                     state 3 f32, action 3 f32
    digest  32 bytes SHA-256 over everything above

Loading verifies the digest before parsing any frame, so a truncated or
corrupted payload surfaces as a checksum error and never yields a partial
dataset.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import EulerRPY, wrap_angle
from .pointcloud import ColoredPointCloud, CropBox
from .policy import ActionOrientation, Observation, RobotState

MAGIC = b"HITLDEMO"
FORMAT_VERSION = 1
_DIGEST_LEN = 32
_HEADER = struct.Struct("<8sII")
_FRAME_HEADER = struct.Struct("<II")


class DatasetError(ValueError):
    """Base class for dataset load failures."""


class DatasetVersionError(DatasetError):
    """Wrong magic or unsupported format version."""


class DatasetTruncatedError(DatasetError):
    """File too short to contain the declared structure."""


class DatasetChecksumError(DatasetError):
    """Stored digest does not match the file contents."""


class DemoGenerationError(RuntimeError):
    """The scripted expert failed to produce a usable demonstration."""


def _f32(arr, shape, name) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} must be finite")
    # Quantize to float32 precision so save/load round trips are exact.
    return out.astype(np.float32).astype(np.float64)


def _quantize_angles(a: np.ndarray) -> np.ndarray:
    """Float32-exact angles that are also fixed points of wrap_angle.

    Quantizing can push a value just past pi, and wrapping it back produces a
    number that is no longer float32-exact; iterate to a joint fixed point
    (at most a few steps, only near the +-pi boundary).
    """
    for _ in range(8):
        q = a.astype(np.float32).astype(np.float64)
        w = np.array([wrap_angle(v) for v in q])
        if np.array_equal(w, q):
            return q
        a = w
    raise ValueError(f"angle quantization did not converge for {a}")


@dataclass(frozen=True)
class DemoFrame:
    """One recorded step: observation, executed orientation, tick index."""

    observation: Observation
    action: ActionOrientation
    tick: int

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError(f"tick must be >= 0, got {self.tick}")
        cloud = self.observation.cloud
        n = len(cloud)
        positions = _f32(cloud.positions, (n, 3), "positions")
        colors = _f32(cloud.colors, (n, 3), "colors")
        state = _f32(self.observation.state.position, (3,), "state")
        action = _quantize_angles(self.action.to_array())
        object.__setattr__(
            self,
            "observation",
            Observation(ColoredPointCloud(positions, colors), RobotState(state)),
        )
        object.__setattr__(self, "action", EulerRPY.from_array(action))


@dataclass(frozen=True)
class DemoDataset:
    """Immutable bundle of demonstrations plus recording metadata."""

    demos: tuple[tuple[DemoFrame, ...], ...]
    task: str
    seed: int
    point_budget: int
    crop_box: CropBox

    def __post_init__(self):
        object.__setattr__(self, "demos", tuple(tuple(d) for d in self.demos))
        if self.point_budget < 1:
            raise ValueError("point_budget must be >= 1")
        for d_idx, demo in enumerate(self.demos):
            prev_tick = -1
            for frame in demo:
                if len(frame.observation.cloud) > self.point_budget:
                    raise ValueError(
                        f"demo {d_idx} has a frame with {len(frame.observation.cloud)} points, "
                        f"over the budget {self.point_budget}"
                    )
                if frame.tick <= prev_tick:
                    raise ValueError(f"demo {d_idx} tick indices must be strictly increasing")
                prev_tick = frame.tick

    @property
    def n_frames(self) -> int:
        return sum(len(d) for d in self.demos)

    def frames(self):
        for demo in self.demos:
            yield from demo

    def summary(self) -> str:
        """Human-readable description: counts and per-axis action ranges."""
        lines = [
            f"task: {self.task}",
            f"seed: {self.seed}",
            f"demonstrations: {len(self.demos)}",
            f"frames: {self.n_frames}",
            f"point budget: {self.point_budget}",
        ]
        if self.n_frames:
            acts = np.stack([f.action.to_array() for f in self.frames()])
            for i, axis in enumerate(("roll", "pitch", "yaw")):
                lines.append(f"action {axis}: [{acts[:, i].min():+.4f}, {acts[:, i].max():+.4f}] rad")
        return "\n".join(lines)


def save(dataset: DemoDataset, path) -> None:
    """Write the dataset container; see the module docstring for the layout."""
    hints = {}
    if dataset.n_frames:
        acts = np.stack([f.action.to_array() for f in dataset.frames()])
        states = np.stack([f.observation.state.position for f in dataset.frames()])
        hints = {
            "action_min": acts.min(axis=0).tolist(),
            "action_max": acts.max(axis=0).tolist(),
            "state_min": states.min(axis=0).tolist(),
            "state_max": states.max(axis=0).tolist(),
        }
    manifest = {
        "task": dataset.task,
        "seed": dataset.seed,
        "point_budget": dataset.point_budget,
        "crop_min": dataset.crop_box.min_corner.tolist(),
        "crop_max": dataset.crop_box.max_corner.tolist(),
        "frames_per_demo": [len(d) for d in dataset.demos],
        "normalization_hints": hints,
    }
    mbytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(mbytes)), mbytes]
    for demo in dataset.demos:
        for frame in demo:
            cloud = frame.observation.cloud
            chunks.append(_FRAME_HEADER.pack(len(cloud), frame.tick))
            chunks.append(cloud.positions.astype("<f4").tobytes())
            chunks.append(cloud.colors.astype("<f4").tobytes())
            chunks.append(frame.observation.state.position.astype("<f4").tobytes())
            chunks.append(frame.action.to_array().astype("<f4").tobytes())
    body = b"".join(chunks)
    digest = hashlib.sha256(body).digest()
    with open(path, "wb") as f:
        f.write(body)
        f.write(digest)


def load(path) -> DemoDataset:
    """Read a dataset container, verifying structure and checksum."""
    with open(path, "rb") as f:
        data = f.read()
    min_len = _HEADER.size + _DIGEST_LEN
    if len(data) < min_len:
        raise DatasetTruncatedError(f"file is {len(data)} bytes, below the minimum {min_len}")
    magic, version, mlen = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetVersionError("not a demonstration dataset (bad magic)")
    if version != FORMAT_VERSION:
        raise DatasetVersionError(f"unsupported dataset version {version}")
    if _HEADER.size + mlen + _DIGEST_LEN > len(data):
        raise DatasetTruncatedError("declared manifest length exceeds the file size")
    body, digest = data[:-_DIGEST_LEN], data[-_DIGEST_LEN:]
    if hashlib.sha256(body).digest() != digest:
        raise DatasetChecksumError("SHA-256 digest mismatch; file is corrupt or truncated")

    manifest = json.loads(body[_HEADER.size : _HEADER.size + mlen].decode("utf-8"))
    crop_box = CropBox(np.asarray(manifest["crop_min"]), np.asarray(manifest["crop_max"]))
    offset = _HEADER.size + mlen
    demos = []
    for n_frames in manifest["frames_per_demo"]:
        demo = []
        for _ in range(n_frames):
            if offset + _FRAME_HEADER.size > len(body):
                raise DatasetTruncatedError("frame header past end of payload")
            n_points, tick = _FRAME_HEADER.unpack_from(body, offset)
            offset += _FRAME_HEADER.size
            nbytes = n_points * 12 * 2 + 12 + 12
            if offset + nbytes > len(body):
                raise DatasetTruncatedError("frame payload past end of payload")
            positions = np.frombuffer(body, "<f4", n_points * 3, offset).reshape(n_points, 3)
            offset += n_points * 12
            colors = np.frombuffer(body, "<f4", n_points * 3, offset).reshape(n_points, 3)
            offset += n_points * 12
            state = np.frombuffer(body, "<f4", 3, offset)
            offset += 12
            action = np.frombuffer(body, "<f4", 3, offset)
            offset += 12
            demo.append(
                DemoFrame(
                    Observation(
                        ColoredPointCloud(positions.astype(np.float64), colors.astype(np.float64)),
                        RobotState(state.astype(np.float64)),
                    ),
                    EulerRPY.from_array(action.astype(np.float64)),
                    int(tick),
                )
            )
        demos.append(tuple(demo))
    if offset != len(body):
        raise DatasetTruncatedError(f"{len(body) - offset} unexplained trailing payload bytes")
    return DemoDataset(
        demos=tuple(demos),
        task=str(manifest["task"]),
        seed=int(manifest["seed"]),
        point_budget=int(manifest["point_budget"]),
        crop_box=crop_box,
    )


# ---------------------------------------------------------------------------
# scripted expert


DEMO_FRAMES = 256
_EXPERT_SPEED = 0.09  # m/s; slow enough that every episode spans >= 256 ticks


def scripted_expert(task, seed: int, frames: int = DEMO_FRAMES,
                    density: "float | None" = None) -> DemoDataset:
    """Record one demonstration: a 6-DoF waypoint expert run to success.

    The expert drives both translation and orientation at once; frames are
    sampled uniformly over the episode, each pairing the observation at a
    tick with the orientation the expert moved to during it. The expert
    moves at half the study personas' speed so even the shortest task
    comfortably exceeds the frame count.
    """
    from .geometry import quat_to_euler
    from .shared_control import LoopConfig, run_episode, tick_seeds
    from .sim import render_cloud
    from .policy import assemble_observation

    if frames < 1:
        raise ValueError("frames must be >= 1")
    cfg = LoopConfig.for_task(task, seed=seed)
    if density is None:
        density = cfg.density
    metrics = run_episode(task, "direct", "full_manual_6dof", None, cfg, seed,
                          keep_scenes=True,
                          operator_kwargs={"speed": _EXPERT_SPEED})
    if not metrics.success:
        raise DemoGenerationError(
            f"expert failed to complete {task.task!r} with seed {seed} "
            f"within {task.max_ticks} ticks")
    if metrics.resets:
        raise DemoGenerationError(
            f"expert triggered {metrics.resets} resets on {task.task!r}; "
            "a demonstration must be a single clean episode")
    total = metrics.completion_ticks
    if total < frames:
        raise DemoGenerationError(
            f"episode lasted {total} ticks, too short to sample {frames} "
            "distinct frames")

    scenes = metrics.scenes
    ticks = np.unique(np.linspace(0, total - 1, frames).round().astype(int))
    if ticks.shape[0] != frames:
        raise DemoGenerationError(
            f"uniform sampling produced {ticks.shape[0]} distinct ticks, "
            f"expected {frames}")
    recorded = []
    for t in ticks:
        scene = scenes[t]
        render_seed, _ = tick_seeds(seed, int(t))
        raw = render_cloud(scene, density, render_seed)
        obs = assemble_observation(raw, task.crop_box, task.point_budget, 0,
                                   scene.gripper.position)
        action = quat_to_euler(scenes[t + 1].gripper.orientation)
        recorded.append(DemoFrame(obs, action, int(t)))
    return DemoDataset(
        demos=(tuple(recorded),),
        task=task.task,
        seed=seed,
        point_budget=task.point_budget,
        crop_box=task.crop_box,
    )
