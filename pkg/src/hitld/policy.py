"""Learned orientation policy: observations, training, prediction.

The policy consumes a cropped + subsampled colored point cloud and the
end-effector position, and emits an absolute end-effector orientation as
intrinsic X-Y-Z Euler angles. It is strictly reactive: horizon 1, one
observation, no history input.

Actions and state are normalized to [-1, 1] per component with dataset
min/max; cloud positions are centered on the crop-box center and scaled by
its half-extent. Checkpoints are JSON and round-trip byte-identically for a
fixed training run.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .diffusion import (
    NoiseSchedule,
    denoiser_specs,
    make_schedule,
    sample,
    training_loss,
)
from .geometry import EulerRPY, as_vec3
from .nn import (
    FEATURE_DIM,
    AdamState,
    LayerSpec,
    MlpParams,
    adam_step,
    encode_backward,
    encode_cloud_batch,
    mlp_specs,
)
from .pointcloud import ColoredPointCloud, CropBox, crop, farthest_point_sample

if TYPE_CHECKING:
    from .demo import DemoDataset

# The policy predicts absolute orientation; Euler angles are the action.
ActionOrientation = EulerRPY


class PerceptionError(ValueError):
    """Raised when the perception pipeline cannot produce an observation."""


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class RobotState:
    """End-effector position in meters, base frame."""

    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, "position"))


@dataclass(frozen=True)
class Observation:
    """What the policy sees: the processed cloud plus the robot state."""

    cloud: ColoredPointCloud
    state: RobotState


def assemble_observation(raw_cloud: ColoredPointCloud, box: CropBox, budget: int,
                         start_index: int, ee_position) -> Observation:
    """Crop to the workspace box, subsample to the budget, package with state.

    Clouds already at or under the budget pass through unchanged; an empty
    post-crop cloud is a perception failure, not a silent zero observation.
    """
    if budget < 1:
        raise ValueError(f"point budget must be >= 1, got {budget}")
    cropped = crop(raw_cloud, box)
    if len(cropped) == 0:
        raise PerceptionError("no points remain inside the crop box")
    if len(cropped) > budget:
        cropped = farthest_point_sample(cropped, budget, start_index)
    return Observation(cropped, RobotState(ee_position))


@dataclass(frozen=True)
class PolicyConfig:
    """Hyperparameters for training and inference.

    horizon and n_obs exist to make the reactive design explicit; any value
    other than 1 is rejected.
    """

    point_budget: int = 256
    encoder_hidden: tuple[int, ...] = (64, 64)
    feature_dim: int = FEATURE_DIM
    denoiser_hidden: tuple[int, ...] = (128, 128)
    K: int = 100
    inference_steps: int = 10
    eta: float = 0.0
    epochs: int = 300
    batch_size: int = 32
    horizon: int = 1
    n_obs: int = 1
    lr: float = 1e-3
    seed: int = 0
    embed_dim: int = 16
    schedule_kind: str = "linear"

    def __post_init__(self):
        if self.horizon != 1:
            raise ValueError(f"horizon is fixed at 1, got {self.horizon}")
        if self.n_obs != 1:
            raise ValueError(f"n_obs is fixed at 1, got {self.n_obs}")
        if self.point_budget < 1:
            raise ValueError("point_budget must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not (1 <= self.inference_steps <= self.K):
            raise ValueError("inference_steps must lie in [1, K]")
        object.__setattr__(self, "encoder_hidden", tuple(int(h) for h in self.encoder_hidden))
        object.__setattr__(self, "denoiser_hidden", tuple(int(h) for h in self.denoiser_hidden))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_hidden"] = list(self.encoder_hidden)
        d["denoiser_hidden"] = list(self.denoiser_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        d = dict(d)
        d["encoder_hidden"] = tuple(d.get("encoder_hidden", (64, 64)))
        d["denoiser_hidden"] = tuple(d.get("denoiser_hidden", (128, 128)))
        return cls(**d)


def config_hash(config: PolicyConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class NormStats:
    """Per-component min/max used to map data into [-1, 1]."""

    action_min: np.ndarray
    action_max: np.ndarray
    state_min: np.ndarray
    state_max: np.ndarray

    def __post_init__(self):
        for name in ("action_min", "action_max", "state_min", "state_max"):
            object.__setattr__(self, name, as_vec3(getattr(self, name), name))

    def to_dict(self) -> dict:
        return {
            "action_min": self.action_min.tolist(),
            "action_max": self.action_max.tolist(),
            "state_min": self.state_min.tolist(),
            "state_max": self.state_max.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            np.asarray(d["action_min"]),
            np.asarray(d["action_max"]),
            np.asarray(d["state_min"]),
            np.asarray(d["state_max"]),
        )


def normalize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Map [lo, hi] to [-1, 1]; constant components map to 0."""
    x = np.asarray(x, dtype=float)
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    out = np.zeros_like(x)
    nz = half != 0.0
    out[..., nz] = (x[..., nz] - center[nz]) / half[nz]
    return out


def denormalize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    return center + np.asarray(x, dtype=float) * half


def normalize_cloud(positions: np.ndarray, colors: np.ndarray, box: CropBox) -> np.ndarray:
    """(N, 6) encoder input: box-normalized positions, colors as-is."""
    pos = (positions - box.center) / box.half_extent
    return np.concatenate([pos, colors], axis=-1)


@dataclass(frozen=True)
class PerceptionSettings:
    """What the policy was trained to look at; checked before deployment."""

    task: str
    crop_box: CropBox
    point_budget: int

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "crop_min": self.crop_box.min_corner.tolist(),
            "crop_max": self.crop_box.max_corner.tolist(),
            "point_budget": self.point_budget,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerceptionSettings":
        return cls(
            str(d["task"]),
            CropBox(np.asarray(d["crop_min"]), np.asarray(d["crop_max"])),
            int(d["point_budget"]),
        )


@dataclass
class TrainedPolicy:
    """Everything needed to reproduce predictions: weights, schedule, stats."""

    config: PolicyConfig
    encoder: MlpParams
    denoiser: MlpParams
    schedule: NoiseSchedule
    stats: NormStats
    perception: PerceptionSettings
    final_train_loss: float

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    # -- inference ---------------------------------------------------------

    def predict(self, obs: Observation, seed: int) -> ActionOrientation:
        """Sample one absolute orientation for this observation.

        Deterministic given (weights, observation, seed).
        """
        n = len(obs.cloud)
        if n == 0:
            raise PerceptionError("empty observation cloud")
        if n > self.perception.point_budget:
            raise ValueError(
                f"observation has {n} points but the policy was trained "
                f"with a budget of {self.perception.point_budget}"
            )
        cloud_in = normalize_cloud(obs.cloud.positions, obs.cloud.colors, self.perception.crop_box)
        feature, _ = encode_cloud_batch(self.encoder, cloud_in[None])
        state_n = normalize(obs.state.position, self.stats.state_min, self.stats.state_max)
        cond = np.concatenate([feature[0], state_n])
        rng = np.random.default_rng(seed)
        a = sample(
            self.denoiser,
            self.schedule,
            cond,
            rng,
            action_dim=3,
            steps=self.config.inference_steps,
            eta=self.config.eta,
            embed_dim=self.config.embed_dim,
        )
        angles = denormalize(a, self.stats.action_min, self.stats.action_max)
        return EulerRPY(float(angles[0]), float(angles[1]), float(angles[2]))

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        def params_dict(p: MlpParams) -> dict:
            return {
                "specs": [[s.input_dim, s.output_dim, s.activation] for s in p.specs],
                "weights": [w.tolist() for w in p.weights],
                "biases": [b.tolist() for b in p.biases],
            }

        return {
            "format": "hitld-policy",
            "version": 1,
            "config": self.config.to_dict(),
            "config_hash": self.config_hash,
            "perception": self.perception.to_dict(),
            "schedule": self.schedule.to_dict(),
            "normalization": self.stats.to_dict(),
            "encoder": params_dict(self.encoder),
            "denoiser": params_dict(self.denoiser),
            "final_train_loss": self.final_train_loss,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedPolicy":
        if d.get("format") != "hitld-policy":
            raise ValueError("not a policy checkpoint")
        if d.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {d.get('version')!r}")

        def params_from(pd: dict) -> MlpParams:
            specs = tuple(LayerSpec(int(a), int(b), str(act)) for a, b, act in pd["specs"])
            weights = [np.asarray(w, dtype=float) for w in pd["weights"]]
            biases = [np.asarray(b, dtype=float) for b in pd["biases"]]
            return MlpParams(specs, weights, biases)

        config = PolicyConfig.from_dict(d["config"])
        policy = cls(
            config=config,
            encoder=params_from(d["encoder"]),
            denoiser=params_from(d["denoiser"]),
            schedule=NoiseSchedule.from_dict(d["schedule"]),
            stats=NormStats.from_dict(d["normalization"]),
            perception=PerceptionSettings.from_dict(d["perception"]),
            final_train_loss=float(d["final_train_loss"]),
        )
        if d["config_hash"] != policy.config_hash:
            raise ValueError("checkpoint config hash mismatch")
        return policy

    @classmethod
    def load(cls, path) -> "TrainedPolicy":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def _dataset_arrays(dataset: "DemoDataset", budget: int):
    """Stacked (clouds, states, actions) for training; clouds (F, N, 6)."""
    frames = [fr for demo in dataset.demos for fr in demo]
    if not frames:
        raise ValueError("dataset has no frames")
    sizes = {len(fr.observation.cloud) for fr in frames}
    if len(sizes) != 1:
        raise ValueError(f"training needs a uniform cloud size per frame, got sizes {sorted(sizes)}")
    n = sizes.pop()
    if n > budget:
        raise ValueError(f"dataset cloud size {n} exceeds the configured budget {budget}")
    clouds = np.stack(
        [np.concatenate([fr.observation.cloud.positions, fr.observation.cloud.colors], axis=1) for fr in frames]
    )
    states = np.stack([fr.observation.state.position for fr in frames])
    actions = np.stack([fr.action.to_array() for fr in frames])
    return clouds, states, actions


def train(dataset: "DemoDataset", config: PolicyConfig) -> TrainedPolicy:
    """Fit encoder + denoiser end-to-end on the demonstration frames.

    Uniformly samples (frame, diffusion step, noise) triples; one epoch is a
    shuffled pass over all frames. Deterministic given config.seed.
    """
    clouds, states, actions = _dataset_arrays(dataset, config.point_budget)
    box = dataset.crop_box
    n_frames = clouds.shape[0]

    stats = NormStats(
        action_min=actions.min(axis=0),
        action_max=actions.max(axis=0),
        state_min=states.min(axis=0),
        state_max=states.max(axis=0),
    )
    actions_n = normalize(actions, stats.action_min, stats.action_max)
    states_n = normalize(states, stats.state_min, stats.state_max)
    clouds_n = normalize_cloud(clouds[..., :3], clouds[..., 3:], box)

    rng = np.random.default_rng(config.seed)
    encoder = MlpParams.init(mlp_specs((6, *config.encoder_hidden, config.feature_dim)), rng)
    denoiser = MlpParams.init(
        denoiser_specs(3, config.feature_dim + 3, hidden=config.denoiser_hidden, embed_dim=config.embed_dim),
        rng,
    )
    schedule = make_schedule(config.K, config.schedule_kind)
    adam = AdamState.init_like(denoiser.flat() + encoder.flat(), lr=config.lr)

    final_loss = math.nan
    for epoch in range(config.epochs):
        order = rng.permutation(n_frames)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_frames, config.batch_size):
            idx = order[start : start + config.batch_size]
            b = idx.shape[0]
            ks = rng.integers(1, config.K + 1, size=b)
            eps = rng.standard_normal((b, 3))
            feats, enc_cache = encode_cloud_batch(encoder, clouds_n[idx])
            cond = np.concatenate([feats, states_n[idx]], axis=1)
            loss, den_grads, d_cond = training_loss(
                denoiser, schedule, actions_n[idx], cond, ks, eps, embed_dim=config.embed_dim
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}, batch {n_batches} "
                    f"(lr={config.lr}, K={config.K}); check data scaling"
                )
            enc_grads = encode_backward(encoder, enc_cache, d_cond[:, : config.feature_dim])
            flat_params = denoiser.flat() + encoder.flat()
            flat_grads = den_grads.flat() + enc_grads.flat()
            new_flat, adam = adam_step(flat_params, flat_grads, adam)
            n_den = 2 * len(denoiser.specs)
            denoiser = denoiser.replace_flat(new_flat[:n_den])
            encoder = encoder.replace_flat(new_flat[n_den:])
            epoch_loss += loss
            n_batches += 1
        final_loss = epoch_loss / n_batches

    return TrainedPolicy(
        config=config,
        encoder=encoder,
        denoiser=denoiser,
        schedule=schedule,
        stats=stats,
        perception=PerceptionSettings(dataset.task, box, config.point_budget),
        final_train_loss=final_loss,
    )
