"""Minimal dense network stack with exact reverse-mode gradients.

Everything is plain numpy. Layers compute y = act(x @ W + b) with W stored
(input_dim, output_dim), so inputs may carry arbitrary leading batch
dimensions; parameter gradients are summed over them. The point-cloud encoder
is the permutation-invariant per-point MLP + componentwise max-pool used to
condition the denoiser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pointcloud import ColoredPointCloud

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.input_dim}x{self.output_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


def mlp_specs(dims: tuple[int, ...], output_activation: str = "identity") -> tuple[LayerSpec, ...]:
    """Chain of LayerSpecs: ReLU hidden layers, configurable output activation."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    specs = []
    for i in range(len(dims) - 1):
        act = "relu" if i < len(dims) - 2 else output_activation
        specs.append(LayerSpec(dims[i], dims[i + 1], act))
    return tuple(specs)


@dataclass
class MlpParams:
    """Per-layer weight matrices (in, out) and bias vectors matching specs."""

    specs: tuple[LayerSpec, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.specs) or len(self.biases) != len(self.specs):
            raise ValueError("parameter count does not match layer specs")
        for spec, w, b in zip(self.specs, self.weights, self.biases):
            if w.shape != (spec.input_dim, spec.output_dim):
                raise ValueError(f"weight shape {w.shape} does not match spec {spec}")
            if b.shape != (spec.output_dim,):
                raise ValueError(f"bias shape {b.shape} does not match spec {spec}")
        for a, b in zip(self.specs[:-1], self.specs[1:]):
            if a.output_dim != b.input_dim:
                raise ValueError("layer specs do not chain")

    @classmethod
    def init(cls, specs, rng: np.random.Generator) -> "MlpParams":
        """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
        specs = tuple(specs)
        weights, biases = [], []
        for s in specs:
            bound = 1.0 / math.sqrt(s.input_dim)
            weights.append(rng.uniform(-bound, bound, (s.input_dim, s.output_dim)))
            biases.append(rng.uniform(-bound, bound, s.output_dim))
        return cls(specs, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.specs[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.specs[-1].output_dim

    def flat(self) -> list[np.ndarray]:
        """Parameters as a flat list [W0, b0, W1, b1, ...] (aliases, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def replace_flat(self, arrays: list[np.ndarray]) -> "MlpParams":
        if len(arrays) != 2 * len(self.specs):
            raise ValueError("flat parameter count mismatch")
        weights = [arrays[2 * i] for i in range(len(self.specs))]
        biases = [arrays[2 * i + 1] for i in range(len(self.specs))]
        return MlpParams(self.specs, weights, biases)

    def copy(self) -> "MlpParams":
        return MlpParams(self.specs, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def num_params(self) -> int:
        return sum(a.size for a in self.flat())


@dataclass
class MlpCache:
    params: MlpParams
    inputs: list[np.ndarray]  # input to each layer
    preacts: list[np.ndarray]  # pre-activation of each layer


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, MlpCache]:
    """Affine + activation chain. x: (..., input_dim) -> (..., output_dim)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise ValueError(f"input dim {x.shape[-1]} does not match first layer {params.input_dim}")
    inputs, preacts = [], []
    h = x
    for spec, w, b in zip(params.specs, params.weights, params.biases):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        h = np.maximum(z, 0.0) if spec.activation == "relu" else z
    return h, MlpCache(params, inputs, preacts)


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def flat(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "MlpGrads":
        return cls([np.zeros_like(w) for w in params.weights], [np.zeros_like(b) for b in params.biases])

    def add_(self, other: "MlpGrads") -> "MlpGrads":
        for a, b in zip(self.weights, other.weights):
            a += b
        for a, b in zip(self.biases, other.biases):
            a += b
        return self


def mlp_backward(params: MlpParams, cache: MlpCache, output_gradient) -> tuple[MlpGrads, np.ndarray]:
    """Exact reverse-mode gradients; parameter grads sum over leading dims."""
    if cache.params is not params:
        raise ValueError("cache does not belong to these parameters")
    dy = np.asarray(output_gradient, dtype=float)
    if dy.shape != cache.preacts[-1].shape:
        raise ValueError(f"output gradient shape {dy.shape} does not match forward output")
    w_grads: list[np.ndarray] = [None] * len(params.specs)  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * len(params.specs)  # type: ignore[list-item]
    for i in range(len(params.specs) - 1, -1, -1):
        spec = params.specs[i]
        z = cache.preacts[i]
        dz = dy * (z > 0.0) if spec.activation == "relu" else dy
        a_in = cache.inputs[i]
        flat_in = a_in.reshape(-1, spec.input_dim)
        flat_dz = dz.reshape(-1, spec.output_dim)
        w_grads[i] = flat_in.T @ flat_dz
        b_grads[i] = flat_dz.sum(axis=0)
        dy = dz @ params.weights[i].T
    return MlpGrads(w_grads, b_grads), dy


@dataclass
class AdamState:
    """First/second moment accumulators plus hyperparameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    @classmethod
    def init_like(cls, params: list[np.ndarray], lr: float = 1e-3,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            step=0,
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state length mismatch")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m1 = b1 * m + (1.0 - b1) * g
        v1 = b2 * v + (1.0 - b2) * g * g
        mhat = m1 / (1.0 - b1**t)
        vhat = v1 / (1.0 - b2**t)
        new_p.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
        new_m.append(m1)
        new_v.append(v1)
    return new_p, AdamState(new_m, new_v, t, state.lr, b1, b2, state.eps)


# ---------------------------------------------------------------------------
# Point-cloud encoder: shared per-point MLP + componentwise max pool.

FEATURE_DIM = 128


@dataclass
class CloudFeature:
    """128-dim pooled scene feature."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape[0] != FEATURE_DIM:
            raise ValueError(f"cloud feature must have length {FEATURE_DIM}, got {v.shape[0]}")
        object.__setattr__(self, "values", v)


@dataclass
class EncodeCache:
    mlp_cache: MlpCache
    argmax: np.ndarray  # (..., feature_dim) index of the winning point per component
    n_points: int


def cloud_to_array(cloud) -> np.ndarray:
    """(N, 6) per-point input: position then color."""
    if isinstance(cloud, ColoredPointCloud):
        return np.concatenate([cloud.positions, cloud.colors], axis=1)
    arr = np.asarray(cloud, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 6:
        raise ValueError(f"expected (N, 6) per-point array, got {arr.shape}")
    return arr


def encode_cloud_batch(encoder: MlpParams, clouds: np.ndarray) -> tuple[np.ndarray, EncodeCache]:
    """Encode stacked clouds (B, N, 6) -> (B, feature_dim)."""
    clouds = np.asarray(clouds, dtype=float)
    if clouds.ndim != 3:
        raise ValueError(f"expected (B, N, 6) array, got {clouds.shape}")
    if clouds.shape[1] == 0:
        raise ValueError("cannot encode an empty cloud")
    per_point, cache = mlp_forward(encoder, clouds)  # (B, N, F)
    argmax = np.argmax(per_point, axis=1)  # (B, F)
    feature = np.take_along_axis(per_point, argmax[:, None, :], axis=1)[:, 0, :]
    return feature, EncodeCache(cache, argmax, clouds.shape[1])


def encode_cloud(encoder: MlpParams, cloud) -> tuple[CloudFeature, EncodeCache]:
    """Encode one cloud into the pooled feature vector."""
    arr = cloud_to_array(cloud)
    if arr.shape[0] == 0:
        raise ValueError("cannot encode an empty cloud")
    feature, cache = encode_cloud_batch(encoder, arr[None])
    return CloudFeature(feature[0]), cache


def encode_backward(encoder: MlpParams, cache: EncodeCache, dfeature: np.ndarray) -> MlpGrads:
    """Backward through max-pool and per-point MLP; returns encoder grads.

    The max-pool subgradient routes each feature component's gradient to the
    single point that won the pool.
    """
    dfeature = np.asarray(dfeature, dtype=float)
    if dfeature.ndim == 1:
        dfeature = dfeature[None]
    out = cache.mlp_cache.preacts[-1]
    d_per_point = np.zeros_like(out)  # (B, N, F)
    np.put_along_axis(d_per_point, cache.argmax[:, None, :], dfeature[:, None, :], axis=1)
    grads, _ = mlp_backward(encoder, cache.mlp_cache, d_per_point)
    return grads


# ---------------------------------------------------------------------------
# Sinusoidal timestep embedding for conditioning on the diffusion step.


def timestep_embed(k, dim: int) -> np.ndarray:
    """Sinusoidal embedding of step index k (scalar or array) into dim values.

    First half is sin, second half cos, with geometrically spaced frequencies
    (base 10000). Distinct steps map to distinct vectors.
    """
    if dim % 2 != 0:
        raise ValueError(f"embedding dim must be even, got {dim}")
    karr = np.asarray(k, dtype=float)
    if np.any(karr < 0):
        raise ValueError("timestep must be >= 0")
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = karr[..., None] * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)
