"""Conditional denoising diffusion over low-dimensional action vectors.

Coefficients use the square-root convention: with betas beta_1..beta_K, the
signal coefficient is alpha_bar[k] = sqrt(prod_{j<=k}(1 - beta_j)) and the
noise coefficient beta_bar[k] = sqrt(1 - alpha_bar[k]^2), so
alpha_bar^2 + beta_bar^2 = 1 exactly and alpha_bar[0] = 1, beta_bar[0] = 0.
Arrays are indexed k in [0, K]; index 0 is the clean action.

The reverse update is the DDIM step

    a_prev = alpha * (a_k - gamma * eps_hat) + sigma * noise

with alpha = alpha_bar[k_prev] / alpha_bar[k], sigma scaled by eta, and gamma
chosen so that eta = 0 with a perfect noise prediction reproduces the clean
action exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import MlpGrads, MlpParams, mlp_backward, mlp_forward, timestep_embed

EMBED_DIM = 16

# Schedule invariants: signal nearly intact at k=0, nearly destroyed at k=K.
ALPHA_BAR_START_MIN = 0.999
ALPHA_BAR_END_MAX = 0.05


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed diffusion coefficients, indexed k in [0, K]."""

    K: int
    betas: np.ndarray  # (K+1,), betas[0] unused and zero
    alpha_bar: np.ndarray  # (K+1,), sqrt-convention signal coefficient
    beta_bar: np.ndarray  # (K+1,), sqrt-convention noise coefficient

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"schedule needs K >= 1, got {self.K}")
        for name in ("betas", "alpha_bar", "beta_bar"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.K + 1,):
                raise ValueError(f"{name} must have shape ({self.K + 1},), got {arr.shape}")
            object.__setattr__(self, name, arr)
        if self.betas[0] != 0.0:
            raise ValueError("betas[0] must be zero (index 0 is the clean action)")
        if np.any(self.betas[1:] <= 0.0) or np.any(self.betas[1:] >= 1.0):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if self.alpha_bar[0] != 1.0 or self.beta_bar[0] != 0.0:
            raise ValueError("alpha_bar[0] must be exactly 1 and beta_bar[0] exactly 0")
        if np.any(np.diff(self.alpha_bar) >= 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if self.alpha_bar[0] < ALPHA_BAR_START_MIN:
            raise ValueError(f"alpha_bar[0] must be >= {ALPHA_BAR_START_MIN}")
        if self.alpha_bar[-1] > ALPHA_BAR_END_MAX:
            raise ValueError(
                f"alpha_bar[K] = {self.alpha_bar[-1]:.4f} exceeds {ALPHA_BAR_END_MAX}; "
                "the terminal state would keep too much signal"
            )
        if not np.allclose(self.alpha_bar**2 + self.beta_bar**2, 1.0, atol=1e-12):
            raise ValueError("alpha_bar^2 + beta_bar^2 must equal 1")

    def to_dict(self) -> dict:
        return {"K": self.K, "betas": self.betas[1:].tolist()}

    @classmethod
    def from_betas(cls, betas_1_to_K: np.ndarray) -> "NoiseSchedule":
        b = np.asarray(betas_1_to_K, dtype=float).reshape(-1)
        K = b.shape[0]
        if K < 1 or np.any(b <= 0.0) or np.any(b >= 1.0):
            raise ValueError("betas must be a nonempty array strictly inside (0, 1)")
        betas = np.concatenate([[0.0], b])
        alpha_bar = np.empty(K + 1)
        alpha_bar[0] = 1.0
        alpha_bar[1:] = np.sqrt(np.cumprod(1.0 - b))
        beta_bar = np.empty(K + 1)
        beta_bar[0] = 0.0
        beta_bar[1:] = np.sqrt(1.0 - alpha_bar[1:] ** 2)
        return cls(K, betas, alpha_bar, beta_bar)

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSchedule":
        sched = cls.from_betas(np.asarray(d["betas"], dtype=float))
        if sched.K != int(d["K"]):
            raise ValueError("schedule K does not match beta count")
        return sched


def make_schedule(K: int = 100, kind: str = "linear",
                  beta_start: float | None = None, beta_end: float | None = None) -> NoiseSchedule:
    """Build a schedule with K denoising steps.

    Linear beta endpoints default to 1e-4 and 0.02 scaled by 1000/K, so the
    terminal signal level is roughly independent of K. The cosine schedule
    ignores the endpoints.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if kind == "linear":
        scale = 1000.0 / K
        if beta_start is None:
            beta_start = 1e-4 * scale
        if beta_end is None:
            beta_end = 0.02 * scale
        # For very short chains the scaled endpoint exceeds 1; clip into the
        # valid range and let the alpha_bar invariants judge the result.
        betas = np.clip(np.linspace(beta_start, beta_end, K), 1e-8, 0.999)
    elif kind == "cosine":
        s = 0.008
        ks = np.arange(K + 1)
        f = np.cos(((ks / K + s) / (1.0 + s)) * math.pi / 2.0) ** 2
        ab2 = f / f[0]
        betas = np.clip(1.0 - ab2[1:] / ab2[:-1], 1e-8, 0.999)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule.from_betas(betas)


def add_noise(schedule: NoiseSchedule, a0: np.ndarray, eps: np.ndarray, k) -> np.ndarray:
    """Noise clean actions to level k: alpha_bar[k] * a0 + beta_bar[k] * eps.

    k may be a scalar or an array broadcasting over leading dims of a0.
    """
    a0 = np.asarray(a0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if a0.shape != eps.shape:
        raise ValueError(f"action shape {a0.shape} does not match noise shape {eps.shape}")
    karr = np.asarray(k)
    if np.any(karr < 0) or np.any(karr > schedule.K):
        raise ValueError(f"k must lie in [0, {schedule.K}]")
    ab = schedule.alpha_bar[karr]
    bb = schedule.beta_bar[karr]
    if karr.ndim > 0:
        ab = ab[..., None]
        bb = bb[..., None]
    return ab * a0 + bb * eps


def ddim_coefficients(schedule: NoiseSchedule, k: int, k_prev: int | None = None,
                      eta: float = 0.0) -> tuple[float, float, float]:
    """(alpha, gamma, sigma) for the reverse step k -> k_prev."""
    if k_prev is None:
        k_prev = k - 1
    if not (0 <= k_prev < k <= schedule.K):
        raise ValueError(f"need 0 <= k_prev < k <= K, got k={k}, k_prev={k_prev}")
    if eta < 0.0:
        raise ValueError("eta must be >= 0")
    ab_k = schedule.alpha_bar[k]
    ab_p = schedule.alpha_bar[k_prev]
    bb_k = schedule.beta_bar[k]
    bb_p = schedule.beta_bar[k_prev]
    # Variance of the stochastic step at eta = 1 equals the DDPM posterior
    # variance; eta scales it down to the deterministic eta = 0 limit.
    sigma_full_sq = (bb_p**2 / bb_k**2) * (1.0 - ab_k**2 / ab_p**2)
    sigma = eta * math.sqrt(max(sigma_full_sq, 0.0))
    alpha = ab_p / ab_k
    gamma = bb_k - (ab_k / ab_p) * math.sqrt(max(bb_p**2 - sigma**2, 0.0))
    return float(alpha), float(gamma), float(sigma)


def ddim_step(schedule: NoiseSchedule, a_k: np.ndarray, k: int, eps_hat: np.ndarray,
              eta: float = 0.0, noise: np.ndarray | None = None,
              k_prev: int | None = None) -> np.ndarray:
    """One reverse update a_k -> a_{k_prev} (default k_prev = k - 1)."""
    a_k = np.asarray(a_k, dtype=float)
    eps_hat = np.asarray(eps_hat, dtype=float)
    if a_k.shape != eps_hat.shape:
        raise ValueError(f"state shape {a_k.shape} does not match noise prediction {eps_hat.shape}")
    alpha, gamma, sigma = ddim_coefficients(schedule, k, k_prev, eta)
    out = alpha * (a_k - gamma * eps_hat)
    if sigma > 0.0:
        if noise is None:
            raise ValueError("stochastic step (eta > 0) requires a noise sample")
        noise = np.asarray(noise, dtype=float)
        if noise.shape != a_k.shape:
            raise ValueError(f"noise shape {noise.shape} does not match state {a_k.shape}")
        out = out + sigma * noise
    return out


# ---------------------------------------------------------------------------
# Denoiser interface: a plain MLP on [noisy action, step embedding, cond].


def denoiser_specs(action_dim: int, cond_dim: int, hidden=(128, 128),
                   embed_dim: int = EMBED_DIM):
    from .nn import mlp_specs

    dims = (action_dim + embed_dim + cond_dim, *hidden, action_dim)
    return mlp_specs(dims)


def denoiser_input(a_k: np.ndarray, k, cond: np.ndarray, embed_dim: int = EMBED_DIM) -> np.ndarray:
    """Concatenate [a_k, timestep_embed(k), cond] along the last axis."""
    a_k = np.asarray(a_k, dtype=float)
    cond = np.asarray(cond, dtype=float)
    emb = timestep_embed(k, embed_dim)
    if a_k.ndim > 1 and emb.ndim == 1:
        emb = np.broadcast_to(emb, a_k.shape[:-1] + (embed_dim,))
    if a_k.ndim > 1 and cond.ndim == 1:
        cond = np.broadcast_to(cond, a_k.shape[:-1] + cond.shape)
    return np.concatenate([a_k, emb, cond], axis=-1)


def predict_noise(denoiser: MlpParams, a_k: np.ndarray, k, cond: np.ndarray,
                  embed_dim: int = EMBED_DIM) -> np.ndarray:
    x = denoiser_input(a_k, k, cond, embed_dim)
    eps_hat, _ = mlp_forward(denoiser, x)
    return eps_hat


def training_loss(denoiser: MlpParams, schedule: NoiseSchedule, a0: np.ndarray,
                  cond: np.ndarray, k: np.ndarray, eps: np.ndarray,
                  embed_dim: int = EMBED_DIM) -> tuple[float, MlpGrads, np.ndarray]:
    """Denoising score-matching loss on one batch.

    Returns (loss, denoiser grads, gradient w.r.t. cond) where the loss is the
    mean squared error between predicted and true noise over all elements. The
    cond gradient lets a caller backpropagate into the scene encoder.
    """
    a0 = np.atleast_2d(np.asarray(a0, dtype=float))
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    cond = np.atleast_2d(np.asarray(cond, dtype=float))
    k = np.atleast_1d(np.asarray(k))
    if np.any(k < 1) or np.any(k > schedule.K):
        raise ValueError(f"training steps must lie in [1, {schedule.K}]")
    if not (a0.shape[0] == eps.shape[0] == cond.shape[0] == k.shape[0]):
        raise ValueError("batch dimensions of a0, eps, cond, k must agree")
    a_k = add_noise(schedule, a0, eps, k)
    x = np.concatenate([a_k, timestep_embed(k, embed_dim), cond], axis=-1)
    eps_hat, cache = mlp_forward(denoiser, x)
    resid = eps_hat - eps
    loss = float(np.mean(resid**2))
    dy = 2.0 * resid / resid.size
    grads, dx = mlp_backward(denoiser, cache, dy)
    cond_dim = cond.shape[-1]
    d_cond = dx[..., -cond_dim:]
    return loss, grads, d_cond


def sampling_steps(K: int, steps: int) -> np.ndarray:
    """Descending step indices from K to 0 for a strided reverse chain."""
    if not (1 <= steps <= K):
        raise ValueError(f"steps must lie in [1, K], got {steps} for K={K}")
    return np.round(np.linspace(K, 0, steps + 1)).astype(int)


def sample(denoiser: MlpParams, schedule: NoiseSchedule, cond: np.ndarray,
           rng: np.random.Generator, action_dim: int = 3, steps: int | None = None,
           eta: float = 0.0, embed_dim: int = EMBED_DIM, n: int | None = None) -> np.ndarray:
    """Draw actions from the reverse chain.

    With n=None returns one (action_dim,) vector; otherwise (n, action_dim)
    sampled as a batch through the shared denoiser.
    """
    if steps is None:
        steps = schedule.K
    ks = sampling_steps(schedule.K, steps)
    batch = 1 if n is None else int(n)
    if batch < 1:
        raise ValueError("n must be >= 1")
    a = rng.standard_normal((batch, action_dim))
    for k, k_prev in zip(ks[:-1], ks[1:]):
        eps_hat = predict_noise(denoiser, a, int(k), cond, embed_dim)
        _, _, sigma = ddim_coefficients(schedule, int(k), int(k_prev), eta)
        noise = rng.standard_normal((batch, action_dim)) if sigma > 0.0 else None
        a = ddim_step(schedule, a, int(k), eps_hat, eta, noise, int(k_prev))
    return a[0] if n is None else a
