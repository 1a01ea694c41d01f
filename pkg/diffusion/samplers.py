#!/usr/bin/env python3
"""
Ancestral DDPM and strided DDIM samplers

Both take any model with predict_noise(points, t). Random draws happen in a
fixed order (x_T first, then one noise draw per stochastic step) so a seed
fixes the whole trajectory.
"""

import numpy as np

from diffusion.denoiser import DATA_DIM
from diffusion.schedule import Schedule
from numerics.rng import Rng
from utils.errors import ArgumentError, ShapeError


def initial_noise(n: int, rng: Rng, x_T: np.ndarray = None, dtype=np.float32) -> np.ndarray:
    """x_T: the given start points, else standard normal draws"""
    if x_T is not None:
        if x_T.ndim != 2 or x_T.shape[1] != DATA_DIM:
            raise ShapeError(f"x_T must be N×{DATA_DIM}, got {x_T.shape}")
        return np.array(x_T, dtype=dtype, copy=True)
    return rng.normal((n, DATA_DIM), dtype=dtype)


def ddpm_step(x: np.ndarray, t: int, eps: np.ndarray, s: Schedule, z: np.ndarray) -> np.ndarray:
    """x_{t-1} from x_t using the posterior mean and variance

    The variance is beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t), which is
    zero at t = 1.
    """
    beta = s.betas[t - 1]
    alpha_bar = s.alpha_bars[t - 1]
    alpha_bar_prev = s.alpha_bar(t - 1)
    mean = (x - (beta / np.sqrt(1.0 - alpha_bar)) * eps) / np.sqrt(s.alphas[t - 1])
    variance = beta * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    return (mean + np.sqrt(variance) * z).astype(x.dtype)


def ddpm_sample(model, s: Schedule, n: int, rng: Rng, x_T: np.ndarray = None) -> np.ndarray:
    """Ancestral sampling over all T steps, n×2 output"""
    x = initial_noise(n, rng, x_T)
    for t in range(s.T, 0, -1):
        eps = model.predict_noise(x, np.full(x.shape[0], t))
        z = rng.normal(x.shape, dtype=x.dtype) if t > 1 else np.zeros_like(x)
        x = ddpm_step(x, t, eps, s, z)
    return x


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """Uniformly strided increasing sub-schedule ending at T"""
    if steps < 1:
        raise ArgumentError(f"DDIM needs at least one step, got {steps}")
    if steps > T:
        raise ArgumentError(f"DDIM steps {steps} exceed T={T}")
    if steps == 1:
        return np.array([T])
    return np.rint(np.linspace(1, T, steps)).astype(np.int64)


def ddim_step(x: np.ndarray, t: int, t_prev: int, eps: np.ndarray, s: Schedule,
              eta: float, z: np.ndarray = None) -> np.ndarray:
    """Move from t to t_prev (t_prev = 0 lands on the x_0 estimate)"""
    alpha_bar = s.alpha_bar(t)
    alpha_bar_prev = s.alpha_bar(t_prev)
    x0_hat = (x - np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(alpha_bar)
    sigma = eta * np.sqrt((1.0 - alpha_bar_prev) / (1.0 - alpha_bar)) * np.sqrt(1.0 - alpha_bar / alpha_bar_prev)
    direction = np.sqrt(max(1.0 - alpha_bar_prev - sigma ** 2, 0.0)) * eps
    out = np.sqrt(alpha_bar_prev) * x0_hat + direction
    if sigma > 0 and z is not None:
        out = out + sigma * z
    return out.astype(x.dtype)


def ddim_sample(model, s: Schedule, steps: int, eta: float, rng: Rng, n: int = None,
                x_T: np.ndarray = None) -> np.ndarray:
    """DDIM over a strided sub-schedule; eta = 0 is deterministic given x_T"""
    if not 0.0 <= eta <= 1.0:
        raise ArgumentError(f"eta must be in [0, 1], got {eta}")
    timesteps = ddim_timesteps(s.T, steps)
    if x_T is None and n is None:
        raise ArgumentError("ddim_sample needs n or x_T")
    x = initial_noise(n, rng, x_T)

    for idx in range(len(timesteps) - 1, -1, -1):
        t = int(timesteps[idx])
        t_prev = int(timesteps[idx - 1]) if idx > 0 else 0
        eps = model.predict_noise(x, np.full(x.shape[0], t))
        z = rng.normal(x.shape, dtype=x.dtype) if eta > 0 and t_prev > 0 else None
        x = ddim_step(x, t, t_prev, eps, s, eta, z)
    return x


def sample(model, s: Schedule, n: int, rng: Rng, sampler: str = 'ddpm', steps: int = None,
           eta: float = 0.0) -> np.ndarray:
    """Dispatch by sampler name

    'ddpm' with fewer than T steps runs the respaced ancestral sampler, which
    is DDIM with eta = 1 on the strided sub-schedule.
    """
    steps = s.T if steps is None else steps
    if sampler == 'ddpm':
        if steps == s.T:
            return ddpm_sample(model, s, n, rng)
        return ddim_sample(model, s, steps, 1.0, rng, n=n)
    if sampler == 'ddim':
        return ddim_sample(model, s, steps, eta, rng, n=n)
    raise ArgumentError(f"Unknown sampler '{sampler}', expected ddpm or ddim")
