#!/usr/bin/env python3
"""
Linear beta schedule and the forward corruption q(x_t | x_0)

Timesteps are 1-based: t = 1 is the least noisy step, t = T the noisiest.
Schedule coefficients are kept in float64.
"""

from dataclasses import dataclass

import numpy as np

from utils.errors import ArgumentError, ShapeError

DEFAULT_T = 1000
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass
class Schedule:
    T: int
    beta_start: float
    beta_end: float
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t) -> np.ndarray:
        """alpha_bar_t for 1 <= t <= T; t = 0 gives 1"""
        t = np.asarray(t)
        padded = np.concatenate([[1.0], self.alpha_bars])
        return padded[t]

    def check_timesteps(self, t):
        """Raise ArgumentError unless every t lies in [1, T]"""
        t = np.asarray(t)
        if t.size and (t.min() < 1 or t.max() > self.T):
            raise ArgumentError(f"Timestep out of range [1, {self.T}]")
        return t

    def metadata(self) -> dict:
        """Schedule parameters as stored in checkpoint metadata"""
        return {'T': self.T, 'beta_start': self.beta_start, 'beta_end': self.beta_end}


def make_schedule(T: int = DEFAULT_T, beta_start: float = DEFAULT_BETA_START,
                  beta_end: float = DEFAULT_BETA_END) -> Schedule:
    """Betas linearly interpolated from beta_start to beta_end"""
    if T < 1:
        raise ArgumentError(f"T must be at least 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ArgumentError(f"Need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")

    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    return Schedule(T=T, beta_start=float(beta_start), beta_end=float(beta_end),
                    betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


def q_sample(x0: np.ndarray, t, eps: np.ndarray, s: Schedule) -> np.ndarray:
    """sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps

    `t` is a scalar or one timestep per row of x0.
    """
    if eps.shape != x0.shape:
        raise ShapeError(f"Noise shape {eps.shape} differs from data shape {x0.shape}")
    t = s.check_timesteps(t)
    alpha_bar = s.alpha_bar(t)
    if alpha_bar.ndim == 1:
        alpha_bar = alpha_bar[:, None]
    signal = np.sqrt(alpha_bar).astype(x0.dtype)
    noise = np.sqrt(1.0 - alpha_bar).astype(x0.dtype)
    return signal * x0 + noise * eps
