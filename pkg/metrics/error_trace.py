#!/usr/bin/env python3
"""
Per-block error traces along the sampling trajectory

For every sampling step and every layer the trace holds the mean (over
chains) L2 distance between the floating and quantized layer outputs.
In 'free' mode each model follows its own trajectory from a shared x_T and
shared per-step noise, so errors accumulate; in 'teacher' mode both models
see the floating model's x_t at every step.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from diffusion.samplers import ddim_step, ddim_timesteps, ddpm_step, initial_noise
from diffusion.schedule import Schedule
from numerics.rng import Rng
from utils.errors import ArgumentError

TRACE_MODES = ('free', 'teacher')


@dataclass
class ErrorTrace:
    mode: str
    timesteps: np.ndarray  # in sampling order, T first
    l2: np.ndarray  # layers × steps

    def rows(self) -> List[Tuple]:
        """CSV rows `layer,timestep,mode,l2`"""
        rows = []
        for layer in range(self.l2.shape[0]):
            for step, t in enumerate(self.timesteps):
                rows.append((layer, int(t), self.mode, float(self.l2[layer, step])))
        return rows

    def final_errors(self) -> np.ndarray:
        """Per-layer error at the last sampling step"""
        return self.l2[:, -1]

    def final_block_error(self) -> float:
        """Mean over layers of the error at the last sampling step"""
        return float(np.mean(self.final_errors()))


def _layer_distances(fp_outputs: List[np.ndarray], q_outputs: List[np.ndarray]) -> np.ndarray:
    """Mean per-sample L2 between matching layer outputs"""
    return np.array([np.mean(np.linalg.norm((a - b).astype(np.float64), axis=0))
                     for a, b in zip(fp_outputs, q_outputs)])


def block_error_trace(fp, q, s: Schedule, mode: str = 'free', n_chains: int = 64,
                      rng: Rng = None, steps: int = None) -> ErrorTrace:
    """Trace layer-output distances between two architecturally identical models

    With `steps` left at T the trajectory is ancestral DDPM; fewer steps use
    deterministic DDIM on the strided sub-schedule.
    """
    if mode not in TRACE_MODES:
        raise ArgumentError(f"Unknown trace mode '{mode}', expected one of {TRACE_MODES}")
    if fp.architecture() != q.architecture() or fp.time_dim != q.time_dim:
        raise ArgumentError(f"Architectures differ: {fp.architecture()} vs {q.architecture()}")
    if n_chains < 1:
        raise ArgumentError(f"Need at least one chain, got {n_chains}")
    rng = Rng(0) if rng is None else rng
    steps = s.T if steps is None else steps
    timesteps = ddim_timesteps(s.T, steps)
    ancestral = steps == s.T

    x_fp = initial_noise(n_chains, rng, dtype=fp.dtype)
    x_q = x_fp.copy()
    order = timesteps[::-1]
    l2 = np.zeros((len(fp.layers), len(order)))

    for step, t in enumerate(order):
        t = int(t)
        t_prev = int(order[step + 1]) if step + 1 < len(order) else 0
        batch_t = np.full(n_chains, t)
        fp_cache = fp.forward(np.ascontiguousarray(x_fp.T), batch_t)
        q_input = x_fp if mode == 'teacher' else x_q
        q_cache = q.forward(np.ascontiguousarray(q_input.T), batch_t)
        l2[:, step] = _layer_distances(fp_cache.outputs, q_cache.outputs)

        eps_fp = fp_cache.result.T
        eps_q = q_cache.result.T
        if ancestral:
            z = rng.normal(x_fp.shape, dtype=x_fp.dtype) if t > 1 else np.zeros_like(x_fp)
            x_fp = ddpm_step(x_fp, t, eps_fp, s, z)
            x_q = ddpm_step(x_q, t, eps_q, s, z) if mode == 'free' else x_fp
        else:
            x_fp = ddim_step(x_fp, t, t_prev, eps_fp, s, 0.0)
            x_q = ddim_step(x_q, t, t_prev, eps_q, s, 0.0) if mode == 'free' else x_fp

    return ErrorTrace(mode=mode, timesteps=order.copy(), l2=l2)
