#!/usr/bin/env python3
"""
DDPM loss and denoiser training

The loss is the mean over examples of ||eps - eps_theta(x_t, t)||^2 with
t uniform in [1, T]. Training uses manual backpropagation and AdamW.
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from calibration.optimizer import OptimizerState, adamw_step, new_state
from diffusion.denoiser import DEFAULT_DEPTH, DEFAULT_HIDDEN, Denoiser, ForwardCache, init_denoiser
from diffusion.schedule import Schedule, q_sample
from numerics.rng import Rng
from utils.errors import ArgumentError, TrainingError

DEFAULT_BATCH = 256
DEFAULT_TRAIN_LR = 1e-3


@dataclass
class LossEvaluation:
    loss: float
    cache: Optional[ForwardCache]
    grad_out: np.ndarray  # dL/d(prediction), 2×B


def draw_noising(x0: np.ndarray, s: Schedule, rng: Rng):
    """Timesteps and noise for one batch, drawn in that order"""
    t = rng.integers(1, s.T + 1, x0.shape[0])
    eps = rng.normal(x0.shape, dtype=x0.dtype)
    return t, eps


def ddpm_loss(model, x0: np.ndarray, s: Schedule, rng: Rng) -> float:
    """Monte Carlo DDPM loss of any object with predict_noise(points, t)"""
    if x0.shape[0] == 0:
        raise ArgumentError("DDPM loss needs a nonempty batch")
    t, eps = draw_noising(x0, s, rng)
    pred = model.predict_noise(q_sample(x0, t, eps, s), t)
    return float(np.mean(np.sum((eps - pred) ** 2, axis=1)))


def ddpm_loss_and_grad(model: Denoiser, x0: np.ndarray, s: Schedule, rng: Rng,
                       hook=None) -> LossEvaluation:
    """DDPM loss plus the forward cache and output gradient for backward"""
    if x0.shape[0] == 0:
        raise ArgumentError("DDPM loss needs a nonempty batch")
    t, eps = draw_noising(x0, s, rng)
    xt = q_sample(x0, t, eps, s)
    cache = model.forward(np.ascontiguousarray(xt.T), t, hook=hook)
    residual = cache.result - eps.T
    batch = x0.shape[0]
    loss = float(np.sum(residual * residual) / batch)
    return LossEvaluation(loss=loss, cache=cache, grad_out=(2.0 / batch) * residual)


def minibatches(n: int, batch_size: int, rng: Rng):
    """Shuffled index batches covering range(n) once"""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_denoiser(data: np.ndarray, s: Schedule, epochs: int, lr: float, rng: Rng,
                   batch_size: int = DEFAULT_BATCH, hidden: int = DEFAULT_HIDDEN,
                   depth: int = DEFAULT_DEPTH, model: Denoiser = None,
                   verbose: bool = False) -> Denoiser:
    """Train a floating denoiser on the DDPM loss

    The per-epoch mean loss is kept in `model.training_curve` and the last one
    in `model.metadata['final_loss']`.
    """
    if epochs < 0:
        raise ArgumentError(f"epochs must be non-negative, got {epochs}")
    if model is None:
        model = init_denoiser(rng.spawn(0), hidden=hidden, depth=depth)
    model.metadata['schedule'] = s.metadata()

    states: List[List[OptimizerState]] = [
        [new_state(layer.weight_matrix, lr), new_state(layer.bias, lr)] for layer in model.layers
    ]
    data = data.astype(model.dtype)

    for epoch in range(1, epochs + 1):
        losses = []
        for batch in minibatches(data.shape[0], batch_size, rng):
            evaluation = ddpm_loss_and_grad(model, data[batch], s, rng)
            if not math.isfinite(evaluation.loss):
                raise TrainingError(f"Training loss became {evaluation.loss} at epoch {epoch}")
            grads = model.backward(evaluation.cache, evaluation.grad_out)
            for layer, grad, (w_state, b_state) in zip(model.layers, grads, states):
                layer.weight_matrix = adamw_step(layer.weight_matrix, grad.weight_grad, w_state)
                layer.bias = adamw_step(layer.bias, grad.bias_grad, b_state)
            losses.append(evaluation.loss)

        epoch_loss = float(np.mean(losses))
        model.training_curve.append((epoch, epoch_loss))
        model.metadata['final_loss'] = epoch_loss
        if verbose:
            print(f"epoch {epoch}/{epochs}: loss {epoch_loss:.5f}")

    return model
