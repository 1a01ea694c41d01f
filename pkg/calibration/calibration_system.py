#!/usr/bin/env python3
"""
Two-phase calibration of a quantized denoiser

Each minibatch runs a forward pass in which every codebook layer first
reassigns its codewords against the activations it is about to receive,
then the DDPM loss is backpropagated and AdamW updates the codebooks (or
pools). Assignments never receive gradients. Optimizer state lives on
single-precision master copies; half-precision payloads are re-rounded from
the master after every step.
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from calibration.optimizer import OptimizerState, adamw_step, new_state
from calibration.reassignment import codebook_grad, pool_search_gap, reassign_layer
from diffusion.datasets import ToyDataset
from diffusion.denoiser import Denoiser
from diffusion.samplers import sample
from diffusion.schedule import Schedule
from diffusion.training import ddpm_loss_and_grad, minibatches
from metrics.quality import QualityReport, sample_quality
from numerics.rng import Rng
from quantization.quantized_layer import LayerTag, QuantizedLayer
from utils.errors import ArgumentError, CalibrationError

HISTORY_HEADER = ['epoch', 'step', 'ddpm_loss', 'reassigned_fraction',
                  'reconstruction_before', 'reconstruction_after', 'pool_search_gap']


@dataclass
class CalibConfig:
    epochs: int = 5
    lr: float = 1e-4
    reassign_every: int = 1
    batch_size: int = 256
    round_fp16: bool = True
    reassign: bool = True
    evaluate: bool = True
    eval_samples: int = 4096
    eval_sampler: str = 'ddim'
    eval_steps: int = 100
    eval_eta: float = 0.0
    swd_projections: int = 128
    eval_seed: int = 0
    pool_search: bool = False

    def validate(self):
        """Reject settings the loop cannot run with"""
        if self.epochs < 0:
            raise ArgumentError(f"epochs must be non-negative, got {self.epochs}")
        if self.reassign_every < 1:
            raise ArgumentError(f"reassign_every must be at least 1, got {self.reassign_every}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be positive, got {self.batch_size}")
        if not self.lr > 0:
            raise ArgumentError(f"lr must be positive, got {self.lr}")
        if self.evaluate and self.eval_samples < 1:
            raise ArgumentError(f"eval_samples must be positive, got {self.eval_samples}")


@dataclass
class StepRecord:
    epoch: int
    step: int
    ddpm_loss: float
    reassigned_fraction: float  # mean over layers; 0 when no reassignment ran
    reconstruction_before: float  # summed ||Wx - W'x||^2 over layers
    reconstruction_after: float
    pool_search_gap: float = 0.0  # mean over pooled layers of projected minus whole-pool loss


@dataclass
class CalibrationHistory:
    steps: List[StepRecord] = field(default_factory=list)
    epoch_loss: List[Tuple[int, float]] = field(default_factory=list)
    epoch_quality: List[Tuple[int, QualityReport]] = field(default_factory=list)

    def rows(self) -> List[Tuple]:
        """CSV rows in HISTORY_HEADER order"""
        return [(r.epoch, r.step, r.ddpm_loss, r.reassigned_fraction,
                 r.reconstruction_before, r.reconstruction_after, r.pool_search_gap) for r in self.steps]

    def swd_curve(self) -> List[Tuple[int, float]]:
        """(epoch, swd) pairs, epoch 0 being the uncalibrated model"""
        return [(epoch, report.swd) for epoch, report in self.epoch_quality]


@dataclass
class CalibrationRun:
    model: Denoiser
    history: CalibrationHistory


def codebook_layers(model: Denoiser) -> List[int]:
    """Indices of the layers that carry a codebook or pool"""
    return [i for i, layer in enumerate(model.layers) if isinstance(layer, QuantizedLayer)]


def evaluate_quality(model: Denoiser, data: ToyDataset, s: Schedule, cfg: CalibConfig) -> QualityReport:
    """Sample with a fixed seed and score against the dataset"""
    points = sample(model, s, cfg.eval_samples, Rng(cfg.eval_seed), sampler=cfg.eval_sampler,
                    steps=min(cfg.eval_steps, s.T), eta=cfg.eval_eta)
    return sample_quality(points, data.points, cfg.swd_projections, seed=cfg.eval_seed,
                          modes=data.modes, mode_scale=data.mode_scale)


def _diagnostics(model: Denoiser, targets: List[int], epoch: int, step: int, loss: float) -> Dict:
    """Loss and per-layer parameter norms at the failing step"""
    norms = {}
    for i in targets:
        params = model.layers[i].parameters()
        norms[str(i)] = float(np.linalg.norm(params)) if np.all(np.isfinite(params)) else math.nan
    return {'epoch': epoch, 'step': step, 'loss': loss, 'parameter_norms': norms}


def calibrate(model: Denoiser, original: Denoiser, data: ToyDataset, s: Schedule,
              cfg: CalibConfig = None, rng: Rng = None, verbose: bool = False) -> CalibrationRun:
    """Calibrate a copy of `model` against the floating `original`"""
    cfg = CalibConfig() if cfg is None else cfg
    cfg.validate()
    rng = Rng(0) if rng is None else rng
    if model.architecture() != original.architecture():
        raise ArgumentError(f"Quantized and original architectures differ: "
                            f"{model.architecture()} vs {original.architecture()}")

    q = model.copy()
    targets = codebook_layers(q)
    if not targets:
        raise ArgumentError("Model has no codebook layers to calibrate")

    history = CalibrationHistory()
    if cfg.evaluate:
        history.epoch_quality.append((0, evaluate_quality(q, data, s, cfg)))
        if verbose:
            print(f"epoch 0/{cfg.epochs}: swd {history.epoch_quality[-1][1].swd:.5f}")
    if cfg.epochs == 0:
        return CalibrationRun(model=q, history=history)

    masters: Dict[int, np.ndarray] = {}
    states: Dict[int, OptimizerState] = {}
    for i in targets:
        layer = q.layers[i]
        layer.begin_calibration(np.array(original.layers[i].weight(), copy=True))
        masters[i] = np.array(layer.parameters(), dtype=np.float32, copy=True)
        states[i] = new_state(masters[i], cfg.lr)

    points = data.points.astype(q.dtype)
    step = 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            losses = []
            for batch in minibatches(points.shape[0], cfg.batch_size, rng):
                step += 1
                reassigning = cfg.reassign and (step - 1) % cfg.reassign_every == 0
                outcomes = []
                gaps = []

                def hook(index, layer, h):
                    if index not in masters:
                        return
                    if cfg.pool_search and layer.mode == LayerTag.PQ_POOL:
                        whole, projected = pool_search_gap(layer, x=h)
                        gaps.append(projected - whole)
                    if reassigning:
                        outcomes.append(reassign_layer(layer, h))

                evaluation = ddpm_loss_and_grad(q, points[batch], s, rng, hook=hook)
                if not math.isfinite(evaluation.loss):
                    raise CalibrationError(f"Calibration loss became {evaluation.loss} at epoch {epoch}, step {step}",
                                           _diagnostics(q, targets, epoch, step, evaluation.loss))

                grads = q.backward(evaluation.cache, evaluation.grad_out)
                for i in targets:
                    layer = q.layers[i]
                    g = codebook_grad(layer, grads[i].upstream, evaluation.cache.inputs[i])
                    masters[i] = adamw_step(masters[i], g, states[i])
                    half = cfg.round_fp16 and layer.mode != LayerTag.VQ
                    layer.set_parameters(masters[i].astype(layer.parameters().dtype), round_fp16=half)

                losses.append(evaluation.loss)
                history.steps.append(StepRecord(
                    epoch=epoch, step=step, ddpm_loss=evaluation.loss,
                    reassigned_fraction=float(np.mean([o.changed_fraction for o in outcomes])) if outcomes else 0.0,
                    reconstruction_before=float(sum(o.loss_before for o in outcomes)),
                    reconstruction_after=float(sum(o.loss_after for o in outcomes)),
                    pool_search_gap=float(np.mean(gaps)) if gaps else 0.0,
                ))

            epoch_loss = float(np.mean(losses))
            history.epoch_loss.append((epoch, epoch_loss))
            line = f"epoch {epoch}/{cfg.epochs}: loss {epoch_loss:.5f}"
            if cfg.evaluate:
                history.epoch_quality.append((epoch, evaluate_quality(q, data, s, cfg)))
                line += f", swd {history.epoch_quality[-1][1].swd:.5f}"
            if verbose:
                print(line)
    finally:
        for i in targets:
            q.layers[i].end_calibration()

    q.metadata['calibration'] = {k: v for k, v in asdict(cfg).items()
                                 if k in ('epochs', 'lr', 'reassign_every', 'batch_size', 'round_fp16', 'reassign',
                                          'pool_search')}
    return CalibrationRun(model=q, history=history)
