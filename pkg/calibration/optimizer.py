#!/usr/bin/env python3
"""
AdamW with decoupled weight decay
"""

from dataclasses import dataclass

import numpy as np

from utils.errors import ShapeError

DEFAULT_BETAS = (0.9, 0.999)
DEFAULT_EPS = 1e-8


@dataclass
class OptimizerState:
    """Moment accumulators of one parameter tensor"""
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-4
    beta1: float = DEFAULT_BETAS[0]
    beta2: float = DEFAULT_BETAS[1]
    eps: float = DEFAULT_EPS
    weight_decay: float = 0.0


def new_state(params: np.ndarray, lr: float, weight_decay: float = 0.0) -> OptimizerState:
    """Fresh AdamW moments shaped like params"""
    return OptimizerState(m=np.zeros_like(params), v=np.zeros_like(params), lr=lr,
                          weight_decay=weight_decay)


def adamw_step(params: np.ndarray, grad: np.ndarray, st: OptimizerState) -> np.ndarray:
    """One AdamW update; returns new parameters and advances `st`"""
    if grad.shape != params.shape or st.m.shape != params.shape:
        raise ShapeError(f"Parameter {params.shape}, gradient {grad.shape} and moments {st.m.shape} differ")

    st.step += 1
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad
    st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad * grad
    m_hat = st.m / (1.0 - st.beta1 ** st.step)
    v_hat = st.v / (1.0 - st.beta2 ** st.step)

    decayed = params * (1.0 - st.lr * st.weight_decay) if st.weight_decay else params
    updated = decayed - st.lr * m_hat / (np.sqrt(v_hat) + st.eps)
    return updated.astype(params.dtype)
