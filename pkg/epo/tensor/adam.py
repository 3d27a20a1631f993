from typing import Tuple

import numpy as np

from epo.exceptions import NonFiniteError, ShapeError
from .classes import AdamState, ParamVector


def clip_grad_norm(grads: np.ndarray, max_grad_norm: float) -> Tuple[np.ndarray, float]:
    """Rescale to max_grad_norm when the global L2 norm exceeds it; returns (grads, pre-clip norm)"""
    norm = float(np.sqrt(np.dot(grads, grads)))
    if norm > max_grad_norm:
        return grads * (max_grad_norm / norm), norm
    return grads, norm


def adam_step(params: ParamVector, grads, state: AdamState, lr: float,
              max_grad_norm: float = float("inf")) -> Tuple[ParamVector, AdamState]:
    """One bias-corrected Adam update after global-norm clipping. Inputs are not mutated."""
    grads = np.asarray(grads, dtype=np.float64).reshape(-1)
    if grads.shape != params.values.shape:
        raise ShapeError("grads", params.values.shape, grads.shape)
    if state.m.shape != grads.shape or state.v.shape != grads.shape:
        raise ShapeError("adam state", grads.shape, state.m.shape)
    if not lr > 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    finite = np.isfinite(grads)
    if not finite.all():
        raise NonFiniteError("gradient", int(np.argmin(finite)))

    grads, _ = clip_grad_norm(grads, max_grad_norm)

    step = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    values = params.values - lr * m_hat / (np.sqrt(v_hat) + state.eps_adam)

    new_state = AdamState(m=m, v=v, step_count=step, beta1=state.beta1, beta2=state.beta2, eps_adam=state.eps_adam)
    return params.with_values(values), new_state
