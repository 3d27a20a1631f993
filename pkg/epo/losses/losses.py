"""Clipped surrogates, critic regressions and the combined objective.

Each surrogate is built from ``clipped_terms``, which also returns the derivative
of every per-record term with respect to that record's new log-density. The
trainer uses those derivatives to backpropagate through the shared network.
"""
import logging
from dataclasses import fields
from typing import Tuple

import numpy as np

from epo.exceptions import NonFiniteError, ShapeError
from .classes import LossBreakdown, LossParts

logger = logging.getLogger(__name__)


def _aligned(*arrays) -> Tuple[np.ndarray, ...]:
    out = tuple(np.asarray(a, dtype=np.float64).reshape(-1) for a in arrays)
    for a in out[1:]:
        if a.shape != out[0].shape:
            raise ShapeError("loss inputs", out[0].shape, a.shape)
    return out


def clipped_terms(ratio: np.ndarray, advantages: np.ndarray, low, high) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-record min(r*A, clip(r, low, high)*A).

    Returns (terms, d term / d log r, clipped mask). The unclipped branch is active
    whenever it is the smaller one, including the tie inside the interval.
    """
    clipped_ratio = np.clip(ratio, low, high)
    unclipped = ratio * advantages
    clipped = clipped_ratio * advantages
    terms = np.minimum(unclipped, clipped)
    active = unclipped <= clipped
    grad_log = np.where(active, unclipped, 0.0)
    outside = (ratio < low) | (ratio > high)
    return terms, grad_log, outside


def on_policy_surrogate(new_log_probs, behavior_log_probs, advantages, eps_clip: float = 0.1) -> Tuple[float, float, float]:
    """Returns (objective, clip_fraction, approx_kl) for the standard clipped surrogate"""
    new, behavior, adv = _aligned(new_log_probs, behavior_log_probs, advantages)
    if new.size == 0:
        return 0.0, 0.0, 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(new - behavior)
    finite = np.isfinite(ratio)
    if not finite.all():
        raise NonFiniteError("on-policy ratio", int(np.argmin(finite)))
    terms, _, outside = clipped_terms(ratio, adv, 1.0 - eps_clip, 1.0 + eps_clip)
    return float(terms.mean()), float(outside.mean()), float(np.mean(behavior - new))


def off_policy_keep_mask(master_log_probs, master_old_log_probs, behavior_log_probs) -> np.ndarray:
    master, master_old, behavior = _aligned(master_log_probs, master_old_log_probs, behavior_log_probs)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.isfinite(np.exp(master - behavior)) & np.isfinite(np.exp(master_old - behavior))


def off_policy_surrogate(master_log_probs, master_old_log_probs, behavior_log_probs, advantages,
                         eps_clip: float = 0.1) -> Tuple[float, float, int]:
    """Importance-corrected surrogate for the master on follower data.

    The clip interval is centered on mu = pi_master_old / pi_behavior. Records whose
    ratio or mu is not finite are dropped. Returns (objective, clip_fraction, dropped).
    """
    master, master_old, behavior, adv = _aligned(master_log_probs, master_old_log_probs, behavior_log_probs, advantages)
    keep = off_policy_keep_mask(master, master_old, behavior)
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"Dropped {dropped} off-policy records with non-finite importance weights")
    if not keep.any():
        return 0.0, 0.0, dropped
    ratio = np.exp(master[keep] - behavior[keep])
    mu = np.exp(master_old[keep] - behavior[keep])
    terms, _, outside = clipped_terms(ratio, adv[keep], mu * (1.0 - eps_clip), mu * (1.0 + eps_clip))
    return float(terms.mean()), float(outside.mean()), dropped


def critic_loss_on(values, targets) -> float:
    v, y = _aligned(values, targets)
    if v.size == 0:
        return 0.0
    return float(np.mean((v - y) ** 2))


def critic_loss_off(master_values, one_step_targets) -> float:
    return critic_loss_on(master_values, one_step_targets)


def combine(parts: LossParts, lambda_off: float = 1.0, critic_coef: float = 4.0,
            entropy_coef: float = 0.0) -> LossBreakdown:
    """Assemble the minimized total from its parts"""
    for f in fields(parts):
        if not np.isfinite(getattr(parts, f.name)):
            raise NonFiniteError(f"loss part {f.name}")
    actor = parts.on_policy_actor + lambda_off * parts.off_policy_actor
    critic = parts.critic_on + lambda_off * parts.critic_off
    total = -actor + critic_coef * critic - entropy_coef * parts.entropy + parts.bounds
    return LossBreakdown(
        on_policy_actor=parts.on_policy_actor,
        off_policy_actor=parts.off_policy_actor,
        critic_on=parts.critic_on,
        critic_off=parts.critic_off,
        entropy=parts.entropy,
        bounds=parts.bounds,
        total=float(total),
        clip_fraction_on=parts.clip_fraction_on,
        clip_fraction_off=parts.clip_fraction_off,
        approx_kl=parts.approx_kl,
        offpolicy_dropped=parts.offpolicy_dropped,
    )
