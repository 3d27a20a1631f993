"""Trigger rule and genetic operators over latent genes."""
from typing import Optional, Sequence, Tuple

import numpy as np

from epo.exceptions import ShapeError
from epo.models.models import CrossoverStrategy, TriggerMode
from .classes import TriggerDecision

MEDIAN_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-6


def should_evolve(scores: Sequence[Optional[float]], gamma_trigger: float = 0.5,
                  mode: TriggerMode = TriggerMode.FITNESS_GAP, iteration: int = 0,
                  last_evolution: Optional[int] = None, cooldown: int = 0,
                  interval: Optional[int] = None) -> TriggerDecision:
    """Decide whether to evolve this iteration.

    fitness_gap fires when max(f) - min(f) > gamma_trigger * |median(f)|; a median
    within 1e-6 of zero is replaced by |max(f)| + 1e-6. fixed_interval fires every
    ``interval`` iterations. Both respect the cooldown and need every score defined.
    """
    mode = TriggerMode(mode)
    if mode == TriggerMode.OFF:
        return TriggerDecision(False, reason="off")
    if not scores or any(s is None for s in scores):
        return TriggerDecision(False, reason="undefined fitness")
    since = iteration - last_evolution if last_evolution is not None else None
    if since is not None and since < cooldown:
        return TriggerDecision(False, reason="cooldown")

    if mode == TriggerMode.FIXED_INTERVAL:
        if interval is None:
            return TriggerDecision(False, reason="no interval")
        elapsed = since if since is not None else iteration
        return TriggerDecision(elapsed >= interval, lhs=float(elapsed), rhs=float(interval), reason="interval")

    f = np.asarray(scores, dtype=np.float64)
    gap = float(f.max() - f.min())
    median = float(np.median(f))
    if abs(median) < MEDIAN_FLOOR:
        rhs = gamma_trigger * (abs(float(f.max())) + MEDIAN_FLOOR)
    else:
        rhs = gamma_trigger * abs(median)
    return TriggerDecision(gap > rhs, lhs=gap, rhs=float(rhs), reason="fitness gap")


def crossover(phi_i: np.ndarray, phi_j: np.ndarray, strategy: CrossoverStrategy = CrossoverStrategy.AVERAGE,
              fitness: Tuple[float, float] = (0.0, 0.0), rng: np.random.Generator = None) -> np.ndarray:
    phi_i = np.asarray(phi_i, dtype=np.float64)
    phi_j = np.asarray(phi_j, dtype=np.float64)
    if phi_i.shape != phi_j.shape:
        raise ShapeError("crossover parents", phi_i.shape, phi_j.shape)

    strategy = CrossoverStrategy(strategy)
    if strategy == CrossoverStrategy.UNIFORM:
        if rng is None:
            raise ValueError("uniform crossover needs a random generator")
        take_i = rng.random(phi_i.shape) < 0.5
        return np.where(take_i, phi_i, phi_j)
    if strategy == CrossoverStrategy.FITNESS_WEIGHTED:
        f_i, f_j = float(fitness[0]), float(fitness[1])
        low = min(f_i, f_j)
        w_i = f_i - low + WEIGHT_FLOOR
        w_j = f_j - low + WEIGHT_FLOOR
        return (w_i * phi_i + w_j * phi_j) / (w_i + w_j)
    return 0.5 * (phi_i + phi_j)


def mutate(phi: np.ndarray, sigma_mut: float, rng: np.random.Generator) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    if sigma_mut == 0.0:
        return phi.copy()
    return phi + sigma_mut * rng.standard_normal(phi.shape)
