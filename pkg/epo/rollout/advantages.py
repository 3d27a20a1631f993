"""Advantage estimators and critic targets over (time, env) arrays.

Arrays are shaped ``(T, envs)``; a ``done`` at step t cuts every backup that
would cross from t into t+1.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from epo.exceptions import ShapeError

ADV_STD_FLOOR = 1e-8


class AdvantageKind(str, Enum):
    ON_POLICY_GAE = "on_policy_gae"
    OFF_POLICY_ONE_STEP = "off_policy_one_step"


@dataclass(eq=False)
class AdvantageBatch:
    advantages: np.ndarray
    value_targets: np.ndarray
    kind: AdvantageKind
    normalized: bool = False


def _as_time_major(name: str, x, like: np.ndarray = None) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if like is not None and arr.shape != like.shape:
        raise ShapeError(name, like.shape, arr.shape)
    return arr


def gae_advantages(rewards, values, dones, bootstrap_values, gamma: float = 0.99, lam: float = 0.95) -> AdvantageBatch:
    """Generalized advantage estimation; value_targets are the matching lambda-returns"""
    r = _as_time_major("rewards", rewards)
    v = _as_time_major("values", values, r)
    d = _as_time_major("dones", dones, r)
    boot = np.asarray(bootstrap_values, dtype=np.float64).reshape(-1)
    if boot.shape != (r.shape[1],):
        raise ShapeError("bootstrap_values", (r.shape[1],), boot.shape)

    horizon = r.shape[0]
    adv = np.zeros_like(r)
    running = np.zeros(r.shape[1])
    for t in reversed(range(horizon)):
        next_value = boot if t == horizon - 1 else v[t + 1]
        live = 1.0 - d[t]
        delta = r[t] + gamma * next_value * live - v[t]
        running = delta + gamma * lam * live * running
        adv[t] = running
    return AdvantageBatch(advantages=adv, value_targets=adv + v, kind=AdvantageKind.ON_POLICY_GAE)


def n_step_targets(rewards, dones, values, bootstrap_values, gamma: float = 0.99, n: int = 3) -> np.ndarray:
    """Sum of up to n discounted rewards plus the discounted old value n steps ahead.

    A done inside the window ends the sum with no bootstrap. Targets closer than n
    to the horizon bootstrap from ``bootstrap_values`` (the value of the state after
    the last step) with correspondingly fewer rewards.
    """
    r = _as_time_major("rewards", rewards)
    d = _as_time_major("dones", dones, r)
    v = _as_time_major("values", values, r)
    boot = np.asarray(bootstrap_values, dtype=np.float64).reshape(-1)
    if boot.shape != (r.shape[1],):
        raise ShapeError("bootstrap_values", (r.shape[1],), boot.shape)

    horizon = r.shape[0]
    targets = np.zeros_like(r)
    for t in range(horizon):
        acc = np.zeros(r.shape[1])
        alive = np.ones(r.shape[1])
        discount = 1.0
        end = min(t + n, horizon)
        for m in range(t, end):
            acc += alive * discount * r[m]
            discount *= gamma
            alive = alive * (1.0 - d[m])
        tail = boot if end == horizon else v[end]
        targets[t] = acc + alive * discount * tail
    return targets


def one_step_targets(rewards, dones, v_old_next, gamma: float = 0.99) -> np.ndarray:
    r = np.asarray(rewards, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    v = np.asarray(v_old_next, dtype=np.float64)
    if not (r.shape == d.shape == v.shape):
        raise ShapeError("one_step_targets", r.shape, (d.shape, v.shape))
    return r + gamma * v * (1.0 - d)


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero mean, unit std, std floored at 1e-8"""
    adv = np.asarray(advantages, dtype=np.float64)
    if adv.size == 0:
        return adv.copy()
    return (adv - adv.mean()) / max(float(adv.std()), ADV_STD_FLOOR)
