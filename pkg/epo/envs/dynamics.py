"""Vectorized dynamics of the built-in tasks.

Every environment row owns its own generator, used only for resets, so a batch
is fully determined by its seeds and the actions it receives. Rows that finish
an episode are reset inside ``env_step``.
"""
from typing import Iterable, List, Optional, Sequence

import numpy as np

from epo.exceptions import ShapeError
from epo.models.models import EnvTask
from .classes import TASK_SPECS, CompletedEpisode, EnvBatchState, StepResult

# pendulum
GRAVITY = 10.0
MASS = 1.0
LENGTH = 1.0
DT = 0.05
MAX_SPEED = 8.0
MAX_TORQUE = 2.0
UPRIGHT_TOLERANCE = 0.1

# sparse mountain car
CAR_POWER = 0.0015
CAR_GRAVITY = 0.0025
CAR_MAX_SPEED = 0.07
CAR_MIN_X = -1.2
CAR_MAX_X = 0.6
CAR_GOAL_X = 0.45
CAR_GOAL_REWARD = 100.0

# multigoal reacher
REACHER_DAMPING = 0.98
REACHER_GAIN = 0.1
REACHER_MAX_SPEED = 0.5
REACHER_STEP = 0.05
GOAL_RADIUS = 0.1
GOALS = np.array([[0.3, 0.3], [-0.8, -0.8]])
GOAL_VALUES = np.array([1.0, 10.0])
FAR_GOAL = 1


def wrap_angle(theta: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi]"""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


def make_env_batch(task: EnvTask, rngs: Sequence[np.random.Generator], env_offset: int = 0) -> EnvBatchState:
    spec = TASK_SPECS[EnvTask(task)]
    batch = EnvBatchState(
        task=task,
        states=np.zeros((len(rngs), spec.state_dim)),
        step_counts=np.zeros(len(rngs), dtype=np.int64),
        rngs=list(rngs),
        env_offset=env_offset,
    )
    env_reset(batch)
    return batch


def _reset_rows(batch: EnvBatchState, rows: Iterable[int]):
    for i in rows:
        rng = batch.rngs[i]
        if batch.task == EnvTask.PENDULUM:
            batch.states[i] = (rng.uniform(-np.pi, np.pi), rng.uniform(-1.0, 1.0))
        elif batch.task == EnvTask.SPARSE_MOUNTAIN_CAR:
            batch.states[i] = (rng.uniform(-0.6, -0.4), 0.0)
        else:
            batch.states[i, :2] = rng.uniform(-0.05, 0.05, size=2)
            batch.states[i, 2:] = 0.0
        batch.step_counts[i] = 0
        batch.episode_returns[i] = 0.0


def observe(batch: EnvBatchState) -> np.ndarray:
    if batch.task == EnvTask.PENDULUM:
        theta, theta_dot = batch.states[:, 0], batch.states[:, 1]
        return np.stack([np.cos(theta), np.sin(theta), theta_dot], axis=1)
    return batch.states.copy()


def env_reset(batch: EnvBatchState, rngs: Optional[Sequence[np.random.Generator]] = None) -> np.ndarray:
    if rngs is not None:
        batch.rngs = list(rngs)
    _reset_rows(batch, range(batch.num_envs))
    return observe(batch)


def _pendulum(states: np.ndarray, actions: np.ndarray):
    theta, theta_dot = states[:, 0], states[:, 1]
    u = MAX_TORQUE * actions[:, 0]
    rewards = -(theta ** 2 + 0.1 * theta_dot ** 2 + 0.001 * u ** 2)
    theta_acc = 3.0 * GRAVITY / (2.0 * LENGTH) * np.sin(theta) + 3.0 / (MASS * LENGTH ** 2) * u
    new_theta_dot = np.clip(theta_dot + theta_acc * DT, -MAX_SPEED, MAX_SPEED)
    new_theta = wrap_angle(theta + new_theta_dot * DT)
    next_states = np.stack([new_theta, new_theta_dot], axis=1)
    terminal = np.zeros(states.shape[0], dtype=bool)
    successes = np.abs(new_theta) < UPRIGHT_TOLERANCE
    return next_states, rewards, terminal, successes


def _mountain_car(states: np.ndarray, actions: np.ndarray):
    x, v = states[:, 0], states[:, 1]
    a = actions[:, 0]
    new_v = np.clip(v + CAR_POWER * a - CAR_GRAVITY * np.cos(3.0 * x), -CAR_MAX_SPEED, CAR_MAX_SPEED)
    new_x = np.clip(x + new_v, CAR_MIN_X, CAR_MAX_X)
    new_v = np.where(new_x <= CAR_MIN_X, 0.0, new_v)
    terminal = new_x >= CAR_GOAL_X
    rewards = -0.1 * a ** 2 + np.where(terminal, CAR_GOAL_REWARD, 0.0)
    return np.stack([new_x, new_v], axis=1), rewards, terminal, terminal.copy()


def _reacher(states: np.ndarray, actions: np.ndarray):
    p, v = states[:, :2], states[:, 2:]
    new_v = np.clip(REACHER_DAMPING * v + REACHER_GAIN * actions, -REACHER_MAX_SPEED, REACHER_MAX_SPEED)
    new_p = np.clip(p + REACHER_STEP * new_v, -1.0, 1.0)
    distances = np.linalg.norm(new_p[:, None, :] - GOALS[None, :, :], axis=2)
    reached = distances < GOAL_RADIUS
    terminal = reached.any(axis=1)
    goal_reward = (reached * GOAL_VALUES[None, :]).max(axis=1)
    rewards = np.where(terminal, goal_reward, -0.01 * np.sum(actions ** 2, axis=1))
    return np.concatenate([new_p, new_v], axis=1), rewards, terminal, reached[:, FAR_GOAL]


_DYNAMICS = {
    EnvTask.PENDULUM: _pendulum,
    EnvTask.SPARSE_MOUNTAIN_CAR: _mountain_car,
    EnvTask.MULTIGOAL_REACHER: _reacher,
}


def env_step(batch: EnvBatchState, actions) -> StepResult:
    """Advance every row one step; finished rows come back already reset"""
    actions = np.asarray(actions, dtype=np.float64)
    spec = batch.spec
    if actions.ndim == 1 and spec.action_dim == 1:
        actions = actions[:, None]
    if actions.shape != (batch.num_envs, spec.action_dim):
        raise ShapeError("actions", (batch.num_envs, spec.action_dim), actions.shape)
    actions = np.clip(actions, -1.0, 1.0)

    next_states, rewards, terminal, successes = _DYNAMICS[batch.task](batch.states, actions)
    batch.states = next_states
    batch.step_counts += 1
    batch.episode_returns += rewards
    dones = terminal | (batch.step_counts >= spec.episode_limit)

    completed: List[CompletedEpisode] = []
    done_rows = np.flatnonzero(dones)
    for i in done_rows:
        completed.append(CompletedEpisode(
            env_index=batch.env_offset + int(i),
            episode_return=float(batch.episode_returns[i]),
            success=bool(successes[i]),
        ))
    _reset_rows(batch, done_rows)

    return StepResult(
        next_obs=observe(batch),
        rewards=rewards,
        dones=dones,
        successes=successes & dones,
        episode_returns_completed=completed,
    )
