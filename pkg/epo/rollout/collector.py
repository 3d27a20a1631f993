"""Per-agent experience collection.

An agent steps its own slice of environments for ``horizon`` steps with a frozen
parameter snapshot. The observation normalizer is read, never updated, here; the
trainer folds the raw observations in afterwards so the result does not depend
on how agents are spread over threads.
"""
import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from epo.envs import EnvBatchState, CompletedEpisode, env_step, observe
from epo.policy import ActorCriticParams, LatentGene, act, value
from .buffer import ReplayBuffer, TransitionBatch

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class RolloutChunk:
    """One agent's horizon of experience, time-major ``(T, envs, ...)``"""
    agent_id: int
    obs: np.ndarray
    raw_obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    next_obs: np.ndarray
    bootstrap_values: np.ndarray
    completed: List[CompletedEpisode] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_envs(self) -> int:
        return self.rewards.shape[1]

    def to_batch(self, iteration: int) -> TransitionBatch:
        """Flatten time-major arrays into records ordered (t, env)"""
        n = self.horizon * self.num_envs
        return TransitionBatch(
            agent_id=np.full(n, self.agent_id, dtype=np.int64),
            obs=self.obs.reshape(n, -1),
            raw_obs=self.raw_obs.reshape(n, -1),
            action=self.actions.reshape(n, -1),
            behavior_log_prob=self.log_probs.reshape(n),
            behavior_value=self.values.reshape(n),
            reward=self.rewards.reshape(n),
            done=self.dones.reshape(n).astype(bool),
            next_obs=self.next_obs.reshape(n, -1),
            iteration_collected=np.full(n, iteration, dtype=np.int64),
        )


class _Identity:
    def normalize(self, x):
        return np.asarray(x, dtype=np.float64)


def collect(gene: LatentGene, params: ActorCriticParams, envs: EnvBatchState, horizon: int,
            rng: np.random.Generator, buffer: ReplayBuffer = None, normalizer=None,
            iteration: int = 0) -> RolloutChunk:
    """Run ``horizon`` steps on ``envs`` with ``gene`` and append them to ``buffer``.

    ``normalizer`` only needs a ``normalize(raw)`` method; None means raw observations.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    normalizer = normalizer or _Identity()
    spec = envs.spec
    e = envs.num_envs

    raw_obs = np.zeros((horizon, e, spec.obs_dim))
    obs = np.zeros((horizon, e, spec.obs_dim))
    next_obs = np.zeros((horizon, e, spec.obs_dim))
    actions = np.zeros((horizon, e, spec.action_dim))
    log_probs = np.zeros((horizon, e))
    values = np.zeros((horizon, e))
    rewards = np.zeros((horizon, e))
    dones = np.zeros((horizon, e), dtype=bool)
    completed: List[CompletedEpisode] = []

    current_raw = observe(envs)
    current = normalizer.normalize(current_raw)
    for t in range(horizon):
        action = act(params, gene, current, rng)
        raw_obs[t] = current_raw
        obs[t] = current
        actions[t] = action.sample
        log_probs[t] = action.log_prob
        values[t] = value(params, gene, current)

        step = env_step(envs, action.sample)
        rewards[t] = step.rewards
        dones[t] = step.dones
        completed.extend(step.episode_returns_completed)

        current_raw = step.next_obs
        current = normalizer.normalize(current_raw)
        next_obs[t] = current

    chunk = RolloutChunk(
        agent_id=gene.agent_id,
        obs=obs,
        raw_obs=raw_obs,
        actions=actions,
        log_probs=log_probs,
        values=values,
        rewards=rewards,
        dones=dones,
        next_obs=next_obs,
        bootstrap_values=value(params, gene, current),
        completed=completed,
    )
    if buffer is not None:
        buffer.add(chunk.to_batch(iteration))
    logger.debug(f"Agent {gene.agent_id} collected {horizon * e} steps, {len(completed)} episodes finished")
    return chunk
