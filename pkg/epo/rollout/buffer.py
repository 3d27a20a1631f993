from dataclasses import dataclass, fields
from typing import Dict, List

import numpy as np

from epo.exceptions import ShapeError

COLUMNS = (
    "agent_id", "obs", "raw_obs", "action", "behavior_log_prob", "behavior_value",
    "reward", "done", "next_obs", "iteration_collected",
)


@dataclass(eq=False)
class TransitionRecord:
    """One environment step as seen by the agent that collected it"""
    agent_id: int
    obs: np.ndarray
    raw_obs: np.ndarray
    action: np.ndarray
    behavior_log_prob: float
    behavior_value: float
    reward: float
    done: bool
    next_obs: np.ndarray
    iteration_collected: int


@dataclass(eq=False)
class TransitionBatch:
    """Column-wise transitions; ``obs``/``next_obs`` are normalized as the collector saw them"""
    agent_id: np.ndarray
    obs: np.ndarray
    raw_obs: np.ndarray
    action: np.ndarray
    behavior_log_prob: np.ndarray
    behavior_value: np.ndarray
    reward: np.ndarray
    done: np.ndarray
    next_obs: np.ndarray
    iteration_collected: np.ndarray

    def __len__(self) -> int:
        return self.reward.shape[0]

    def take(self, indices) -> "TransitionBatch":
        return TransitionBatch(**{f.name: getattr(self, f.name)[indices] for f in fields(self)})

    @classmethod
    def concatenate(cls, batches: List["TransitionBatch"]) -> "TransitionBatch":
        return cls(**{f.name: np.concatenate([getattr(b, f.name) for b in batches], axis=0) for f in fields(cls)})

    @classmethod
    def empty(cls, obs_dim: int, action_dim: int) -> "TransitionBatch":
        return cls(
            agent_id=np.zeros(0, dtype=np.int64),
            obs=np.zeros((0, obs_dim)),
            raw_obs=np.zeros((0, obs_dim)),
            action=np.zeros((0, action_dim)),
            behavior_log_prob=np.zeros(0),
            behavior_value=np.zeros(0),
            reward=np.zeros(0),
            done=np.zeros(0, dtype=bool),
            next_obs=np.zeros((0, obs_dim)),
            iteration_collected=np.zeros(0, dtype=np.int64),
        )


class ReplayBuffer:
    """Cyclic per-agent transition store; the oldest records are overwritten first"""

    def __init__(self, agent_id: int, capacity: int, obs_dim: int, action_dim: int):
        if capacity <= 0:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.agent_id = agent_id
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.write_cursor = 0
        self._size = 0
        self._storage = TransitionBatch(
            agent_id=np.full(capacity, agent_id, dtype=np.int64),
            obs=np.zeros((capacity, obs_dim)),
            raw_obs=np.zeros((capacity, obs_dim)),
            action=np.zeros((capacity, action_dim)),
            behavior_log_prob=np.zeros(capacity),
            behavior_value=np.zeros(capacity),
            reward=np.zeros(capacity),
            done=np.zeros(capacity, dtype=bool),
            next_obs=np.zeros((capacity, obs_dim)),
            iteration_collected=np.zeros(capacity, dtype=np.int64),
        )

    def __len__(self) -> int:
        return self._size

    def add(self, batch: TransitionBatch):
        n = len(batch)
        if batch.obs.shape[1:] != (self.obs_dim,) or batch.action.shape[1:] != (self.action_dim,):
            raise ShapeError(f"buffer {self.agent_id}", (self.obs_dim, self.action_dim), (batch.obs.shape, batch.action.shape))
        if n > self.capacity:
            batch = batch.take(np.arange(n - self.capacity, n))
            n = self.capacity
        slots = (self.write_cursor + np.arange(n)) % self.capacity
        for f in fields(TransitionBatch):
            getattr(self._storage, f.name)[slots] = getattr(batch, f.name)
        self.write_cursor = int((self.write_cursor + n) % self.capacity)
        self._size = min(self._size + n, self.capacity)

    def chronological_indices(self) -> np.ndarray:
        """Storage slots from oldest to newest"""
        if self._size < self.capacity:
            return np.arange(self._size)
        return (self.write_cursor + np.arange(self.capacity)) % self.capacity

    def get(self, slots) -> TransitionBatch:
        return self._storage.take(np.asarray(slots, dtype=np.int64))

    def all(self) -> TransitionBatch:
        return self.get(self.chronological_indices())

    def latest(self, n: int) -> TransitionBatch:
        order = self.chronological_indices()
        return self.get(order[max(len(order) - n, 0):])

    def record(self, slot: int) -> TransitionRecord:
        s = self._storage
        return TransitionRecord(
            agent_id=int(s.agent_id[slot]),
            obs=s.obs[slot].copy(),
            raw_obs=s.raw_obs[slot].copy(),
            action=s.action[slot].copy(),
            behavior_log_prob=float(s.behavior_log_prob[slot]),
            behavior_value=float(s.behavior_value[slot]),
            reward=float(s.reward[slot]),
            done=bool(s.done[slot]),
            next_obs=s.next_obs[slot].copy(),
            iteration_collected=int(s.iteration_collected[slot]),
        )

    def clear(self):
        self.write_cursor = 0
        self._size = 0

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self._storage, name) for name in COLUMNS}

    def load_state(self, arrays: Dict[str, np.ndarray], write_cursor: int, size: int):
        for name in COLUMNS:
            target = getattr(self._storage, name)
            target[...] = np.asarray(arrays[name]).reshape(target.shape).astype(target.dtype)
        self.write_cursor = int(write_cursor)
        self._size = int(size)
