from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Tuple

import numpy as np

from epo.models.models import EnvTask


@dataclass(frozen=True)
class TaskSpec:
    state_dim: int
    obs_dim: int
    action_dim: int
    episode_limit: int


TASK_SPECS: Dict[EnvTask, TaskSpec] = {
    EnvTask.PENDULUM: TaskSpec(state_dim=2, obs_dim=3, action_dim=1, episode_limit=200),
    EnvTask.SPARSE_MOUNTAIN_CAR: TaskSpec(state_dim=2, obs_dim=2, action_dim=1, episode_limit=400),
    EnvTask.MULTIGOAL_REACHER: TaskSpec(state_dim=4, obs_dim=4, action_dim=2, episode_limit=100),
}


class CompletedEpisode(NamedTuple):
    env_index: int
    episode_return: float
    success: bool


@dataclass(eq=False)
class EnvBatchState:
    """A vector of independent environment instances of one task"""
    task: EnvTask
    states: np.ndarray
    step_counts: np.ndarray
    rngs: List[np.random.Generator]
    episode_returns: np.ndarray = None
    env_offset: int = 0

    def __post_init__(self):
        self.task = EnvTask(self.task)
        if self.episode_returns is None:
            self.episode_returns = np.zeros(self.states.shape[0])

    @property
    def spec(self) -> TaskSpec:
        return TASK_SPECS[self.task]

    @property
    def num_envs(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class EnvPartition:
    total_envs: int
    num_agents: int
    slices: Tuple[Tuple[int, int], ...]

    @property
    def envs_per_agent(self) -> int:
        return self.total_envs // self.num_agents

    def slice_for(self, agent_id: int) -> Tuple[int, int]:
        """Index range [start, stop) owned by the 1-based agent id"""
        return self.slices[agent_id - 1]


@dataclass(eq=False)
class StepResult:
    next_obs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    successes: np.ndarray
    episode_returns_completed: List[CompletedEpisode] = field(default_factory=list)
