from collections import deque
from typing import Dict, Iterable, List, Optional

import numpy as np

from epo.envs import CompletedEpisode
from epo.models.models import FitnessMetric


class FitnessTracker:
    """Sliding windows of completed-episode outcomes, one per agent"""

    def __init__(self, num_agents: int, window: int = 10, min_episodes: int = 5,
                 metric: FitnessMetric = FitnessMetric.RETURN):
        if min_episodes > window:
            raise ValueError(f"min_episodes ({min_episodes}) cannot exceed the window ({window})")
        self.num_agents = num_agents
        self.window = window
        self.min_episodes = min_episodes
        self.metric = FitnessMetric(metric)
        self._windows: Dict[int, deque] = {k: deque(maxlen=window) for k in range(1, num_agents + 1)}
        self.episodes_seen: Dict[int, int] = {k: 0 for k in range(1, num_agents + 1)}

    def record(self, agent_id: int, episode_return: float, success: bool = False):
        value = float(success) if self.metric == FitnessMetric.SUCCESS else float(episode_return)
        self._windows[agent_id].append(value)
        self.episodes_seen[agent_id] += 1

    def record_episodes(self, agent_id: int, episodes: Iterable[CompletedEpisode]):
        for episode in episodes:
            self.record(agent_id, episode.episode_return, episode.success)

    def window_values(self, agent_id: int) -> List[float]:
        return list(self._windows[agent_id])

    def score(self, agent_id: int) -> Optional[float]:
        values = self._windows[agent_id]
        if len(values) < self.min_episodes:
            return None
        return float(np.mean(values))

    def scores(self, agent_ids: Iterable[int]) -> Dict[int, Optional[float]]:
        return {k: self.score(k) for k in agent_ids}

    def clear(self, agent_id: int):
        self._windows[agent_id].clear()

    def state_dict(self) -> dict:
        return {
            "windows": {str(k): list(v) for k, v in self._windows.items()},
            "episodes_seen": {str(k): v for k, v in self.episodes_seen.items()},
        }

    def load_state_dict(self, state: dict):
        for key, values in state["windows"].items():
            self._windows[int(key)] = deque((float(v) for v in values), maxlen=self.window)
        for key, count in state["episodes_seen"].items():
            self.episodes_seen[int(key)] = int(count)


def evaluate_fitness(tracker: FitnessTracker, agent_id: int) -> Optional[float]:
    """Mean of the agent's window, or None before enough episodes completed"""
    return tracker.score(agent_id)
