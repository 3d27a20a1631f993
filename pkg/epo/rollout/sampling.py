import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .buffer import ReplayBuffer, TransitionBatch

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class OffPolicySample:
    batch: TransitionBatch
    with_replacement: bool = False

    def __len__(self) -> int:
        return len(self.batch)


def sample_off_policy(follower_buffers: Sequence[ReplayBuffer], count: int, rng: np.random.Generator,
                      allow_replacement: bool = True, obs_dim: int = None, action_dim: int = None) -> OffPolicySample:
    """Draw ``count`` transitions uniformly over the union of the follower buffers.

    Sampling is without replacement; a request larger than the union falls back to
    sampling with replacement and says so on the returned sample.
    """
    if not follower_buffers:
        if obs_dim is None or action_dim is None:
            raise ValueError("obs_dim and action_dim are needed to build an empty sample")
        return OffPolicySample(batch=TransitionBatch.empty(obs_dim, action_dim))

    union = TransitionBatch.concatenate([buf.all() for buf in follower_buffers])
    size = len(union)
    if size == 0 or count <= 0:
        return OffPolicySample(batch=union.take(np.zeros(0, dtype=np.int64)))

    replace = count > size
    if replace and not allow_replacement:
        raise ValueError(f"cannot draw {count} records from a union of {size} without replacement")
    if replace:
        logger.warning(f"Off-policy request of {count} exceeds the follower union of {size}; sampling with replacement")
        indices = rng.integers(0, size, size=count)
    else:
        indices = rng.choice(size, size=count, replace=False)
    return OffPolicySample(batch=union.take(indices), with_replacement=replace)
