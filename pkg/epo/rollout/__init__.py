from .advantages import (AdvantageBatch, AdvantageKind, gae_advantages, n_step_targets, normalize_advantages,
                         one_step_targets)
from .buffer import COLUMNS, ReplayBuffer, TransitionBatch, TransitionRecord
from .collector import RolloutChunk, collect
from .sampling import OffPolicySample, sample_off_policy
