from .classes import TASK_SPECS, CompletedEpisode, EnvBatchState, EnvPartition, StepResult, TaskSpec
from .dynamics import env_reset, env_step, make_env_batch, observe, wrap_angle
from .partition import partition_envs
