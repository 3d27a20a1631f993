from .checkpoint import CheckpointData, load_checkpoint, save_checkpoint, write_checkpoint
from .evaluate import evaluate, run_episodes
from .metrics import METRIC_COLUMNS, EvolutionLogWriter, MetricsCsvWriter, read_metrics
from .normalizer import RunningNormalizer
from .runner import TrainResult, Trainer, train
from .scheduler import adaptive_lr
from .update import (HybridObjective, ObjectiveSettings, OffPolicyBatch, OnPolicyBatch, build_off_policy_batch,
                     build_on_policy_batch, run_update)
