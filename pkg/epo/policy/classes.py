from dataclasses import dataclass

import numpy as np

from epo.exceptions import NonFiniteError, ShapeError
from epo.tensor.classes import MlpSpec, ParamVector

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass(eq=False)
class LatentGene:
    """Per-agent latent embedding; agent ids are 1-based and id 1 is the master"""
    agent_id: int
    phi: np.ndarray

    def __post_init__(self):
        self.phi = np.array(self.phi, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.phi)):
            raise NonFiniteError(f"gene of agent {self.agent_id}")

    def copy(self) -> "LatentGene":
        return LatentGene(agent_id=self.agent_id, phi=self.phi.copy())


@dataclass(eq=False)
class ActorCriticParams:
    """Shared actor (theta), critic (psi) and state-independent log std"""
    actor_spec: MlpSpec
    critic_spec: MlpSpec
    actor: ParamVector
    critic: ParamVector
    log_std: np.ndarray

    def __post_init__(self):
        self.log_std = np.asarray(self.log_std, dtype=np.float64).reshape(-1)
        if self.log_std.size != self.actor_spec.output_dim:
            raise ShapeError("log_std", (self.actor_spec.output_dim,), self.log_std.shape)
        if self.actor_spec.input_dim != self.critic_spec.input_dim:
            raise ShapeError("critic input", (self.actor_spec.input_dim,), (self.critic_spec.input_dim,))

    @property
    def action_dim(self) -> int:
        return self.actor_spec.output_dim

    @property
    def input_dim(self) -> int:
        return self.actor_spec.input_dim

    def clamp_log_std(self):
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def copy(self) -> "ActorCriticParams":
        return ActorCriticParams(
            actor_spec=self.actor_spec,
            critic_spec=self.critic_spec,
            actor=self.actor.copy(),
            critic=self.critic.copy(),
            log_std=self.log_std.copy(),
        )


@dataclass(eq=False)
class GaussianAction:
    """A batch of diagonal-Gaussian actions, one row per environment"""
    mean: np.ndarray
    log_std: np.ndarray
    sample: np.ndarray
    log_prob: np.ndarray
