"""Latent-conditioned Gaussian actor-critic shared by every agent.

Both trunks see ``[obs || phi]``; an agent's behavior is carried entirely by its
gene. Actions are unsquashed: environments clamp them and the bounds penalty keeps
means from saturating.
"""
from typing import Optional, Tuple

import numpy as np

from epo.exceptions import NonFiniteError, ShapeError
from epo.models.models import Activation
from epo.tensor.classes import MlpSpec
from epo.tensor.mlp import as_mat, init_mlp_params, mlp_forward
from .classes import ActorCriticParams, GaussianAction, LatentGene

LOG_2PI = float(np.log(2.0 * np.pi))


def build_actor_critic(obs_dim: int, action_dim: int, latent_dim: int, hidden_dims, activation: Activation,
                       rng: np.random.Generator, init_log_std: float = 0.0) -> ActorCriticParams:
    actor_spec = MlpSpec(obs_dim + latent_dim, tuple(hidden_dims), action_dim, activation)
    critic_spec = MlpSpec(obs_dim + latent_dim, tuple(hidden_dims), 1, activation)
    return ActorCriticParams(
        actor_spec=actor_spec,
        critic_spec=critic_spec,
        actor=init_mlp_params(actor_spec, rng, final_scale=0.01),
        critic=init_mlp_params(critic_spec, rng),
        log_std=np.full(action_dim, float(init_log_std)),
    )


def init_genes(num_agents: int, latent_dim: int, rng: np.random.Generator) -> list:
    return [LatentGene(agent_id=k + 1, phi=rng.standard_normal(latent_dim)) for k in range(num_agents)]


def conditioned_input(params: ActorCriticParams, obs, phi) -> np.ndarray:
    """Row-wise [obs || phi]; phi is one gene (broadcast) or one gene per row"""
    obs = as_mat(obs, "obs")
    phi = np.asarray(phi, dtype=np.float64)
    obs_dim = params.input_dim - phi.shape[-1]
    if obs.shape[1] != obs_dim:
        raise ShapeError("obs", (obs.shape[0], obs_dim), obs.shape)
    if not np.all(np.isfinite(obs)):
        raise NonFiniteError("observation", int(np.argmin(np.isfinite(obs).all(axis=1))))
    if phi.ndim == 1:
        phi = np.broadcast_to(phi, (obs.shape[0], phi.size))
    elif phi.shape[0] != obs.shape[0]:
        raise ShapeError("phi rows", (obs.shape[0], phi.shape[1]), phi.shape)
    return np.concatenate([obs, phi], axis=1)


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=1) - np.sum(log_std) - 0.5 * mean.shape[1] * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std + 0.5 * (1.0 + LOG_2PI)))


def action_mean(params: ActorCriticParams, gene: LatentGene, obs) -> np.ndarray:
    mean, _ = mlp_forward(params.actor_spec, params.actor, conditioned_input(params, obs, gene.phi))
    return mean


def act(params: ActorCriticParams, gene: LatentGene, obs, rng: Optional[np.random.Generator],
        deterministic: bool = False) -> GaussianAction:
    """Sample one action per observation row; deterministic mode returns the mean"""
    mean = action_mean(params, gene, obs)
    if deterministic or rng is None:
        sample = mean.copy()
    else:
        sample = mean + np.exp(params.log_std) * rng.standard_normal(mean.shape)
    return GaussianAction(
        mean=mean,
        log_std=params.log_std.copy(),
        sample=sample,
        log_prob=gaussian_log_prob(sample, mean, params.log_std),
    )


def log_prob_and_entropy(params: ActorCriticParams, gene: LatentGene, obs, actions) -> Tuple[np.ndarray, float]:
    obs = as_mat(obs, "obs")
    actions = as_mat(actions, "actions")
    if actions.shape != (obs.shape[0], params.action_dim):
        raise ShapeError("actions", (obs.shape[0], params.action_dim), actions.shape)
    mean = action_mean(params, gene, obs)
    return gaussian_log_prob(actions, mean, params.log_std), gaussian_entropy(params.log_std)


def value(params: ActorCriticParams, gene: LatentGene, obs) -> np.ndarray:
    out, _ = mlp_forward(params.critic_spec, params.critic, conditioned_input(params, obs, gene.phi))
    return out[:, 0]


def bounds_loss(action_means, limit: float = 1.1, coef: float = 1e-5) -> float:
    """coef * mean of squared excess of |mean| over limit"""
    excess = np.maximum(np.abs(np.asarray(action_means, dtype=np.float64)) - limit, 0.0)
    return float(coef * np.mean(excess * excess)) if excess.size else 0.0


def bounds_loss_grad(action_means: np.ndarray, limit: float = 1.1, coef: float = 1e-5) -> np.ndarray:
    if action_means.size == 0:
        return np.zeros_like(action_means)
    excess = np.maximum(np.abs(action_means) - limit, 0.0)
    return coef * 2.0 * excess * np.sign(action_means) / action_means.size
