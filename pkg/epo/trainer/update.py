"""Hybrid-policy objective over the joint parameter vector and its minibatch update.

The joint vector holds the shared actor and critic, the state-independent log std
and the K x N_lat gene matrix, so one Adam step moves all of them together.
Within a minibatch each agent's on-policy terms are averaged over that agent's
records and the per-agent means are summed; the master's off-policy terms are
averaged over the kept off-policy records.
"""
import logging
from dataclasses import dataclass, field, fields
from typing import List, Optional, Sequence, Tuple

import numpy as np

from epo.exceptions import NonFiniteError
from epo.losses import LossBreakdown, LossParts, clipped_terms, combine
from epo.models.models import TrainConfig
from epo.policy import (LOG_STD_MAX, LOG_STD_MIN, ActorCriticParams, LatentGene, bounds_loss, bounds_loss_grad,
                        gaussian_entropy, gaussian_log_prob, log_prob_and_entropy, value)
from epo.rollout import (RolloutChunk, TransitionBatch, gae_advantages, n_step_targets, normalize_advantages,
                         one_step_targets)
from epo.tensor import AdamState, MlpSpec, ParamVector, adam_step, mlp_backward, mlp_forward

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class OnPolicyBatch:
    obs: np.ndarray
    actions: np.ndarray
    behavior_log_prob: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray
    agent_index: np.ndarray  # 0-based gene slot

    def __len__(self) -> int:
        return self.advantages.shape[0]

    def take(self, indices) -> "OnPolicyBatch":
        return OnPolicyBatch(**{f.name: getattr(self, f.name)[indices] for f in fields(self)})


@dataclass(eq=False)
class OffPolicyBatch:
    obs: np.ndarray
    actions: np.ndarray
    behavior_log_prob: np.ndarray
    master_old_log_prob: np.ndarray
    advantages: np.ndarray
    value_targets: np.ndarray

    def __len__(self) -> int:
        return self.advantages.shape[0]

    def take(self, indices) -> "OffPolicyBatch":
        return OffPolicyBatch(**{f.name: getattr(self, f.name)[indices] for f in fields(self)})

    @classmethod
    def empty(cls, obs_dim: int, action_dim: int) -> "OffPolicyBatch":
        return cls(obs=np.zeros((0, obs_dim)), actions=np.zeros((0, action_dim)), behavior_log_prob=np.zeros(0),
                   master_old_log_prob=np.zeros(0), advantages=np.zeros(0), value_targets=np.zeros(0))


@dataclass(frozen=True)
class ObjectiveSettings:
    eps_clip: float = 0.1
    lambda_off: float = 1.0
    critic_coef: float = 4.0
    entropy_coef: float = 0.0
    bounds_coef: float = 1e-5
    bounds_limit: float = 1.1

    @classmethod
    def from_config(cls, config: TrainConfig) -> "ObjectiveSettings":
        ppo = config.ppo
        return cls(eps_clip=ppo.eps_clip, lambda_off=ppo.lambda_off, critic_coef=ppo.critic_coef,
                   entropy_coef=ppo.entropy_coef, bounds_coef=ppo.bounds_coef, bounds_limit=ppo.bounds_limit)


def _prefixed(prefix: str, spec: MlpSpec):
    return [(f"{prefix}.{name}", shape) for name, shape in spec.block_shapes()]


class HybridObjective:
    """Loss and analytic gradient of the combined objective w.r.t. the joint vector"""

    def __init__(self, actor_spec: MlpSpec, critic_spec: MlpSpec, num_agents: int, latent_dim: int,
                 settings: ObjectiveSettings = ObjectiveSettings()):
        self.actor_spec = actor_spec
        self.critic_spec = critic_spec
        self.num_agents = num_agents
        self.latent_dim = latent_dim
        self.settings = settings
        self.shapes = (
            _prefixed("actor", actor_spec)
            + _prefixed("critic", critic_spec)
            + [("log_std", (actor_spec.output_dim,)), ("phi", (num_agents, latent_dim))]
        )
        self._n_actor = actor_spec.param_count
        self._n_critic = critic_spec.param_count

    @property
    def obs_dim(self) -> int:
        return self.actor_spec.input_dim - self.latent_dim

    def pack(self, params: ActorCriticParams, genes: Sequence[LatentGene]) -> ParamVector:
        phi = np.stack([g.phi for g in genes])
        values = np.concatenate([params.actor.values, params.critic.values, params.log_std, phi.reshape(-1)])
        return ParamVector.from_shapes(self.shapes, values)

    def unpack(self, vector: ParamVector) -> Tuple[ActorCriticParams, np.ndarray]:
        """Network parameters and the (K, N_lat) gene matrix, as views into ``vector``"""
        v = vector.values
        a, c = self._n_actor, self._n_actor + self._n_critic
        params = ActorCriticParams(
            actor_spec=self.actor_spec,
            critic_spec=self.critic_spec,
            actor=ParamVector.from_shapes(self.actor_spec.block_shapes(), v[:a]),
            critic=ParamVector.from_shapes(self.critic_spec.block_shapes(), v[a:c]),
            log_std=vector.view("log_std"),
        )
        return params, vector.view("phi")

    def genes(self, vector: ParamVector) -> List[LatentGene]:
        phi = vector.view("phi")
        return [LatentGene(agent_id=k + 1, phi=phi[k].copy()) for k in range(self.num_agents)]

    def loss_and_grad(self, vector: ParamVector, on: OnPolicyBatch,
                      off: Optional[OffPolicyBatch] = None) -> Tuple[LossBreakdown, np.ndarray]:
        s = self.settings
        params, phi = self.unpack(vector)
        log_std = params.log_std
        n_on = len(on)
        n_off = len(off) if off is not None else 0

        x_parts = [np.concatenate([on.obs, phi[on.agent_index]], axis=1)]
        actions = [on.actions]
        if n_off:
            x_parts.append(np.concatenate([off.obs, np.broadcast_to(phi[0], (n_off, self.latent_dim))], axis=1))
            actions.append(off.actions)
        x = np.concatenate(x_parts, axis=0)
        actions = np.concatenate(actions, axis=0)

        mean, actor_cache = mlp_forward(self.actor_spec, params.actor, x)
        values, critic_cache = mlp_forward(self.critic_spec, params.critic, x)
        values = values[:, 0]
        log_probs = gaussian_log_prob(actions, mean, log_std)

        # on-policy: per-agent mean, summed over agents
        counts = np.bincount(on.agent_index, minlength=self.num_agents)
        weights = 1.0 / counts[on.agent_index] if n_on else np.zeros(0)
        lp_on = log_probs[:n_on]
        with np.errstate(over="ignore", invalid="ignore"):
            ratio_on = np.exp(lp_on - on.behavior_log_prob)
        finite = np.isfinite(ratio_on)
        if not finite.all():
            raise NonFiniteError("on-policy ratio", int(np.argmin(finite)))
        terms_on, g_on, outside_on = clipped_terms(ratio_on, on.advantages, 1.0 - s.eps_clip, 1.0 + s.eps_clip)
        err_on = values[:n_on] - on.value_targets

        parts = LossParts(
            on_policy_actor=float(np.sum(weights * terms_on)),
            critic_on=float(np.sum(weights * err_on * err_on)),
            entropy=gaussian_entropy(log_std),
            bounds=bounds_loss(mean[:n_on], s.bounds_limit, s.bounds_coef),
            clip_fraction_on=float(outside_on.mean()) if n_on else 0.0,
            approx_kl=float(np.mean(on.behavior_log_prob - lp_on)) if n_on else 0.0,
        )

        dl_dlogp = np.zeros(n_on + n_off)
        dl_dlogp[:n_on] = -weights * g_on
        dl_dvalue = np.zeros(n_on + n_off)
        dl_dvalue[:n_on] = s.critic_coef * weights * 2.0 * err_on

        if n_off:
            lp_off = log_probs[n_on:]
            with np.errstate(over="ignore", invalid="ignore"):
                ratio_off = np.exp(lp_off - off.behavior_log_prob)
                mu = np.exp(off.master_old_log_prob - off.behavior_log_prob)
            keep = np.isfinite(ratio_off) & np.isfinite(mu)
            n_keep = int(keep.sum())
            parts.offpolicy_dropped = n_off - n_keep
            if n_keep:
                terms_off, g_off, outside_off = clipped_terms(
                    ratio_off[keep], off.advantages[keep], mu[keep] * (1.0 - s.eps_clip), mu[keep] * (1.0 + s.eps_clip))
                parts.off_policy_actor = float(terms_off.mean())
                parts.clip_fraction_off = float(outside_off.mean())
                kept = n_on + np.flatnonzero(keep)
                dl_dlogp[kept] = -s.lambda_off * g_off / n_keep
                # dropped records leave both off-policy terms
                err_off = values[kept] - off.value_targets[keep]
                parts.critic_off = float(np.mean(err_off * err_off))
                dl_dvalue[kept] = s.critic_coef * s.lambda_off * 2.0 * err_off / n_keep

        breakdown = combine(parts, s.lambda_off, s.critic_coef, s.entropy_coef)

        inv_var = np.exp(-2.0 * log_std)
        diff = actions - mean
        dl_dmean = dl_dlogp[:, None] * diff * inv_var
        dl_dmean[:n_on] += bounds_loss_grad(mean[:n_on], s.bounds_limit, s.bounds_coef)
        dl_dlog_std = (dl_dlogp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0) - s.entropy_coef

        actor_grad, actor_in = mlp_backward(self.actor_spec, params.actor, actor_cache, dl_dmean)
        critic_grad, critic_in = mlp_backward(self.critic_spec, params.critic, critic_cache, dl_dvalue[:, None])
        gene_cols = (actor_in + critic_in)[:, self.obs_dim:]
        phi_grad = np.zeros((self.num_agents, self.latent_dim))
        np.add.at(phi_grad, on.agent_index, gene_cols[:n_on])
        if n_off:
            phi_grad[0] += gene_cols[n_on:].sum(axis=0)

        grad = np.concatenate([actor_grad, critic_grad, dl_dlog_std, phi_grad.reshape(-1)])
        return breakdown, grad


def build_on_policy_batch(chunks: Sequence[RolloutChunk], gamma: float, lam: float, n_step: int) -> OnPolicyBatch:
    """Pool every agent's horizon, in agent order; advantages normalized over the pool"""
    parts = []
    for slot, chunk in enumerate(chunks):
        gae = gae_advantages(chunk.rewards, chunk.values, chunk.dones, chunk.bootstrap_values, gamma, lam)
        targets = n_step_targets(chunk.rewards, chunk.dones, chunk.values, chunk.bootstrap_values, gamma, n_step)
        n = chunk.horizon * chunk.num_envs
        parts.append(OnPolicyBatch(
            obs=chunk.obs.reshape(n, -1),
            actions=chunk.actions.reshape(n, -1),
            behavior_log_prob=chunk.log_probs.reshape(n),
            advantages=gae.advantages.reshape(n),
            value_targets=targets.reshape(n),
            agent_index=np.full(n, chunk.agent_id - 1, dtype=np.int64),
        ))
    pooled = OnPolicyBatch(**{f.name: np.concatenate([getattr(p, f.name) for p in parts], axis=0)
                              for f in fields(OnPolicyBatch)})
    pooled.advantages = normalize_advantages(pooled.advantages)
    return pooled


def build_off_policy_batch(sample: TransitionBatch, params: ActorCriticParams, master: LatentGene,
                           gamma: float) -> Tuple[OffPolicyBatch, int]:
    """Attach the master's pre-update densities, one-step targets and advantages.

    Records whose correction weight is not finite are dropped here; returns the
    batch and the number dropped.
    """
    obs_dim = params.input_dim - master.phi.size
    if len(sample) == 0:
        return OffPolicyBatch.empty(obs_dim, params.action_dim), 0
    master_old, _ = log_prob_and_entropy(params, master, sample.obs, sample.action)
    with np.errstate(over="ignore", invalid="ignore"):
        keep = np.isfinite(np.exp(master_old - sample.behavior_log_prob))
    dropped = int((~keep).sum())
    if dropped:
        logger.warning(f"Dropped {dropped} off-policy records with non-finite correction weights")
        sample = sample.take(np.flatnonzero(keep))
        master_old = master_old[keep]
    if len(sample) == 0:
        return OffPolicyBatch.empty(obs_dim, params.action_dim), dropped

    v_old = value(params, master, sample.obs)
    v_old_next = value(params, master, sample.next_obs)
    targets = one_step_targets(sample.reward, sample.done.astype(np.float64), v_old_next, gamma)
    batch = OffPolicyBatch(
        obs=sample.obs,
        actions=sample.action,
        behavior_log_prob=sample.behavior_log_prob,
        master_old_log_prob=master_old,
        advantages=normalize_advantages(targets - v_old),
        value_targets=targets,
    )
    return batch, dropped


@dataclass(eq=False)
class UpdateResult:
    vector: ParamVector
    adam: AdamState
    breakdowns: List[LossBreakdown] = field(default_factory=list)

    @property
    def approx_kl(self) -> float:
        return self.breakdowns[-1].approx_kl if self.breakdowns else 0.0

    def mean_breakdown(self) -> LossBreakdown:
        """Average of every minibatch's breakdown; dropped counts are summed"""
        if not self.breakdowns:
            return combine(LossParts())
        avg = {f.name: float(np.mean([getattr(b, f.name) for b in self.breakdowns])) for f in fields(LossBreakdown)}
        avg["offpolicy_dropped"] = int(sum(b.offpolicy_dropped for b in self.breakdowns))
        avg["approx_kl"] = self.approx_kl
        return LossBreakdown(**avg)


def clamp_log_std(vector: ParamVector):
    np.clip(vector.view("log_std"), LOG_STD_MIN, LOG_STD_MAX, out=vector.view("log_std"))


def run_update(objective: HybridObjective, vector: ParamVector, adam: AdamState, lr: float,
               on: OnPolicyBatch, off: OffPolicyBatch, mini_epochs: int, minibatch_size: int,
               max_grad_norm: float, rng: np.random.Generator) -> UpdateResult:
    """Shuffled minibatch passes; the off-policy batch is split over the same schedule"""
    num_minibatches = max(len(on) // minibatch_size, 1)
    result = UpdateResult(vector=vector, adam=adam)
    for _ in range(mini_epochs):
        on_splits = np.array_split(rng.permutation(len(on)), num_minibatches)
        off_splits = np.array_split(rng.permutation(len(off)), num_minibatches)
        for on_idx, off_idx in zip(on_splits, off_splits):
            breakdown, grad = objective.loss_and_grad(result.vector, on.take(on_idx), off.take(off_idx))
            if not np.isfinite(breakdown.total):
                raise NonFiniteError("loss total")
            result.vector, result.adam = adam_step(result.vector, grad, result.adam, lr, max_grad_norm)
            clamp_log_std(result.vector)
            result.breakdowns.append(breakdown)
    return result


def reset_gene_moments(adam: AdamState, vector: ParamVector, slots: Sequence[int]) -> AdamState:
    """Zero the Adam moments of the given 0-based gene rows"""
    state = adam.copy()
    block = vector.block("phi")
    latent_dim = block.shape[1]
    for slot in slots:
        start = block.offset + slot * latent_dim
        state.m[start:start + latent_dim] = 0.0
        state.v[start:start + latent_dim] = 0.0
    return state
