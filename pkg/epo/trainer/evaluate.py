import logging
from typing import List, Optional

import numpy as np

from epo.envs import TASK_SPECS, env_step, make_env_batch, observe
from epo.evolution import FitnessTracker
from epo.exceptions import ConfigError
from epo.models.models import AgentEvalRow, EnvTask, EvalSummary
from epo.policy import ActorCriticParams, LatentGene, act, build_actor_critic
from epo.tensor import ParamVector
from .checkpoint import load_checkpoint
from .normalizer import RunningNormalizer
from .update import HybridObjective, ObjectiveSettings

logger = logging.getLogger(__name__)


def run_episodes(params: ActorCriticParams, gene: LatentGene, task: EnvTask, episodes: int, seed: int,
                 normalizer: Optional[RunningNormalizer] = None):
    """One episode per environment row with mean actions; returns (returns, successes)"""
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(episodes)]
    envs = make_env_batch(task, rngs)
    returns = np.full(episodes, np.nan)
    successes = np.zeros(episodes, dtype=bool)
    finished = np.zeros(episodes, dtype=bool)
    obs = observe(envs)
    for _ in range(envs.spec.episode_limit):
        x = normalizer.normalize(obs) if normalizer is not None else obs
        action = act(params, gene, x, rng=None, deterministic=True)
        step = env_step(envs, action.sample)
        for episode in step.episode_returns_completed:
            if not finished[episode.env_index]:
                finished[episode.env_index] = True
                returns[episode.env_index] = episode.episode_return
                successes[episode.env_index] = episode.success
        if finished.all():
            break
        obs = step.next_obs
    return returns, successes


def evaluate(checkpoint, task: Optional[EnvTask] = None, episodes: int = 10, seed: int = 0,
             all_genes: bool = False) -> EvalSummary:
    """Deterministic rollouts of the master gene, or of every gene, from a checkpoint"""
    if episodes < 1:
        raise ConfigError("--episodes", f"must be at least 1, got {episodes}")
    data = load_checkpoint(checkpoint)
    config = data.config
    if task is not None and EnvTask(task) != config.env.task:
        raise ConfigError("env.task", f"checkpoint was trained on {config.env.task.value}, not {EnvTask(task).value}")
    task = config.env.task
    spec = TASK_SPECS[task]
    k = config.population.num_agents

    template = build_actor_critic(spec.obs_dim, spec.action_dim, config.population.latent_dim,
                                  config.network.hidden_dims, config.network.activation,
                                  np.random.default_rng(0), config.network.init_log_std)
    objective = HybridObjective(template.actor_spec, template.critic_spec, k, config.population.latent_dim,
                                ObjectiveSettings.from_config(config))
    vector = ParamVector.from_shapes(objective.shapes)
    for block in vector.layout:
        vector.view(block.name)[...] = data.arrays[f"param.{block.name}"].reshape(block.shape)
    params, _ = objective.unpack(vector)
    genes = objective.genes(vector)

    normalizer = RunningNormalizer(spec.obs_dim)
    normalizer.load_state({name: data.arrays[f"normalizer.{name}"] for name in ("mean", "var", "count")})

    tracker = FitnessTracker(k, config.population.fitness_window, config.population.fitness_min_episodes,
                             config.population.fitness_metric)
    tracker.load_state_dict(data.manifest["fitness"])

    rows: List[AgentEvalRow] = []
    for gene in (genes if all_genes else genes[:1]):
        returns, successes = run_episodes(params, gene, task, episodes, seed, normalizer)
        rows.append(AgentEvalRow(
            agent_id=gene.agent_id,
            is_master=gene.agent_id == 1,
            episodes=episodes,
            mean_return=float(np.mean(returns)),
            std_return=float(np.std(returns)),
            success_rate=float(np.mean(successes)),
            fitness=tracker.score(gene.agent_id),
        ))
        logger.info(f"Agent {gene.agent_id}: mean return {rows[-1].mean_return:.3f} over {episodes} episodes")
    return EvalSummary(checkpoint=str(checkpoint), task=task, seed=seed, episodes=episodes, rows=rows)

