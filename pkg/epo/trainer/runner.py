"""Training loop: collect with every agent, maybe evolve, update the shared network.

Random streams all derive from one root seed: one generator per environment, one
action generator per agent, and one each for evolution, minibatch/off-policy
sampling, gene init and parameter init.
"""
import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from epo import __version__
from epo.callback import TrainingCallbackRegistry
from epo.envs import TASK_SPECS, EnvBatchState, make_env_batch, partition_envs
from epo.exceptions import ConfigError
from epo.evolution import FitnessTracker, PopulationState, evolve, should_evolve
from epo.models.models import RunManifest, RunStatus, TrainConfig
from epo.models.validator import ConfigValidator
from epo.policy import build_actor_critic, init_genes
from epo.rollout import ReplayBuffer, RolloutChunk, TransitionBatch, collect, sample_off_policy
from epo.tensor import AdamState, ParamVector
from .checkpoint import CheckpointData, load_checkpoint, save_checkpoint
from .metrics import EvolutionLogWriter, MetricsCsvWriter
from .normalizer import RunningNormalizer
from .scheduler import adaptive_lr
from .update import (HybridObjective, ObjectiveSettings, build_off_policy_batch, build_on_policy_batch,
                     reset_gene_moments, run_update)

logger = logging.getLogger(__name__)

STREAMS = ("env", "action", "evolution", "sampling", "genes", "params")
FINAL_CHECKPOINT = "final.ckpt"
DIAGNOSTIC_CHECKPOINT = "diagnostic.ckpt"
MANIFEST_FILE = "manifest.json"


@dataclass
class TrainResult:
    run_dir: str
    status: RunStatus
    iterations: int
    env_steps: int
    started_at: str
    completed_at: Optional[str] = None
    duration: Optional[float] = None
    final_checkpoint: Optional[str] = None
    error_message: Optional[str] = None


class Trainer:
    """Owns every piece of run state and advances it one iteration at a time"""

    def __init__(self, config: TrainConfig, out_dir: Optional[str] = None,
                 registry: Optional[TrainingCallbackRegistry] = None):
        self.config = config
        self.run_dir = Path(out_dir or config.run.out_dir)
        self.registry = registry or TrainingCallbackRegistry()
        self.iteration = 0
        self.env_steps = 0
        self.lr = config.opt.lr
        self.prepared = False
        self.manifest: Optional[RunManifest] = None
        self.resumed = False

    @property
    def num_agents(self) -> int:
        return self.config.population.num_agents

    def prepare(self) -> "Trainer":
        """Validate the config and build networks, genes, environments and buffers"""
        if self.prepared:
            return self
        validator = ConfigValidator(self.config)
        if not validator.validate():
            key, message = validator.errors[0]
            raise ConfigError(key, message)

        cfg = self.config
        k = self.num_agents
        spec = TASK_SPECS[cfg.env.task]
        self.task_spec = spec

        root = np.random.SeedSequence(cfg.run.seed)
        env_ss, action_ss, evolution_ss, sampling_ss, gene_ss, param_ss = root.spawn(len(STREAMS))
        env_rngs = [np.random.default_rng(s) for s in env_ss.spawn(cfg.env.num_envs)]
        self.action_rngs = [np.random.default_rng(s) for s in action_ss.spawn(k)]
        self.evolution_rng = np.random.default_rng(evolution_ss)
        self.sampling_rng = np.random.default_rng(sampling_ss)

        self.partition = partition_envs(cfg.env.num_envs, k)
        self.envs: List[EnvBatchState] = []
        for agent_id in range(1, k + 1):
            start, stop = self.partition.slice_for(agent_id)
            self.envs.append(make_env_batch(cfg.env.task, env_rngs[start:stop], env_offset=start))

        params = build_actor_critic(spec.obs_dim, spec.action_dim, cfg.population.latent_dim,
                                    cfg.network.hidden_dims, cfg.network.activation,
                                    np.random.default_rng(param_ss), cfg.network.init_log_std)
        genes = init_genes(k, cfg.population.latent_dim, np.random.default_rng(gene_ss))
        self.objective = HybridObjective(params.actor_spec, params.critic_spec, k, cfg.population.latent_dim,
                                         ObjectiveSettings.from_config(cfg))
        self.vector: ParamVector = self.objective.pack(params, genes)
        self.adam = AdamState.fresh(len(self.vector), cfg.opt.beta1, cfg.opt.beta2, cfg.opt.eps_adam)

        self.normalizer = RunningNormalizer(spec.obs_dim)
        self.buffers = [ReplayBuffer(a, cfg.buffer_capacity, spec.obs_dim, spec.action_dim) for a in range(1, k + 1)]
        self.tracker = FitnessTracker(k, cfg.population.fitness_window, cfg.population.fitness_min_episodes,
                                      cfg.population.fitness_metric)
        self.master_returns = deque(maxlen=cfg.population.fitness_window)
        self.population = PopulationState(genes=genes, elite_count=cfg.population.elites)
        self.prepared = True
        logger.info(f"Prepared {cfg.env.task.value} run: K={k}, N={cfg.env.num_envs}, "
                    f"{len(self.vector)} parameters, seed {cfg.run.seed}")
        return self

    def _collect(self, iteration: int) -> List[RolloutChunk]:
        params, _ = self.objective.unpack(self.vector)
        genes = self.objective.genes(self.vector)
        horizon = self.config.ppo.horizon

        def one(slot: int) -> RolloutChunk:
            return collect(genes[slot], params, self.envs[slot], horizon, self.action_rngs[slot],
                           buffer=self.buffers[slot], normalizer=self.normalizer, iteration=iteration)

        threads = self.config.run.collect_threads
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(one, range(self.num_agents)))
        return [one(slot) for slot in range(self.num_agents)]

    def _maybe_evolve(self, scores: Dict[int, Optional[float]]) -> bool:
        pop_cfg = self.config.population
        if not pop_cfg.evolution_enabled:
            return False
        decision = should_evolve(
            [scores[a] for a in self.population.follower_ids], pop_cfg.gamma_trigger, pop_cfg.trigger_mode,
            iteration=self.iteration, last_evolution=self.population.last_evolution_iteration,
            cooldown=pop_cfg.cooldown, interval=pop_cfg.evolve_interval,
        )
        if not decision:
            return False

        self.population.genes = self.objective.genes(self.vector)
        self.population, event = evolve(self.population, scores, self.evolution_rng, pop_cfg.crossover,
                                        pop_cfg.sigma_mut, self.iteration, decision, self.tracker)
        phi = self.vector.view("phi")
        for child in event.children:
            phi[child.slot - 1] = self.population.gene(child.slot).phi
        self.adam = reset_gene_moments(self.adam, self.vector, [c.slot - 1 for c in event.children])
        self.registry.hook.on_evolution(event=event)
        return True

    def run_iteration(self) -> dict:
        """One full iteration; returns the metrics row"""
        cfg = self.config
        it = self.iteration

        scores = self.tracker.scores(self.population.follower_ids)
        evolved = self._maybe_evolve(scores)

        params_old, _ = self.objective.unpack(self.vector.copy())
        master_gene = self.objective.genes(self.vector)[0]
        chunks = self._collect(it)
        for chunk in chunks:
            self.tracker.record_episodes(chunk.agent_id, chunk.completed)
            self.normalizer.update(chunk.raw_obs.reshape(-1, self.task_spec.obs_dim))
        self.master_returns.extend(e.episode_return for e in chunks[0].completed)
        self.env_steps += cfg.env.num_envs * cfg.ppo.horizon

        on = build_on_policy_batch(chunks, cfg.ppo.gamma, cfg.ppo.lambda_gae, cfg.ppo.n_step)
        if self.num_agents > 1:
            sample = sample_off_policy(self.buffers[1:], len(self.buffers[0]), self.sampling_rng)
            off_records = sample.batch
        else:
            off_records = TransitionBatch.empty(self.task_spec.obs_dim, self.task_spec.action_dim)
        off, dropped = build_off_policy_batch(off_records, params_old, master_gene, cfg.ppo.gamma)

        lr_used = self.lr
        result = run_update(self.objective, self.vector, self.adam, lr_used, on, off, cfg.ppo.mini_epochs,
                            cfg.effective_minibatch_size, cfg.opt.max_grad_norm, self.sampling_rng)
        self.vector, self.adam = result.vector, result.adam
        self.lr = adaptive_lr(lr_used, result.approx_kl, cfg.opt.kl_threshold, cfg.opt.lr_min, cfg.opt.lr_max)

        defined = [s for s in self.tracker.scores(self.population.follower_ids).values() if s is not None]
        losses = result.mean_breakdown()
        row = {
            "iteration": it,
            "env_steps": self.env_steps,
            "lr": lr_used,
            "approx_kl": losses.approx_kl,
            "loss_total": losses.total,
            "loss_actor_on": losses.on_policy_actor,
            "loss_actor_off": losses.off_policy_actor,
            "loss_critic_on": losses.critic_on,
            "loss_critic_off": losses.critic_off,
            "entropy": losses.entropy,
            "bounds": losses.bounds,
            "clip_frac_on": losses.clip_fraction_on,
            "clip_frac_off": losses.clip_fraction_off,
            "master_mean_return": float(np.mean(self.master_returns)) if self.master_returns else float("nan"),
            "fitness_min": float(np.min(defined)) if defined else float("nan"),
            "fitness_median": float(np.median(defined)) if defined else float("nan"),
            "fitness_max": float(np.max(defined)) if defined else float("nan"),
            "evolved": int(evolved),
            "offpolicy_dropped": dropped + losses.offpolicy_dropped,
        }
        self.registry.hook.after_iteration(row=row)
        self.iteration += 1

        if it % cfg.run.log_every == 0:
            logger.info(f"Iteration {it}: steps={self.env_steps} lr={lr_used:.3g} kl={losses.approx_kl:.4f} "
                        f"loss={losses.total:.4f} master_return={row['master_mean_return']:.3f}")
        every = cfg.run.checkpoint_every
        if every and self.iteration % every == 0:
            self.save(self.run_dir / f"iter_{self.iteration:06d}.ckpt")
        return row

    def save(self, path) -> Path:
        path = save_checkpoint(self, path)
        if self.manifest is not None:
            self.manifest.checkpoints.append(path.name)
            self._write_manifest()
        self.registry.hook.on_checkpoint(path=str(path), iteration=self.iteration)
        return path

    def _write_manifest(self):
        self.run_dir.mkdir(parents=True, exist_ok=True)
        target = self.run_dir / MANIFEST_FILE
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_text(self.manifest.model_dump_json(indent=2))
        tmp.replace(target)

    def _open_manifest(self) -> RunManifest:
        """A resumed run keeps the manifest already in its run directory"""
        path = self.run_dir / MANIFEST_FILE
        if self.resumed and path.exists():
            try:
                manifest = RunManifest.model_validate_json(path.read_text())
            except ValidationError as e:
                logger.warning(f"Ignoring unreadable manifest {path}: {e}")
            else:
                manifest.status = RunStatus.RUNNING
                manifest.finished_at = None
                manifest.error_message = None
                return manifest
        return RunManifest(config=self.config.snapshot(), seed=self.config.run.seed, version=__version__)

    def _register_writers(self):
        append = self.resumed
        self.registry.register_plugin(MetricsCsvWriter(self.run_dir / "metrics.csv", append=append),
                                      name="metrics_csv")
        self.registry.register_plugin(EvolutionLogWriter(self.run_dir / "evolution.jsonl", append=append),
                                      name="evolution_log")
        self.registry.load_from_env()

    def run(self) -> TrainResult:
        """Train until the env-step budget is spent"""
        self.prepare()
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._register_writers()
        self.manifest = self._open_manifest()
        self._write_manifest()
        result = TrainResult(run_dir=str(self.run_dir), status=RunStatus.RUNNING, iterations=self.iteration,
                             env_steps=self.env_steps, started_at=self.manifest.started_at)
        start = time.time()
        self.registry.hook.before_train(config=self.config, run_dir=str(self.run_dir))
        try:
            while self.env_steps < self.config.run.total_env_steps:
                self.run_iteration()
            final = self.save(self.run_dir / FINAL_CHECKPOINT)
            result.final_checkpoint = str(final)
            result.status = RunStatus.SUCCESS
        except Exception as e:
            logger.error(f"Training failed at iteration {self.iteration}: {e}", exc_info=True)
            result.status = RunStatus.FAILED
            result.error_message = str(e)
            try:
                save_checkpoint(self, self.run_dir / DIAGNOSTIC_CHECKPOINT)
            except Exception as ckpt_error:
                logger.error(f"Could not write diagnostic checkpoint: {ckpt_error}")
            raise
        finally:
            result.iterations = self.iteration
            result.env_steps = self.env_steps
            result.completed_at = datetime.now(timezone.utc).isoformat()
            result.duration = time.time() - start
            self.manifest.status = result.status
            self.manifest.finished_at = result.completed_at
            self.manifest.error_message = result.error_message
            self._write_manifest()
            self.registry.hook.after_train(result=result)
        return result

    def checkpoint_state(self):
        """(manifest fields, named arrays) describing the full resumable state"""
        self.prepare()
        arrays = [(f"param.{block.name}", self.vector.view(block.name)) for block in self.vector.layout]
        arrays += [("adam.m", self.adam.m), ("adam.v", self.adam.v)]
        arrays += [(f"normalizer.{name}", a) for name, a in self.normalizer.state_arrays().items()]
        for slot, env in enumerate(self.envs):
            arrays += [(f"env.{slot + 1}.states", env.states), (f"env.{slot + 1}.step_counts", env.step_counts),
                       (f"env.{slot + 1}.episode_returns", env.episode_returns)]
        buffers = []
        for buf in self.buffers:
            arrays += [(f"buffer.{buf.agent_id}.{name}", a) for name, a in buf.state_arrays().items()]
            buffers.append({"agent_id": buf.agent_id, "write_cursor": buf.write_cursor, "size": len(buf)})
        arrays.append(("master_returns", np.array(self.master_returns, dtype=np.float64)))

        manifest = {
            "config": self.config.snapshot(),
            "version": __version__,
            "scalars": {
                "iteration": self.iteration,
                "env_steps": self.env_steps,
                "lr": self.lr,
                "adam_step": self.adam.step_count,
                "generation": self.population.generation,
                "last_evolution_iteration": self.population.last_evolution_iteration,
            },
            "rng": {
                "envs": [[g.bit_generator.state for g in env.rngs] for env in self.envs],
                "actions": [g.bit_generator.state for g in self.action_rngs],
                "evolution": self.evolution_rng.bit_generator.state,
                "sampling": self.sampling_rng.bit_generator.state,
            },
            "fitness": self.tracker.state_dict(),
            "buffers": buffers,
            "param_layout": [{"name": b.name, "shape": list(b.shape)} for b in self.vector.layout],
        }
        return manifest, arrays

    def load_state(self, data: CheckpointData):
        """Restore everything written by checkpoint_state"""
        self.prepare()
        a = data.arrays
        for block in self.vector.layout:
            self.vector.view(block.name)[...] = a[f"param.{block.name}"].reshape(block.shape)
        scalars = data.scalars
        self.adam = AdamState(m=a["adam.m"].copy(), v=a["adam.v"].copy(), step_count=int(scalars["adam_step"]),
                              beta1=self.adam.beta1, beta2=self.adam.beta2, eps_adam=self.adam.eps_adam)
        self.normalizer.load_state({k: a[f"normalizer.{k}"] for k in ("mean", "var", "count")})
        rng = data.manifest["rng"]
        for slot, env in enumerate(self.envs):
            env.states[...] = a[f"env.{slot + 1}.states"]
            env.step_counts[...] = a[f"env.{slot + 1}.step_counts"].astype(np.int64)
            env.episode_returns[...] = a[f"env.{slot + 1}.episode_returns"]
            for gen, state in zip(env.rngs, rng["envs"][slot]):
                gen.bit_generator.state = state
        for gen, state in zip(self.action_rngs, rng["actions"]):
            gen.bit_generator.state = state
        self.evolution_rng.bit_generator.state = rng["evolution"]
        self.sampling_rng.bit_generator.state = rng["sampling"]
        for buf, info in zip(self.buffers, data.manifest["buffers"]):
            columns = {name: a[f"buffer.{buf.agent_id}.{name}"] for name in buf.state_arrays()}
            buf.load_state(columns, info["write_cursor"], info["size"])
        self.tracker.load_state_dict(data.manifest["fitness"])
        self.master_returns.clear()
        self.master_returns.extend(float(x) for x in a["master_returns"])

        self.iteration = int(scalars["iteration"])
        self.env_steps = int(scalars["env_steps"])
        self.lr = float(scalars["lr"])
        self.population.genes = self.objective.genes(self.vector)
        self.population.generation = int(scalars["generation"])
        last = scalars["last_evolution_iteration"]
        self.population.last_evolution_iteration = int(last) if last is not None else None

    @classmethod
    def from_checkpoint(cls, path, out_dir: Optional[str] = None,
                        registry: Optional[TrainingCallbackRegistry] = None) -> "Trainer":
        data = load_checkpoint(path)
        trainer = cls(data.config, out_dir=out_dir, registry=registry)
        trainer.load_state(data)
        trainer.resumed = True
        logger.info(f"Resumed from {path} at iteration {trainer.iteration}")
        return trainer


def train(config: TrainConfig, out_dir: Optional[str] = None,
          registry: Optional[TrainingCallbackRegistry] = None) -> TrainResult:
    return Trainer(config, out_dir=out_dir, registry=registry).run()
