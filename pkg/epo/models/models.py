from pydantic import BaseModel, ConfigDict, Field
from typing import Any, Dict, List, Optional
from datetime import datetime, timezone
from enum import Enum


class EnvTask(str, Enum):
    """Built-in continuous-control tasks"""
    PENDULUM = "pendulum"
    SPARSE_MOUNTAIN_CAR = "sparse_mountain_car"
    MULTIGOAL_REACHER = "multigoal_reacher"


class Activation(str, Enum):
    """Hidden-layer nonlinearity"""
    ELU = "elu"
    TANH = "tanh"


class TriggerMode(str, Enum):
    """When the genetic algorithm is allowed to run"""
    FITNESS_GAP = "fitness_gap"
    FIXED_INTERVAL = "fixed_interval"
    OFF = "off"


class CrossoverStrategy(str, Enum):
    """How two elite genes are combined into a child"""
    AVERAGE = "average"
    UNIFORM = "uniform"
    FITNESS_WEIGHTED = "fitness_weighted"


class FitnessMetric(str, Enum):
    """What the sliding fitness window averages"""
    RETURN = "return"
    SUCCESS = "success"


class EnvConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: EnvTask = Field(default=EnvTask.PENDULUM, description="Environment to train on")
    num_envs: int = Field(default=256, gt=0, description="Total number of parallel environments N")


class NetworkConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hidden_dims: List[int] = Field(default_factory=lambda: [64, 64], min_length=1, description="Trunk hidden layer sizes")
    activation: Activation = Field(default=Activation.ELU, description="Hidden-layer activation")
    init_log_std: float = Field(default=0.0, ge=-5.0, le=2.0, description="Initial state-independent log standard deviation")


class PopulationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    num_agents: int = Field(default=8, ge=1, alias="K", description="Population size K, master included")
    latent_dim: int = Field(default=32, ge=1, alias="N_lat", description="Length of every latent gene")
    x_elites: Optional[int] = Field(default=None, description="Elites kept per evolution; None means K - 2")
    sigma_mut: float = Field(default=0.1, ge=0.0, description="Gaussian mutation standard deviation")
    gamma_trigger: float = Field(default=0.5, ge=0.0, description="Fraction of the median fitness the spread must exceed")
    trigger_mode: TriggerMode = Field(default=TriggerMode.FITNESS_GAP, description="Evolution trigger rule")
    evolve_interval: Optional[int] = Field(default=None, ge=1, description="Iterations between evolutions in fixed_interval mode; None never fires")
    cooldown: int = Field(default=10, ge=0, description="Minimum iterations between two evolutions")
    crossover: CrossoverStrategy = Field(default=CrossoverStrategy.AVERAGE, description="Crossover operator")
    fitness_window: int = Field(default=10, ge=1, description="Completed episodes averaged into a fitness score")
    fitness_min_episodes: int = Field(default=5, ge=1, description="Episodes required before a score is defined")
    fitness_metric: FitnessMetric = Field(default=FitnessMetric.RETURN, description="Quantity averaged by the fitness window")

    @property
    def elites(self) -> int:
        return self.x_elites if self.x_elites is not None else self.num_agents - 2

    @property
    def evolution_enabled(self) -> bool:
        if self.num_agents < 4 or self.trigger_mode == TriggerMode.OFF:
            return False
        if self.trigger_mode == TriggerMode.FIXED_INTERVAL and self.evolve_interval is None:
            return False
        return True


class PpoConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma: float = Field(default=0.99, gt=0.0, le=1.0, description="Discount factor")
    lambda_gae: float = Field(default=0.95, ge=0.0, le=1.0, description="GAE lambda")
    eps_clip: float = Field(default=0.1, gt=0.0, lt=1.0, description="Surrogate clipping factor")
    horizon: int = Field(default=16, gt=0, description="Steps collected per agent per iteration")
    mini_epochs: int = Field(default=2, ge=1, description="Passes over the iteration batch")
    minibatch_size: Optional[int] = Field(default=None, gt=0, description="On-policy transitions per minibatch; None means 4 * num_envs")
    n_step: int = Field(default=3, ge=1, description="n of the on-policy critic target")
    critic_coef: float = Field(default=4.0, ge=0.0, description="Critic loss coefficient")
    entropy_coef: float = Field(default=0.0, ge=0.0, description="Entropy bonus coefficient")
    bounds_coef: float = Field(default=1e-5, ge=0.0, description="Action-mean bounds penalty coefficient")
    bounds_limit: float = Field(default=1.1, gt=0.0, description="Action-mean magnitude free of penalty")
    lambda_off: float = Field(default=1.0, ge=0.0, description="Weight of the master's off-policy terms")


class OptConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(default=1e-4, gt=0.0, description="Initial Adam learning rate")
    kl_threshold: float = Field(default=0.016, gt=0.0, description="KL target of the adaptive learning rate")
    max_grad_norm: float = Field(default=1.0, gt=0.0, description="Global gradient norm clip")
    lr_min: float = Field(default=1e-6, gt=0.0, description="Learning-rate floor")
    lr_max: float = Field(default=1e-2, gt=0.0, description="Learning-rate ceiling")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps_adam: float = Field(default=1e-8, gt=0.0)


class BufferConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    chunks: int = Field(default=2, ge=1, description="Horizon chunks kept in each cyclic replay buffer")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, description="Root seed of every random stream")
    total_env_steps: int = Field(default=2_000_000, gt=0, description="Stop once this many environment steps were taken")
    out_dir: str = Field(default="runs/default", description="Run directory")
    checkpoint_every: int = Field(default=50, ge=0, description="Iterations between periodic checkpoints; 0 disables them")
    collect_threads: int = Field(default=1, ge=1, description="Threads used to collect agents in parallel")
    log_every: int = Field(default=10, ge=1, description="Iterations between progress log lines")


class TrainConfig(BaseModel):
    """Every hyperparameter of a training run"""
    model_config = ConfigDict(extra="forbid")

    env: EnvConfig = Field(default_factory=EnvConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    population: PopulationConfig = Field(default_factory=PopulationConfig)
    ppo: PpoConfig = Field(default_factory=PpoConfig)
    opt: OptConfig = Field(default_factory=OptConfig)
    buffer: BufferConfig = Field(default_factory=BufferConfig)
    run: RunConfig = Field(default_factory=RunConfig)

    @property
    def envs_per_agent(self) -> int:
        return self.env.num_envs // self.population.num_agents

    @property
    def on_policy_batch_size(self) -> int:
        return self.population.num_agents * self.envs_per_agent * self.ppo.horizon

    @property
    def effective_minibatch_size(self) -> int:
        size = self.ppo.minibatch_size if self.ppo.minibatch_size is not None else 4 * self.env.num_envs
        return min(size, self.on_policy_batch_size)

    @property
    def buffer_capacity(self) -> int:
        return self.buffer.chunks * self.ppo.horizon * self.envs_per_agent

    def snapshot(self) -> Dict[str, Any]:
        """JSON-ready dump that re-parses to an identical config"""
        return self.model_dump(mode="json", by_alias=True)


class RunStatus(str, Enum):
    """Status of a training run"""
    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"
    PARTIAL = "partial"  # sweeps only: some children succeeded, some failed


class RunManifest(BaseModel):
    """Self-description written into every run directory"""
    config: Dict[str, Any]
    seed: int
    version: str
    status: RunStatus = RunStatus.RUNNING
    started_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished_at: Optional[str] = None
    metrics_path: str = "metrics.csv"
    evolution_log_path: str = "evolution.jsonl"
    checkpoints: List[str] = Field(default_factory=list)
    error_message: Optional[str] = None


class AgentEvalRow(BaseModel):
    """Evaluation summary of one gene"""
    agent_id: int
    is_master: bool
    episodes: int
    mean_return: float
    std_return: float
    success_rate: float
    fitness: Optional[float] = None


class EvalSummary(BaseModel):
    """Result of evaluating a checkpoint"""
    checkpoint: str
    task: EnvTask
    seed: int
    episodes: int
    rows: List[AgentEvalRow]
