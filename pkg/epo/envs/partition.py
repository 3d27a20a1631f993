from epo.exceptions import ConfigError
from .classes import EnvPartition


def partition_envs(total_envs: int, num_agents: int) -> EnvPartition:
    """Contiguous equal slices; agent k owns [(k-1)N/K, kN/K)"""
    if num_agents < 1:
        raise ConfigError("population.K", f"need at least one agent, got {num_agents}")
    if total_envs % num_agents != 0:
        raise ConfigError("env.num_envs", f"{total_envs} environments cannot be split evenly across {num_agents} agents")
    size = total_envs // num_agents
    slices = tuple((k * size, (k + 1) * size) for k in range(num_agents))
    return EnvPartition(total_envs=total_envs, num_agents=num_agents, slices=slices)
