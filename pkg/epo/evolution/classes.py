from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from epo.policy import LatentGene

MASTER_ID = 1


@dataclass(eq=False)
class PopulationState:
    """Genes of the whole population; slot ``k - 1`` holds agent ``k``"""
    genes: List[LatentGene]
    elite_count: int
    generation: int = 0
    last_evolution_iteration: Optional[int] = None
    master_index: int = MASTER_ID

    @property
    def num_agents(self) -> int:
        return len(self.genes)

    @property
    def follower_ids(self) -> List[int]:
        return list(range(2, self.num_agents + 1))

    def gene(self, agent_id: int) -> LatentGene:
        return self.genes[agent_id - 1]

    def copy(self) -> "PopulationState":
        return PopulationState(
            genes=[g.copy() for g in self.genes],
            elite_count=self.elite_count,
            generation=self.generation,
            last_evolution_iteration=self.last_evolution_iteration,
            master_index=self.master_index,
        )


@dataclass
class TriggerDecision:
    """Outcome of the trigger rule; truthy when evolution should run"""
    fire: bool
    lhs: float = 0.0
    rhs: float = 0.0
    reason: str = ""

    def __bool__(self) -> bool:
        return self.fire


@dataclass
class ChildRecord:
    parents: Tuple[int, int]
    slot: int

    def to_dict(self) -> dict:
        return {"parents": list(self.parents), "slot": self.slot}


@dataclass
class EvolutionEvent:
    iteration: int
    trigger_lhs: float
    trigger_rhs: float
    elites: List[int]
    children: List[ChildRecord] = field(default_factory=list)
    generation: int = 0

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "trigger_lhs": self.trigger_lhs,
            "trigger_rhs": self.trigger_rhs,
            "elites": list(self.elites),
            "children": [c.to_dict() for c in self.children],
        }
