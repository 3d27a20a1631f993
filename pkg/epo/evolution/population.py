import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from epo.exceptions import ConfigError
from epo.models.models import CrossoverStrategy
from epo.policy import LatentGene
from .classes import ChildRecord, EvolutionEvent, PopulationState, TriggerDecision
from .fitness import FitnessTracker
from .operators import crossover, mutate

logger = logging.getLogger(__name__)


def rank_followers(scores: Dict[int, float]) -> List[int]:
    """Follower ids by descending fitness, lower id first on ties"""
    return sorted(scores, key=lambda k: (-scores[k], k))


def evolve(pop: PopulationState, scores: Dict[int, float], rng: np.random.Generator,
           strategy: CrossoverStrategy = CrossoverStrategy.AVERAGE, sigma_mut: float = 0.1,
           iteration: int = 0, decision: Optional[TriggerDecision] = None,
           tracker: Optional[FitnessTracker] = None) -> Tuple[PopulationState, EvolutionEvent]:
    """Keep the top followers, refill the other follower slots with mutated children.

    The master's gene is never touched. Elites stay in their own slots; children
    take the remaining follower slots in ascending id order. Replaced agents get
    their fitness windows cleared when a tracker is given.
    """
    k = pop.num_agents
    x = pop.elite_count
    if x < 2 or x > k - 2:
        raise ConfigError("population.x_elites", f"need 2 <= x <= K-2 = {k - 2}, got {x}")
    followers = pop.follower_ids
    missing = [a for a in followers if scores.get(a) is None]
    if missing:
        raise ValueError(f"fitness undefined for agents {missing}")

    ranked = rank_followers({a: float(scores[a]) for a in followers})
    elites = ranked[:x]
    replaced = sorted(ranked[x:])

    new_pop = pop.copy()
    children = []
    for slot in replaced:
        i, j = (int(p) for p in rng.choice(elites, size=2, replace=False))
        phi = crossover(pop.gene(i).phi, pop.gene(j).phi, strategy, (scores[i], scores[j]), rng)
        phi = mutate(phi, sigma_mut, rng)
        new_pop.genes[slot - 1] = LatentGene(agent_id=slot, phi=phi)
        children.append(ChildRecord(parents=(i, j), slot=slot))
        if tracker is not None:
            tracker.clear(slot)

    new_pop.generation = pop.generation + 1
    new_pop.last_evolution_iteration = iteration
    event = EvolutionEvent(
        iteration=iteration,
        trigger_lhs=decision.lhs if decision is not None else 0.0,
        trigger_rhs=decision.rhs if decision is not None else 0.0,
        elites=list(elites),
        children=children,
        generation=new_pop.generation,
    )
    logger.info(f"Evolution {new_pop.generation} at iteration {iteration}: elites {elites}, replaced {replaced}")
    return new_pop, event
