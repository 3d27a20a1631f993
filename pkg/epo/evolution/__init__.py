from .classes import MASTER_ID, ChildRecord, EvolutionEvent, PopulationState, TriggerDecision
from .fitness import FitnessTracker, evaluate_fitness
from .operators import crossover, mutate, should_evolve
from .population import evolve, rank_followers
