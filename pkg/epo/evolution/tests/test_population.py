import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from epo.exceptions import ConfigError
from epo.envs import CompletedEpisode
from epo.models.models import CrossoverStrategy, FitnessMetric
from epo.policy import LatentGene
from epo.evolution import (FitnessTracker, PopulationState, TriggerDecision, evaluate_fitness, evolve,
                           rank_followers)


def _population(k, latent_dim=3, elites=None, seed=0):
    rng = np.random.default_rng(seed)
    genes = [LatentGene(agent_id=i + 1, phi=rng.standard_normal(latent_dim)) for i in range(k)]
    return PopulationState(genes=genes, elite_count=elites if elites is not None else k - 2)


class TestFitnessTracker(unittest.TestCase):

    def test_window_mean(self):
        tracker = FitnessTracker(2, window=3, min_episodes=3)
        for r in (1.0, 2.0, 3.0):
            tracker.record(2, r)
        self.assertEqual(evaluate_fitness(tracker, 2), 2.0)

    def test_absent_before_min_episodes(self):
        tracker = FitnessTracker(2, window=10, min_episodes=5)
        self.assertIsNone(tracker.score(1))
        for r in range(4):
            tracker.record(1, float(r))
        self.assertIsNone(tracker.score(1))

    def test_sliding_window_keeps_latest(self):
        tracker = FitnessTracker(1, window=4, min_episodes=1)
        for r in range(9):
            tracker.record(1, float(r))
        self.assertEqual(tracker.window_values(1), [5.0, 6.0, 7.0, 8.0])
        self.assertEqual(tracker.episodes_seen[1], 9)

    def test_success_metric(self):
        tracker = FitnessTracker(1, window=4, min_episodes=1, metric=FitnessMetric.SUCCESS)
        tracker.record_episodes(1, [CompletedEpisode(0, 10.0, True), CompletedEpisode(1, 1.0, False)])
        self.assertEqual(tracker.score(1), 0.5)

    def test_clear_and_state(self):
        tracker = FitnessTracker(3, window=3, min_episodes=1)
        tracker.record(2, 1.5)
        tracker.record(3, -2.0)
        other = FitnessTracker(3, window=3, min_episodes=1)
        other.load_state_dict(tracker.state_dict())
        self.assertEqual(other.scores([1, 2, 3]), {1: None, 2: 1.5, 3: -2.0})
        tracker.clear(2)
        self.assertIsNone(tracker.score(2))

    def test_min_above_window(self):
        with self.assertRaises(ValueError):
            FitnessTracker(2, window=3, min_episodes=4)


class TestEvolve(unittest.TestCase):

    def test_four_agent_trace(self):
        """Test the K=4, x=2 walk-through: agents 2 and 4 survive, agent 3 is replaced"""
        pop = _population(4, elites=2)
        scores = {2: 5.0, 3: 1.0, 4: 3.0}
        new_pop, event = evolve(pop, scores, np.random.default_rng(0), sigma_mut=0.0, iteration=7,
                                decision=TriggerDecision(True, lhs=4.0, rhs=1.5))
        self.assertEqual(event.elites, [2, 4])
        self.assertEqual(len(event.children), 1)
        child = event.children[0]
        self.assertEqual(child.slot, 3)
        self.assertEqual(sorted(child.parents), [2, 4])
        assert_allclose(new_pop.gene(3).phi, 0.5 * (pop.gene(2).phi + pop.gene(4).phi))
        for agent in (1, 2, 4):
            assert_array_equal(new_pop.gene(agent).phi, pop.gene(agent).phi)
        self.assertEqual(new_pop.generation, 1)
        self.assertEqual(new_pop.last_evolution_iteration, 7)
        self.assertEqual(event.to_dict(), {"iteration": 7, "trigger_lhs": 4.0, "trigger_rhs": 1.5,
                                           "elites": [2, 4],
                                           "children": [{"parents": list(child.parents), "slot": 3}]})

    def test_input_population_untouched(self):
        pop = _population(6)
        before = [g.phi.copy() for g in pop.genes]
        evolve(pop, {2: 1.0, 3: 2.0, 4: 3.0, 5: 4.0, 6: 5.0}, np.random.default_rng(1))
        for gene, phi in zip(pop.genes, before):
            assert_array_equal(gene.phi, phi)

    def test_replaced_windows_cleared(self):
        pop = _population(5, elites=2)
        tracker = FitnessTracker(5, window=3, min_episodes=1)
        for agent in range(1, 6):
            tracker.record(agent, float(agent))
        evolve(pop, tracker.scores(pop.follower_ids), np.random.default_rng(2), tracker=tracker)
        self.assertIsNone(tracker.score(2))
        self.assertIsNone(tracker.score(3))
        self.assertEqual(tracker.score(1), 1.0)
        self.assertEqual(tracker.score(5), 5.0)

    def test_deterministic_given_seed(self):
        pop = _population(8)
        scores = {k: float(k % 3) for k in range(2, 9)}
        a, _ = evolve(pop, scores, np.random.default_rng(9), CrossoverStrategy.UNIFORM, sigma_mut=0.1)
        b, _ = evolve(pop, scores, np.random.default_rng(9), CrossoverStrategy.UNIFORM, sigma_mut=0.1)
        for ga, gb in zip(a.genes, b.genes):
            assert_array_equal(ga.phi, gb.phi)

    def test_invalid_elite_count(self):
        with self.assertRaises(ConfigError):
            evolve(_population(4, elites=3), {2: 1.0, 3: 2.0, 4: 3.0}, np.random.default_rng(0))
        with self.assertRaises(ConfigError):
            evolve(_population(3, elites=1), {2: 1.0, 3: 2.0}, np.random.default_rng(0))

    def test_missing_score(self):
        with self.assertRaises(ValueError):
            evolve(_population(4), {2: 1.0, 3: None, 4: 3.0}, np.random.default_rng(0))

    def test_ranking_ties_prefer_lower_id(self):
        self.assertEqual(rank_followers({4: 1.0, 2: 1.0, 3: 5.0}), [3, 2, 4])

    def test_random_populations_keep_contract(self):
        rng = np.random.default_rng(2024)
        strategies = list(CrossoverStrategy)
        for trial in range(200):
            k = int(rng.integers(4, 13))
            x = int(rng.integers(2, k - 1))
            pop = _population(k, latent_dim=int(rng.integers(1, 6)), elites=x, seed=trial)
            scores = {a: float(v) for a, v in zip(pop.follower_ids, rng.normal(size=k - 1))}
            new_pop, event = evolve(pop, scores, rng, strategies[trial % 3], sigma_mut=0.1, iteration=trial)

            self.assertEqual(new_pop.num_agents, k)
            assert_array_equal(new_pop.gene(1).phi, pop.gene(1).phi)
            self.assertEqual(event.elites, rank_followers(scores)[:x])
            for elite in event.elites:
                assert_array_equal(new_pop.gene(elite).phi, pop.gene(elite).phi)
            slots = [c.slot for c in event.children]
            self.assertEqual(slots, sorted(set(pop.follower_ids) - set(event.elites)))
            self.assertEqual(len(slots), k - 1 - x)
            for child in event.children:
                self.assertIn(child.parents[0], event.elites)
                self.assertIn(child.parents[1], event.elites)
                self.assertNotEqual(child.parents[0], child.parents[1])
                self.assertTrue(np.all(np.isfinite(new_pop.gene(child.slot).phi)))
                self.assertEqual(new_pop.gene(child.slot).agent_id, child.slot)


if __name__ == "__main__":
    unittest.main()
