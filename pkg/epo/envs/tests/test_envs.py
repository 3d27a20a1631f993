import unittest

import numpy as np
from numpy.testing import assert_allclose

from epo.exceptions import ConfigError, ShapeError
from epo.models.models import EnvTask
from epo.envs import TASK_SPECS, env_reset, env_step, make_env_batch, partition_envs, wrap_angle
from epo.envs.dynamics import (CAR_GOAL_REWARD, CAR_MAX_SPEED, CAR_MAX_X, CAR_MIN_X, MAX_SPEED, MAX_TORQUE,
                               REACHER_MAX_SPEED)


def _rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


class TestDynamics(unittest.TestCase):

    def test_pendulum_equilibrium(self):
        batch = make_env_batch(EnvTask.PENDULUM, _rngs(0, 1))
        batch.states[0] = (0.0, 0.0)
        result = env_step(batch, np.zeros((1, 1)))
        assert_allclose(batch.states[0], [0.0, 0.0])
        self.assertEqual(result.rewards[0], 0.0)
        assert_allclose(result.next_obs[0], [1.0, 0.0, 0.0])

    def test_mountain_car_step(self):
        batch = make_env_batch(EnvTask.SPARSE_MOUNTAIN_CAR, _rngs(0, 1))
        batch.states[0] = (-0.5, 0.0)
        result = env_step(batch, np.ones((1, 1)))
        self.assertAlmostEqual(batch.states[0, 1], 0.0015 - 0.0025 * np.cos(-1.5), places=12)
        self.assertAlmostEqual(batch.states[0, 1], 0.00132316, places=8)
        self.assertAlmostEqual(batch.states[0, 0], -0.49867684, places=8)
        self.assertAlmostEqual(result.rewards[0], -0.1)
        self.assertFalse(result.dones[0])

    def test_reacher_near_goal_terminates(self):
        batch = make_env_batch(EnvTask.MULTIGOAL_REACHER, _rngs(0, 1))
        batch.states[0] = (0.25, 0.25, 0.0, 0.0)
        result = env_step(batch, np.zeros((1, 2)))
        self.assertTrue(result.dones[0])
        self.assertEqual(result.rewards[0], 1.0)
        self.assertFalse(result.successes[0])
        self.assertEqual(len(result.episode_returns_completed), 1)
        self.assertEqual(batch.step_counts[0], 0)

    def test_reacher_far_goal_is_success(self):
        batch = make_env_batch(EnvTask.MULTIGOAL_REACHER, _rngs(0, 1))
        batch.states[0] = (-0.8, -0.75, 0.0, 0.0)
        result = env_step(batch, np.zeros((1, 2)))
        self.assertEqual(result.rewards[0], 10.0)
        self.assertTrue(result.successes[0])

    def test_actions_are_clamped(self):
        a = make_env_batch(EnvTask.PENDULUM, _rngs(3, 2))
        b = make_env_batch(EnvTask.PENDULUM, _rngs(3, 2))
        ra = env_step(a, np.full((2, 1), 5.0))
        rb = env_step(b, np.ones((2, 1)))
        assert_allclose(ra.rewards, rb.rewards)
        assert_allclose(a.states, b.states)

    def test_pendulum_reward_is_non_positive(self):
        batch = make_env_batch(EnvTask.PENDULUM, _rngs(1, 8))
        rng = np.random.default_rng(0)
        for _ in range(50):
            result = env_step(batch, rng.uniform(-1, 1, size=(8, 1)))
            self.assertTrue(np.all(result.rewards <= 0.0))
            self.assertTrue(np.all(np.abs(batch.states[:, 0]) <= np.pi))

    def test_time_limit_resets(self):
        batch = make_env_batch(EnvTask.PENDULUM, _rngs(2, 2), env_offset=6)
        limit = TASK_SPECS[EnvTask.PENDULUM].episode_limit
        completed = []
        for _ in range(limit):
            result = env_step(batch, np.zeros((2, 1)))
            completed.extend(result.episode_returns_completed)
        self.assertEqual(sorted(c.env_index for c in completed), [6, 7])
        self.assertTrue(np.all(batch.step_counts == 0))
        self.assertTrue(np.all(batch.episode_returns == 0.0))

    def test_action_shape_checked(self):
        batch = make_env_batch(EnvTask.MULTIGOAL_REACHER, _rngs(0, 3))
        with self.assertRaises(ShapeError):
            env_step(batch, np.zeros((3, 1)))

    def test_reset_is_deterministic(self):
        a = make_env_batch(EnvTask.PENDULUM, _rngs(11, 4))
        b = make_env_batch(EnvTask.PENDULUM, _rngs(11, 4))
        assert_allclose(a.states, b.states)
        obs = env_reset(a, _rngs(12, 4))
        self.assertEqual(obs.shape, (4, 3))
        self.assertFalse(np.allclose(a.states, b.states))

    def test_wrap_angle(self):
        assert_allclose(wrap_angle(np.array([0.0, 2 * np.pi, 3 * np.pi / 2, -3 * np.pi / 2])),
                        [0.0, 0.0, -np.pi / 2, np.pi / 2], atol=1e-12)


class TestRandomActionBounds(unittest.TestCase):
    """100 envs for 1000 steps under uniform actions wider than the valid range"""

    NUM_ENVS = 100
    STEPS = 1000

    def _run(self, task, seed, check):
        batch = make_env_batch(task, _rngs(seed, self.NUM_ENVS))
        limit = TASK_SPECS[task].episode_limit
        action_dim = TASK_SPECS[task].action_dim
        rng = np.random.default_rng(seed)
        for _ in range(self.STEPS):
            result = env_step(batch, rng.uniform(-2.0, 2.0, size=(self.NUM_ENVS, action_dim)))
            self.assertTrue(np.all(batch.step_counts <= limit))
            check(batch.states, result.rewards)

    def test_pendulum(self):
        worst = -(np.pi ** 2 + 0.1 * MAX_SPEED ** 2 + 0.001 * MAX_TORQUE ** 2)

        def check(states, rewards):
            self.assertTrue(np.all(np.abs(states[:, 0]) <= np.pi))
            self.assertTrue(np.all(np.abs(states[:, 1]) <= MAX_SPEED))
            self.assertTrue(np.all((rewards <= 0.0) & (rewards >= worst)))

        self._run(EnvTask.PENDULUM, 10, check)

    def test_mountain_car(self):
        def check(states, rewards):
            self.assertTrue(np.all((states[:, 0] >= CAR_MIN_X) & (states[:, 0] <= CAR_MAX_X)))
            self.assertTrue(np.all(np.abs(states[:, 1]) <= CAR_MAX_SPEED))
            self.assertTrue(np.all((rewards >= -0.1) & (rewards <= CAR_GOAL_REWARD)))

        self._run(EnvTask.SPARSE_MOUNTAIN_CAR, 11, check)

    def test_reacher(self):
        def check(states, rewards):
            self.assertTrue(np.all(np.abs(states[:, :2]) <= 1.0))
            self.assertTrue(np.all(np.abs(states[:, 2:]) <= REACHER_MAX_SPEED))
            self.assertTrue(np.all((rewards >= -0.02) & (rewards <= 10.0)))

        self._run(EnvTask.MULTIGOAL_REACHER, 12, check)


class TestPartition(unittest.TestCase):

    def test_even_slices(self):
        p = partition_envs(8, 4)
        self.assertEqual(p.slices, ((0, 2), (2, 4), (4, 6), (6, 8)))
        self.assertEqual(p.slice_for(3), (4, 6))

    def test_large_partition(self):
        p = partition_envs(24576, 64)
        self.assertEqual(p.envs_per_agent, 384)
        self.assertTrue(all(stop - start == 384 for start, stop in p.slices))

    def test_single_agent(self):
        self.assertEqual(partition_envs(16, 1).slices, ((0, 16),))

    def test_indivisible(self):
        with self.assertRaises(ConfigError) as ctx:
            partition_envs(10, 4)
        self.assertEqual(ctx.exception.key, "env.num_envs")


if __name__ == "__main__":
    unittest.main()
