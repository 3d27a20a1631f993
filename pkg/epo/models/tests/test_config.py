import json
import os
import tempfile
import unittest

from epo.exceptions import ConfigError
from epo.models.models import TrainConfig, TriggerMode
from epo.models.validator import ConfigValidator, apply_overrides, load_config, parse_override


class TestTrainConfigDefaults(unittest.TestCase):

    def test_hyperparameter_defaults(self):
        """Test that an empty config carries the reference hyperparameters"""
        cfg = TrainConfig()
        self.assertEqual(cfg.ppo.gamma, 0.99)
        self.assertEqual(cfg.ppo.lambda_gae, 0.95)
        self.assertEqual(cfg.opt.lr, 1e-4)
        self.assertEqual(cfg.opt.kl_threshold, 0.016)
        self.assertEqual(cfg.opt.max_grad_norm, 1.0)
        self.assertEqual(cfg.ppo.eps_clip, 0.1)
        self.assertEqual(cfg.ppo.critic_coef, 4.0)
        self.assertEqual(cfg.ppo.entropy_coef, 0.0)
        self.assertEqual(cfg.ppo.horizon, 16)
        self.assertEqual(cfg.ppo.bounds_coef, 1e-5)
        self.assertEqual(cfg.ppo.mini_epochs, 2)
        self.assertEqual(cfg.ppo.lambda_off, 1.0)
        self.assertEqual(cfg.population.gamma_trigger, 0.5)
        self.assertEqual(cfg.population.elites, cfg.population.num_agents - 2)

    def test_derived_sizes(self):
        cfg = load_config(overrides=["env.num_envs=64", "population.K=4"])
        self.assertEqual(cfg.envs_per_agent, 16)
        self.assertEqual(cfg.on_policy_batch_size, 4 * 16 * 16)
        self.assertEqual(cfg.effective_minibatch_size, 256)
        self.assertEqual(cfg.buffer_capacity, 2 * 16 * 16)

    def test_evolution_enabled(self):
        self.assertFalse(load_config(overrides=["population.K=2", "env.num_envs=8"]).population.evolution_enabled)
        self.assertTrue(load_config(overrides=["population.K=4", "env.num_envs=8"]).population.evolution_enabled)
        cfg = load_config(overrides=["population.trigger_mode=fixed_interval"])
        self.assertFalse(cfg.population.evolution_enabled)

    def test_snapshot_round_trips(self):
        cfg = load_config(overrides=["population.N_lat=5", "ppo.horizon=8"])
        again = TrainConfig.model_validate(json.loads(json.dumps(cfg.snapshot())))
        self.assertEqual(again, cfg)
        self.assertIn("K", cfg.snapshot()["population"])


class TestOverrides(unittest.TestCase):

    def test_parse_override_json_values(self):
        self.assertEqual(parse_override("ppo.gamma=0.9"), ("ppo.gamma", 0.9))
        self.assertEqual(parse_override("network.hidden_dims=[32, 32]"), ("network.hidden_dims", [32, 32]))
        self.assertEqual(parse_override("env.task=pendulum"), ("env.task", "pendulum"))

    def test_missing_equals(self):
        with self.assertRaises(ConfigError):
            parse_override("ppo.gamma")

    def test_field_name_replaces_alias(self):
        data = apply_overrides({"population": {"K": 8}}, ["population.num_agents=4"])
        self.assertEqual(data, {"population": {"K": 4}})

    def test_unknown_key(self):
        with self.assertRaises(ConfigError) as ctx:
            load_config(overrides=["ppo.not_a_field=1"])
        self.assertEqual(ctx.exception.key, "ppo.not_a_field")
        with self.assertRaises(ConfigError):
            load_config(overrides=["nosection.gamma=1"])

    def test_type_error_names_key(self):
        with self.assertRaises(ConfigError) as ctx:
            load_config(overrides=["ppo.horizon=-3"])
        self.assertEqual(ctx.exception.key, "ppo.horizon")


class TestLoadConfig(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "config.json")

    def tearDown(self):
        self.tmp.cleanup()

    def test_file_then_overrides(self):
        with open(self.path, "w") as f:
            json.dump({"env": {"task": "multigoal_reacher", "num_envs": 16}, "population": {"K": 4}}, f)
        cfg = load_config(self.path, ["run.seed=9"])
        self.assertEqual(cfg.env.task.value, "multigoal_reacher")
        self.assertEqual(cfg.population.num_agents, 4)
        self.assertEqual(cfg.run.seed, 9)

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as ctx:
            load_config(os.path.join(self.tmp.name, "absent.json"))
        self.assertEqual(ctx.exception.key, "--config")

    def test_invalid_json(self):
        with open(self.path, "w") as f:
            f.write("{not json")
        with self.assertRaises(ConfigError):
            load_config(self.path)

    def test_extra_keys_rejected(self):
        with open(self.path, "w") as f:
            json.dump({"ppo": {"gamma": 0.9, "typo": 1}}, f)
        with self.assertRaises(ConfigError):
            load_config(self.path)


class TestConfigValidator(unittest.TestCase):

    def _validator(self, **sections):
        validator = ConfigValidator(TrainConfig.model_validate(sections))
        validator.validate()
        return validator

    def test_indivisible_envs(self):
        """Test that N must split evenly across K agents"""
        validator = self._validator(env={"num_envs": 10}, population={"K": 4})
        self.assertEqual(validator.errors[0][0], "env.num_envs")

    def test_minibatch_must_divide_batch(self):
        validator = self._validator(env={"num_envs": 8}, population={"K": 4}, ppo={"minibatch_size": 48})
        self.assertEqual(validator.errors[0][0], "ppo.minibatch_size")

    def test_elite_range(self):
        validator = self._validator(env={"num_envs": 8}, population={"K": 4, "x_elites": 3})
        self.assertEqual(validator.errors[0][0], "population.x_elites")
        validator = self._validator(env={"num_envs": 8}, population={"K": 8, "x_elites": 1})
        self.assertEqual(validator.errors[0][0], "population.x_elites")

    def test_small_population_warns(self):
        validator = self._validator(env={"num_envs": 6}, population={"K": 3})
        self.assertEqual(validator.errors, [])
        self.assertEqual(len(validator.warnings), 1)
        self.assertIn("Evolution disabled", validator.get_report())

    def test_fitness_window(self):
        validator = self._validator(population={"fitness_window": 3, "fitness_min_episodes": 5})
        self.assertIn("population.fitness_min_episodes", [key for key, _ in validator.errors])

    def test_clean_report(self):
        validator = self._validator()
        self.assertIn("All validations passed", validator.get_report())

    def test_trigger_off_skips_elite_check(self):
        validator = self._validator(env={"num_envs": 8}, population={"K": 4, "x_elites": 3,
                                                                     "trigger_mode": TriggerMode.OFF})
        self.assertEqual(validator.errors, [])


if __name__ == "__main__":
    unittest.main()
