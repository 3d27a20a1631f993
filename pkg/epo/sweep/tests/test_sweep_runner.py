import csv
import math
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from epo.exceptions import ConfigError
from epo.models.models import RunStatus
from epo.sweep import RunResult, StateManager, aggregate_sweep, parse_axis, plan_runs, run_sweep
from epo.sweep.runner import RunPlan, run_child, summarize_returns
from epo.trainer import METRIC_COLUMNS, MetricsCsvWriter


def write_metrics(run_dir, returns, steps_per_iteration=64):
    """metrics.csv with the given master_mean_return column and zeros elsewhere"""
    writer = MetricsCsvWriter(Path(run_dir) / "metrics.csv")
    writer.before_train(config=None, run_dir=str(run_dir))
    for i, value in enumerate(returns):
        row = {c: 0.0 for c in METRIC_COLUMNS}
        row.update(iteration=i, env_steps=steps_per_iteration * (i + 1), master_mean_return=value)
        writer.after_iteration(row=row)


class TestPlanning(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_parse_axis(self):
        self.assertEqual(parse_axis("population.K=8, 16,32"), ("population.K", ["8", "16", "32"]))
        with self.assertRaises(ConfigError):
            parse_axis("population.K")
        with self.assertRaises(ConfigError):
            parse_axis("population.K=,")

    def test_plan_runs(self):
        axis_key, plans = plan_runs(None, "population.K=4,8", seeds=2, out_dir=self.tmp.name, envs_per_agent=2,
                                    base_overrides=["run.seed=10"])
        self.assertEqual(axis_key, "population.K")
        self.assertEqual([p.run_key for p in plans], ["population.K=4/seed_0", "population.K=4/seed_1",
                                                      "population.K=8/seed_0", "population.K=8/seed_1"])
        self.assertEqual([p.seed for p in plans], [10, 11, 10, 11])
        self.assertIn("env.num_envs=8", plans[0].overrides)
        self.assertIn("env.num_envs=16", plans[3].overrides)
        self.assertEqual(plans[1].run_dir, os.path.join(self.tmp.name, "population.K=4", "seed_1"))

    def test_invalid_child_fails_before_any_run(self):
        with patch("epo.sweep.runner.train") as train:
            with self.assertRaises(ConfigError) as ctx:
                run_sweep(None, "population.K=4,5", seeds=1, out_dir=self.tmp.name)
        self.assertEqual(ctx.exception.key, "env.num_envs")
        train.assert_not_called()
        self.assertIsNone(StateManager(self.tmp.name).get_sweep())

    def test_seed_count(self):
        with self.assertRaises(ConfigError) as ctx:
            plan_runs(None, "population.K=4", seeds=0, out_dir=self.tmp.name)
        self.assertEqual(ctx.exception.key, "--seeds")


class TestSweepExecution(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_summarize_returns_skips_nan(self):
        write_metrics(self.tmp.name, [math.nan, -5.0, -2.0, -3.0])
        self.assertEqual(summarize_returns(Path(self.tmp.name) / "metrics.csv"), (-3.0, -2.0))

    def test_summarize_returns_without_episodes(self):
        write_metrics(self.tmp.name, [math.nan, math.nan])
        self.assertEqual(summarize_returns(Path(self.tmp.name) / "metrics.csv"), (None, None))

    def test_run_child_records_failure(self):
        plan = RunPlan(run_key="population.K=4/seed_0", run_dir=os.path.join(self.tmp.name, "a"), axis_value="4",
                       seed=0, overrides=("population.K=4",))
        with patch("epo.sweep.runner.train", side_effect=RuntimeError("diverged")):
            result = run_child(None, plan)
        self.assertEqual(result.status, RunStatus.FAILED)
        self.assertEqual(result.error_message, "diverged")
        self.assertIsNotNone(result.duration_seconds)

    def test_sweep_with_one_failing_child(self):
        def fake_train(config, out_dir=None):
            if config.population.num_agents == 8 and config.run.seed == 1:
                raise RuntimeError("diverged")
            write_metrics(out_dir, [-float(config.population.num_agents), -1.0 - config.run.seed])

        with patch("epo.sweep.runner.train", side_effect=fake_train):
            state = run_sweep(None, "population.K=4,8", seeds=2, out_dir=self.tmp.name)

        self.assertEqual(state.status, RunStatus.PARTIAL)
        self.assertEqual(state.successful_runs, 3)
        self.assertEqual(state.failed_runs, 1)
        self.assertEqual(state.run_results["population.K=8/seed_1"].error_message, "diverged")
        self.assertEqual(state.run_results["population.K=4/seed_1"].final_return, -2.0)

        with open(os.path.join(self.tmp.name, "aggregate.csv")) as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([r["axis_value"] for r in rows], ["4", "8"])
        self.assertEqual([int(r["n_seeds"]) for r in rows], [2, 1])
        self.assertAlmostEqual(float(rows[0]["final_mean"]), -1.5)
        self.assertAlmostEqual(float(rows[0]["final_stderr"]), 0.5)
        self.assertAlmostEqual(float(rows[1]["final_mean"]), -1.0)
        self.assertEqual(float(rows[1]["final_stderr"]), 0.0)

    def test_aggregate_sweep(self):
        runs = ["population.K=4/seed_0", "population.K=4/seed_1", "population.K=8/seed_0", "population.K=8/seed_1"]
        manager = StateManager(self.tmp.name)
        manager.create_sweep("agg", "population.K", runs)
        curves = {runs[0]: [math.nan, -5.0, -3.0], runs[1]: [-4.0, 0.0, -1.0], runs[2]: [-2.0]}
        for key in runs:
            run_dir = os.path.join(self.tmp.name, key)
            status = RunStatus.FAILED
            if key in curves:
                write_metrics(run_dir, curves[key])
                status = RunStatus.SUCCESS
            manager.update_run_result(RunResult(run_key=key, run_dir=run_dir, axis_value=key[13], seed=int(key[-1]),
                                                status=status))

        rows = aggregate_sweep(self.tmp.name)
        self.assertEqual(rows[0]["n_seeds"], 2)
        self.assertAlmostEqual(rows[0]["final_mean"], -2.0)
        self.assertAlmostEqual(rows[0]["final_stderr"], 1.0)
        self.assertAlmostEqual(rows[0]["best_mean"], -1.5)
        self.assertAlmostEqual(rows[0]["best_stderr"], 1.5)
        self.assertEqual(rows[1]["n_seeds"], 1)
        self.assertEqual(rows[1]["final_mean"], -2.0)
        self.assertEqual(rows[1]["best_stderr"], 0.0)

    def test_aggregate_without_state(self):
        with self.assertRaises(FileNotFoundError):
            aggregate_sweep(self.tmp.name)


if __name__ == "__main__":
    unittest.main()
