import json
import math
import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_array_equal

from epo.evolution import ChildRecord, EvolutionEvent
from epo.exceptions import CheckpointError
from epo.trainer import METRIC_COLUMNS, EvolutionLogWriter, MetricsCsvWriter, load_checkpoint, read_metrics, write_checkpoint


class TestCheckpointFile(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "run", "a.ckpt")
        self.arrays = [
            ("param.w", np.arange(6, dtype=np.float64).reshape(2, 3) / 7.0),
            ("counts", np.array([3, 0, 12], dtype=np.int64)),
            ("flags", np.array([True, False])),
            ("empty", np.zeros(0)),
        ]

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        write_checkpoint(self.path, {"config": {}, "scalars": {"iteration": 4}}, self.arrays)
        data = load_checkpoint(self.path)
        self.assertEqual(data.scalars, {"iteration": 4})
        assert_array_equal(data.arrays["param.w"], self.arrays[0][1])
        assert_array_equal(data.arrays["counts"].astype(np.int64), [3, 0, 12])
        assert_array_equal(data.arrays["flags"].astype(bool), [True, False])
        self.assertEqual(data.arrays["empty"].shape, (0,))
        self.assertFalse(os.path.exists(self.path + ".tmp"))

    def test_manifest_is_first_line(self):
        write_checkpoint(self.path, {"config": {}}, self.arrays)
        with open(self.path, "rb") as f:
            header = json.loads(f.readline())
        self.assertEqual(header["format"], "epo-checkpoint")
        self.assertEqual([b["name"] for b in header["blocks"]], ["param.w", "counts", "flags", "empty"])
        self.assertEqual(header["blocks"][1]["offset"], 6 * 8)

    def test_truncated_blob(self):
        write_checkpoint(self.path, {"config": {}}, self.arrays)
        with open(self.path, "rb") as f:
            raw = f.read()
        with open(self.path, "wb") as f:
            f.write(raw[:-8])
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path)

    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(os.path.join(self.tmp.name, "absent.ckpt"))

    def test_not_a_checkpoint(self):
        os.makedirs(os.path.dirname(self.path))
        with open(self.path, "wb") as f:
            f.write(b'{"format": "something-else"}\n')
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path)
        with open(self.path, "wb") as f:
            f.write(b"no newline at all")
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path)
        with open(self.path, "wb") as f:
            f.write(b"{broken\n")
        with self.assertRaises(CheckpointError):
            load_checkpoint(self.path)


class TestMetricWriters(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _row(self, iteration, **values):
        row = {c: 0.0 for c in METRIC_COLUMNS}
        row.update(iteration=iteration, env_steps=64 * (iteration + 1), evolved=0, offpolicy_dropped=0)
        row.update(values)
        return row

    def test_header_rows_and_nan(self):
        path = os.path.join(self.tmp.name, "metrics.csv")
        writer = MetricsCsvWriter(path)
        writer.before_train(config=None, run_dir=self.tmp.name)
        writer.after_iteration(row=self._row(0, master_mean_return=float("nan"), lr=1e-4))
        writer.after_iteration(row=self._row(1, master_mean_return=-12.5, evolved=1))
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], ",".join(METRIC_COLUMNS))
        self.assertIn("nan", lines[1].split(","))
        self.assertEqual(lines[1].split(",")[2], "0.0001")

        columns = read_metrics(path)
        self.assertEqual(columns["iteration"], [0.0, 1.0])
        self.assertTrue(math.isnan(columns["master_mean_return"][0]))
        self.assertEqual(columns["master_mean_return"][1], -12.5)
        self.assertEqual(columns["evolved"], [0.0, 1.0])

    def test_append_keeps_rows_and_header(self):
        path = os.path.join(self.tmp.name, "metrics.csv")
        first = MetricsCsvWriter(path)
        first.before_train(config=None, run_dir=self.tmp.name)
        first.after_iteration(row=self._row(0))
        resumed = MetricsCsvWriter(path, append=True)
        resumed.before_train(config=None, run_dir=self.tmp.name)
        resumed.after_iteration(row=self._row(1))
        self.assertEqual(read_metrics(path)["iteration"], [0.0, 1.0])

    def test_fresh_writer_starts_over(self):
        path = os.path.join(self.tmp.name, "metrics.csv")
        first = MetricsCsvWriter(path)
        first.before_train(config=None, run_dir=self.tmp.name)
        first.after_iteration(row=self._row(0))
        first.after_iteration(row=self._row(1))
        MetricsCsvWriter(path).before_train(config=None, run_dir=self.tmp.name)
        with open(path) as f:
            self.assertEqual(f.read().splitlines(), [",".join(METRIC_COLUMNS)])

    def test_append_to_missing_file_writes_header(self):
        path = os.path.join(self.tmp.name, "sub", "metrics.csv")
        writer = MetricsCsvWriter(path, append=True)
        writer.before_train(config=None, run_dir=self.tmp.name)
        writer.after_iteration(row=self._row(0))
        self.assertEqual(read_metrics(path)["iteration"], [0.0])

    def test_floats_round_trip_exactly(self):
        path = os.path.join(self.tmp.name, "metrics.csv")
        writer = MetricsCsvWriter(path)
        writer.before_train(config=None, run_dir=self.tmp.name)
        value = 0.1 + 0.2
        writer.after_iteration(row=self._row(0, loss_total=value))
        self.assertEqual(read_metrics(path)["loss_total"], [value])

    def test_evolution_log(self):
        path = os.path.join(self.tmp.name, "evolution.jsonl")
        writer = EvolutionLogWriter(path)
        writer.before_train(config=None, run_dir=self.tmp.name)
        writer.on_evolution(event=EvolutionEvent(iteration=3, trigger_lhs=2.0, trigger_rhs=1.0, elites=[2, 4],
                                                 children=[ChildRecord(parents=(4, 2), slot=3)]))
        with open(path) as f:
            lines = f.read().splitlines()
        self.assertEqual(json.loads(lines[0]), {"iteration": 3, "trigger_lhs": 2.0, "trigger_rhs": 1.0,
                                                "elites": [2, 4], "children": [{"parents": [4, 2], "slot": 3}]})

    def test_evolution_log_truncated_unless_appending(self):
        path = os.path.join(self.tmp.name, "evolution.jsonl")
        event = EvolutionEvent(iteration=1, trigger_lhs=2.0, trigger_rhs=1.0, elites=[1],
                               children=[ChildRecord(parents=(1, 1), slot=2)])
        writer = EvolutionLogWriter(path)
        writer.before_train(config=None, run_dir=self.tmp.name)
        writer.on_evolution(event=event)
        resumed = EvolutionLogWriter(path, append=True)
        resumed.before_train(config=None, run_dir=self.tmp.name)
        resumed.on_evolution(event=event)
        with open(path) as f:
            self.assertEqual(len(f.read().splitlines()), 2)
        EvolutionLogWriter(path).before_train(config=None, run_dir=self.tmp.name)
        with open(path) as f:
            self.assertEqual(f.read(), "")


if __name__ == "__main__":
    unittest.main()
