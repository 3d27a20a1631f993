import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, List

from epo.callback import hookimpl
from epo.evolution import EvolutionEvent

logger = logging.getLogger(__name__)

METRIC_COLUMNS = (
    "iteration", "env_steps", "lr", "approx_kl", "loss_total", "loss_actor_on", "loss_actor_off",
    "loss_critic_on", "loss_critic_off", "entropy", "bounds", "clip_frac_on", "clip_frac_off",
    "master_mean_return", "fitness_min", "fitness_median", "fitness_max", "evolved", "offpolicy_dropped",
)
INTEGER_COLUMNS = {"iteration", "env_steps", "evolved", "offpolicy_dropped"}


def format_value(column: str, value) -> str:
    if column in INTEGER_COLUMNS:
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def read_metrics(path) -> Dict[str, List[float]]:
    """Columns of a metrics CSV as float lists"""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        columns: Dict[str, List[float]] = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for name, raw in row.items():
                columns[name].append(float(raw))
    return columns


class MetricsCsvWriter:
    """One row per iteration to metrics.csv; a fresh run starts the file over, a resumed run appends"""

    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        self.append = append

    @hookimpl
    def before_train(self, config, run_dir):
        if not self.append or not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", newline="") as f:
                f.write(",".join(METRIC_COLUMNS) + "\n")

    @hookimpl
    def after_iteration(self, row):
        with open(self.path, "a", newline="") as f:
            f.write(",".join(format_value(c, row[c]) for c in METRIC_COLUMNS) + "\n")


class EvolutionLogWriter:
    """One JSON line per evolution event"""

    def __init__(self, path, append: bool = False):
        self.path = Path(path)
        self.append = append

    @hookimpl
    def before_train(self, config, run_dir):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.append:
            self.path.touch(exist_ok=True)
        else:
            self.path.write_text("")

    @hookimpl
    def on_evolution(self, event: EvolutionEvent):
        with open(self.path, "a") as f:
            f.write(json.dumps(event.to_dict()) + "\n")
