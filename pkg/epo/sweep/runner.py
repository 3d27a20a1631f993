"""One training run per (axis value, seed), plus the aggregate over seeds."""
import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from epo.exceptions import ConfigError
from epo.models.models import RunStatus
from epo.models.validator import load_config
from epo.trainer.metrics import read_metrics
from epo.trainer.runner import train
from .state_management import RunResult, StateManager, SweepState

logger = logging.getLogger(__name__)

AGGREGATE_FILE = "aggregate.csv"
AGGREGATE_COLUMNS = ("axis_key", "axis_value", "n_seeds", "final_mean", "final_stderr", "best_mean", "best_stderr")
RETURN_METRIC = "master_mean_return"


@dataclass
class RunPlan:
    run_key: str
    run_dir: str
    axis_value: str
    seed: int
    overrides: Tuple[str, ...]


def parse_axis(axis: str) -> Tuple[str, List[str]]:
    """``population.K=8,16,32`` -> ("population.K", ["8", "16", "32"])"""
    if "=" not in axis:
        raise ConfigError("--axis", "axis must look like KEY=V1,V2,...")
    key, raw = axis.split("=", 1)
    values = [v.strip() for v in raw.split(",") if v.strip()]
    if not values:
        raise ConfigError("--axis", "axis has no values")
    return key.strip(), values


def _population_size(axis_key: str, value: str, default: int) -> int:
    if axis_key in ("population.K", "population.num_agents"):
        return int(value)
    return default


def plan_runs(config_path: Optional[str], axis: str, seeds: int, out_dir, envs_per_agent: Optional[int] = None,
              base_overrides: Sequence[str] = ()) -> Tuple[str, List[RunPlan]]:
    """Expand the axis into child runs and validate every child's config up front"""
    if seeds < 1:
        raise ConfigError("--seeds", f"must be at least 1, got {seeds}")
    axis_key, values = parse_axis(axis)
    base = load_config(config_path, base_overrides)
    plans = []
    for value in values:
        overrides = list(base_overrides) + [f"{axis_key}={value}"]
        if envs_per_agent is not None:
            k = _population_size(axis_key, value, base.population.num_agents)
            overrides.append(f"env.num_envs={k * envs_per_agent}")
        for i in range(seeds):
            run_dir = Path(out_dir) / f"{axis_key}={value}" / f"seed_{i}"
            child = overrides + [f"run.seed={base.run.seed + i}", f"run.out_dir={run_dir}"]
            load_config(config_path, child)
            plans.append(RunPlan(run_key=f"{axis_key}={value}/seed_{i}", run_dir=str(run_dir),
                                 axis_value=value, seed=base.run.seed + i, overrides=tuple(child)))
    return axis_key, plans


def summarize_returns(metrics_path) -> Tuple[Optional[float], Optional[float]]:
    """(final, best) master_mean_return of a run, ignoring iterations without a finished episode"""
    values = np.asarray(read_metrics(metrics_path).get(RETURN_METRIC, []), dtype=np.float64)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return None, None
    return float(values[-1]), float(values.max())


def run_child(config_path: Optional[str], plan: RunPlan) -> RunResult:
    """Train one child; failures are recorded on the result instead of raised"""
    result = RunResult(run_key=plan.run_key, run_dir=plan.run_dir, axis_value=plan.axis_value, seed=plan.seed,
                       status=RunStatus.RUNNING, started_at=datetime.now(timezone.utc).isoformat())
    start = time.time()
    try:
        config = load_config(config_path, plan.overrides)
        train(config, out_dir=plan.run_dir)
        result.final_return, result.best_return = summarize_returns(Path(plan.run_dir) / "metrics.csv")
        result.status = RunStatus.SUCCESS
    except Exception as e:
        logger.error(f"Run {plan.run_key} failed: {e}", exc_info=True)
        result.status = RunStatus.FAILED
        result.error_message = str(e)
    finally:
        result.completed_at = datetime.now(timezone.utc).isoformat()
        result.duration_seconds = time.time() - start
    return result


def run_sweep(config_path: Optional[str], axis: str, seeds: int, out_dir, parallel: int = 1,
              envs_per_agent: Optional[int] = None, base_overrides: Sequence[str] = ()) -> SweepState:
    axis_key, plans = plan_runs(config_path, axis, seeds, out_dir, envs_per_agent, base_overrides)
    manager = StateManager(out_dir)
    manager.create_sweep(Path(out_dir).name, axis_key, [p.run_key for p in plans])
    manager.update_sweep_status(RunStatus.RUNNING)
    logger.info(f"Sweep over {axis_key}: {len(plans)} runs, {parallel} at a time")

    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [pool.submit(run_child, config_path, plan) for plan in plans]
            for future in futures:
                manager.update_run_result(future.result())
    else:
        for plan in plans:
            manager.update_run_result(run_child(config_path, plan))

    aggregate_sweep(out_dir)
    state = manager.get_sweep()
    logger.info(f"Sweep finished: {state.successful_runs} succeeded, {state.failed_runs} failed")
    return state


def _mean_stderr(values: List[float]) -> Tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), stderr


def aggregate_sweep(sweep_dir) -> List[Dict[str, object]]:
    """Mean and standard error of final and best master return per axis value; writes aggregate.csv"""
    sweep_dir = Path(sweep_dir)
    state = StateManager(sweep_dir).get_sweep()
    if state is None:
        raise FileNotFoundError(f"no sweep state in {sweep_dir}")

    finals: Dict[str, List[float]] = {}
    bests: Dict[str, List[float]] = {}
    order: List[str] = []
    for key in state.runs:
        value = key.split("/", 1)[0].split("=", 1)[1]
        if value not in order:
            order.append(value)
            finals[value], bests[value] = [], []
        result = state.run_results.get(key)
        if result is None or result.status != RunStatus.SUCCESS:
            continue
        metrics = Path(result.run_dir) / "metrics.csv"
        final, best = summarize_returns(metrics)
        if final is not None:
            finals[value].append(final)
            bests[value].append(best)

    rows = []
    for value in order:
        final_mean, final_stderr = _mean_stderr(finals[value])
        best_mean, best_stderr = _mean_stderr(bests[value])
        rows.append({"axis_key": state.axis_key, "axis_value": value, "n_seeds": len(finals[value]),
                     "final_mean": final_mean, "final_stderr": final_stderr,
                     "best_mean": best_mean, "best_stderr": best_stderr})

    with open(sweep_dir / AGGREGATE_FILE, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=AGGREGATE_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows
