"""Learning curves from run directories, as SVG or as the aggregated series in CSV."""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib as mpl
mpl.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from epo.exceptions import ConfigError
from epo.trainer.metrics import read_metrics

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("label", "env_steps", "mean", "stderr", "n_runs")


@dataclass(eq=False)
class CurveSeries:
    label: str
    env_steps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    runs: List[np.ndarray]


def run_label(run_dir: Path) -> str:
    """Seeds of one sweep cell share the cell's directory name as their label"""
    if run_dir.name.startswith("seed_"):
        return run_dir.parent.name
    return run_dir.name


def load_series(run_dirs: Sequence, metric: str) -> List[CurveSeries]:
    groups: Dict[str, List[Dict[str, List[float]]]] = {}
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        columns = read_metrics(run_dir / "metrics.csv")
        if metric not in columns:
            available = ", ".join(c for c in columns if c not in ("iteration", "env_steps"))
            raise ConfigError("--metric", f"unknown metric {metric!r}; available: {available}")
        groups.setdefault(run_label(run_dir), []).append(columns)

    series = []
    for label, runs in groups.items():
        length = min(len(r["env_steps"]) for r in runs)
        steps = np.asarray(runs[0]["env_steps"][:length], dtype=np.float64)
        values = np.array([r[metric][:length] for r in runs], dtype=np.float64)
        if len(runs) > 1:
            with np.errstate(invalid="ignore", divide="ignore"):
                mean = np.nanmean(values, axis=0)
                counts = np.sum(np.isfinite(values), axis=0)
                stderr = np.nanstd(values, axis=0, ddof=1) / np.sqrt(counts)
        else:
            mean = values[0]
            stderr = np.zeros_like(mean)
        series.append(CurveSeries(label=label, env_steps=steps, mean=mean, stderr=stderr, runs=list(values)))
    return series


def plot_runs(run_dirs: Sequence, metric: str, out, fmt: str = "svg") -> List[CurveSeries]:
    """Write per-run curves with a mean +- stderr band per label (svg), or the series table (csv)"""
    series = load_series(run_dirs, metric)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if fmt == "csv":
        with open(out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(SERIES_COLUMNS)
            for s in series:
                for x, m, e in zip(s.env_steps, s.mean, s.stderr):
                    writer.writerow([s.label, int(x), format(m, ".17g"), format(e, ".17g"), len(s.runs)])
        logger.info(f"Wrote {metric} series for {len(series)} labels to {out}")
        return series
    if fmt != "svg":
        raise ConfigError("--format", f"unknown format {fmt!r}; use svg or csv")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, s in enumerate(series):
        color = f"C{i % 10}"
        if len(s.runs) > 1:
            for run in s.runs:
                ax.plot(s.env_steps, run, color=color, alpha=0.25, linewidth=0.8)
            ax.fill_between(s.env_steps, s.mean - s.stderr, s.mean + s.stderr, color=color, alpha=0.2)
        ax.plot(s.env_steps, s.mean, color=color, linewidth=1.6, label=s.label)
    ax.set_xlabel("env_steps")
    ax.set_ylabel(metric)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out, format="svg")
    plt.close(fig)
    logger.info(f"Wrote {metric} curves for {len(series)} labels to {out}")
    return series
