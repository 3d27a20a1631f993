import logging
from typing import List, Optional

import typer

from epo.exceptions import CheckpointError, ConfigError, EpoError
from epo.models.models import EnvTask, RunStatus
from epo.models.validator import load_config
from epo.sweep import plot_runs, run_sweep
from epo.trainer import Trainer, evaluate

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3

app = typer.Typer(help="Train and evaluate latent-gene policy populations", no_args_is_help=True,
                  pretty_exceptions_enable=False)


def _fail(message: str, code: int):
    typer.echo(message, err=True)
    raise typer.Exit(code=code)


@app.command("train")
def cmd_train(
    overrides: Optional[List[str]] = typer.Argument(None, help="Dotted KEY=VALUE config overrides"),
    config: Optional[str] = typer.Option(None, "--config", help="JSON config file"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Root seed"),
    out: Optional[str] = typer.Option(None, "--out", help="Run directory"),
    resume: Optional[str] = typer.Option(None, "--resume", help="Continue from a checkpoint"),
):
    """Train a population and write metrics, evolution log and checkpoints"""
    items = list(overrides or [])
    if seed is not None:
        items.append(f"run.seed={seed}")
    try:
        if resume:
            trainer = Trainer.from_checkpoint(resume, out_dir=out)
        else:
            trainer = Trainer(load_config(config, items), out_dir=out)
        trainer.prepare()
    except (ConfigError, CheckpointError) as e:
        _fail(f"error: {e}", EXIT_USAGE)
    try:
        result = trainer.run()
    except Exception as e:
        _fail(f"training failed: {e}", EXIT_FAILURE)
    typer.echo(f"{result.status.value}: {result.iterations} iterations, {result.env_steps} env steps, "
               f"final checkpoint {result.final_checkpoint}")


@app.command("eval")
def cmd_eval(
    checkpoint: str = typer.Option(..., "--checkpoint", help="Checkpoint file"),
    episodes: int = typer.Option(10, "--episodes", min=1, help="Episodes per gene"),
    seed: int = typer.Option(0, "--seed", min=0, help="Evaluation seed"),
    all_genes: bool = typer.Option(False, "--all-genes", help="Evaluate every agent's gene, not only the master's"),
    task: Optional[EnvTask] = typer.Option(None, "--task", help="Expected task; must match the checkpoint"),
):
    """Deterministic evaluation of a checkpoint, printed as JSON"""
    try:
        summary = evaluate(checkpoint, task=task, episodes=episodes, seed=seed, all_genes=all_genes)
    except ConfigError as e:
        _fail(f"error: {e}", EXIT_USAGE)
    except EpoError as e:
        _fail(f"evaluation failed: {e}", EXIT_FAILURE)
    typer.echo(summary.model_dump_json(indent=2))


@app.command("sweep")
def cmd_sweep(
    overrides: Optional[List[str]] = typer.Argument(None, help="Dotted KEY=VALUE overrides applied to every run"),
    config: Optional[str] = typer.Option(None, "--config", help="JSON config file"),
    axis: str = typer.Option(..., "--axis", help="KEY=V1,V2,... swept configuration key"),
    seeds: int = typer.Option(1, "--seeds", min=1, help="Seeds per axis value"),
    out: str = typer.Option(..., "--out", help="Sweep directory"),
    parallel: int = typer.Option(1, "--parallel", min=1, help="Child runs at a time"),
    envs_per_agent: Optional[int] = typer.Option(None, "--envs-per-agent", min=1,
                                                 help="Set env.num_envs to K times this for every run"),
):
    """One run per (axis value, seed) and an aggregate CSV"""
    try:
        state = run_sweep(config, axis, seeds, out, parallel=parallel, envs_per_agent=envs_per_agent,
                          base_overrides=list(overrides or []))
    except ConfigError as e:
        _fail(f"error: {e}", EXIT_USAGE)
    typer.echo(f"{state.status.value}: {state.successful_runs}/{state.total_runs} runs succeeded")
    if state.status == RunStatus.PARTIAL:
        raise typer.Exit(code=EXIT_PARTIAL)
    if state.status == RunStatus.FAILED:
        raise typer.Exit(code=EXIT_FAILURE)


@app.command("plot")
def cmd_plot(
    runs: List[str] = typer.Option(..., "--runs", help="Run directories; repeat the option for several"),
    metric: str = typer.Option("master_mean_return", "--metric", help="Metrics column to plot"),
    out: str = typer.Option(..., "--out", help="Output file"),
    fmt: str = typer.Option("svg", "--format", help="svg or csv"),
):
    """Learning curves against env_steps"""
    try:
        plot_runs(runs, metric, out, fmt)
    except ConfigError as e:
        _fail(f"error: {e}", EXIT_USAGE)
    except FileNotFoundError as e:
        _fail(f"error: {e}", EXIT_USAGE)
    typer.echo(f"wrote {out}")


def cli():
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    app()


if __name__ == "__main__":
    cli()
