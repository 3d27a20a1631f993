from .state_management import RunResult, StateManager, SweepState
from .runner import aggregate_sweep, parse_axis, plan_runs, run_sweep
from .plotting import CurveSeries, load_series, plot_runs
