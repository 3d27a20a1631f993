import json
from dataclasses import asdict, dataclass, is_dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

from epo.models.models import RunStatus

SWEEP_FILE = "sweep.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunResult:
    """Outcome of one child run of a sweep"""
    run_key: str
    run_dir: str
    axis_value: str
    seed: int
    status: RunStatus
    final_return: Optional[float] = None
    best_return: Optional[float] = None
    error_message: Optional[str] = None
    started_at: Optional[str] = None
    completed_at: Optional[str] = None
    duration_seconds: Optional[float] = None


@dataclass
class SweepState:
    """Overall state of a sweep"""
    sweep_id: str
    status: RunStatus
    axis_key: str
    runs: List[str]
    total_runs: int
    completed_runs: int
    successful_runs: int
    failed_runs: int
    run_results: Dict[str, RunResult]
    started_at: str
    completed_at: Optional[str] = None
    error_message: Optional[str] = None


def serialize(obj):
    """Convert dataclasses and enums to JSON-ready values"""
    if isinstance(obj, Enum):
        return obj.value
    elif is_dataclass(obj):
        return {k: serialize(v) for k, v in asdict(obj).items()}
    elif isinstance(obj, dict):
        return {k: serialize(v) for k, v in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [serialize(item) for item in obj]
    elif isinstance(obj, datetime):
        return obj.isoformat()
    return obj


class StateManager:
    """Keeps a sweep's state in ``sweep.json`` inside the sweep directory"""

    def __init__(self, sweep_dir):
        self.sweep_dir = Path(sweep_dir)
        self.path = self.sweep_dir / SWEEP_FILE

    def get_sweep_dict(self, data: str) -> dict:
        sweep_dict = json.loads(data)
        sweep_dict["status"] = RunStatus(sweep_dict["status"])
        sweep_dict["run_results"] = {
            k: RunResult(**{**v, "status": RunStatus(v["status"])})
            for k, v in sweep_dict.get("run_results", {}).items()
        }
        return sweep_dict

    def create_sweep(self, sweep_id: str, axis_key: str, run_keys: List[str]) -> SweepState:
        state = SweepState(
            sweep_id=sweep_id,
            status=RunStatus.PENDING,
            axis_key=axis_key,
            runs=list(run_keys),
            total_runs=len(run_keys),
            completed_runs=0,
            successful_runs=0,
            failed_runs=0,
            run_results={},
            started_at=_now(),
        )
        self._save_sweep(state)
        return state

    def get_sweep(self) -> Optional[SweepState]:
        if not self.path.is_file():
            return None
        return SweepState(**self.get_sweep_dict(self.path.read_text()))

    def update_sweep_status(self, status: RunStatus):
        sweep = self.get_sweep()
        if sweep:
            sweep.status = status
            if status in [RunStatus.SUCCESS, RunStatus.FAILED, RunStatus.PARTIAL]:
                sweep.completed_at = _now()
            self._save_sweep(sweep)

    def update_run_result(self, run_result: RunResult) -> Optional[SweepState]:
        """Record a finished child run and resolve the sweep status once all are in"""
        sweep = self.get_sweep()
        if not sweep:
            return None

        sweep.run_results[run_result.run_key] = run_result
        sweep.completed_runs += 1

        if run_result.status == RunStatus.SUCCESS:
            sweep.successful_runs += 1
        elif run_result.status == RunStatus.FAILED:
            sweep.failed_runs += 1

        if sweep.completed_runs == sweep.total_runs:
            if sweep.failed_runs == 0:
                sweep.status = RunStatus.SUCCESS
            elif sweep.successful_runs == 0:
                sweep.status = RunStatus.FAILED
            else:
                sweep.status = RunStatus.PARTIAL
            sweep.completed_at = _now()

        self._save_sweep(sweep)
        return sweep

    def _save_sweep(self, sweep: SweepState):
        self.sweep_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_name(SWEEP_FILE + ".tmp")
        tmp.write_text(json.dumps(serialize(sweep), indent=2))
        tmp.replace(self.path)
