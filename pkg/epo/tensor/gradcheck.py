from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from .classes import ParamVector

LossClosure = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(eq=False)
class GradCheckReport:
    analytic: np.ndarray
    numeric: np.ndarray
    relative_errors: np.ndarray
    max_relative_error: float
    worst_index: int
    tolerance: float
    per_block: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def gradient_check(params: ParamVector, loss_closure: LossClosure, tolerance: float = 1e-4,
                   h: float = 1e-6, abs_floor: float = 1e-4) -> GradCheckReport:
    """Compare the closure's analytic gradient against central finite differences.

    ``loss_closure(values)`` returns ``(loss, grad)``. The relative error of an entry
    is ``|a - n| / max(|a|, |n|, abs_floor)``; entries smaller than the floor are
    judged on absolute error.
    """
    base = np.array(params.values, dtype=np.float64)
    _, analytic = loss_closure(base.copy())
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)

    numeric = np.zeros_like(base)
    shifted = base.copy()
    for i in range(base.size):
        shifted[i] = base[i] + h
        plus, _ = loss_closure(shifted.copy())
        shifted[i] = base[i] - h
        minus, _ = loss_closure(shifted.copy())
        shifted[i] = base[i]
        numeric[i] = (plus - minus) / (2.0 * h)

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), abs_floor)
    errors = np.abs(analytic - numeric) / scale
    worst = int(np.argmax(errors)) if errors.size else 0

    per_block = {}
    for block in params.layout:
        chunk = errors[block.offset:block.offset + block.size]
        per_block[block.name] = float(chunk.max()) if chunk.size else 0.0

    return GradCheckReport(
        analytic=analytic,
        numeric=numeric,
        relative_errors=errors,
        max_relative_error=float(errors.max()) if errors.size else 0.0,
        worst_index=worst,
        tolerance=tolerance,
        per_block=per_block,
    )
