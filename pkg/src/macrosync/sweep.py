"""Order-preserving parallel evaluation of independent grid cells."""

from __future__ import annotations

import math
import os
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from .dynamics import DiagnosticsWarning, StiffnessError
from .quantum import DegenerateSteadyStateError

FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class CellResult:
    index: int
    value: Any = None
    error_code: str | None = None
    error_message: str | None = None
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.error_code is None


def _error_code(exc: BaseException) -> str:
    if isinstance(exc, StiffnessError):
        return "stiffness"
    if isinstance(exc, DegenerateSteadyStateError):
        return "degenerate_steady_state"
    if isinstance(exc, FloatingPointError):
        return "floating_point"
    return "error"


def _run_one(job: tuple[Callable, int, Any]) -> CellResult:
    func, index, task = job
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DiagnosticsWarning)
        try:
            value = func(task)
        except Exception as exc:  # recorded per cell, never fatal for the sweep
            msg = f"{type(exc).__name__}: {exc}"
            if _error_code(exc) == "error":
                msg += "\n" + traceback.format_exc(limit=3)
            return CellResult(index, None, _error_code(exc), msg)
    notes = tuple(str(w.message) for w in caught if issubclass(w.category, DiagnosticsWarning))
    return CellResult(index, value, None, None, notes)


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_cells(func: Callable[[Any], Any], tasks: Sequence[Any], workers: int = 1) -> list[CellResult]:
    """Evaluate ``func`` on every task; results come back in task order.

    ``func`` must be a module-level function so that it pickles.  Exceptions
    are caught per cell and reported through ``CellResult.error_code``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = [(func, k, t) for k, t in enumerate(tasks)]
    if workers == 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    chunk = max(1, math.ceil(len(jobs) / (8 * workers)))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=chunk))


def failure_fraction(results: Sequence[CellResult]) -> float:
    if not results:
        return 0.0
    return sum(not r.ok for r in results) / len(results)


def within_budget(results: Sequence[CellResult], budget: float = FAILURE_BUDGET) -> bool:
    return failure_fraction(results) <= budget
