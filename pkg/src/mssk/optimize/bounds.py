from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Sequence

import math

from mssk.core.errors import MismatchedParams
from mssk.core.estimates import PressureEstimate
from mssk.core.model import ModelParams
from mssk.optimize.minimizer import OptimizationResult
from mssk.parisi.functional import parisi_recursion
from mssk.parisi.trial import TrialPoint
from mssk.utils.run_logger import run_logger


@dataclass(frozen=True)
class GapRow:
    n: int
    pressure: float
    stderr: float
    best_value: float
    gap: float
    bound_holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class GapTable:
    rows: List[GapRow] = field(default_factory=list)
    sigmas: float = 3.0

    @property
    def bound_holds(self) -> bool:
        return all(row.bound_holds for row in self.rows)

    @property
    def gap_shrinks(self) -> bool:
        """Gap nonincreasing in N within the combined error bars (trend only)."""
        return all(
            b.gap <= a.gap + self.sigmas * math.hypot(a.stderr, b.stderr)
            for a, b in zip(self.rows, self.rows[1:])
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": [row.to_dict() for row in self.rows],
                "bound_holds": self.bound_holds, "gap_shrinks": self.gap_shrinks}


def bound_report(params: ModelParams, n_list: Sequence[int], opt_result: OptimizationResult,
                 estimates: Mapping[int, PressureEstimate], sigmas: float = 3.0) -> GapTable:
    """Rows (N, p_N, stderr, best value, gap); the finite-N bound requires gap >= -sigmas * stderr."""
    if opt_result.best_trial.params != params:
        raise MismatchedParams(f"optimizer ran for {opt_result.best_trial.params.to_dict()}, "
                               f"report asked for {params.to_dict()}")
    rows = []
    for n in sorted(n_list):
        if n not in estimates:
            raise MismatchedParams(f"no pressure estimate for N={n}")
        estimate = estimates[n]
        if estimate.notes.get("n", n) != n:
            raise MismatchedParams(f"estimate filed under N={n} was computed for N={estimate.notes['n']}")
        gap = opt_result.best_value - estimate.mean
        rows.append(GapRow(n=n, pressure=estimate.mean, stderr=estimate.stderr,
                           best_value=opt_result.best_value, gap=gap,
                           bound_holds=gap >= -sigmas * estimate.stderr))
    return GapTable(rows=rows, sigmas=sigmas)


@dataclass(frozen=True)
class TrialBoundRow:
    n: int
    trial: int
    pressure: float
    stderr: float
    functional: float
    functional_stderr: float
    gap: float
    bound_holds: bool

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def trial_bound_rows(trials: Sequence[TrialPoint], estimates: Mapping[int, PressureEstimate],
                     method: str = "quadrature", sigmas: float = 3.0) -> List[TrialBoundRow]:
    """
    p_N <= P(x) at every trial point x and every N with an estimate. The functional is
    evaluated once per trial; the bound allows `sigmas` combined stderr.
    """
    values = [parisi_recursion(trial, method=method) for trial in trials]
    rows = []
    for n in sorted(estimates):
        estimate = estimates[n]
        for index, value in enumerate(values):
            gap = value.value - estimate.mean
            slack = sigmas * math.hypot(estimate.stderr, value.stderr)
            rows.append(TrialBoundRow(n=n, trial=index, pressure=estimate.mean, stderr=estimate.stderr,
                                      functional=value.value, functional_stderr=value.stderr,
                                      gap=gap, bound_holds=gap >= -slack))
    violations = [(row.n, row.trial) for row in rows if not row.bound_holds]
    if violations:
        run_logger.log_event("trial_bound_violation", {"cases": violations}, level="WARN")
    return rows
