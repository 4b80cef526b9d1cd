from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from mssk.core.errors import BudgetExhausted, InfeasibleStart, ValidationError
from mssk.core.model import ModelParams, validate_params
from mssk.optimize.parameterization import (
    Layout,
    decode,
    default_layout,
    embed_trial,
    encode,
    initial_vector,
    layout_of,
    random_layout,
    random_vector,
)
from mssk.parisi.functional import parisi_recursion
from mssk.parisi.trial import TrialPoint
from mssk.utils.parallel import ReplicaPool
from mssk.utils.rng import Field, stream
from mssk.utils.run_logger import run_logger


@dataclass(frozen=True)
class OptimizationConfig:
    k_schedule: Tuple[int, ...] = ()
    restarts: int = 8
    max_evals: int = 2000
    tolerance: float = 1e-6
    seed: int = 0
    method: str = "grid"
    threads: Optional[int] = None

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValidationError(f"tolerance must be positive, got {self.tolerance}")
        if self.restarts < 1 or self.max_evals < 1:
            raise ValidationError("restarts and max_evals must be at least 1")

    def schedule(self, r: int) -> Tuple[int, ...]:
        """k_schedule, or (r, r+1, r+2, r+4) when none is given."""
        schedule = self.k_schedule or (r, r + 1, r + 2, r + 4)
        if any(k < r for k in schedule):
            raise InfeasibleStart(f"every k in {schedule} must be at least r={r}")
        return tuple(sorted(set(int(k) for k in schedule)))


@dataclass(frozen=True)
class TraceEntry:
    """One objective evaluation: the decoded iterate (xi, q) and its value."""
    k: int
    restart: int
    evaluation: int
    xi: Tuple[float, ...]
    q: Tuple[float, ...]
    value: float

    def to_row(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "restart": self.restart,
            "evaluation": self.evaluation,
            "xi": " ".join(repr(x) for x in self.xi),
            "q": " ".join(repr(x) for x in self.q),
            "value": self.value,
        }


@dataclass
class OptimizationResult:
    best_trial: TrialPoint
    best_value: float
    eval_count: int
    trace: List[TraceEntry] = field(default_factory=list)
    best_by_k: Dict[int, float] = field(default_factory=dict)
    budget_exhausted: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "best_value": self.best_value,
            "best_trial": self.best_trial.to_dict(),
            "eval_count": self.eval_count,
            "best_by_k": {str(k): v for k, v in self.best_by_k.items()},
            "budget_exhausted": self.budget_exhausted,
        }

    def trace_rows(self) -> List[Dict[str, Any]]:
        return [entry.to_row() for entry in self.trace]


@dataclass
class _RestartOutcome:
    trial: TrialPoint
    value: float
    trace: List[TraceEntry]
    exhausted: bool


def _run_restart(layout: Layout, x0: np.ndarray, k: int, restart: int,
                 config: OptimizationConfig) -> _RestartOutcome:
    trace: List[TraceEntry] = []
    best: List[Any] = [None, np.inf]

    def objective(vector: np.ndarray) -> float:
        trial = decode(vector, layout)
        value = parisi_recursion(trial, method=config.method).value
        trace.append(TraceEntry(k, restart, len(trace), trial.xi, trial.q, value))
        if value < best[1]:
            best[0], best[1] = trial, value
        return value

    result = minimize(objective, x0, method="Nelder-Mead", options={
        "maxfev": config.max_evals,
        "xatol": config.tolerance,
        "fatol": config.tolerance,
        "adaptive": x0.size > 4,
    })
    exhausted = (not result.success) and len(trace) >= config.max_evals
    return _RestartOutcome(best[0], best[1], trace, exhausted)


def minimize_parisi(params: ModelParams, config: Optional[OptimizationConfig] = None,
                    strict: bool = False) -> OptimizationResult:
    """
    Multi-start Nelder-Mead over the trial space, one depth k at a time. Restart 0 of each
    depth starts from the previous depth's optimum embedded with zero-increment levels,
    so the best value never increases along the schedule.
    """
    validate_params(params)
    config = config or OptimizationConfig()
    schedule = config.schedule(params.r)
    pool = ReplicaPool(config.threads)

    trace: List[TraceEntry] = []
    best_by_k: Dict[int, float] = {}
    best_trial: Optional[TrialPoint] = None
    best_value = np.inf
    exhausted = False

    for k in schedule:
        warm = best_trial
        if warm is not None:
            gap = params.r
            while warm.k < k:
                warm = embed_trial(warm, gap)
                gap = params.r - ((params.r - gap + 1) % params.r)

        def restart_job(restart: int) -> _RestartOutcome:
            if restart == 0:
                if warm is not None:
                    layout = layout_of(warm)
                    return _run_restart(layout, encode(warm, layout), k, restart, config)
                layout = default_layout(params, k)
                return _run_restart(layout, initial_vector(layout), k, restart, config)
            rng = stream(config.seed, Field.OPTIMIZER, k, restart)
            layout = random_layout(params, k, rng)
            return _run_restart(layout, random_vector(layout, rng), k, restart, config)

        outcomes = pool.map(restart_job, config.restarts)
        for outcome in outcomes:
            trace.extend(outcome.trace)
            exhausted = exhausted or outcome.exhausted
        winner = min(outcomes, key=lambda o: o.value)
        best_by_k[k] = winner.value
        if winner.value <= best_value:
            best_trial, best_value = winner.trial, winner.value
        print(f"[optimize] k={k}: best {winner.value:.8f} over {config.restarts} restarts")
        run_logger.log_event("optimize_depth_done", {"k": k, "best": winner.value,
                                                     "trial": winner.trial.to_dict()}, level="INFO")

    best_value = parisi_recursion(best_trial, method=config.method).value
    result = OptimizationResult(best_trial=best_trial, best_value=best_value, eval_count=len(trace),
                                trace=trace, best_by_k=best_by_k, budget_exhausted=exhausted)
    if exhausted:
        run_logger.log_event("optimizer_budget_exhausted", {"max_evals": config.max_evals}, level="WARN")
        if strict:
            raise BudgetExhausted(f"evaluation budget {config.max_evals} exhausted", result=result)
    return result
