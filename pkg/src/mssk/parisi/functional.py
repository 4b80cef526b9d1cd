"""
Parisi functional of a trial point: P = log Z_0 - correction.

log Z_0 runs the fractional-moment recursion on log 2cosh of the field z with covariance
2 gamma~^2 q (the sqrt(2) of Z_k lives in the profile). The cascade form replaces the
recursion by E log sum nu 2cosh z - E log sum nu exp y with Cov y = (gamma~ q)^2.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from mssk.core.estimates import sample_stderr
from mssk.implementations.terminals import LinearTerminal, LogCoshTerminal
from mssk.parisi.trial import TrialPoint
from mssk.rpc.cascade import CascadeConfig, sample_cascade
from mssk.rpc.field import sample_tree_field
from mssk.rpc.recursion import QUADRATURE_NODES, recursion_value
from mssk.rpc.representation import terminal_log_sums
from mssk.utils.parallel import ReplicaPool
from mssk.utils.run_logger import run_logger

Z_FIELD = 0
Y_FIELD = 1


@dataclass(frozen=True)
class ParisiValue:
    value: float
    log_z0: float
    correction: float
    method: str
    stderr: float = 0.0

    @classmethod
    def of(cls, log_z0: float, correction: float, method: str, stderr: float = 0.0) -> "ParisiValue":
        return cls(value=log_z0 - correction, log_z0=log_z0, correction=correction,
                   method=method, stderr=stderr)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "log_z0": self.log_z0,
            "correction": self.correction,
            "method": self.method,
            "stderr": self.stderr,
        }


def parisi_recursion(trial: TrialPoint, method: str = "quadrature", nodes: int = QUADRATURE_NODES,
                     samples_per_level: Optional[int] = None, repeats: int = 16,
                     seed: int = 0) -> ParisiValue:
    result = recursion_value(trial.xi, LogCoshTerminal(1.0), trial.z_profile(), method=method,
                             nodes=nodes, samples_per_level=samples_per_level,
                             repeats=repeats, seed=seed)
    return ParisiValue.of(result.value, trial.correction(), f"recursion/{result.method}", result.stderr)


def parisi_rpc(trial: TrialPoint, cascade: Optional[CascadeConfig] = None, replicas: int = 1000,
               seed: int = 0, threads: Optional[int] = None) -> ParisiValue:
    cascade = cascade or CascadeConfig()
    z_terminal = LogCoshTerminal(1.0)
    y_terminal = LinearTerminal(1.0)
    z_prof = trial.z_profile()
    y_prof = trial.y_profile()

    def one(replica: int):
        sample = sample_cascade(trial.xi, trial.k, cascade.width, seed, replica, cascade.max_leaves)
        z = sample_tree_field(z_prof, cascade.width, seed, replica, Z_FIELD, max_leaves=cascade.max_leaves)
        y = sample_tree_field(y_prof, cascade.width, seed, replica, Y_FIELD, max_leaves=cascade.max_leaves)
        z_num, z_den = terminal_log_sums(sample, z, z_terminal, cascade.tail_compensation)
        y_num, y_den = terminal_log_sums(sample, y, y_terminal, cascade.tail_compensation)
        return z_num - z_den, y_num - y_den

    terms = np.asarray(ReplicaPool(threads).map(one, replicas), dtype=float)
    log_z0 = float(terms[:, 0].mean())
    correction = float(terms[:, 1].mean())
    value = ParisiValue.of(log_z0, correction, "rpc", sample_stderr(terms[:, 0] - terms[:, 1]))
    run_logger.log_event("parisi_rpc_done", {"trial": trial.to_dict(), **value.to_dict(),
                                             "replicas": replicas, "seed": seed})
    return value
