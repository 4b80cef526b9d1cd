"""
Cascade-side estimators: E log sum_alpha nu_alpha exp X(alpha) over sampled cascades and
fields, and the concentration of phi_r = log sum_alpha w_alpha exp X(alpha).
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from mssk.core.estimates import PressureEstimate, variance_stderr
from mssk.interfaces.terminal import ITerminal
from mssk.rpc.cascade import CascadeConfig, CascadeSample, sample_cascade, validate_zeta
from mssk.rpc.field import CovarianceProfile, TreeGaussianField, sample_tree_field
from mssk.rpc.recursion import gauss_hermite
from mssk.utils.parallel import ReplicaPool
from mssk.utils.run_logger import run_logger

TAIL_NODES = 32
LEFTOVER_WARNING = 0.05


def terminal_log_sums(cascade: CascadeSample, tree: TreeGaussianField, terminal: ITerminal,
                      compensate: bool) -> Tuple[float, float]:
    """Unnormalized log sums of w e^F(h) and w for one cascade and field."""
    leaf_values = terminal(tree.leaf_values())
    parent_means = None
    if compensate and cascade.depth >= 1:
        x, log_w = gauss_hermite(TAIL_NODES)
        scale = tree.profile.increment_scales()[-1]
        parents = tree.partial_values(cascade.depth - 1)
        with np.errstate(over="ignore"):
            parent_means = logsumexp(terminal(parents[:, None] + scale * x[None, :]) + log_w, axis=1)
    return cascade.log_sums(leaf_values, parent_means)


def rpc_representation_estimate(zeta: Sequence[float], terminal: ITerminal, profile: CovarianceProfile,
                                cascade: Optional[CascadeConfig] = None, replicas: int = 1000,
                                seed: int = 0, threads: Optional[int] = None,
                                field_id: int = 0) -> PressureEstimate:
    """E log sum_alpha nu_alpha exp F(h(alpha)); the mean over replicas estimates X_0."""
    cascade = cascade or CascadeConfig()
    zeta = validate_zeta(zeta, profile.depth)
    run_logger.log_event("rpc_representation_start", {
        "zeta": list(zeta), "profile": list(profile.values), "terminal": terminal.describe(),
        "replicas": replicas, "seed": seed, **cascade.to_dict(),
    })

    leftovers: List[float] = [0.0] * replicas

    def one(replica: int) -> float:
        sample = sample_cascade(zeta, profile.depth, cascade.width, seed, replica, cascade.max_leaves)
        tree = sample_tree_field(profile, cascade.width, seed, replica, field_id, max_leaves=cascade.max_leaves)
        leftovers[replica] = sample.leftover_mass_bound
        numerator, denominator = terminal_log_sums(sample, tree, terminal, cascade.tail_compensation)
        return numerator - denominator

    moments = ReplicaPool(threads).moments(one, replicas)
    mean_leftover = float(np.mean(leftovers)) if replicas else 0.0
    if mean_leftover > LEFTOVER_WARNING:
        run_logger.log_event("truncation_leftover", {
            "leftover_mass_bound": mean_leftover, "width": cascade.width,
        }, level="WARN")

    estimate = PressureEstimate.from_moments(moments, seed, notes={
        "leftover_mass_bound": mean_leftover, "width": cascade.width,
        "tail_compensation": cascade.tail_compensation,
    })
    run_logger.log_event("rpc_representation_done", estimate.to_dict())
    return estimate


@dataclass(frozen=True)
class ConcentrationRow:
    terminal: str
    variance: float
    variance_stderr: float
    normalized_variance: float
    bound_holds: bool


@dataclass(frozen=True)
class ConcentrationReport:
    """Var(phi_r) per terminal against 4 c(zeta_0), c estimated at depth 1."""
    zeta: Tuple[float, ...]
    c_hat: float
    c_hat_stderr: float
    rows: List[ConcentrationRow] = field(default_factory=list)

    @property
    def bound(self) -> float:
        return 4.0 * self.c_hat

    @property
    def all_hold(self) -> bool:
        return all(row.bound_holds for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "zeta": list(self.zeta),
            "c_hat": self.c_hat,
            "c_hat_stderr": self.c_hat_stderr,
            "bound": self.bound,
            "rows": [row.__dict__ for row in self.rows],
            "all_hold": self.all_hold,
        }


def estimate_c_hat(zeta0: float, cascade: CascadeConfig, replicas: int, seed: int,
                   threads: Optional[int] = None) -> Tuple[float, float]:
    """Var(log sum_n w_n) of a single-level cascade with parameter zeta0."""

    def one(replica: int) -> float:
        sample = sample_cascade((zeta0,), 1, cascade.width, seed, replica, cascade.max_leaves)
        tails = np.zeros(1) if cascade.tail_compensation else None
        numerator, _ = sample.log_sums(np.zeros(sample.n_leaves), tails)
        return numerator

    values = ReplicaPool(threads).map_array(one, replicas)
    return float(values.var(ddof=1)), variance_stderr(values)


def concentration_variance(zeta: Sequence[float], terminals: Sequence[ITerminal], profile: CovarianceProfile,
                           cascade: Optional[CascadeConfig] = None, replicas: int = 1000,
                           seed: int = 0, threads: Optional[int] = None,
                           sigmas: float = 3.0) -> ConcentrationReport:
    """
    Per terminal, the across-replica variance of the unnormalized phi_r (the checked quantity)
    and of its normalized counterpart log sum nu e^X. For a constant terminal the first
    equals Var(log sum w) and the second vanishes.
    """
    cascade = cascade or CascadeConfig()
    zeta = validate_zeta(zeta, profile.depth)
    pool = ReplicaPool(threads)

    def one(replica: int) -> List[Tuple[float, float]]:
        sample = sample_cascade(zeta, profile.depth, cascade.width, seed, replica, cascade.max_leaves)
        tree = sample_tree_field(profile, cascade.width, seed, replica, 0, max_leaves=cascade.max_leaves)
        return [terminal_log_sums(sample, tree, t, cascade.tail_compensation) for t in terminals]

    sums = np.asarray(pool.map(one, replicas), dtype=float)  # (replicas, terminals, 2)
    c_hat, c_se = estimate_c_hat(zeta[0], cascade, replicas, seed + 1, threads)

    rows = []
    for index, terminal in enumerate(terminals):
        unnormalized = sums[:, index, 0]
        normalized = unnormalized - sums[:, index, 1]
        variance = float(unnormalized.var(ddof=1))
        se = variance_stderr(unnormalized)
        slack = sigmas * float(np.hypot(se, 4.0 * c_se))
        rows.append(ConcentrationRow(
            terminal=terminal.describe(),
            variance=variance,
            variance_stderr=se,
            normalized_variance=float(normalized.var(ddof=1)),
            bound_holds=variance <= 4.0 * c_hat + slack,
        ))

    report = ConcentrationReport(zeta=zeta, c_hat=c_hat, c_hat_stderr=c_se, rows=rows)
    run_logger.log_event("concentration_done", report.to_dict())
    return report

