"""
Finite-N quenched pressure by exact spin enumeration.

pressure_direct averages (1/N) log sum_(sigma, alpha) nu_alpha exp H_N(sigma, alpha) over
sampled cascades and couplings. pressure_recursive estimates the same number through the
nested fractional-moment form with independent coupling matrices per level.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from mssk.core.errors import InsufficientSamples
from mssk.core.estimates import PressureEstimate, sample_stderr
from mssk.core.model import LeafIndex, ModelParams, check_enumerable, validate_params
from mssk.rpc.cascade import CascadeConfig
from mssk.simulate.disorder import DisorderRealization, sample_disorder
from mssk.simulate.enumeration import gray_configs, quadratic_energies
from mssk.utils.config import Config
from mssk.utils.parallel import ReplicaPool
from mssk.utils.rng import Field, stream
from mssk.utils.run_logger import run_logger

DEFAULT_SAMPLES_PER_LEVEL = 64


def split_energies(disorder: DisorderRealization, configs: np.ndarray, scale: float):
    """
    (energies of every depth-(r-1) node, energies of every leaf), each (nodes, 2^N).
    The first is the path sum above the deepest level, zero when r = 1.
    """
    r = disorder.params.r
    if r > 1:
        upper = disorder.path_sum(lambda l: disorder.node_quadratic(l, configs, scale=scale), r - 1)
    else:
        upper = np.zeros((1, configs.shape[0]))
    last = disorder.node_quadratic(r, configs, scale=scale)
    return upper, np.repeat(upper, disorder.width, axis=0) + last


def replica_pressure(disorder: DisorderRealization, configs: np.ndarray, compensate: bool) -> float:
    n = configs.shape[1]
    upper, leaf = split_energies(disorder, configs, 1.0 / np.sqrt(n))
    parent_means = None
    if compensate:
        # a fresh deepest increment shifts log E e^H by N s_r^2 / 2 for every sigma
        s = disorder.level_scales()[-1]
        parent_means = logsumexp(upper, axis=1) + 0.5 * n * s * s
    numerator, denominator = disorder.cascade.log_sums(logsumexp(leaf, axis=1), parent_means)
    return (numerator - denominator) / n


def pressure_direct(params: ModelParams, n: int, cascade: Optional[CascadeConfig] = None,
                    replicas: int = 1000, seed: int = 0, threads: Optional[int] = None) -> PressureEstimate:
    validate_params(params)
    check_enumerable(n)
    cascade = cascade or CascadeConfig()
    configs = gray_configs(n)
    run_logger.log_event("pressure_direct_start", {
        "params": params.to_dict(), "n": n, "replicas": replicas, "seed": seed, **cascade.to_dict(),
    })

    def one(replica: int) -> float:
        disorder = sample_disorder(params, n, cascade, seed, replica)
        return replica_pressure(disorder, configs, cascade.tail_compensation)

    moments = ReplicaPool(threads).moments(one, replicas)
    estimate = PressureEstimate.from_moments(moments, seed, notes={
        "n": n, "method": "direct", "width": cascade.width, "tail_compensation": cascade.tail_compensation,
    })
    run_logger.log_event("pressure_direct_done", estimate.to_dict(), level="INFO")
    return estimate


def pressure_recursive(params: ModelParams, n: int, samples_per_level: Optional[int] = None,
                       replicas: int = 200, seed: int = 0, threads: Optional[int] = None) -> PressureEstimate:
    """
    Nested Monte Carlo of (1/N) log Z_0 on a tree with m fresh coupling matrices per node and
    level. Each replica is an independent tree; the stderr is taken across replicas and the
    plug-in estimate carries an O(1/m) bias.

    No bootstrap is run: resampling the m draws of one tree would only see the spread
    inside that tree, while independent replicas already give the spread of the estimator.
    """
    validate_params(params)
    check_enumerable(n)
    m = samples_per_level or int(Config.get("pressure.samples_per_level", DEFAULT_SAMPLES_PER_LEVEL))
    if m < 2:
        raise InsufficientSamples(f"nested Monte Carlo needs at least 2 samples per level, got {m}")
    r = params.r
    scales = np.sqrt(np.diff(params.gamma_levels() ** 2))
    configs = gray_configs(n)
    root_n = np.sqrt(n)

    def one(replica: int) -> float:
        total = None
        for level in range(1, r + 1):
            g = stream(seed, replica, Field.NESTED, level).standard_normal((m ** level, n, n))
            energies = scales[level - 1] / root_n * quadratic_energies(g, configs)
            if total is None:
                total = energies
            else:
                total = np.repeat(total, m, axis=0) + energies
        x = logsumexp(total, axis=1).reshape((m,) * r)
        for level in range(r, 0, -1):
            z = params.zeta_at(level - 1)
            x = (logsumexp(z * x, axis=-1) - np.log(m)) / z
        return float(x) / n

    moments = ReplicaPool(threads).moments(one, replicas)
    estimate = PressureEstimate.from_moments(moments, seed, notes={
        "n": n, "method": "recursive", "samples_per_level": m, "plugin_bias": f"O(1/{m})",
    })
    run_logger.log_event("pressure_recursive_done", estimate.to_dict(), level="INFO")
    return estimate


@dataclass(frozen=True)
class PressureTrend:
    n_list: List[int]
    estimates: List[PressureEstimate]
    sigmas: float = 3.0
    violations: List[int] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return not self.violations

    def rows(self) -> List[Dict[str, Any]]:
        return [{"n": n, **e.to_dict()} for n, e in zip(self.n_list, self.estimates)]


def pressure_trend(params: ModelParams, n_list: Sequence[int], cascade: Optional[CascadeConfig] = None,
                   replicas: int = 1000, seed: int = 0, threads: Optional[int] = None,
                   sigmas: float = 3.0) -> PressureTrend:
    """p_N over an N list with a soft nondecreasing check (two-sided slack of `sigmas` stderr)."""
    n_list = sorted(int(n) for n in n_list)
    estimates = [pressure_direct(params, n, cascade, replicas, seed, threads) for n in n_list]
    violations = [
        n_list[i + 1] for i in range(len(estimates) - 1)
        if estimates[i + 1].mean < estimates[i].mean - sigmas * estimates[i].combined_stderr(estimates[i + 1])
    ]
    if violations:
        run_logger.log_event("pressure_trend_violation", {"n": violations}, level="WARN")
    return PressureTrend(n_list=n_list, estimates=estimates, sigmas=sigmas, violations=violations)


@dataclass(frozen=True)
class CovarianceCheckRow:
    level: int
    overlap: float
    empirical: float
    expected: float
    stderr: float
    within: bool


def hamiltonian_covariance_check(params: ModelParams, n: int, width: int = 2, replicas: int = 4000,
                                 seed: int = 0, flips: Sequence[int] = (0, 1, 2),
                                 threads: Optional[int] = None, sigmas: float = 3.0) -> List[CovarianceCheckRow]:
    """
    Empirical Cov(H_N(s1, a1), H_N(s2, a2)) against N (gamma_(a1^a2) q(s1, s2))^2 for probe
    configurations s2 = s1 with a few spins flipped, at every ancestor level.
    """
    validate_params(params)
    check_enumerable(n)
    cascade = CascadeConfig(width=width, tail_compensation=False)
    rng = stream(seed, Field.PROBE)
    base = rng.choice([-1.0, 1.0], size=n)
    probes = []
    for k in flips:
        other = base.copy()
        other[rng.choice(n, size=min(k, n), replace=False)] *= -1
        probes.append(other)

    first = LeafIndex((0,) * params.r).flat(width)
    seconds = [LeafIndex(tuple(1 if i == level else 0 for i in range(params.r))).flat(width)
               for level in range(params.r + 1)]

    def one(replica: int) -> np.ndarray:
        leaves = sample_disorder(params, n, cascade, seed, replica).leaf_couplings()
        h1 = base @ leaves[first] @ base / np.sqrt(n)
        return np.array([[h1 * (s2 @ leaves[a2] @ s2) / np.sqrt(n) for s2 in probes] for a2 in seconds])

    products = np.asarray(ReplicaPool(threads).map(one, replicas))
    rows = []
    for level in range(params.r + 1):
        for index, s2 in enumerate(probes):
            q = float(base @ s2) / n
            expected = n * (params.gamma_at(level) * q) ** 2
            values = products[:, level, index]
            mean = float(values.mean())
            se = sample_stderr(values)
            rows.append(CovarianceCheckRow(level, q, mean, expected, se,
                                           abs(mean - expected) <= sigmas * se + 1e-12))
    return rows
