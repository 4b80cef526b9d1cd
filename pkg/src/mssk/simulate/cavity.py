"""
Cavity functional A_N = E log Omega'(2cosh z) - E log Omega'(exp y).

Omega' is the N-spin measure with Hamiltonian H' = sigma^T G sigma / sqrt(N+1), where G is
the leading N x N block of an (N+1)-spin coupling array. The cavity field z couples sigma to
the added spin through the last row and column of the same array, and y comes from an
independent N x N array scaled by 1/sqrt(N(N+1)):

    Cov z = 2 N/(N+1) gamma_(a^a') c,    Cov y = N/(N+1) c^2,    c = gamma_(a^a') q.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from mssk.core.estimates import PressureEstimate
from mssk.core.model import ModelParams, check_enumerable, validate_params
from mssk.rpc.cascade import CascadeConfig, sample_cascade
from mssk.simulate.disorder import DisorderRealization, sample_couplings
from mssk.simulate.enumeration import gray_configs
from mssk.simulate.gibbs import MAX_GIBBS_N
from mssk.simulate.pressure import pressure_direct
from mssk.utils.parallel import ReplicaPool
from mssk.utils.rng import Field
from mssk.utils.run_logger import run_logger


def _split(disorder: DisorderRealization, per_level, depth: int, n_configs: int):
    """(path sum down to depth-1, path sum down to depth) of a per-level node quantity."""
    if depth > 1:
        upper = disorder.path_sum(per_level, depth - 1)
    else:
        upper = np.zeros((1, n_configs))
    return upper, np.repeat(upper, disorder.width, axis=0) + per_level(depth)


def replica_cavity(disorder: DisorderRealization, extra: DisorderRealization,
                   configs: np.ndarray, compensate: bool) -> float:
    n = configs.shape[1]
    r = disorder.params.r
    c = configs.shape[0]
    cavity_scale = 1.0 / np.sqrt(n + 1)

    h_up, h_leaf = _split(disorder, lambda l: disorder.node_quadratic(l, configs, block=n, scale=cavity_scale), r, c)
    z_up, z_leaf = _split(disorder, lambda l: disorder.node_linear(l, configs, scale=cavity_scale), r, c)
    y_scale = 1.0 / np.sqrt(n * (n + 1))
    y_up, y_leaf = _split(extra, lambda l: extra.node_quadratic(l, configs, scale=y_scale), r, c)

    cosh_leaf = h_leaf + np.logaddexp(z_leaf, -z_leaf)
    exp_leaf = h_leaf + y_leaf

    cosh_means = exp_means = None
    if compensate:
        s2 = disorder.level_scales()[-1] ** 2
        # fresh deepest increments: Var dH' = s^2 N^2/(N+1), Var dz = 2 s^2 N/(N+1), Var dy = s^2 N/(N+1)
        var_h = s2 * n * n / (n + 1)
        var_z = 2.0 * s2 * n / (n + 1)
        var_y = s2 * n / (n + 1)
        cosh_means = logsumexp(h_up + np.logaddexp(z_up, -z_up), axis=1) + 0.5 * (var_h + var_z)
        exp_means = logsumexp(h_up + y_up, axis=1) + 0.5 * (var_h + var_y)

    cascade = disorder.cascade
    cosh_num, cosh_den = cascade.log_sums(logsumexp(cosh_leaf, axis=1), cosh_means)
    exp_num, exp_den = cascade.log_sums(logsumexp(exp_leaf, axis=1), exp_means)
    return (cosh_num - cosh_den) - (exp_num - exp_den)


def cavity_functional(params: ModelParams, n: int, cascade: Optional[CascadeConfig] = None,
                      replicas: int = 1000, seed: int = 0, threads: Optional[int] = None) -> PressureEstimate:
    validate_params(params)
    check_enumerable(n, MAX_GIBBS_N)
    cascade = cascade or CascadeConfig()
    configs = gray_configs(n)

    def one(replica: int) -> float:
        sample = sample_cascade(params.zeta, params.r, cascade.width, seed, replica, cascade.max_leaves)
        disorder = DisorderRealization(params, sample, sample_couplings(params, n + 1, cascade.width, seed, replica),
                                       seed, replica)
        extra = DisorderRealization(params, sample,
                                    sample_couplings(params, n, cascade.width, seed, replica, Field.CAVITY),
                                    seed, replica)
        return replica_cavity(disorder, extra, configs, cascade.tail_compensation)

    values = ReplicaPool(threads).map_array(one, replicas)
    estimate = PressureEstimate.from_samples(values, seed, notes={
        "n": n, "method": "cavity", "replica_min": float(values.min()), "replica_max": float(values.max()),
    })
    run_logger.log_event("cavity_done", estimate.to_dict(), level="INFO")
    return estimate


@dataclass(frozen=True)
class TelescopingRow:
    n: int
    cavity: float
    cavity_stderr: float
    increment: float
    increment_stderr: float
    slack: float
    within: bool

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def default_slack_constant(params: ModelParams) -> float:
    return params.gamma[-1] ** 2


def cavity_telescoping(params: ModelParams, n_list: Sequence[int], cascade: Optional[CascadeConfig] = None,
                       replicas: int = 1000, seed: int = 0, threads: Optional[int] = None,
                       slack_constant: Optional[float] = None, sigmas: float = 3.0) -> List[TelescopingRow]:
    """
    A_N against (N+1) p_(N+1) - N p_N for every N in n_list; a row is within when the two
    differ by at most c/N plus `sigmas` combined stderr.
    """
    cascade = cascade or CascadeConfig()
    c = default_slack_constant(params) if slack_constant is None else slack_constant
    rows = []
    for n in sorted(n_list):
        a = cavity_functional(params, n, cascade, replicas, seed, threads)
        p_n = pressure_direct(params, n, cascade, replicas, seed, threads)
        p_next = pressure_direct(params, n + 1, cascade, replicas, seed, threads)
        increment = (n + 1) * p_next.mean - n * p_n.mean
        increment_se = math.hypot((n + 1) * p_next.stderr, n * p_n.stderr)
        within = abs(a.mean - increment) <= c / n + sigmas * math.hypot(a.stderr, increment_se)
        rows.append(TelescopingRow(n=n, cavity=a.mean, cavity_stderr=a.stderr, increment=increment,
                                   increment_stderr=increment_se, slack=c / n, within=within))
    if not all(row.within for row in rows):
        run_logger.log_event("cavity_telescoping_violation",
                             {"n": [row.n for row in rows if not row.within], "slack_constant": c},
                             level="WARN")
    return rows
