"""
Exact Gibbs measure mu_N(sigma, alpha) ~ nu_alpha exp H_N(sigma, alpha) and pair statistics
(ancestor level, overlap) of independent draws from it.

With tail compensation the discarded deepest-level atoms below every parent beta enter as
one extra "dust" state per (beta, sigma) carrying their expected mass; two draws that land in
dust are distinct leaves of beta, so their ancestor level is r - 1.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import comb, logsumexp

from mssk.core.estimates import sample_stderr
from mssk.core.model import ModelParams, check_enumerable, flat_ancestor_levels, validate_params
from mssk.rpc.cascade import CascadeConfig
from mssk.simulate.disorder import DisorderRealization, sample_disorder
from mssk.simulate.enumeration import gray_configs
from mssk.simulate.pressure import split_energies
from mssk.utils.parallel import ReplicaPool
from mssk.utils.rng import Field, stream
from mssk.utils.run_logger import run_logger

MAX_GIBBS_N = 20


@dataclass(frozen=True)
class GibbsMeasure:
    """Flattened state probabilities; states are (node, sigma), node index < n_leaves means a leaf."""
    log_prob: np.ndarray
    n_leaves: int
    n_configs: int
    depth: int
    width: int

    def draw(self, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """(node ids, config ids) of `size` independent states."""
        p = np.exp(self.log_prob - logsumexp(self.log_prob))
        states = rng.choice(p.size, size=size, p=p / p.sum())
        return np.divmod(states, self.n_configs)

    def ancestor_levels(self, node1: np.ndarray, node2: np.ndarray) -> np.ndarray:
        dust = (node1 >= self.n_leaves) | (node2 >= self.n_leaves)
        leaf_levels = flat_ancestor_levels(np.minimum(node1, self.n_leaves - 1),
                                           np.minimum(node2, self.n_leaves - 1), self.depth, self.width)
        parent1 = np.where(node1 >= self.n_leaves, node1 - self.n_leaves, node1 // self.width)
        parent2 = np.where(node2 >= self.n_leaves, node2 - self.n_leaves, node2 // self.width)
        dust_levels = flat_ancestor_levels(parent1, parent2, self.depth - 1, self.width)
        return np.where(dust, dust_levels, leaf_levels)


def gibbs_measure(disorder: DisorderRealization, configs: np.ndarray, compensate: bool) -> GibbsMeasure:
    n = configs.shape[1]
    upper, leaf = split_energies(disorder, configs, 1.0 / np.sqrt(n))
    cascade = disorder.cascade
    log_prob = (cascade.log_path_weights(cascade.depth)[:, None] + leaf).ravel()
    if compensate:
        s = disorder.level_scales()[-1]
        parents = cascade.log_path_weights(cascade.depth - 1) + cascade.log_tail[-1]
        dust = (parents[:, None] + upper + 0.5 * n * s * s).ravel()
        log_prob = np.concatenate([log_prob, dust])
    return GibbsMeasure(log_prob=log_prob, n_leaves=cascade.n_leaves, n_configs=configs.shape[0],
                        depth=cascade.depth, width=cascade.width)


@dataclass(frozen=True)
class OverlapSample:
    """Pairs (ancestor level, overlap) from the product Gibbs measure, replica by replica."""
    n: int
    r: int
    levels: np.ndarray  # (replicas, draws)
    overlaps: np.ndarray  # (replicas, draws)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.levels.shape, 1.0 / self.levels.size)

    def level_frequencies(self) -> Tuple[np.ndarray, np.ndarray]:
        """Quenched P(level = l) and its stderr across replicas."""
        per_replica = np.stack([np.bincount(row, minlength=self.r + 1) / row.size for row in self.levels])
        return per_replica.mean(axis=0), np.array([sample_stderr(c) for c in per_replica.T])

    def overlap_values(self) -> np.ndarray:
        return -1.0 + 2.0 * np.arange(self.n + 1) / self.n

    def overlap_histogram(self) -> np.ndarray:
        """Mass on each attainable overlap value -1, -1 + 2/N, ..., 1."""
        index = np.rint((self.overlaps.ravel() + 1.0) * self.n / 2.0).astype(int)
        return np.bincount(index, minlength=self.n + 1) / index.size

    def histogram_rows(self) -> List[Dict[str, Any]]:
        levels, level_se = self.level_frequencies()
        rows = [{"kind": "level", "bin": l, "mass": float(m), "stderr": float(s)}
                for l, (m, s) in enumerate(zip(levels, level_se))]
        rows += [{"kind": "overlap", "bin": float(q), "mass": float(m), "stderr": ""}
                 for q, m in zip(self.overlap_values(), self.overlap_histogram())]
        return rows


def product_overlap_law(n: int) -> np.ndarray:
    """Overlap law of two independent uniform configurations on the same value grid."""
    k = np.arange(n + 1)
    return comb(n, k) / 2.0 ** n


def gibbs_overlap_distribution(params: ModelParams, n: int, cascade: Optional[CascadeConfig] = None,
                               replicas: int = 100, pair_draws: int = 1000, seed: int = 0,
                               threads: Optional[int] = None) -> OverlapSample:
    validate_params(params)
    check_enumerable(n, MAX_GIBBS_N)
    cascade = cascade or CascadeConfig()
    configs = gray_configs(n)

    def one(replica: int) -> Tuple[np.ndarray, np.ndarray]:
        disorder = sample_disorder(params, n, cascade, seed, replica)
        measure = gibbs_measure(disorder, configs, cascade.tail_compensation)
        rng = stream(seed, replica, Field.PAIRS)
        node1, config1 = measure.draw(pair_draws, rng)
        node2, config2 = measure.draw(pair_draws, rng)
        levels = measure.ancestor_levels(node1, node2)
        overlaps = np.einsum("ij,ij->i", configs[config1], configs[config2]) / n
        return levels, overlaps

    results = ReplicaPool(threads).map(one, replicas)
    sample = OverlapSample(
        n=n,
        r=params.r,
        levels=np.stack([r[0] for r in results]),
        overlaps=np.stack([r[1] for r in results]),
    )
    run_logger.log_event("overlap_distribution_done", {
        "n": n, "replicas": replicas, "pair_draws": pair_draws,
        "level_frequencies": sample.level_frequencies()[0].tolist(),
    })
    return sample
