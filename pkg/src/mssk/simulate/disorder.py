from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from mssk.core.model import ModelParams, validate_params
from mssk.rpc.cascade import CascadeConfig, CascadeSample, sample_cascade
from mssk.simulate.enumeration import linear_fields, quadratic_energies
from mssk.utils.rng import Field, stream


@dataclass(frozen=True)
class DisorderRealization:
    """
    A cascade plus standard Gaussian coupling matrices on every tree node.

    couplings[l-1] has shape (width^l, size, size). The coupling array of leaf alpha is
    sum over its path of couplings * sqrt(gamma_l^2 - gamma_(l-1)^2), so two leaves share
    entry covariance gamma^2 at their common ancestor level.
    """
    params: ModelParams
    cascade: CascadeSample
    couplings: Tuple[np.ndarray, ...]
    seed: int
    replica: int

    @property
    def width(self) -> int:
        return self.cascade.width

    @property
    def size(self) -> int:
        return self.couplings[0].shape[-1]

    def level_scales(self) -> np.ndarray:
        """sqrt(gamma_l^2 - gamma_(l-1)^2) for l = 1..r."""
        return np.sqrt(np.diff(self.params.gamma_levels() ** 2))

    def node_quadratic(self, level: int, configs: np.ndarray, block: Optional[int] = None,
                       scale: float = 1.0) -> np.ndarray:
        """
        Scaled sigma^T G sigma for every node at `level` (1-based) and configuration.
        `block` restricts G to its leading block x block corner.
        """
        g = self.couplings[level - 1]
        if block is not None:
            g = g[:, :block, :block]
        return self.level_scales()[level - 1] * scale * quadratic_energies(g, configs)

    def node_linear(self, level: int, configs: np.ndarray, scale: float = 1.0) -> np.ndarray:
        """Scaled (G[:n, n] + G[n, :n]) . sigma against the last spin index n = size-1."""
        g = self.couplings[level - 1]
        last = self.size - 1
        vectors = g[:, :last, last] + g[:, last, :last]
        return self.level_scales()[level - 1] * scale * linear_fields(vectors, configs)

    def path_sum(self, per_level, depth: int) -> np.ndarray:
        """sum_{l <= depth} per_level(l) broadcast down to the nodes at `depth`."""
        total = None
        for level in range(1, depth + 1):
            values = np.repeat(per_level(level), self.width ** (depth - level), axis=0)
            total = values if total is None else total + values
        return total

    def leaf_couplings(self) -> np.ndarray:
        """Materialized coupling arrays of every leaf, shape (width^r, size, size)."""
        scales = self.level_scales()
        return self.path_sum(lambda l: scales[l - 1] * self.couplings[l - 1], self.params.r)


def sample_couplings(params: ModelParams, size: int, width: int, seed: int, replica: int,
                     field: int = Field.COUPLINGS) -> Tuple[np.ndarray, ...]:
    return tuple(
        stream(seed, replica, field, level).standard_normal((width ** level, size, size))
        for level in range(1, params.r + 1)
    )


def sample_disorder(params: ModelParams, size: int, cascade: Optional[CascadeConfig] = None,
                    seed: int = 0, replica: int = 0) -> DisorderRealization:
    validate_params(params)
    cascade = cascade or CascadeConfig()
    sample = sample_cascade(params.zeta, params.r, cascade.width, seed, replica, cascade.max_leaves)
    return DisorderRealization(
        params=params,
        cascade=sample,
        couplings=sample_couplings(params, size, cascade.width, seed, replica),
        seed=seed,
        replica=replica,
    )
