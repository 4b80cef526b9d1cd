from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from mssk.core.errors import NonMonotoneProfile
from mssk.core.model import LeafIndex
from mssk.rpc.cascade import DEFAULT_MAX_LEAVES, check_tree_size
from mssk.utils.rng import Field, stream


@dataclass(frozen=True)
class CovarianceProfile:
    """Field covariance v_l between two leaves whose common ancestor sits at level l."""
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) < 1:
            raise NonMonotoneProfile("a covariance profile needs at least v_0")
        if values[0] < 0 or any(hi < lo for lo, hi in zip(values, values[1:])):
            raise NonMonotoneProfile(f"profile must satisfy 0 <= v_0 <= v_1 <= ..., got {values}")

    @property
    def depth(self) -> int:
        return len(self.values) - 1

    def increment_scales(self) -> np.ndarray:
        """sqrt(v_l - v_(l-1)) for l = 1..depth."""
        v = np.array(self.values)
        return np.sqrt(np.diff(v))

    def root_scale(self) -> float:
        return float(np.sqrt(self.values[0]))

    def degenerate_levels(self) -> List[int]:
        """Levels l >= 1 with v_l == v_(l-1)."""
        return [l for l in range(1, len(self.values)) if self.values[l] == self.values[l - 1]]


def coupling_profile(gamma_levels: Sequence[float]) -> CovarianceProfile:
    """(gamma_l^2): covariance of the disorder g(alpha)."""
    return CovarianceProfile(tuple(float(g) ** 2 for g in gamma_levels))


def z_profile(gamma_tilde: Sequence[float], q: Sequence[float]) -> CovarianceProfile:
    """(2 gamma~_j^2 q_j): covariance of the cavity field z."""
    return CovarianceProfile(tuple(2.0 * g * g * x for g, x in zip(gamma_tilde, q)))


def y_profile(gamma_tilde: Sequence[float], q: Sequence[float]) -> CovarianceProfile:
    """((gamma~_j q_j)^2): covariance of the field y."""
    return CovarianceProfile(tuple((g * x) ** 2 for g, x in zip(gamma_tilde, q)))


@dataclass(frozen=True)
class TreeGaussianField:
    """
    Standard Gaussian draws J_beta on every node of a width-ary tree.
    The leaf value is sum over the path of J_beta * sqrt(v_|beta| - v_(|beta|-1)),
    plus a shared root term of variance v_0, so leaf covariance is v at the ancestor level.
    """
    profile: CovarianceProfile
    width: int
    # draws[l] has shape (width^l, *value_shape), l = 0..depth
    draws: Tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return self.profile.depth

    @property
    def value_shape(self) -> Tuple[int, ...]:
        return self.draws[0].shape[1:]

    def node_increments(self, level: int) -> np.ndarray:
        """Scaled increments of the nodes at `level` (level 0 is the shared root term)."""
        if level == 0:
            return self.draws[0] * self.profile.root_scale()
        return self.draws[level] * self.profile.increment_scales()[level - 1]

    def partial_values(self, level: int) -> np.ndarray:
        """Accumulated field at every node of the given depth."""
        total = np.broadcast_to(self.node_increments(0), (self.width ** level,) + self.value_shape).copy()
        for l in range(1, level + 1):
            total += np.repeat(self.node_increments(l), self.width ** (level - l), axis=0)
        return total

    def leaf_values(self) -> np.ndarray:
        return self.partial_values(self.depth)

    def to_csv_rows(self) -> List[Tuple[str, float]]:
        if self.value_shape:
            raise ValueError("CSV export is defined for scalar fields only")
        values = self.leaf_values()
        return [
            ("/".join(str(c) for c in LeafIndex.from_flat(i, self.depth, self.width).path), float(v))
            for i, v in enumerate(values)
        ]


def sample_tree_field(profile: CovarianceProfile, width: int, seed: int = 0, replica: int = 0,
                      field_id: int = 0, value_shape: Tuple[int, ...] = (),
                      max_leaves: int = DEFAULT_MAX_LEAVES) -> TreeGaussianField:
    """Draws for a field of the given profile on the full width-ary tree of depth profile.depth."""
    check_tree_size(profile.depth, width, max_leaves)
    draws = []
    for level in range(profile.depth + 1):
        rng = stream(seed, replica, Field.TREE_FIELD, field_id, level)
        draws.append(rng.standard_normal((width ** level,) + tuple(value_shape)))
    return TreeGaussianField(profile=profile, width=width, draws=tuple(draws))
