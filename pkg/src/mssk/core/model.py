"""
Model parameters, configurations and covariance kernels of the multi-scale SK model.

A model is the pair beta = (zeta, gamma) of depth r:
    0 = zeta_{-1} < zeta_0 < ... < zeta_{r-1} < zeta_r = 1
    0 = gamma_0 < gamma_1 < ... < gamma_r
Only the free entries are stored; the fixed endpoints are produced by the accessors.
"""

from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np

from mssk.core.errors import (
    DepthMismatch,
    LengthMismatch,
    NonMonotoneGamma,
    NonMonotoneZeta,
    NTooLarge,
)

# Exact spin enumeration visits 2^N states.
MAX_ENUMERATION_N = 24


@dataclass(frozen=True)
class ModelParams:
    """beta = (zeta, gamma) with tree depth r."""
    r: int
    zeta: Tuple[float, ...]
    gamma: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "zeta", tuple(float(z) for z in self.zeta))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))

    def zeta_at(self, l: int) -> float:
        """zeta_l for -1 <= l <= r."""
        if l == -1:
            return 0.0
        if l == self.r:
            return 1.0
        return self.zeta[l]

    def gamma_at(self, l: int) -> float:
        """gamma_l for 0 <= l <= r."""
        if l == 0:
            return 0.0
        return self.gamma[l - 1]

    def gamma_levels(self) -> np.ndarray:
        """(gamma_0, ..., gamma_r) as an array."""
        return np.array([0.0, *self.gamma])

    def to_dict(self) -> Dict[str, Any]:
        return {"r": self.r, "zeta": list(self.zeta), "gamma": list(self.gamma)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        params = cls(r=int(data["r"]), zeta=tuple(data["zeta"]), gamma=tuple(data["gamma"]))
        validate_params(params)
        return params


def validate_params(params: ModelParams) -> None:
    """Raise unless both strict chains hold and the lengths match r."""
    if params.r < 1 or len(params.zeta) != params.r or len(params.gamma) != params.r:
        raise DepthMismatch(
            f"r={params.r} needs {params.r} zeta and {params.r} gamma entries, "
            f"got {len(params.zeta)} and {len(params.gamma)}"
        )

    chain = [params.zeta_at(l) for l in range(-1, params.r + 1)]
    for lo, hi in zip(chain, chain[1:]):
        if not lo < hi:
            raise NonMonotoneZeta(f"zeta must satisfy 0 < zeta_0 < ... < zeta_(r-1) < 1, got {params.zeta}")

    chain = [params.gamma_at(l) for l in range(params.r + 1)]
    for lo, hi in zip(chain, chain[1:]):
        if not lo < hi:
            raise NonMonotoneGamma(f"gamma must satisfy 0 < gamma_1 < ... < gamma_r, got {params.gamma}")
    if not np.isfinite(chain[-1]):
        raise NonMonotoneGamma("gamma_r must be finite")


def check_enumerable(n_spins: int, limit: int = MAX_ENUMERATION_N) -> None:
    if n_spins < 1:
        raise LengthMismatch(f"N must be at least 1, got {n_spins}")
    if n_spins > limit:
        raise NTooLarge(f"N={n_spins} exceeds the exact-enumeration limit {limit}")


@dataclass(frozen=True)
class LeafIndex:
    """A leaf alpha of the index tree, as its path of child indices."""
    path: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))

    @property
    def depth(self) -> int:
        return len(self.path)

    def flat(self, width: int) -> int:
        """Position of the leaf in the canonical (lexicographic) leaf order."""
        index = 0
        for child in self.path:
            if not 0 <= child < width:
                raise LengthMismatch(f"child index {child} outside [0, {width})")
            index = index * width + child
        return index

    @classmethod
    def from_flat(cls, index: int, depth: int, width: int) -> "LeafIndex":
        path = []
        for _ in range(depth):
            index, child = divmod(index, width)
            path.append(child)
        return cls(tuple(reversed(path)))


@dataclass(frozen=True)
class SpinConfig:
    spins: Tuple[int, ...]

    def __post_init__(self):
        spins = tuple(int(s) for s in self.spins)
        if len(spins) < 1 or any(s not in (-1, 1) for s in spins):
            raise LengthMismatch("a spin configuration needs N >= 1 entries in {-1, +1}")
        object.__setattr__(self, "spins", spins)

    @property
    def n(self) -> int:
        return len(self.spins)

    def as_array(self) -> np.ndarray:
        return np.array(self.spins, dtype=float)


def ancestor_level(a: LeafIndex, b: LeafIndex) -> int:
    """Level of the deepest common ancestor; r when a == b."""
    if a.depth != b.depth:
        raise LengthMismatch(f"leaf depths differ: {a.depth} vs {b.depth}")
    for level, (x, y) in enumerate(zip(a.path, b.path)):
        if x != y:
            return level
    return a.depth


def overlap(s1: SpinConfig, s2: SpinConfig) -> float:
    if s1.n != s2.n:
        raise LengthMismatch(f"spin configurations have different lengths: {s1.n} vs {s2.n}")
    return float(np.dot(s1.as_array(), s2.as_array()) / s1.n)


def scaled_covariance(params: ModelParams, a: LeafIndex, b: LeafIndex,
                      s1: SpinConfig, s2: SpinConfig) -> float:
    """c_{N,gamma} = gamma_{a ^ b} * q_N(s1, s2)."""
    if a.depth != params.r:
        raise LengthMismatch(f"leaf depth {a.depth} does not match r={params.r}")
    return params.gamma_at(ancestor_level(a, b)) * overlap(s1, s2)


def leaf_level_matrix(depth: int, width: int) -> np.ndarray:
    """Ancestor levels between all pairs of leaves of the full width-ary tree, canonical order."""
    leaves = np.arange(width ** depth)
    levels = np.zeros((leaves.size, leaves.size), dtype=np.int64)
    for l in range(1, depth + 1):
        prefix = leaves // width ** (depth - l)
        levels += prefix[:, None] == prefix[None, :]
    return levels


def flat_ancestor_levels(i: np.ndarray, j: np.ndarray, depth: int, width: int) -> np.ndarray:
    """Vectorized ancestor level for flat leaf indices."""
    i = np.asarray(i)
    j = np.asarray(j)
    levels = np.zeros(np.broadcast(i, j).shape, dtype=np.int64)
    for l in range(1, depth + 1):
        step = width ** (depth - l)
        levels += (i // step) == (j // step)
    return levels
