"""
Truncated Ruelle probability cascades.

The children of a node at depth l are the atoms of a Poisson process with intensity
zeta_l x^(-1-zeta_l) dx, realized as Gamma_n^(-1/zeta_l) with Gamma_n the partial sums
of unit exponentials. Only the `width` largest atoms are kept per node; leaf weights are
the products of the atoms along the path, normalized over the retained leaves.
The expected mass of the discarded atoms, zeta/(1-zeta) * Gamma_M^(1-1/zeta), is kept
per node so estimators can report or compensate truncation.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from mssk.core.errors import CascadeTooLarge, InvalidZeta, WidthTooSmall
from mssk.core.model import LeafIndex, flat_ancestor_levels
from mssk.utils.rng import Field, stream

DEFAULT_WIDTH = 32
DEFAULT_MAX_LEAVES = 1 << 22


@dataclass(frozen=True)
class CascadeConfig:
    width: int = DEFAULT_WIDTH
    tail_compensation: bool = True
    max_leaves: int = DEFAULT_MAX_LEAVES

    def to_dict(self) -> Dict[str, Any]:
        return {"width": self.width, "tail_compensation": self.tail_compensation,
                "max_leaves": self.max_leaves}


@dataclass(frozen=True)
class CascadeSample:
    depth: int
    width: int
    zeta: Tuple[float, ...]
    # log_atoms[l-1] has shape (width^(l-1), width): unnormalized children of every depth-(l-1) node
    log_atoms: Tuple[np.ndarray, ...]
    # log_tail[l-1] has shape (width^(l-1),): expected discarded mass of every depth-(l-1) node
    log_tail: Tuple[np.ndarray, ...]
    log_leaf_weights: np.ndarray
    leftover_mass_bound: float

    @property
    def n_leaves(self) -> int:
        return self.width ** self.depth

    @property
    def leaf_weights(self) -> np.ndarray:
        return np.exp(self.log_leaf_weights)

    def node_weights(self, level: int) -> np.ndarray:
        """Per-node normalized child weights at `level` (1-based), shape (width^(level-1), width)."""
        atoms = self.log_atoms[level - 1]
        return np.exp(atoms - logsumexp(atoms, axis=1, keepdims=True))

    def log_unnormalized_total(self) -> float:
        """log sum_alpha w_alpha over the retained leaves."""
        return float(logsumexp(self.log_path_weights(self.depth)))

    def log_path_weights(self, depth: int) -> np.ndarray:
        """log of the product of atoms from the root down to every node at `depth`."""
        log_w = np.zeros(self.width ** depth)
        for l in range(1, depth + 1):
            log_w += np.repeat(self.log_atoms[l - 1].ravel(), self.width ** (depth - l))
        return log_w

    def log_sums(self, leaf_log_values: np.ndarray,
                 parent_log_means: Optional[np.ndarray] = None) -> Tuple[float, float]:
        """
        Unnormalized (log sum_alpha w_alpha e^(X_alpha), log sum_alpha w_alpha).

        With parent_log_means = log E[e^X | parent] for every depth-(depth-1) node, the
        discarded atoms of the deepest level are added back at their expected mass T_beta,
        each carrying the conditional mean of e^X below its parent.
        """
        log_w = self.log_path_weights(self.depth)
        numerator = float(logsumexp(log_w + leaf_log_values))
        denominator = float(logsumexp(log_w))
        if parent_log_means is not None and self.depth >= 1:
            parents = self.log_path_weights(self.depth - 1) + self.log_tail[-1]
            numerator = float(np.logaddexp(numerator, logsumexp(parents + parent_log_means)))
            denominator = float(np.logaddexp(denominator, logsumexp(parents)))
        return numerator, denominator

    def leaf(self, index: int) -> LeafIndex:
        return LeafIndex.from_flat(index, self.depth, self.width)

    def to_document(self) -> Dict[str, Any]:
        """Structured dump: every internal node with its normalized child weights and tail mass."""
        nodes: List[Dict[str, Any]] = []
        for level in range(1, self.depth + 1):
            weights = self.node_weights(level)
            tails = np.exp(self.log_tail[level - 1] - logsumexp(self.log_atoms[level - 1], axis=1))
            for parent in range(self.width ** (level - 1)):
                path = list(LeafIndex.from_flat(parent, level - 1, self.width).path)
                nodes.append({
                    "path": path,
                    "child_weights": [float(w) for w in weights[parent]],
                    "tail_fraction": float(tails[parent] / (1.0 + tails[parent])),
                })
        return {
            "depth": self.depth,
            "width": self.width,
            "zeta": list(self.zeta),
            "leftover_mass_bound": self.leftover_mass_bound,
            "nodes": nodes,
        }


def validate_zeta(zeta: Sequence[float], depth: int) -> Tuple[float, ...]:
    zeta = tuple(float(z) for z in zeta)
    if len(zeta) != depth:
        raise InvalidZeta(f"expected {depth} zeta entries, got {len(zeta)}")
    chain = (0.0, *zeta, 1.0)
    if any(not lo < hi for lo, hi in zip(chain, chain[1:])):
        raise InvalidZeta(f"zeta must be strictly increasing inside (0, 1), got {zeta}")
    return zeta


def check_tree_size(depth: int, width: int, max_leaves: int = DEFAULT_MAX_LEAVES) -> None:
    if width < 2:
        raise WidthTooSmall(f"cascade width must be at least 2, got {width}")
    if width ** depth > max_leaves:
        raise CascadeTooLarge(f"{width}^{depth} leaves exceed the limit of {max_leaves}")


def sample_cascade(zeta: Sequence[float], depth: int, width: int = DEFAULT_WIDTH,
                   seed: int = 0, replica: int = 0,
                   max_leaves: int = DEFAULT_MAX_LEAVES) -> CascadeSample:
    zeta = validate_zeta(zeta, depth)
    check_tree_size(depth, width, max_leaves)

    log_atoms = []
    log_tail = []
    for level in range(1, depth + 1):
        z = zeta[level - 1]
        rng = stream(seed, replica, Field.CASCADE, level)
        gamma = np.cumsum(rng.exponential(size=(width ** (level - 1), width)), axis=1)
        log_gamma = np.log(gamma)
        log_atoms.append(-log_gamma / z)
        log_tail.append(np.log(z / (1.0 - z)) + (1.0 - 1.0 / z) * log_gamma[:, -1])

    log_w = np.zeros(width ** depth)
    for level in range(1, depth + 1):
        log_w += np.repeat(log_atoms[level - 1].ravel(), width ** (depth - level))
    log_leaf = log_w - logsumexp(log_w)

    leaf = np.exp(log_leaf)
    retained = 1.0
    for level in range(1, depth + 1):
        share = leaf.reshape(width ** (level - 1), -1).sum(axis=1)
        tail_ratio = np.exp(log_tail[level - 1] - logsumexp(log_atoms[level - 1], axis=1))
        retained *= 1.0 - float(np.dot(share, tail_ratio / (1.0 + tail_ratio)))

    return CascadeSample(
        depth=depth,
        width=width,
        zeta=zeta,
        log_atoms=tuple(log_atoms),
        log_tail=tuple(log_tail),
        log_leaf_weights=log_leaf,
        leftover_mass_bound=1.0 - retained,
    )


def pair_level_frequencies(cascade: CascadeSample, draws: int, rng: np.random.Generator) -> np.ndarray:
    """Fractions of independent leaf pairs drawn from nu at each ancestor level 0..depth."""
    weights = cascade.leaf_weights
    weights = weights / weights.sum()
    first = rng.choice(weights.size, size=draws, p=weights)
    second = rng.choice(weights.size, size=draws, p=weights)
    levels = flat_ancestor_levels(first, second, cascade.depth, cascade.width)
    return np.bincount(levels, minlength=cascade.depth + 1) / draws


def exact_pair_level_law(cascade: CascadeSample) -> np.ndarray:
    """P(level = l) under nu x nu for this realization, without sampling."""
    nu = cascade.leaf_weights
    at_least = [1.0]
    for depth in range(1, cascade.depth + 1):
        share = nu.reshape(cascade.width ** depth, -1).sum(axis=1)
        at_least.append(float(np.dot(share, share)))
    at_least.append(0.0)
    return np.array([at_least[l] - at_least[l + 1] for l in range(cascade.depth + 1)])
