"""
Backward fractional-moment recursion

    X_l = (1/zeta_l) log E_l exp(zeta_l X_(l+1)),    X_depth = F(h),

where h is the accumulated Gaussian field of a CovarianceProfile and E_l averages the
increment of level l+1. All expectations are taken in the log domain.

Methods:
    quadrature  nested Gauss-Hermite tensor (deterministic); beyond NODE_BUDGET nodes it
                falls back to grid-mc
    montecarlo  nested Monte Carlo on a tree with m samples per level, stderr over repeats
    grid        per-level Gauss-Hermite on an interpolation grid of h (deterministic, fast)
    grid-mc     per-level Monte Carlo on the same grid, stderr over repeats
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from mssk.core.errors import DivergentTerminal, InvalidZeta, UnsupportedTerminal
from mssk.core.estimates import sample_stderr
from mssk.interfaces.terminal import ITerminal
from mssk.rpc.field import CovarianceProfile, sample_tree_field
from mssk.utils.rng import Field, stream
from mssk.utils.run_logger import run_logger

QUADRATURE_NODES = 32
NODE_BUDGET = 10 ** 7
GRID_POINTS = 1025
GRID_SAMPLES = 10 ** 4
METHODS = ("quadrature", "montecarlo", "grid", "grid-mc")


@dataclass(frozen=True)
class RecursionValue:
    value: float
    stderr: float
    method: str
    nodes: int


@lru_cache(maxsize=32)
def gauss_hermite(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and log-weights with sum_i exp(log_w_i) f(x_i) ~ E f(J), J standard normal."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    log_w = np.log(w) - 0.5 * np.log(2.0 * np.pi)
    log_w -= logsumexp(log_w)
    return x, log_w


def smooth_log(log_values: np.ndarray, log_weights: np.ndarray, xi: float, axis: int = -1) -> np.ndarray:
    """log of (E Z^xi)^(1/xi) given log Z and log-probabilities along `axis`."""
    return logsumexp(xi * log_values + log_weights, axis=axis) / xi


def fractional_smoothing(values: Sequence[float], weights: Sequence[float], xi: float) -> float:
    """(sum_i w_i Z_i^xi)^(1/xi) for positive Z and probability weights w."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return float(np.exp(smooth_log(np.log(values), np.log(weights / weights.sum()), xi)))


def _check_inputs(zeta: Sequence[float], profile: CovarianceProfile) -> Tuple[float, ...]:
    zeta = tuple(float(z) for z in zeta)
    if len(zeta) != profile.depth:
        raise InvalidZeta(f"profile depth {profile.depth} needs {profile.depth} zeta entries, got {len(zeta)}")
    chain = (0.0, *zeta, 1.0)
    if any(not lo < hi for lo, hi in zip(chain, chain[1:])):
        raise InvalidZeta(f"zeta must be strictly increasing inside (0, 1), got {zeta}")
    return zeta


def _finite(value: float, what: str) -> float:
    if not np.isfinite(value):
        raise DivergentTerminal(f"{what} is not finite; E exp(zeta X) probably diverges")
    return float(value)


def recursion_value(zeta: Sequence[float], terminal: ITerminal, profile: CovarianceProfile,
                    method: str = "quadrature", nodes: int = QUADRATURE_NODES,
                    samples_per_level: Optional[int] = None, repeats: int = 16,
                    seed: int = 0, node_budget: int = NODE_BUDGET) -> RecursionValue:
    """X_0 of the recursion for the given terminal and field profile."""
    zeta = _check_inputs(zeta, profile)
    if method not in METHODS:
        raise ValueError(f"unknown recursion method '{method}' (expected one of {METHODS})")

    if method == "quadrature":
        if not terminal.smooth:
            raise UnsupportedTerminal(f"quadrature needs a smooth terminal, {terminal.describe()} is not")
        active = sum(1 for s in profile.increment_scales() if s > 0) + (profile.values[0] > 0)
        if nodes ** active > node_budget:
            run_logger.log_event("quadrature_fallback", {
                "depth": profile.depth, "nodes": nodes, "budget": node_budget,
            }, level="WARN")
            method = "grid-mc"
        else:
            return _nested_quadrature(zeta, terminal, profile, nodes)

    if method == "grid":
        return _grid_recursion(zeta, terminal, profile, nodes)
    if method == "grid-mc":
        return _grid_monte_carlo(zeta, terminal, profile, samples_per_level or GRID_SAMPLES, repeats, seed)
    return _nested_monte_carlo(zeta, terminal, profile, samples_per_level, repeats, seed, node_budget)


def _nested_quadrature(zeta, terminal, profile, nodes) -> RecursionValue:
    x, log_w = gauss_hermite(nodes)
    scales = profile.increment_scales()

    # A zero-variance level gets a single node of weight one, so it drops out exactly.
    axes = []
    for s in scales:
        axes.append((s * x, log_w) if s > 0 else (np.zeros(1), np.zeros(1)))
    root = (profile.root_scale() * x, log_w) if profile.values[0] > 0 else (np.zeros(1), np.zeros(1))

    h = root[0]
    for points, _ in axes:
        h = np.add.outer(h, points)
    with np.errstate(over="ignore", invalid="ignore"):
        values = terminal(h)
        for level in range(profile.depth, 0, -1):
            values = smooth_log(values, axes[level - 1][1], zeta[level - 1])
        # the shared root term is averaged plainly
        value = float(np.dot(np.exp(root[1]), values))
    total = int(np.prod([len(a[0]) for a in axes]) * len(root[0]))
    return RecursionValue(_finite(value, "quadrature value"), 0.0, "quadrature", total)


def _interp_linear(xq: np.ndarray, grid: np.ndarray, values: np.ndarray) -> np.ndarray:
    """np.interp with linear extrapolation past both ends."""
    out = np.interp(xq, grid, values)
    lo_slope = (values[1] - values[0]) / (grid[1] - grid[0])
    hi_slope = (values[-1] - values[-2]) / (grid[-1] - grid[-2])
    below = xq < grid[0]
    above = xq > grid[-1]
    out[below] = values[0] + lo_slope * (xq[below] - grid[0])
    out[above] = values[-1] + hi_slope * (xq[above] - grid[-1])
    return out


def _grid_pass(zeta, terminal, profile, draws: np.ndarray, log_w: np.ndarray) -> float:
    total_sd = float(np.sqrt(profile.values[-1]))
    half_width = 8.0 * total_sd + 1e-9
    grid = np.linspace(-half_width, half_width, GRID_POINTS)
    scales = profile.increment_scales()

    with np.errstate(over="ignore", invalid="ignore"):
        values = terminal(grid)
        for level in range(profile.depth, 0, -1):
            s = scales[level - 1]
            if s == 0:
                continue
            shifted = _interp_linear((grid[:, None] + s * draws[None, :]).ravel(), grid, values)
            values = smooth_log(shifted.reshape(grid.size, draws.size), log_w, zeta[level - 1])
        root_points = profile.root_scale() * draws if profile.values[0] > 0 else np.zeros(1)
        root_w = np.exp(log_w) if profile.values[0] > 0 else np.ones(1)
        return float(np.dot(root_w, _interp_linear(root_points, grid, values)))


def _grid_recursion(zeta, terminal, profile, nodes) -> RecursionValue:
    x, log_w = gauss_hermite(nodes)
    if profile.values[-1] == 0:
        return RecursionValue(_finite(float(terminal(np.zeros(1))[0]), "grid value"), 0.0, "grid", 1)
    value = _grid_pass(zeta, terminal, profile, x, log_w)
    return RecursionValue(_finite(value, "grid value"), 0.0, "grid", GRID_POINTS * nodes)


def _grid_monte_carlo(zeta, terminal, profile, samples, repeats, seed) -> RecursionValue:
    if profile.values[-1] == 0:
        return RecursionValue(_finite(float(terminal(np.zeros(1))[0]), "grid value"), 0.0, "grid-mc", 1)
    log_w = np.full(samples, -np.log(samples))
    values = []
    for rep in range(repeats):
        draws = stream(seed, rep, Field.NESTED, 0).standard_normal(samples)
        values.append(_grid_pass(zeta, terminal, profile, draws, log_w))
    values = np.array(values)
    return RecursionValue(_finite(float(values.mean()), "grid-mc value"), sample_stderr(values),
                          "grid-mc", GRID_POINTS * samples)


def _nested_monte_carlo(zeta, terminal, profile, samples_per_level, repeats, seed, node_budget) -> RecursionValue:
    depth = profile.depth
    if samples_per_level is None:
        samples_per_level = max(2, min(256, int(np.floor(node_budget ** (1.0 / max(depth, 1)) / 4))))
    m = samples_per_level
    if m ** depth > node_budget:
        m = max(2, int(np.floor(node_budget ** (1.0 / depth))))

    values = []
    for rep in range(repeats):
        field = sample_tree_field(profile, width=m, seed=seed, replica=rep, field_id=Field.NESTED,
                                  max_leaves=max(node_budget, m ** depth))
        with np.errstate(over="ignore", invalid="ignore"):
            x = terminal(field.leaf_values()).reshape((m,) * depth) if depth else terminal(field.leaf_values())
            for level in range(depth, 0, -1):
                x = (logsumexp(zeta[level - 1] * x, axis=-1) - np.log(m)) / zeta[level - 1]
        values.append(float(np.asarray(x).reshape(-1)[0]))
    values = np.array(values)
    return RecursionValue(_finite(float(values.mean()), "nested Monte Carlo value"), sample_stderr(values),
                          "montecarlo", m ** depth)


def collapse_degenerate_levels(profile: CovarianceProfile, zeta: Sequence[float]) -> Tuple[CovarianceProfile, Tuple[float, ...]]:
    """Drop every level l with v_l == v_(l-1) together with zeta_(l-1)."""
    zeta = tuple(float(z) for z in zeta)
    if len(zeta) != profile.depth:
        raise InvalidZeta(f"profile depth {profile.depth} needs {profile.depth} zeta entries, got {len(zeta)}")
    dropped = set(profile.degenerate_levels())
    if not dropped:
        return profile, zeta
    values = [profile.values[0]] + [v for l, v in enumerate(profile.values) if l >= 1 and l not in dropped]
    kept_zeta = tuple(z for l, z in enumerate(zeta, start=1) if l not in dropped)
    return CovarianceProfile(tuple(values)), kept_zeta
