"""
Exact enumeration of the 2^N spin configurations in Gray-code order.

Configuration i has spin j equal to +1 when bit j of gray(i) is clear, -1 otherwise;
consecutive configurations differ in exactly one spin, the lowest set bit of i.
"""

from typing import Optional

import numpy as np

from mssk.core.model import check_enumerable

# Above this size quadratic forms are updated one spin flip at a time.
DENSE_LIMIT = 12


def to_gray_code(x):
    return (x >> 1) ^ x


def flipped_spin(step: int) -> int:
    """Spin that changes between configurations step-1 and step."""
    return (to_gray_code(step) ^ to_gray_code(step - 1)).bit_length() - 1


def gray_configs(n: int) -> np.ndarray:
    """(2^n, n) array of +-1 spins in Gray-code order."""
    check_enumerable(n)
    codes = to_gray_code(np.arange(1 << n, dtype=np.int64))
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)[None, :]) & 1
    return (1 - 2 * bits).astype(float)


def quadratic_energies(couplings: np.ndarray, configs: Optional[np.ndarray] = None,
                       method: str = "auto") -> np.ndarray:
    """
    sigma^T J_k sigma for every matrix J_k in `couplings` (shape (K, n, n)) and every
    configuration, as a (K, 2^n) array in Gray-code order. The diagonal is included.
    """
    couplings = np.asarray(couplings, dtype=float)
    n = couplings.shape[-1]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "gray"
    if method == "dense":
        if configs is None:
            configs = gray_configs(n)
        return np.einsum("cn,knm,cm->kc", configs, couplings, configs, optimize=True)
    if method == "gray":
        return _gray_energies(couplings)
    raise ValueError(f"unknown enumeration method '{method}'")


def _gray_energies(couplings: np.ndarray) -> np.ndarray:
    check_enumerable(couplings.shape[-1])
    k, n, _ = couplings.shape
    sym = couplings + np.swapaxes(couplings, 1, 2)
    diag = np.einsum("kii->ki", couplings)
    spins = np.ones((k, n))
    local = sym.sum(axis=2)
    energy = couplings.sum(axis=(1, 2))

    out = np.empty((k, 1 << n))
    out[:, 0] = energy
    for step in range(1, 1 << n):
        j = flipped_spin(step)
        s = spins[:, j]
        energy = energy - 2.0 * s * (local[:, j] - 2.0 * diag[:, j] * s)
        local -= 2.0 * s[:, None] * sym[:, :, j]
        spins[:, j] = -s
        out[:, step] = energy
    return out


def linear_fields(vectors: np.ndarray, configs: np.ndarray) -> np.ndarray:
    """b_k . sigma for every row b_k of `vectors` (shape (K, n)), as (K, 2^n)."""
    return np.asarray(vectors, dtype=float) @ configs.T
