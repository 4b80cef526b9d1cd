"""
Trial points of the variational space.

A trial point refines zeta to xi = sorted(zeta + xi_free) and carries a monotone q with
q_0 = 0, q_k = 1. gamma~ is constant on every block K_l = { j : zeta_(l-1) < xi_j <= zeta_l },
where xi_k = 1 lands in K_r, so gamma~_k = gamma_r always.
"""

import bisect
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from mssk.core.errors import DuplicateXi, EndpointViolation, LengthMismatch, NonMonotoneQ
from mssk.core.model import ModelParams, validate_params
from mssk.rpc.field import CovarianceProfile, y_profile, z_profile


@dataclass(frozen=True)
class TrialPoint:
    params: ModelParams
    xi: Tuple[float, ...]
    q: Tuple[float, ...]
    gamma_tilde: Tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.xi)

    def xi_at(self, j: int) -> float:
        """xi_j for -1 <= j <= k."""
        if j == -1:
            return 0.0
        if j == self.k:
            return 1.0
        return self.xi[j]

    @property
    def xi_free(self) -> Tuple[float, ...]:
        zeta = set(self.params.zeta)
        return tuple(x for x in self.xi if x not in zeta)

    def blocks(self) -> List[List[int]]:
        """K_0, ..., K_r as lists of indices j in 0..k."""
        result: List[List[int]] = [[] for _ in range(self.params.r + 1)]
        for j in range(self.k + 1):
            result[_block_of(self.params, self.xi_at(j))].append(j)
        return result

    def z_profile(self) -> CovarianceProfile:
        return z_profile(self.gamma_tilde, self.q)

    def y_profile(self) -> CovarianceProfile:
        return y_profile(self.gamma_tilde, self.q)

    def correction(self) -> float:
        """(1/2) sum_(j<k) xi_j ((gamma~_(j+1) q_(j+1))^2 - (gamma~_j q_j)^2)."""
        a = np.array(self.y_profile().values)
        return 0.5 * float(np.dot(np.array(self.xi), np.diff(a)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "xi": list(self.xi),
            "xi_free": list(self.xi_free),
            "q": list(self.q),
            "gamma_tilde": list(self.gamma_tilde),
        }


def _block_of(params: ModelParams, x: float) -> int:
    """l with zeta_(l-1) < x <= zeta_l."""
    return bisect.bisect_left(list(params.zeta), x)


def build_trial(params: ModelParams, xi_free: Sequence[float], q: Sequence[float]) -> TrialPoint:
    validate_params(params)
    free = sorted(float(x) for x in xi_free)
    for x in free:
        if not 0.0 < x < 1.0:
            raise EndpointViolation(f"free xi entries must lie inside (0, 1), got {x}")
    xi = sorted(free + list(params.zeta))
    if any(not lo < hi for lo, hi in zip(xi, xi[1:])):
        raise DuplicateXi(f"merged xi {xi} has repeated entries")
    k = len(xi)

    q = tuple(float(x) for x in q)
    if len(q) != k + 1:
        raise LengthMismatch(f"k={k} needs {k + 1} q entries, got {len(q)}")
    if q[0] != 0.0 or q[-1] != 1.0:
        raise EndpointViolation(f"q must start at 0 and end at 1, got q_0={q[0]}, q_k={q[-1]}")
    if any(hi < lo for lo, hi in zip(q, q[1:])):
        raise NonMonotoneQ(f"q must be nondecreasing, got {q}")

    gamma_tilde = tuple(params.gamma_at(_block_of(params, x)) for x in (*xi, 1.0))
    return TrialPoint(params=params, xi=tuple(xi), q=q, gamma_tilde=gamma_tilde)


def trial_from_dict(params: ModelParams, data: Dict[str, Any]) -> TrialPoint:
    return build_trial(params, data.get("xi_free", []), data["q"])


def sum_rule_terms(trial: TrialPoint) -> Dict[str, float]:
    """
    <(gamma~ q)^2> under the trial cascade, sum_j (xi_j - xi_(j-1)) (gamma~_j q_j)^2,
    with its closed form gamma~_k^2 - 2 * correction.
    """
    a = np.array(trial.y_profile().values)
    spacings = np.diff(np.array([trial.xi_at(j) for j in range(-1, trial.k + 1)]))
    direct = float(np.dot(spacings, a))
    correction = trial.correction()
    closed = trial.gamma_tilde[-1] ** 2 - 2.0 * correction
    return {"direct": direct, "closed_form": closed, "correction": correction,
            "residual": direct - closed}
