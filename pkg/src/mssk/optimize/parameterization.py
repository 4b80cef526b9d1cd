"""
Unconstrained coordinates for trial points.

Free xi levels live in the gaps (zeta_(l-1), zeta_l], l = 1..r (zeta_r = 1); a gap holding
a free points gets a+1 logits whose softmax gives the spacings, so the points are strictly
inside the gap and ordered. Levels below zeta_0 carry gamma~ = 0 and are never allocated.
q is the normalized cumulative sum of squared increments u_j, which allows exact zeros.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from mssk.core.errors import InfeasibleStart, ValidationError
from mssk.core.model import ModelParams
from mssk.parisi.trial import TrialPoint, build_trial
from mssk.utils.rng import Field, stream

LOGIT_CLIP = 12.0


@dataclass(frozen=True)
class Layout:
    """How many free xi levels each gap l = 1..r holds."""
    params: ModelParams
    allocation: Tuple[int, ...]

    @property
    def k(self) -> int:
        return self.params.r + sum(self.allocation)

    @property
    def size(self) -> int:
        return sum(a + 1 for a in self.allocation if a > 0) + self.k

    def gap(self, l: int) -> Tuple[float, float]:
        return self.params.zeta_at(l - 1), self.params.zeta_at(l)

    def with_extra(self, l: int) -> "Layout":
        allocation = list(self.allocation)
        allocation[l - 1] += 1
        return Layout(self.params, tuple(allocation))


def default_layout(params: ModelParams, k: int) -> Layout:
    """Free levels spread round-robin from the last gap down."""
    if k < params.r:
        raise InfeasibleStart(f"trial depth k={k} is below r={params.r}")
    allocation = [0] * params.r
    for i in range(k - params.r):
        allocation[params.r - 1 - i % params.r] += 1
    return Layout(params, tuple(allocation))


def random_layout(params: ModelParams, k: int, rng: np.random.Generator) -> Layout:
    if k < params.r:
        raise InfeasibleStart(f"trial depth k={k} is below r={params.r}")
    allocation = rng.multinomial(k - params.r, np.full(params.r, 1.0 / params.r))
    return Layout(params, tuple(int(a) for a in allocation))


def layout_of(trial: TrialPoint) -> Layout:
    allocation = [0] * trial.params.r
    zeta = set(trial.params.zeta)
    for x in trial.xi:
        if x in zeta:
            continue
        l = next(l for l in range(1, trial.params.r + 1) if x <= trial.params.zeta_at(l))
        if x <= trial.params.zeta_at(0):
            raise InfeasibleStart(f"free xi {x} lies below zeta_0 and has no coordinates")
        allocation[l - 1] += 1
    return Layout(trial.params, tuple(allocation))


def decode(vector: Sequence[float], layout: Layout) -> TrialPoint:
    vector = np.asarray(vector, dtype=float)
    if vector.size != layout.size:
        raise InfeasibleStart(f"layout needs {layout.size} coordinates, got {vector.size}")
    pos = 0
    free: List[float] = []
    for l, count in enumerate(layout.allocation, start=1):
        if count == 0:
            continue
        logits = np.clip(vector[pos:pos + count + 1], -LOGIT_CLIP, LOGIT_CLIP)
        pos += count + 1
        lo, hi = layout.gap(l)
        free.extend(lo + (hi - lo) * np.cumsum(softmax(logits))[:count])

    u2 = vector[pos:pos + layout.k] ** 2
    total = u2.sum()
    if total <= 0 or not np.isfinite(total):
        u2 = np.ones(layout.k)
        total = float(layout.k)
    q = np.concatenate([[0.0], np.cumsum(u2) / total])
    q[-1] = 1.0
    q = np.minimum(q, 1.0)
    try:
        return build_trial(layout.params, free, q)
    except ValidationError as exc:
        raise InfeasibleStart(f"coordinates do not decode to a trial point: {exc}") from exc


def encode(trial: TrialPoint, layout: Layout) -> np.ndarray:
    parts: List[np.ndarray] = []
    free = np.array(trial.xi_free)
    for l, count in enumerate(layout.allocation, start=1):
        if count == 0:
            continue
        lo, hi = layout.gap(l)
        inside = free[(free > lo) & (free < hi)]
        if inside.size != count:
            raise InfeasibleStart(f"gap {l} holds {inside.size} free levels, layout expects {count}")
        spacings = np.diff(np.concatenate([[lo], np.sort(inside), [hi]])) / (hi - lo)
        logits = np.log(spacings)
        parts.append(logits - logits.mean())
    parts.append(np.sqrt(np.diff(np.array(trial.q))))
    return np.concatenate(parts)


def initial_vector(layout: Layout) -> np.ndarray:
    """Evenly spaced free levels and linear q."""
    return np.concatenate([np.zeros(a + 1) for a in layout.allocation if a > 0] + [np.ones(layout.k)])


def random_vector(layout: Layout, rng: np.random.Generator) -> np.ndarray:
    logits = [rng.normal(0.0, 1.0, a + 1) for a in layout.allocation if a > 0]
    return np.concatenate(logits + [rng.uniform(0.1, 1.0, layout.k)])


def embed_trial(trial: TrialPoint, gap: int) -> TrialPoint:
    """
    Insert a free level into gap (zeta_(gap-1), zeta_gap] that copies q and gamma~ of the
    next level up. Its field increment is zero, so the functional is unchanged.
    """
    params = trial.params
    lo, hi = params.zeta_at(gap - 1), params.zeta_at(gap)
    points = [lo] + [x for x in trial.xi if lo < x < hi] + [hi]
    widest = int(np.argmax(np.diff(points)))
    new = 0.5 * (points[widest] + points[widest + 1])
    if not points[widest] < new < points[widest + 1]:
        raise InfeasibleStart(f"gap {gap} has no room for another level")

    xi = list(trial.xi)
    j = sum(1 for x in xi if x < new)
    q = list(trial.q)
    q.insert(j, q[j])
    return build_trial(params, list(trial.xi_free) + [new], q)


def random_trial(params: ModelParams, k: int, rng: np.random.Generator) -> TrialPoint:
    """A trial point of depth k with a random layout and random coordinates."""
    layout = random_layout(params, k, rng)
    return decode(random_vector(layout, rng), layout)


def random_trials(params: ModelParams, count: int, seed: int, max_extra: int = 2) -> List[TrialPoint]:
    """`count` random trial points with k - r drawn uniformly from 0..max_extra."""
    rng = stream(seed, Field.TRIALS)
    return [random_trial(params, params.r + int(rng.integers(0, max_extra + 1)), rng) for _ in range(count)]
