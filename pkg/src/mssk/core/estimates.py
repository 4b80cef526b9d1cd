import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional

import numpy as np


@dataclass
class RunningMoments:
    """Streaming (count, mean, M2) accumulator; partial results combine with merge()."""
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, value: float) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (value - self.mean)

    def extend(self, values: Iterable[float]) -> "RunningMoments":
        for value in values:
            self.push(float(value))
        return self

    def merge(self, other: "RunningMoments") -> "RunningMoments":
        if other.count == 0:
            return RunningMoments(self.count, self.mean, self.m2)
        if self.count == 0:
            return RunningMoments(other.count, other.mean, other.m2)
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return RunningMoments(count, mean, m2)

    @property
    def variance(self) -> float:
        """Sample variance (n - 1 denominator)."""
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class PressureEstimate:
    """Monte-Carlo result contract: mean, standard error, replica count and seed."""
    mean: float
    stderr: float
    replicas: int
    seed: int
    notes: Dict[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def from_moments(cls, moments: RunningMoments, seed: int,
                     notes: Optional[Dict[str, Any]] = None) -> "PressureEstimate":
        return cls(mean=moments.mean, stderr=moments.stderr, replicas=moments.count,
                   seed=seed, notes=dict(notes or {}))

    @classmethod
    def from_samples(cls, values: Iterable[float], seed: int,
                     notes: Optional[Dict[str, Any]] = None) -> "PressureEstimate":
        return cls.from_moments(RunningMoments().extend(values), seed, notes)

    def combined_stderr(self, other: "PressureEstimate") -> float:
        return math.hypot(self.stderr, other.stderr)

    def agrees_with(self, target: float, sigmas: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= sigmas * self.stderr + slack

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "replicas": self.replicas,
            "seed": self.seed,
            **{k: v for k, v in self.notes.items() if _is_plain(v)},
        }


def _is_plain(value: Any) -> bool:
    return isinstance(value, (int, float, str, bool)) or value is None or (
        isinstance(value, (list, tuple)) and all(isinstance(v, (int, float, str)) for v in value)
    )


def agree_within(a: PressureEstimate, b: PressureEstimate, sigmas: float = 3.0, slack: float = 0.0) -> bool:
    """|a - b| <= sigmas * combined stderr + slack."""
    return abs(a.mean - b.mean) <= sigmas * a.combined_stderr(b) + slack


def sample_stderr(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def variance_stderr(values: np.ndarray) -> float:
    """Standard error of the sample variance, from the fourth central moment."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 4:
        return 0.0
    centered = values - values.mean()
    var = float(centered.var(ddof=1))
    m4 = float(np.mean(centered ** 4))
    return math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)
