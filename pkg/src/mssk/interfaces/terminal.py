from abc import ABC, abstractmethod

import numpy as np


class ITerminal(ABC):
    """Leaf functional X_r = F(h) of the accumulated Gaussian field h."""

    name: str = "terminal"

    # Nested Gauss-Hermite quadrature is only trusted on smooth terminals.
    smooth: bool = True

    @abstractmethod
    def evaluate(self, h: np.ndarray) -> np.ndarray:
        """Vectorized F(h)."""
        pass

    def __call__(self, h) -> np.ndarray:
        return self.evaluate(np.asarray(h, dtype=float))

    def describe(self) -> str:
        return self.name
