from typing import Callable, Dict, List, Optional

import numpy as np

from mssk.core.errors import UnknownTestFunction
from mssk.interfaces.terminal import ITerminal


class ConstantTerminal(ITerminal):
    def __init__(self, value: float = 0.0):
        self.value = float(value)
        self.name = f"constant({self.value:g})"

    def evaluate(self, h: np.ndarray) -> np.ndarray:
        return np.full(np.shape(h), self.value)


class LinearTerminal(ITerminal):
    """F(h) = scale * h; exp F is log-normal, so the recursion has a closed form."""

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        self.name = f"linear({self.scale:g})"

    def evaluate(self, h: np.ndarray) -> np.ndarray:
        return self.scale * h


class LogCoshTerminal(ITerminal):
    """F(h) = log 2cosh(scale * h), the spin-summed single-site weight."""

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        self.name = f"log2cosh({self.scale:g})"

    def evaluate(self, h: np.ndarray) -> np.ndarray:
        x = self.scale * h
        return np.logaddexp(x, -x)


class SoftplusTerminal(ITerminal):
    """F(h) = log(1 + e^(scale * h)); asymmetric in h, unlike log 2cosh."""

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        self.name = f"softplus({self.scale:g})"

    def evaluate(self, h: np.ndarray) -> np.ndarray:
        return np.logaddexp(0.0, self.scale * h)


class AbsTerminal(ITerminal):
    smooth = False

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        self.name = f"abs({self.scale:g})"

    def evaluate(self, h: np.ndarray) -> np.ndarray:
        return self.scale * np.abs(h)


class TerminalRegistry:
    """Central registry of named terminal families."""

    def __init__(self):
        self._factories: Dict[str, Callable[[float], ITerminal]] = {}

    def register(self, name: str, factory: Callable[[float], ITerminal]) -> None:
        self._factories[name] = factory

    def names(self) -> List[str]:
        return sorted(self._factories)

    def create(self, name: str, scale: Optional[float] = None) -> ITerminal:
        factory = self._factories.get(name)
        if factory is None:
            raise UnknownTestFunction(f"Terminal '{name}' not found (known: {', '.join(self.names())})")
        return factory(1.0 if scale is None else scale)


terminal_registry = TerminalRegistry()
terminal_registry.register("constant", ConstantTerminal)
terminal_registry.register("linear", LinearTerminal)
terminal_registry.register("log2cosh", LogCoshTerminal)
terminal_registry.register("softplus", SoftplusTerminal)
terminal_registry.register("abs", AbsTerminal)
