import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, Optional

import numpy as np

from mssk.core.estimates import RunningMoments
from mssk.utils.config import Config

# Replicas are chunked independently of the worker count so merges happen in a fixed order.
CHUNK_SIZE = 64


class ReplicaPool:
    """Runs independent replicas on a thread pool and merges them deterministically."""

    def __init__(self, threads: Optional[int] = None):
        if threads is None:
            threads = Config.get("threads") or os.cpu_count() or 1
        self.threads = max(1, int(threads))

    def _chunks(self, replicas: int) -> List[range]:
        return [range(start, min(start + CHUNK_SIZE, replicas)) for start in range(0, replicas, CHUNK_SIZE)]

    def map(self, fn: Callable[[int], Any], replicas: int) -> List[Any]:
        """fn(replica) for every replica, returned in replica order."""
        chunks = self._chunks(replicas)

        def run_chunk(chunk: range) -> List[Any]:
            return [fn(i) for i in chunk]

        if self.threads == 1 or len(chunks) <= 1:
            parts = [run_chunk(c) for c in chunks]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                parts = list(executor.map(run_chunk, chunks))
        return [value for part in parts for value in part]

    def map_array(self, fn: Callable[[int], Any], replicas: int) -> np.ndarray:
        return np.asarray(self.map(fn, replicas), dtype=float)

    def moments(self, fn: Callable[[int], float], replicas: int) -> RunningMoments:
        """Welford moments of fn over replicas, merged chunk by chunk in order."""
        chunks = self._chunks(replicas)

        def run_chunk(chunk: range) -> RunningMoments:
            return RunningMoments().extend(fn(i) for i in chunk)

        if self.threads == 1 or len(chunks) <= 1:
            parts = [run_chunk(c) for c in chunks]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                parts = list(executor.map(run_chunk, chunks))

        total = RunningMoments()
        for part in parts:
            total = total.merge(part)
        return total
