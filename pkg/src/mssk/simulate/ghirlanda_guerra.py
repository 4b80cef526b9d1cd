"""
Ghirlanda-Guerra delta of the unperturbed quenched Gibbs measure:

    Delta_N = | E<f R_(1,n+1)^p> - (1/n) E<f><R_(1,2)^p> - (1/n) sum_(l=2..n) E<f R_(1,l)^p> |

with R(w) = w_0 gamma_(a^a') + w_1 q_N. Gibbs averages over n+1 replicas are U-statistics over
all ordered tuples of distinct draws from a pool of K independent Gibbs samples, accumulated
with math.fsum so f = 1 cancels to exactly zero.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from mssk.core.errors import InsufficientSamples, UnknownTestFunction
from mssk.core.estimates import sample_stderr
from mssk.core.model import ModelParams, check_enumerable, validate_params
from mssk.rpc.cascade import CascadeConfig
from mssk.simulate.disorder import sample_disorder
from mssk.simulate.enumeration import gray_configs
from mssk.simulate.gibbs import gibbs_measure
from mssk.utils.parallel import ReplicaPool
from mssk.utils.rng import Field, stream
from mssk.utils.run_logger import run_logger

MAX_GG_N = 16
LIBRARY_VERSION = "gg-f-v1"


@dataclass(frozen=True)
class TestFunction:
    """Bounded f of the n x n overlap array (last two axes) among the first n replicas."""
    name: str
    min_replicas: int
    fn: Callable[[np.ndarray], np.ndarray]

    def __call__(self, overlaps: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.fn(overlaps), overlaps.shape[:-2]).astype(float)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


TEST_FUNCTIONS: Dict[str, TestFunction] = {f.name: f for f in [
    TestFunction("one", 1, lambda R: np.ones(R.shape[:-2])),
    TestFunction("r12", 2, lambda R: R[..., 0, 1]),
    TestFunction("r12_sq", 2, lambda R: R[..., 0, 1] ** 2),
    TestFunction("r12_r13", 3, lambda R: R[..., 0, 1] * R[..., 0, 2]),
    TestFunction("r12_r23", 3, lambda R: R[..., 0, 1] * R[..., 1, 2]),
    TestFunction("r12_above_half", 2, lambda R: _sigmoid((R[..., 0, 1] - 0.5) / 0.1)),
]}


def get_test_function(name: str, n: int) -> TestFunction:
    f = TEST_FUNCTIONS.get(name)
    if f is None:
        raise UnknownTestFunction(f"test function '{name}' not in library {LIBRARY_VERSION} "
                                  f"({', '.join(sorted(TEST_FUNCTIONS))})")
    if n < f.min_replicas:
        raise UnknownTestFunction(f"test function '{name}' needs n >= {f.min_replicas}, got n={n}")
    return f


def tuple_delta(overlaps: np.ndarray, f: TestFunction, n: int, p: int) -> float:
    """
    Signed Delta for one disorder from the K x K weighted overlap matrix of K Gibbs samples.
    """
    k = overlaps.shape[0]
    tuples = np.array(list(itertools.permutations(range(k), n + 1)))
    count = len(tuples)
    first = tuples[:, 0]
    inner = overlaps[tuples[:, :n, None], tuples[:, None, :n]]
    f_values = f(inner)
    power = overlaps ** p

    t1 = math.fsum(f_values * power[first, tuples[:, n]]) / count
    t2 = (math.fsum(f_values) / count) * (math.fsum(power[first, tuples[:, 1]]) / count)
    t3 = [math.fsum(f_values * power[first, tuples[:, l]]) / count for l in range(1, n)]
    return math.fsum([t1] * n + [-t2] + [-t for t in t3]) / n


def gg_delta_samples(params: ModelParams, n_spins: int, w: Sequence[float], n: int, p: int, f: str,
                     cascade: Optional[CascadeConfig] = None, replicas: int = 100, samples: int = 10,
                     seed: int = 0, threads: Optional[int] = None) -> np.ndarray:
    """Per-replica signed Delta values."""
    validate_params(params)
    check_enumerable(n_spins, MAX_GG_N)
    test = get_test_function(f, n)
    if samples < n + 1:
        raise InsufficientSamples(f"{n + 1} distinct replicas need at least {n + 1} Gibbs samples, got {samples}")
    cascade = cascade or CascadeConfig()
    configs = gray_configs(n_spins)
    gamma = params.gamma_levels()
    w0, w1 = float(w[0]), float(w[1])

    def one(replica: int) -> float:
        disorder = sample_disorder(params, n_spins, cascade, seed, replica)
        measure = gibbs_measure(disorder, configs, cascade.tail_compensation)
        nodes, ids = measure.draw(samples, stream(seed, replica, Field.PAIRS, 1))
        levels = measure.ancestor_levels(nodes[:, None], nodes[None, :])
        spins = configs[ids]
        overlaps = w0 * gamma[levels] + w1 * (spins @ spins.T) / n_spins
        return tuple_delta(overlaps, test, n, p)

    return ReplicaPool(threads).map_array(one, replicas)


def gg_delta(params: ModelParams, n_spins: int, w: Sequence[float], n: int, p: int, f: str,
             cascade: Optional[CascadeConfig] = None, replicas: int = 100, samples: int = 10,
             seed: int = 0, threads: Optional[int] = None) -> float:
    values = gg_delta_samples(params, n_spins, w, n, p, f, cascade, replicas, samples, seed, threads)
    delta = abs(math.fsum(values) / len(values))
    run_logger.log_event("gg_delta_done", {
        "n_spins": n_spins, "w": list(w), "n": n, "p": p, "f": f, "library": LIBRARY_VERSION,
        "delta": delta, "replicas": replicas,
    })
    return delta


def gg_trend(params: ModelParams, n_list: Sequence[int] = (4, 8, 12, 16), w: Sequence[float] = (0.5, 0.5),
             n: int = 2, p: int = 1, f: str = "r12", cascade: Optional[CascadeConfig] = None,
             replicas: int = 100, samples: int = 10, seed: int = 0,
             threads: Optional[int] = None) -> List[Dict[str, float]]:
    """Delta_N per N with the stderr of the replica mean; decay is reported, not asserted."""
    rows = []
    for n_spins in n_list:
        values = gg_delta_samples(params, n_spins, w, n, p, f, cascade, replicas, samples, seed, threads)
        rows.append({
            "n_spins": n_spins,
            "delta": abs(math.fsum(values) / len(values)),
            "stderr": sample_stderr(values),
        })
    for previous, current in zip(rows, rows[1:]):
        current["decreasing"] = current["delta"] <= previous["delta"] + 3.0 * math.hypot(
            previous["stderr"], current["stderr"])
    return rows
