"""
Tests for trial points and the Parisi functional.

Tests cover:
- Merging zeta with free levels and the block-constant gamma~
- Trial validation errors
- The one-level closed form and invariance under duplicated levels
- The correction term as a recursion and its sum rule
- Recursion against cascade evaluation
"""

import sys
import math
import pytest
import numpy as np
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

from mssk.utils.config import Config
Config.load()

from mssk.cli.selftest import one_level_parisi_oracle
from mssk.core.errors import DuplicateXi, EndpointViolation, LengthMismatch, NonMonotoneQ
from mssk.core.model import ModelParams
from mssk.implementations.terminals import LinearTerminal
from mssk.parisi.functional import ParisiValue, parisi_recursion, parisi_rpc
from mssk.parisi.trial import build_trial, sum_rule_terms, trial_from_dict
from mssk.rpc.cascade import CascadeConfig
from mssk.rpc.recursion import recursion_value

ONE_LEVEL = ModelParams(1, (0.5,), (1.3,))
TWO_LEVEL = ModelParams(2, (0.3, 0.6), (0.7, 1.1))


def random_cascade_trial(rng):
    """A trial with k <= 3 whose levels above the deepest stay below 0.5."""
    r = int(rng.integers(1, 3))
    if r == 1:
        zeta = (float(rng.uniform(0.2, 0.45)),)
    else:
        zeta = (float(rng.uniform(0.2, 0.3)), float(rng.uniform(0.35, 0.45)))
    gamma = tuple(float(g) for g in np.cumsum(rng.uniform(0.4, 0.7, r)))
    free = [float(rng.uniform(0.5, 0.95))] if rng.random() < 0.5 else []
    k = r + len(free)
    q = np.concatenate([[0.0], np.sort(rng.uniform(0.0, 1.0, k - 1)), [1.0]])
    return build_trial(ModelParams(r, zeta, gamma), free, [float(x) for x in q])


class TestBuildTrial:
    """Merging and validation of trial points."""

    def test_merge_example(self):
        """Levels at or below zeta_0 carry gamma_0 = 0, the rest gamma_1."""
        trial = build_trial(ONE_LEVEL, [0.2, 0.8], [0.0, 0.2, 0.5, 1.0])
        assert trial.xi == (0.2, 0.5, 0.8)
        assert trial.k == 3
        assert trial.gamma_tilde == (0.0, 0.0, 1.3, 1.3)
        assert trial.blocks() == [[0, 1], [2, 3]]
        assert trial.xi_free == (0.2, 0.8)

    def test_free_levels_sorted(self):
        trial = build_trial(TWO_LEVEL, [0.9, 0.45], [0.0, 0.1, 0.2, 0.3, 1.0])
        assert trial.xi == (0.3, 0.45, 0.6, 0.9)
        assert trial.gamma_tilde == (0.0, 0.7, 0.7, 1.1, 1.1)

    def test_duplicate_xi(self):
        with pytest.raises(DuplicateXi):
            build_trial(ONE_LEVEL, [0.5], [0.0, 0.5, 1.0])

    def test_free_level_outside_unit_interval(self):
        with pytest.raises(EndpointViolation):
            build_trial(ONE_LEVEL, [1.0], [0.0, 0.5, 1.0])

    def test_q_endpoints(self):
        with pytest.raises(EndpointViolation):
            build_trial(ONE_LEVEL, [], [0.1, 1.0])
        with pytest.raises(EndpointViolation):
            build_trial(ONE_LEVEL, [], [0.0, 0.9])

    def test_q_length(self):
        with pytest.raises(LengthMismatch):
            build_trial(ONE_LEVEL, [0.8], [0.0, 1.0])

    def test_q_monotone(self):
        with pytest.raises(NonMonotoneQ):
            build_trial(ONE_LEVEL, [0.2, 0.8], [0.0, 0.6, 0.4, 1.0])

    def test_dict_round_trip(self):
        trial = build_trial(TWO_LEVEL, [0.8], [0.0, 0.3, 0.6, 1.0])
        assert trial_from_dict(TWO_LEVEL, trial.to_dict()) == trial


class TestFunctional:
    """Values of the functional by recursion."""

    def test_one_level_oracle(self):
        """k = r = 1 reduces to a one-dimensional Gaussian integral."""
        trial = build_trial(ModelParams(1, (0.5,), (0.8,)), [], [0.0, 1.0])
        oracle = one_level_parisi_oracle(0.5, 0.8)
        assert abs(parisi_recursion(trial, nodes=64).value - oracle) < 1e-10
        # the default 32 nodes are about 2.4e-8 off here
        assert abs(parisi_recursion(trial).value - oracle) < 1e-7

    def test_duplicated_level_invariance(self):
        """A free level repeating the next q adds a zero increment and changes nothing."""
        base = build_trial(TWO_LEVEL, [], [0.0, 0.4, 1.0])
        duplicated = build_trial(TWO_LEVEL, [0.45], [0.0, 0.4, 0.4, 1.0])
        assert abs(parisi_recursion(base).value - parisi_recursion(duplicated).value) < 1e-12

    def test_value_splits_into_terms(self):
        trial = build_trial(TWO_LEVEL, [0.8], [0.0, 0.3, 0.6, 1.0])
        result = parisi_recursion(trial)
        assert result.method == "recursion/quadrature"
        assert abs(result.value - (result.log_z0 - result.correction)) < 1e-15
        assert abs(result.correction - trial.correction()) < 1e-15

    def test_grid_method(self):
        trial = build_trial(TWO_LEVEL, [0.8], [0.0, 0.3, 0.6, 1.0])
        exact = parisi_recursion(trial).value
        assert abs(parisi_recursion(trial, method="grid").value - exact) < 1e-3

    def test_vanishing_coupling(self):
        params = ModelParams(1, (0.5,), (1e-8,))
        assert abs(parisi_recursion(build_trial(params, [], [0.0, 1.0])).value - math.log(2.0)) < 1e-8

    def test_parisi_value_of(self):
        value = ParisiValue.of(1.5, 0.25, "rpc", 0.01)
        assert value.value == 1.25
        assert value.to_dict()["stderr"] == 0.01


class TestCorrection:
    """The y-term recursion, the correction and the sum rule."""

    def test_y_recursion_equals_correction(self):
        """A linear terminal on the y profile reproduces the closed-form correction."""
        trial = build_trial(TWO_LEVEL, [0.45, 0.8], [0.0, 0.2, 0.3, 0.6, 1.0])
        y_term = recursion_value(trial.xi, LinearTerminal(1.0), trial.y_profile()).value
        assert abs(y_term - trial.correction()) < 1e-10

    def test_one_level_correction(self):
        trial = build_trial(ONE_LEVEL, [], [0.0, 1.0])
        assert abs(trial.correction() - 0.5 * 0.5 * 1.3 ** 2) < 1e-15

    def test_sum_rule(self):
        terms = sum_rule_terms(build_trial(TWO_LEVEL, [0.8], [0.0, 0.3, 0.6, 1.0]))
        assert abs(terms["residual"]) < 1e-12
        assert abs(terms["direct"] - terms["closed_form"]) < 1e-12


class TestCascadeEvaluation:
    """The cascade form agrees with the recursion."""

    def test_rpc_method_label(self):
        trial = build_trial(ModelParams(1, (0.4,), (1.0,)), [], [0.0, 1.0])
        sampled = parisi_rpc(trial, CascadeConfig(width=8), replicas=20, seed=3)
        assert sampled.method == "rpc"
        assert sampled.stderr > 0

    @pytest.mark.parametrize("case", range(10))
    def test_rpc_matches_recursion(self, case):
        trial = random_cascade_trial(np.random.default_rng(300 + case))
        exact = parisi_recursion(trial)
        sampled = parisi_rpc(trial, CascadeConfig(width=32), replicas=600, seed=case)
        assert abs(sampled.value - exact.value) <= 3 * sampled.stderr, trial.to_dict()


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
