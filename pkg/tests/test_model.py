"""
Unit tests for the model core.

Tests cover:
- Parameter chain validation
- Leaf indices and ancestor levels
- Overlaps and the scaled covariance
- Streaming moments and estimate agreement
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

from mssk.core.errors import DepthMismatch, LengthMismatch, NonMonotoneGamma, NonMonotoneZeta, NTooLarge
from mssk.core.estimates import PressureEstimate, RunningMoments, agree_within, variance_stderr
from mssk.core.model import (
    LeafIndex,
    ModelParams,
    SpinConfig,
    ancestor_level,
    check_enumerable,
    flat_ancestor_levels,
    leaf_level_matrix,
    overlap,
    scaled_covariance,
    validate_params,
)


# ==================== Parameters ====================

class TestValidateParams:
    """Both strict chains and the depth must hold."""

    def test_valid_two_scale_model(self):
        """A well-formed r=2 model passes and exposes its endpoints."""
        params = ModelParams(2, (0.3, 0.6), (0.7, 1.1))
        validate_params(params)
        assert params.zeta_at(-1) == 0.0
        assert params.zeta_at(2) == 1.0
        assert params.gamma_at(0) == 0.0
        assert params.gamma_at(2) == 1.1
        assert params.gamma_levels().tolist() == [0.0, 0.7, 1.1]

    def test_repeated_zeta_rejected(self):
        with pytest.raises(NonMonotoneZeta):
            validate_params(ModelParams(2, (0.5, 0.5), (0.7, 1.1)))

    def test_zeta_at_one_rejected(self):
        """zeta_(r-1) must stay strictly below the fixed zeta_r = 1."""
        with pytest.raises(NonMonotoneZeta):
            validate_params(ModelParams(1, (1.0,), (1.0,)))

    def test_decreasing_gamma_rejected(self):
        with pytest.raises(NonMonotoneGamma):
            validate_params(ModelParams(2, (0.3, 0.6), (1.1, 0.7)))

    def test_zero_gamma_rejected(self):
        """gamma_1 must exceed the fixed gamma_0 = 0."""
        with pytest.raises(NonMonotoneGamma):
            validate_params(ModelParams(1, (0.5,), (0.0,)))

    def test_depth_mismatch(self):
        with pytest.raises(DepthMismatch):
            validate_params(ModelParams(2, (0.3,), (0.7, 1.1)))

    def test_from_dict_round_trip(self):
        params = ModelParams(2, (0.3, 0.6), (0.7, 1.1))
        assert ModelParams.from_dict(params.to_dict()) == params

    def test_enumeration_limit(self):
        check_enumerable(24)
        with pytest.raises(NTooLarge):
            check_enumerable(25)
        with pytest.raises(LengthMismatch):
            check_enumerable(0)


# ==================== Leaves and Overlaps ====================

class TestLeaves:
    """Ancestor levels of tree leaves."""

    def test_ancestor_levels(self):
        """Leaves sharing a prefix of length l meet at level l; a leaf meets itself at r."""
        a = LeafIndex((0, 1, 2))
        assert ancestor_level(a, LeafIndex((0, 1, 0))) == 2
        assert ancestor_level(a, LeafIndex((0, 2, 2))) == 1
        assert ancestor_level(a, LeafIndex((1, 1, 2))) == 0
        assert ancestor_level(a, a) == 3

    def test_flat_index(self):
        leaf = LeafIndex((2, 0, 1))
        assert leaf.flat(3) == 2 * 9 + 0 * 3 + 1
        assert LeafIndex.from_flat(19, 3, 3) == leaf

    def test_flat_index_rejects_wide_child(self):
        with pytest.raises(LengthMismatch):
            LeafIndex((0, 4)).flat(4)

    def test_level_matrix_matches_pairwise(self):
        """The dense level matrix agrees with the vectorized pairwise levels."""
        depth, width = 2, 3
        matrix = leaf_level_matrix(depth, width)
        i, j = np.meshgrid(np.arange(9), np.arange(9), indexing="ij")
        assert np.array_equal(matrix, flat_ancestor_levels(i, j, depth, width))
        assert np.all(np.diag(matrix) == depth)
        assert matrix[0, 1] == 1
        assert matrix[0, 3] == 0

    def test_depth_mismatch_between_leaves(self):
        with pytest.raises(LengthMismatch):
            ancestor_level(LeafIndex((0,)), LeafIndex((0, 1)))


class TestOverlap:
    """Normalized overlaps and the covariance kernel."""

    def test_overlap_values(self):
        s = SpinConfig((1, 1, -1, -1))
        assert overlap(s, s) == 1.0
        assert overlap(s, SpinConfig((1, -1, -1, 1))) == 0.0
        assert overlap(s, SpinConfig((-1, -1, 1, 1))) == -1.0

    def test_invalid_spins(self):
        with pytest.raises(LengthMismatch):
            SpinConfig((1, 0, -1))

    def test_scaled_covariance(self):
        """gamma at the ancestor level times q."""
        params = ModelParams(2, (0.3, 0.6), (0.7, 1.1))
        s1 = SpinConfig((1, 1, 1, 1))
        s2 = SpinConfig((1, 1, 1, -1))
        a = LeafIndex((0, 0))
        assert math.isclose(scaled_covariance(params, a, a, s1, s2), 1.1 * 0.5)
        assert math.isclose(scaled_covariance(params, a, LeafIndex((0, 1)), s1, s2), 0.7 * 0.5)
        assert scaled_covariance(params, a, LeafIndex((1, 0)), s1, s1) == 0.0


# ==================== Estimates ====================

class TestRunningMoments:
    """Welford accumulation and merging."""

    def test_merge_matches_single_pass(self):
        values = np.random.default_rng(3).normal(size=200)
        whole = RunningMoments().extend(values)
        merged = RunningMoments().extend(values[:70]).merge(RunningMoments().extend(values[70:]))
        assert merged.count == 200
        assert math.isclose(merged.mean, whole.mean, rel_tol=1e-12, abs_tol=1e-15)
        assert math.isclose(merged.variance, float(values.var(ddof=1)), rel_tol=1e-10)

    def test_merge_with_empty(self):
        part = RunningMoments().extend([1.0, 2.0, 4.0])
        assert RunningMoments().merge(part) == part
        assert part.merge(RunningMoments()) == part

    def test_small_counts(self):
        assert RunningMoments().extend([5.0]).stderr == 0.0
        assert variance_stderr(np.array([1.0, 2.0, 3.0])) == 0.0


class TestPressureEstimate:
    """The (mean, stderr, replicas, seed) result contract."""

    def test_agreement(self):
        a = PressureEstimate(1.00, 0.01, 100, 0)
        b = PressureEstimate(1.05, 0.01, 100, 0)
        assert a.agrees_with(1.02)
        assert not a.agrees_with(1.05)
        assert a.agrees_with(1.05, slack=0.03)
        assert not agree_within(a, b)
        assert agree_within(a, b, sigmas=4.0)

    def test_to_dict_keeps_plain_notes(self):
        estimate = PressureEstimate(0.5, 0.1, 10, 7, notes={"n": 3, "array": np.zeros(2)})
        document = estimate.to_dict()
        assert document["n"] == 3
        assert document["seed"] == 7
        assert "array" not in document


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
