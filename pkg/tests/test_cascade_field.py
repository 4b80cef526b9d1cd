"""
Tests for truncated Ruelle cascades and tree Gaussian fields.

Tests cover:
- Leaf weight normalization and determinism
- The pair level law of the cascade
- Truncation bookkeeping and compensated log sums
- Leftover mass and estimates as the width grows
- Leaf covariance of tree fields
"""

import sys
import pytest
import numpy as np
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

from mssk.utils.config import Config
Config.load()

from mssk.core.errors import CascadeTooLarge, InvalidZeta, NonMonotoneProfile, WidthTooSmall
from mssk.implementations.terminals import LogCoshTerminal
from mssk.rpc.cascade import CascadeConfig, exact_pair_level_law, pair_level_frequencies, sample_cascade
from mssk.rpc.field import CovarianceProfile, coupling_profile, sample_tree_field
from mssk.rpc.representation import rpc_representation_estimate
from mssk.utils.rng import Field, stream


class TestCascadeSampling:
    """Shape, normalization and reproducibility of sampled cascades."""

    def test_leaf_weights_normalized(self):
        """nu sums to one over the retained leaves and every weight is positive."""
        cascade = sample_cascade((0.3, 0.7), 2, width=8, seed=11)
        assert cascade.n_leaves == 64
        assert abs(cascade.leaf_weights.sum() - 1.0) < 1e-12
        assert np.all(cascade.leaf_weights > 0)

    def test_node_weights_rows_normalized(self):
        cascade = sample_cascade((0.3, 0.7), 2, width=8, seed=11)
        weights = cascade.node_weights(2)
        assert weights.shape == (8, 8)
        assert np.allclose(weights.sum(axis=1), 1.0)

    def test_children_sorted_decreasing(self):
        """Kept atoms are the largest points of the process, in decreasing order."""
        cascade = sample_cascade((0.4,), 1, width=16, seed=2)
        assert np.all(np.diff(cascade.log_atoms[0][0]) < 0)

    def test_same_key_same_cascade(self):
        a = sample_cascade((0.3, 0.7), 2, width=4, seed=5, replica=3)
        b = sample_cascade((0.3, 0.7), 2, width=4, seed=5, replica=3)
        c = sample_cascade((0.3, 0.7), 2, width=4, seed=5, replica=4)
        assert np.array_equal(a.log_leaf_weights, b.log_leaf_weights)
        assert not np.array_equal(a.log_leaf_weights, c.log_leaf_weights)

    def test_leftover_bound_range(self):
        cascade = sample_cascade((0.5,), 1, width=8, seed=0)
        assert 0.0 < cascade.leftover_mass_bound < 1.0

    def test_invalid_inputs(self):
        with pytest.raises(InvalidZeta):
            sample_cascade((0.6, 0.4), 2)
        with pytest.raises(InvalidZeta):
            sample_cascade((0.5,), 2)
        with pytest.raises(WidthTooSmall):
            sample_cascade((0.5,), 1, width=1)
        with pytest.raises(CascadeTooLarge):
            sample_cascade((0.1, 0.2, 0.3, 0.4, 0.5), 5, width=32)

    def test_document_lists_every_internal_node(self):
        document = sample_cascade((0.3, 0.6), 2, width=3, seed=1).to_document()
        assert len(document["nodes"]) == 1 + 3
        assert document["nodes"][0]["path"] == []
        assert abs(sum(document["nodes"][1]["child_weights"]) - 1.0) < 1e-12


class TestLevelLaw:
    """P(alpha ^ alpha' = l) averages to zeta_l - zeta_(l-1)."""

    def test_single_level(self):
        """E sum nu^2 = 1 - zeta for a one-level cascade."""
        laws = np.array([exact_pair_level_law(sample_cascade((0.3,), 1, width=32, seed=7, replica=i))
                         for i in range(2000)])
        mean = laws.mean(axis=0)
        stderr = laws.std(axis=0, ddof=1) / np.sqrt(len(laws))
        assert np.all(np.abs(mean - [0.3, 0.7]) <= 3 * stderr)

    def test_two_levels(self):
        laws = np.array([exact_pair_level_law(sample_cascade((0.2, 0.4), 2, width=32, seed=8, replica=i))
                         for i in range(600)])
        mean = laws.mean(axis=0)
        stderr = laws.std(axis=0, ddof=1) / np.sqrt(len(laws))
        assert np.all(np.abs(mean - [0.2, 0.2, 0.6]) <= 3 * stderr)

    def test_sampled_pairs_match_exact_law(self):
        """Pair draws from one realization reproduce its exact level law."""
        cascade = sample_cascade((0.3, 0.6), 2, width=8, seed=4)
        freqs = pair_level_frequencies(cascade, 20000, stream(4, Field.PAIRS))
        assert np.allclose(freqs, exact_pair_level_law(cascade), atol=0.02)
        assert abs(exact_pair_level_law(cascade).sum() - 1.0) < 1e-12


class TestLogSums:
    """Unnormalized sums with and without deepest-level compensation."""

    def test_plain_sums(self):
        cascade = sample_cascade((0.4, 0.7), 2, width=4, seed=9)
        numerator, denominator = cascade.log_sums(np.zeros(cascade.n_leaves))
        assert abs(numerator - denominator) < 1e-12
        assert abs(denominator - cascade.log_unnormalized_total()) < 1e-12

    def test_compensation_adds_tail_mass(self):
        """With a constant functional the compensated ratio is still exactly the constant."""
        cascade = sample_cascade((0.4, 0.7), 2, width=4, seed=9)
        numerator, denominator = cascade.log_sums(np.full(cascade.n_leaves, 0.3), np.full(4, 0.3))
        assert abs(numerator - denominator - 0.3) < 1e-12
        assert denominator > cascade.log_unnormalized_total()


class TestTruncation:
    """Retained mass grows with the width and estimates settle accordingly."""

    WIDTHS = (4, 8, 16, 32, 64)

    def test_leftover_decreases_with_width(self):
        means = [np.mean([sample_cascade((0.3, 0.7), 2, width=w, seed=12, replica=i).leftover_mass_bound
                          for i in range(200)]) for w in self.WIDTHS]
        assert all(b < a for a, b in zip(means, means[1:])), means
        assert means[0] > 0.2 and means[-1] < 0.15

    def test_doubling_width_moves_estimate_within_leftover(self):
        """Without compensation, width 2M differs from width M by at most the leftover mass plus noise."""
        terminal = LogCoshTerminal(1.0)
        profile = CovarianceProfile((0.0, 0.5, 1.0))
        estimates = [rpc_representation_estimate((0.3, 0.7), terminal, profile,
                                                 CascadeConfig(width=w, tail_compensation=False),
                                                 replicas=600, seed=13)
                     for w in (4, 8, 16)]
        for coarse, fine in zip(estimates, estimates[1:]):
            tolerance = coarse.notes["leftover_mass_bound"] + 3 * coarse.combined_stderr(fine)
            assert abs(fine.mean - coarse.mean) <= tolerance
            assert fine.notes["leftover_mass_bound"] < coarse.notes["leftover_mass_bound"]


class TestTreeField:
    """Gaussian fields indexed by tree nodes."""

    def test_profile_validation(self):
        with pytest.raises(NonMonotoneProfile):
            CovarianceProfile((0.0, 0.5, 0.4))
        with pytest.raises(NonMonotoneProfile):
            CovarianceProfile((-0.1, 0.5))
        profile = CovarianceProfile((0.0, 0.3, 0.3, 1.0))
        assert profile.degenerate_levels() == [2]
        assert coupling_profile([0.0, 0.7, 1.1]).values == pytest.approx((0.0, 0.49, 1.21))

    def test_leaf_covariance(self):
        """Cov(h(a), h(b)) = v at the ancestor level of a and b."""
        profile = CovarianceProfile((0.2, 0.5, 1.0))
        leaves = np.array([sample_tree_field(profile, 2, seed=3, replica=i).leaf_values()
                           for i in range(4000)])
        cov = np.cov(leaves.T)
        assert abs(cov[0, 0] - 1.0) < 0.1
        assert abs(cov[0, 1] - 0.5) < 0.1
        assert abs(cov[0, 2] - 0.2) < 0.1

    def test_partial_values_accumulate(self):
        profile = CovarianceProfile((0.0, 0.5, 1.0))
        tree = sample_tree_field(profile, 3, seed=1)
        parents = tree.partial_values(1)
        leaves = tree.leaf_values()
        assert np.allclose(leaves - np.repeat(parents, 3), tree.node_increments(2))

    def test_csv_rows(self):
        tree = sample_tree_field(CovarianceProfile((0.0, 1.0)), 3, seed=1)
        rows = tree.to_csv_rows()
        assert [path for path, _ in rows] == ["0", "1", "2"]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
