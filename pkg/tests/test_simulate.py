"""
Tests for the finite-N estimators.

Tests cover:
- Gray-code enumeration and incremental energies
- Direct and recursive pressures against the closed form and each other
- Hamiltonian covariance structure
- Gibbs level law and overlap histograms
- Cavity functional against the pressure increment
- Ghirlanda-Guerra delta
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

from mssk.cli.selftest import closed_form_pressure
from mssk.core.errors import InsufficientSamples, NTooLarge, UnknownTestFunction
from mssk.core.estimates import agree_within
from mssk.core.model import ModelParams
from mssk.rpc.cascade import CascadeConfig
from mssk.simulate.cavity import cavity_functional, cavity_telescoping
from mssk.simulate.disorder import sample_disorder
from mssk.simulate.enumeration import flipped_spin, gray_configs, linear_fields, quadratic_energies
from mssk.simulate.ghirlanda_guerra import get_test_function, gg_delta, gg_delta_samples, gg_trend
from mssk.simulate.gibbs import gibbs_overlap_distribution, product_overlap_law
from mssk.simulate.pressure import (
    hamiltonian_covariance_check,
    pressure_direct,
    pressure_recursive,
    pressure_trend,
)

ONE_LEVEL = ModelParams(1, (0.5,), (1.0,))
TWO_LEVEL = ModelParams(2, (0.3, 0.6), (0.5, 0.9))
LEVEL_LAW = ModelParams(2, (0.3, 0.7), (0.5, 1.0))


def random_model(rng):
    """A random model with r in {1, 2} and a system size small enough to enumerate quickly."""
    r = int(rng.integers(1, 3))
    if r == 1:
        zeta = (float(rng.uniform(0.3, 0.8)),)
        n = int(rng.integers(2, 9))
    else:
        zeta = (float(rng.uniform(0.2, 0.4)), float(rng.uniform(0.5, 0.8)))
        n = int(rng.integers(2, 7))
    gamma = tuple(float(g) for g in np.cumsum(rng.uniform(0.3, 0.6, r)))
    return ModelParams(r, zeta, gamma), n


# ==================== Enumeration ====================

class TestGrayCode:
    """Configurations in Gray-code order."""

    def test_single_flip_between_neighbours(self):
        configs = gray_configs(5)
        assert configs.shape == (32, 5)
        assert np.all(configs[0] == 1.0)
        for step in range(1, 32):
            changed = np.flatnonzero(configs[step] != configs[step - 1])
            assert changed.tolist() == [flipped_spin(step)]

    def test_every_configuration_once(self):
        configs = gray_configs(6)
        assert len({tuple(row) for row in configs}) == 64

    def test_limit(self):
        with pytest.raises(NTooLarge):
            gray_configs(25)


class TestEnergies:
    """Dense and incremental quadratic forms agree."""

    def test_gray_matches_dense(self):
        couplings = np.random.default_rng(0).normal(size=(3, 7, 7))
        dense = quadratic_energies(couplings, method="dense")
        gray = quadratic_energies(couplings, method="gray")
        assert np.allclose(dense, gray, atol=1e-9)

    def test_auto_switches_to_gray(self):
        couplings = np.random.default_rng(1).normal(size=(1, 13, 13))
        configs = gray_configs(13)
        energies = quadratic_energies(couplings)
        rows = [0, 1, 4095, 8191]
        direct = np.einsum("cn,nm,cm->c", configs[rows], couplings[0], configs[rows])
        assert np.allclose(energies[0, rows], direct, atol=1e-8)

    def test_linear_fields(self):
        configs = gray_configs(3)
        fields = linear_fields(np.array([[1.0, 2.0, 3.0]]), configs)
        assert fields[0, 0] == 6.0
        assert fields.shape == (1, 8)


class TestDisorder:
    """Coupling arrays along tree paths."""

    def test_leaf_couplings_share_ancestors(self):
        """Siblings share the upper-level part of their coupling arrays."""
        disorder = sample_disorder(TWO_LEVEL, 3, CascadeConfig(width=3), seed=2)
        leaves = disorder.leaf_couplings()
        scales = disorder.level_scales()
        assert leaves.shape == (9, 3, 3)
        assert np.allclose(leaves[0] - leaves[1], scales[1] * (disorder.couplings[1][0] - disorder.couplings[1][1]))
        assert np.allclose(scales ** 2, [0.25, 0.81 - 0.25])


# ==================== Pressure ====================

class TestPressure:
    """Quenched pressure estimators."""

    def test_closed_form_single_spin(self):
        """N = 1, r = 1: p_1 = log 2 + zeta gamma^2 / 2."""
        estimate = pressure_direct(ONE_LEVEL, 1, CascadeConfig(width=32), replicas=3000, seed=1)
        assert estimate.agrees_with(closed_form_pressure(0.5, 1.0))

    def test_recursive_closed_form_single_spin(self):
        estimate = pressure_recursive(ONE_LEVEL, 1, samples_per_level=1000, replicas=300, seed=1)
        assert estimate.stderr < 0.005
        assert estimate.agrees_with(closed_form_pressure(0.5, 1.0))

    @pytest.mark.parametrize("case", range(5))
    def test_direct_matches_recursive(self, case):
        """Both estimators of p_N agree on random models with N <= 8."""
        params, n = random_model(np.random.default_rng(100 + case))
        direct = pressure_direct(params, n, CascadeConfig(width=16), replicas=800, seed=case)
        recursive = pressure_recursive(params, n, samples_per_level=256 if params.r == 1 else 64,
                                       replicas=100, seed=case)
        assert recursive.notes["method"] == "recursive"
        assert agree_within(direct, recursive), (params, n, direct.mean, recursive.mean)

    def test_vanishing_coupling(self):
        params = ModelParams(1, (0.5,), (1e-8,))
        estimate = pressure_direct(params, 3, CascadeConfig(width=8), replicas=16)
        assert abs(estimate.mean - math.log(2.0)) < 1e-6

    def test_thread_count_does_not_change_result(self):
        a = pressure_direct(ONE_LEVEL, 2, CascadeConfig(width=8), replicas=150, seed=9, threads=1)
        b = pressure_direct(ONE_LEVEL, 2, CascadeConfig(width=8), replicas=150, seed=9, threads=4)
        assert a == b

    def test_recursive_needs_two_samples(self):
        with pytest.raises(InsufficientSamples):
            pressure_recursive(ONE_LEVEL, 2, samples_per_level=1, replicas=2)

    def test_size_limit(self):
        with pytest.raises(NTooLarge):
            pressure_direct(ONE_LEVEL, 25, replicas=1)

    def test_trend_rows(self):
        trend = pressure_trend(ONE_LEVEL, [2, 1], CascadeConfig(width=8), replicas=64, seed=4)
        assert trend.n_list == [1, 2]
        assert [row["n"] for row in trend.rows()] == [1, 2]


class TestHamiltonianCovariance:
    """Cov H_N(s1, a1) H_N(s2, a2) = N (gamma_(a1^a2) q)^2."""

    def test_every_level_and_overlap(self):
        rows = hamiltonian_covariance_check(TWO_LEVEL, 4, replicas=3000, seed=5, sigmas=4.5)
        assert len(rows) == 9
        assert {row.level for row in rows} == {0, 1, 2}
        assert all(row.within for row in rows)
        top = next(r for r in rows if r.level == 2 and r.overlap == 1.0)
        assert math.isclose(top.expected, 4 * 0.81)


# ==================== Gibbs Measure ====================

class TestGibbs:
    """Pair statistics of the quenched Gibbs measure."""

    def test_level_law(self):
        """Ancestor levels of two Gibbs draws follow zeta_l - zeta_(l-1) on average."""
        sample = gibbs_overlap_distribution(LEVEL_LAW, 6, CascadeConfig(width=16), replicas=200,
                                            pair_draws=100, seed=6)
        assert sample.levels.size >= 10 ** 4
        freqs, stderr = sample.level_frequencies()
        assert np.all(np.abs(freqs - [0.3, 0.4, 0.3]) <= 3 * stderr), (freqs, stderr)

    def test_histograms(self):
        sample = gibbs_overlap_distribution(ONE_LEVEL, 4, CascadeConfig(width=8), replicas=10,
                                            pair_draws=100, seed=7)
        assert sample.levels.shape == (10, 100)
        assert abs(sample.overlap_histogram().sum() - 1.0) < 1e-12
        assert sample.overlap_values().tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
        kinds = [row["kind"] for row in sample.histogram_rows()]
        assert kinds.count("level") == 2 and kinds.count("overlap") == 5

    def test_product_law(self):
        law = product_overlap_law(4)
        assert abs(law.sum() - 1.0) < 1e-12
        assert law[2] == 6 / 16


# ==================== Cavity ====================

class TestCavity:
    """A_N against (N+1) p_(N+1) - N p_N."""

    def test_cavity_bounds_the_replica_values(self):
        a = cavity_functional(ONE_LEVEL, 2, CascadeConfig(width=8), replicas=50, seed=8)
        assert a.notes["replica_min"] <= a.mean <= a.notes["replica_max"]
        assert a.notes["method"] == "cavity"

    def test_telescoping(self):
        """|A_N - increment| <= c/N + 3 stderr at N = 4, 8 with the default c = gamma_r^2."""
        rows = cavity_telescoping(ONE_LEVEL, [8, 4], CascadeConfig(width=16), replicas=600, seed=8)
        assert [row.n for row in rows] == [4, 8]
        assert [row.slack for row in rows] == [0.25, 0.125]
        assert all(row.within for row in rows), [row.to_dict() for row in rows]

    def test_slack_constant_override(self):
        rows = cavity_telescoping(ONE_LEVEL, [2], CascadeConfig(width=8), replicas=20, seed=1, slack_constant=0.5)
        assert rows[0].slack == 0.25


# ==================== Ghirlanda-Guerra ====================

class TestGhirlandaGuerra:
    """Delta of the identities and its accumulation."""

    def test_constant_function_is_exactly_zero(self):
        for n in (2, 3):
            delta = gg_delta(ONE_LEVEL, 4, (0.5, 0.5), n, 1, "one", CascadeConfig(width=8),
                             replicas=3, samples=n + 2, seed=1)
            assert delta == 0.0

    def test_samples_are_signed(self):
        values = gg_delta_samples(TWO_LEVEL, 4, (0.5, 0.5), 2, 1, "r12", CascadeConfig(width=4),
                                  replicas=6, samples=5, seed=2)
        assert values.shape == (6,)
        assert np.all(np.isfinite(values))

    def test_library_lookup(self):
        assert get_test_function("r12_sq", 2).name == "r12_sq"
        with pytest.raises(UnknownTestFunction):
            get_test_function("r12_r13", 2)
        with pytest.raises(UnknownTestFunction):
            get_test_function("cubic", 2)

    def test_not_enough_samples(self):
        with pytest.raises(InsufficientSamples):
            gg_delta(ONE_LEVEL, 4, (0.5, 0.5), 2, 1, "r12", replicas=1, samples=2)

    def test_trend_rows(self):
        rows = gg_trend(ONE_LEVEL, (3, 4), (1.0, 0.0), 2, 2, "r12", CascadeConfig(width=4),
                        replicas=4, samples=4, seed=3)
        assert [row["n_spins"] for row in rows] == [3, 4]
        assert "decreasing" in rows[1]
        assert all(row["delta"] >= 0 for row in rows)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
