import math

import numpy as np
import pytest

from hmimo_jgc.channel import (
    ClusterSpec,
    QuadratureError,
    QuadratureGrid,
    ScatteringScenario,
    apply_activity_floor,
    common_support,
    draw_scenario,
    sample_channels,
    variance_map,
    variance_maps,
    vmf_density,
)
from hmimo_jgc.lattice import ArrayGeometry, build_lattice

GEOM = ArrayGeometry(n_x=17, n_y=17, delta=0.25, lam=1.0)
LAT = build_lattice(GEOM)


def single_cluster_scenario(theta, phi, alpha=140.0, users=1):
    cluster = ClusterSpec(center_theta=theta, center_phi=phi,
                          concentration=alpha, shared=users > 1)
    return ScatteringScenario(clusters=(cluster,), weights=np.ones((users, 1)))


class TestVmfDensity:
    def test_value_at_mode(self):
        alpha = 2.0
        c = ClusterSpec(center_theta=0.7, center_phi=1.0, concentration=alpha)
        expected = alpha * math.exp(alpha) / (4 * math.pi * math.sinh(alpha))
        assert vmf_density(0.7, 1.0, c) == pytest.approx(expected, rel=1e-12)

    def test_uniform_limit_for_tiny_concentration(self):
        c = ClusterSpec(center_theta=0.3, center_phi=2.0, concentration=1e-6)
        theta = np.linspace(0.01, math.pi - 0.01, 40)
        phi = np.linspace(0.0, 2 * math.pi, 40, endpoint=False)
        vals = vmf_density(theta[:, None], phi[None, :], c)
        assert np.max(np.abs(vals * 4 * math.pi - 1.0)) < 1e-5

    def test_integrates_to_one_over_sphere(self):
        # quadrature oracle over the full sphere (midpoint rule)
        c = ClusterSpec(center_theta=0.9, center_phi=4.0, concentration=50.0)
        n_t, n_p = 400, 800
        dt = math.pi / n_t
        dp = 2 * math.pi / n_p
        theta = (np.arange(n_t) + 0.5) * dt
        phi = (np.arange(n_p) + 0.5) * dp
        dens = vmf_density(theta[:, None], phi[None, :], c)
        total = float(np.sum(dens * np.sin(theta)[:, None]) * dt * dp)
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_large_concentration_is_finite(self):
        c = ClusterSpec(center_theta=0.5, center_phi=0.5, concentration=800.0)
        val = vmf_density(0.5, 0.5, c)
        assert np.isfinite(val) and val > 0


class TestClusterValidation:
    def test_angle_ranges(self):
        with pytest.raises(ValueError):
            ClusterSpec(center_theta=2.0, center_phi=0.0, concentration=1.0)
        with pytest.raises(ValueError):
            ClusterSpec(center_theta=0.5, center_phi=7.0, concentration=1.0)
        with pytest.raises(ValueError):
            ClusterSpec(center_theta=0.5, center_phi=0.5, concentration=0.0)

    def test_weight_rows_must_sum_to_one(self):
        c = ClusterSpec(center_theta=0.5, center_phi=0.5, concentration=5.0)
        with pytest.raises(ValueError):
            ScatteringScenario(clusters=(c,), weights=np.array([[0.7]]))

    def test_shared_cluster_needs_positive_weights(self):
        shared = ClusterSpec(center_theta=0.5, center_phi=0.5, concentration=5.0, shared=True)
        private = ClusterSpec(center_theta=0.3, center_phi=1.5, concentration=5.0)
        weights = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ValueError):
            ScatteringScenario(clusters=(shared, private), weights=weights)


class TestVarianceMap:
    def test_unit_sum(self):
        scen = single_cluster_scenario(0.4, 0.9)
        m = variance_map(scen, 0, LAT, GEOM)
        assert m.sigma_sq.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(m.sigma_sq >= 0)

    def test_broadside_cluster_peaks_at_origin_cell(self):
        scen = single_cluster_scenario(0.02, 0.7)
        m = variance_map(scen, 0, LAT, GEOM)
        assert int(np.argmax(m.sigma_sq)) == LAT.position(0, 0)

    def test_mixture_is_weighted_combination_before_normalization(self):
        from hmimo_jgc.channel import cluster_cell_masses

        a = ClusterSpec(center_theta=0.3, center_phi=0.5, concentration=140.0)
        b = ClusterSpec(center_theta=0.9, center_phi=3.5, concentration=140.0)
        # per-cluster integrals are independent of the cluster list
        mass_joint, _ = cluster_cell_masses((a, b), LAT, GEOM)
        mass_a, _ = cluster_cell_masses((a,), LAT, GEOM)
        mass_b, _ = cluster_cell_masses((b,), LAT, GEOM)
        assert np.max(np.abs(mass_joint[0] - mass_a[0])) < 1e-15
        assert np.max(np.abs(mass_joint[1] - mass_b[0])) < 1e-15
        # the user map is the weighted combination, normalized to unit sum
        mixed = ScatteringScenario(clusters=(a, b), weights=np.array([[0.3, 0.7]]))
        raw = 0.3 * mass_a[0] + 0.7 * mass_b[0]
        expected = raw / raw.sum()
        got = variance_map(mixed, 0, LAT, GEOM).sigma_sq
        assert np.max(np.abs(got - expected)) < 1e-9

    def test_horizon_cluster_trips_capture_error(self):
        scen = single_cluster_scenario(math.pi / 2 - 0.01, 1.0)
        with pytest.raises(QuadratureError):
            variance_map(scen, 0, LAT, GEOM)

    def test_coarse_grid_trips_capture_error(self):
        scen = single_cluster_scenario(0.6, 2.0, alpha=200.0)
        coarse = QuadratureGrid(n_theta=8, n_phi=16)
        with pytest.raises(QuadratureError):
            variance_map(scen, 0, LAT, GEOM, coarse)

    def test_capture_at_default_grid(self):
        for alpha in (40.0, 140.0, 200.0):
            for theta in (0.2, 0.7, 1.1):
                scen = single_cluster_scenario(theta, 2.5, alpha=alpha)
                m = variance_map(scen, 0, LAT, GEOM)  # no QuadratureError
                assert m.sigma_sq.sum() == pytest.approx(1.0, abs=1e-9)


class TestActivityFloor:
    def test_small_entries_zeroed(self):
        sigma = np.array([1.0, 1e-7, 0.5, 1e-8])
        floored = apply_activity_floor(sigma)
        assert floored[1] == 0.0 and floored[3] == 0.0
        assert floored[0] == 1.0 and floored[2] == 0.5


class TestSampleChannels:
    def test_single_cell_map_gives_single_cell_support(self):
        sigma = np.zeros(len(LAT))
        sigma[11] = 1.0
        scen = single_cluster_scenario(0.4, 0.9)
        m = type(variance_map(scen, 0, LAT, GEOM))(sigma_sq=sigma)
        ch = sample_channels(scen, [m], np.random.default_rng(0))[0]
        assert ch.support.tolist() == [11]
        assert ch.h_f[11] != 0

    def test_empirical_variance_matches_map(self):
        scen = single_cluster_scenario(0.5, 1.2)
        m = variance_map(scen, 0, LAT, GEOM)
        rng = np.random.default_rng(7)
        draws = np.stack([sample_channels(scen, [m], rng)[0].h_f for _ in range(10_000)])
        emp = np.mean(np.abs(draws) ** 2, axis=0)
        big = m.sigma_sq > 0.01
        assert big.any()
        rel = np.abs(emp[big] - m.sigma_sq[big]) / m.sigma_sq[big]
        assert np.max(rel) < 0.05

    def test_total_power_close_to_one(self):
        scen = single_cluster_scenario(0.5, 1.2)
        m = variance_map(scen, 0, LAT, GEOM)
        rng = np.random.default_rng(11)
        total = np.mean([
            np.sum(np.abs(sample_channels(scen, [m], rng)[0].h_f) ** 2)
            for _ in range(10_000)
        ])
        assert total == pytest.approx(1.0, rel=0.03)

    def test_support_matches_floored_map(self):
        scen = single_cluster_scenario(0.5, 1.2)
        m = variance_map(scen, 0, LAT, GEOM)
        ch = sample_channels(scen, [m], np.random.default_rng(3))[0]
        active = np.flatnonzero(apply_activity_floor(m.sigma_sq))
        assert np.array_equal(ch.support, active)
        assert np.array_equal(ch.support, np.flatnonzero(ch.h_f))


class TestCommonSupport:
    class _Ch:
        def __init__(self, sup):
            self.support = np.array(sorted(sup), dtype=np.int64)

    def test_identical_supports(self):
        chans = [self._Ch({1, 4, 9}), self._Ch({1, 4, 9})]
        assert common_support(chans).tolist() == [1, 4, 9]

    def test_disjoint_supports(self):
        chans = [self._Ch({1, 2}), self._Ch({3, 4})]
        assert common_support(chans).size == 0

    def test_three_way_intersection(self):
        chans = [self._Ch({1, 2, 3}), self._Ch({2, 3, 4}), self._Ch({3, 5})]
        assert common_support(chans).tolist() == [3]

    def test_requires_two_users(self):
        with pytest.raises(ValueError):
            common_support([self._Ch({1})])

    def test_shared_cluster_overlap_probability(self):
        # two users sharing one cluster with weights >= 0.2: the thresholded
        # common support should be non-empty nearly always
        rng = np.random.default_rng(42)
        hits = 0
        runs = 100
        for _ in range(runs):
            theta = rng.uniform(0.05, 1.1)
            phi = rng.uniform(0, 2 * math.pi)
            shared = ClusterSpec(center_theta=theta, center_phi=phi,
                                 concentration=140.0, shared=True)
            privates = tuple(
                ClusterSpec(center_theta=rng.uniform(0.05, 1.1),
                            center_phi=rng.uniform(0, 2 * math.pi),
                            concentration=140.0)
                for _ in range(2)
            )
            weights = np.array([[0.3, 0.7, 0.0], [0.25, 0.0, 0.75]])
            scen = ScatteringScenario(clusters=(shared,) + privates, weights=weights)
            maps = variance_maps(scen, LAT, GEOM)
            chans = sample_channels(scen, maps, rng)
            if common_support(chans).size > 0:
                hits += 1
        assert hits / runs > 0.95


class TestDrawScenario:
    def test_structure(self):
        rng = np.random.default_rng(1)
        scen = draw_scenario(5, rng, n_shared=2, n_private=2)
        assert scen.num_clusters == 2 + 5 * 2
        assert scen.num_users == 5
        assert all(c.shared for c in scen.clusters[:2])
        assert not any(c.shared for c in scen.clusters[2:])
        np.testing.assert_allclose(scen.weights.sum(axis=1), 1.0, atol=1e-12)
        # each user: 2 shared + 2 private active clusters
        assert np.all((scen.weights > 0).sum(axis=1) == 4)

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(2)
        scen = draw_scenario(3, rng)
        again = ScatteringScenario.from_dict(scen.to_dict())
        assert again.clusters == scen.clusters
        np.testing.assert_array_equal(again.weights, scen.weights)
