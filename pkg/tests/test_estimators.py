import math

import numpy as np
import pytest

from hmimo_jgc.channel import (
    ClusterSpec,
    ScatteringScenario,
    UserChannel,
    apply_activity_floor,
    draw_scenario,
    sample_channels,
    variance_maps,
)
from hmimo_jgc.estimators import (
    EstimatorConfig,
    gcse,
    generate_measurements,
    jgc_ce,
    merge_and_label,
    nmse,
    residual_scores,
    select_candidates,
    trim_ls,
    vote_common,
    wd_omp,
)
from hmimo_jgc.lattice import ArrayGeometry, build_basis, build_lattice

GEOM = ArrayGeometry(n_x=17, n_y=17, delta=0.25, lam=1.0)
LAT = build_lattice(GEOM)
BASIS = build_basis(GEOM, LAT)
L = len(LAT)


def sparse_channel(rng, support):
    h = np.zeros(L, dtype=complex)
    h[list(support)] = rng.standard_normal(len(support)) + 1j * rng.standard_normal(len(support))
    return UserChannel(h_f=h, support=np.array(sorted(support), dtype=np.int64))


def drawn_setup(seed, users=5, pilot_len=40, snr_db=15.0):
    rng = np.random.default_rng(seed)
    scen = draw_scenario(users, rng)
    maps = variance_maps(scen, LAT, GEOM)
    chans = sample_channels(scen, maps, rng)
    floored = [apply_activity_floor(m.sigma_sq) for m in maps]
    power = float(np.mean([f.sum() for f in floored]))
    active = float(np.mean([np.count_nonzero(f >= 1e-3 * f.max()) for f in floored]))
    meas = generate_measurements(chans, BASIS, pilot_len, snr_db,
                                 np.random.default_rng(seed + 10_000), signal_power=power)
    truth = np.column_stack([c.h_f for c in chans])
    budget = min(L, int(math.ceil(1.5 * active)))
    return meas, truth, EstimatorConfig(trim_budget=budget)


class TestGenerateMeasurements:
    def test_noiseless_is_exact(self):
        rng = np.random.default_rng(0)
        chans = [sparse_channel(rng, {3, 8, 20})]
        meas = generate_measurements(chans, BASIS, 16, math.inf, np.random.default_rng(1))
        expected = meas.effective @ chans[0].h_f
        np.testing.assert_array_equal(meas.received[0], expected)
        assert meas.noise_variance == 0.0

    def test_effective_equals_pilots_times_basis(self):
        rng = np.random.default_rng(0)
        chans = [sparse_channel(rng, {3})]
        meas = generate_measurements(chans, BASIS, 8, 10.0, np.random.default_rng(1))
        assert np.max(np.abs(meas.effective - meas.pilots @ BASIS.psi)) < 1e-10

    def test_zero_channel_noise_variance(self):
        chans = [UserChannel(h_f=np.zeros(L, dtype=complex), support=np.empty(0, dtype=np.int64))]
        meas = generate_measurements(chans, BASIS, 256, 7.0,
                                     np.random.default_rng(5), signal_power=1.0)
        emp = float(np.mean(np.abs(meas.received[0]) ** 2))
        assert emp == pytest.approx(meas.noise_variance, rel=0.10)
        assert meas.noise_variance == pytest.approx(10 ** (-0.7), rel=1e-12)

    def test_same_seed_bitwise_identical(self):
        rng = np.random.default_rng(0)
        chans = [sparse_channel(rng, {3, 8})]
        a = generate_measurements(chans, BASIS, 12, 5.0, np.random.default_rng(77))
        b = generate_measurements(chans, BASIS, 12, 5.0, np.random.default_rng(77))
        assert np.array_equal(a.pilots, b.pilots)
        assert np.array_equal(a.received, b.received)

    def test_pilot_entries_unit_variance(self):
        rng = np.random.default_rng(0)
        chans = [sparse_channel(rng, {3})]
        meas = generate_measurements(chans, BASIS, 300, 10.0, np.random.default_rng(9))
        assert float(np.mean(np.abs(meas.pilots) ** 2)) == pytest.approx(1.0, rel=0.02)


class TestResidualScores:
    def test_exact_estimate_gives_zero_scores(self):
        rng = np.random.default_rng(2)
        ch = sparse_channel(rng, {5, 9})
        meas = generate_measurements([ch], BASIS, 20, math.inf, np.random.default_rng(3))
        residual, scores = residual_scores(meas.received[0], meas.effective, ch.h_f)
        assert np.max(np.abs(residual)) < 1e-12 or not scores.any()

    def test_zero_estimate_residual_is_observation(self):
        rng = np.random.default_rng(2)
        ch = sparse_channel(rng, {5})
        meas = generate_measurements([ch], BASIS, 20, 10.0, np.random.default_rng(3))
        residual, _ = residual_scores(meas.received[0], meas.effective, np.zeros(L, dtype=complex))
        np.testing.assert_array_equal(residual, meas.received[0])

    def test_scores_in_unit_interval(self):
        rng = np.random.default_rng(4)
        ch = sparse_channel(rng, {5, 6, 7})
        meas = generate_measurements([ch], BASIS, 24, 5.0, np.random.default_rng(5))
        _, scores = residual_scores(meas.received[0], meas.effective, np.zeros(L, dtype=complex))
        assert np.all(scores >= 0) and np.all(scores <= 1 + 1e-12)

    def test_single_entry_argmax_recovery(self):
        # Monte-Carlo oracle: with one active cell and no noise the top
        # score lands on the true cell essentially always
        hits = 0
        runs = 200
        for i in range(runs):
            rng = np.random.default_rng(100 + i)
            cell = int(rng.integers(L))
            ch = sparse_channel(rng, {cell})
            meas = generate_measurements([ch], BASIS, 16, math.inf,
                                         np.random.default_rng(500 + i))
            _, scores = residual_scores(meas.received[0], meas.effective,
                                        np.zeros(L, dtype=complex))
            hits += int(np.argmax(scores)) == cell
        assert hits / runs >= 0.99


class TestSelectCandidates:
    def test_spec_example(self):
        scores = np.array([0.9, 0.1, 0.8, 0.05])
        out = select_candidates(scores, 3, 0.15)
        assert out.tolist() == [0, 2]

    def test_all_below_threshold(self):
        scores = np.full(6, 0.3)           # 0.09 < 0.15
        assert select_candidates(scores, 4, 0.15).size == 0

    def test_tie_breaks_to_lower_position(self):
        scores = np.array([0.5, 0.9, 0.2, 0.9])
        out = select_candidates(scores, 2, 0.15)
        assert out.tolist() == [1, 3]

    def test_descending_order(self):
        scores = np.array([0.5, 0.9, 0.7, 0.6])
        out = select_candidates(scores, 3, 0.15)
        assert out.tolist() == [1, 2, 3]

    def test_scale_invariance_of_selection(self):
        # scores are correlation cosines: scaling y and the sensing matrix
        # leaves them unchanged, hence the selected set too
        rng = np.random.default_rng(8)
        ch = sparse_channel(rng, {4, 17, 30})
        meas = generate_measurements([ch], BASIS, 24, 20.0, np.random.default_rng(9))
        _, s1 = residual_scores(meas.received[0], meas.effective, np.zeros(L, dtype=complex))
        _, s2 = residual_scores(3.7 * meas.received[0], 3.7 * meas.effective,
                                np.zeros(L, dtype=complex))
        np.testing.assert_allclose(s1, s2, atol=1e-12)
        assert select_candidates(s1, 8, 0.15).tolist() == select_candidates(s2, 8, 0.15).tolist()


class TestVoteCommon:
    def test_four_of_five_added(self):
        sets = [np.array([7]), np.array([7]), np.array([7]), np.array([7, 3]), np.array([5])]
        out = vote_common(sets, 4, set())
        assert out == {7}

    def test_single_listing_not_added(self):
        sets = [np.array([7]), np.array([2]), np.array([3]), np.array([4]), np.array([5])]
        assert vote_common(sets, 4, set()) == set()

    def test_union_is_idempotent_and_monotone(self):
        sets = [np.array([1]), np.array([1]), np.array([1]), np.array([1])]
        cur = {9}
        out = vote_common(sets, 4, cur)
        assert out == {1, 9}
        assert vote_common(sets, 4, out) == {1, 9}
        assert cur == {9}  # input not mutated

    def test_strict_mode_needs_more_votes(self):
        sets = [np.array([7])] * 4 + [np.array([5])]
        assert vote_common(sets, 4, set(), strict=True) == set()
        sets = [np.array([7])] * 5
        assert vote_common(sets, 4, set(), strict=True) == {7}

    def test_duplicate_entries_in_one_set_count_once(self):
        sets = [np.array([7, 7, 7]), np.array([7]), np.array([2])]
        assert vote_common(sets, 3, set()) == set()


class TestMergeAndLabel:
    def test_all_negative_when_nothing_to_do(self):
        labels, support = merge_and_label(
            np.zeros(L), set(), set(), np.empty(0, dtype=np.int64), LAT, EstimatorConfig())
        assert np.all(labels == -1)
        assert support == set()

    def test_common_cell_clamped_positive(self):
        scores = np.zeros(L)
        labels, support = merge_and_label(
            scores, set(), {13}, np.empty(0, dtype=np.int64), LAT, EstimatorConfig())
        assert labels[13] == 1
        assert 13 in support

    def test_cluster_extension_matches_brute_force(self):
        # a contiguous high-score blob should label as one region even where
        # only part of it is forced; verify against exhaustive minimization
        import itertools
        small_lat = build_lattice(ArrayGeometry(n_x=9, n_y=9, delta=0.25, lam=1.0))
        nL = len(small_lat)
        scores = np.zeros(nL)
        blob = [small_lat.position(0, 0), small_lat.position(1, 0), small_lat.position(0, 1)]
        scores[blob] = [0.9, 0.8, 0.75]
        cfg = EstimatorConfig(mrf_gamma=5.0, mrf_tau_frac=0.5)
        labels, _ = merge_and_label(scores, set(), set(), np.array([blob[0]]), small_lat, cfg)

        tau = 0.5 * scores.max()
        best, best_energy = None, np.inf
        for bits in itertools.product((-1, 1), repeat=nL):
            lbl = np.array(bits)
            if lbl[blob[0]] != 1:
                continue
            unary = np.where(lbl == 1, 5.0 * (tau - scores), 5.0 * (scores - tau)).sum()
            cut = sum(0.45 for p, q in small_lat.edges if lbl[p] != lbl[q])
            if unary + cut < best_energy:
                best_energy, best = unary + cut, lbl
        np.testing.assert_array_equal(labels, best)


class TestTrimLs:
    def test_exact_recovery_on_true_support(self):
        rng = np.random.default_rng(21)
        ch = sparse_channel(rng, {2, 9, 31})
        meas = generate_measurements([ch], BASIS, 12, math.inf, np.random.default_rng(22))
        labels = np.where(np.abs(ch.h_f) > 0, 1, -1)
        h_hat, under = trim_ls(meas.received[0], meas.effective, labels, None)
        assert not under
        assert np.linalg.norm(h_hat - ch.h_f) / np.linalg.norm(ch.h_f) < 1e-10

    def test_all_negative_labels_give_zero(self):
        rng = np.random.default_rng(21)
        ch = sparse_channel(rng, {2})
        meas = generate_measurements([ch], BASIS, 8, math.inf, np.random.default_rng(22))
        h_hat, under = trim_ls(meas.received[0], meas.effective, -np.ones(L, dtype=int), 5)
        assert not h_hat.any() and not under

    def test_trim_keeps_largest_magnitudes(self):
        # synthetic system where the LS solution is exactly [3, -1, .5+.5j]
        effective = np.eye(4, dtype=complex)[:, :3]
        coeffs = np.array([3.0, -1.0, 0.5 + 0.5j])
        y = effective @ coeffs
        labels = np.array([1, 1, 1])
        h_hat, _ = trim_ls(y, effective, labels, 2)
        assert h_hat[0] == pytest.approx(3.0)
        assert h_hat[1] == pytest.approx(-1.0)
        assert h_hat[2] == 0.0

    def test_underdetermined_flag(self):
        rng = np.random.default_rng(23)
        ch = sparse_channel(rng, set(range(20)))
        meas = generate_measurements([ch], BASIS, 10, math.inf, np.random.default_rng(24))
        labels = np.where(np.abs(ch.h_f) > 0, 1, -1)
        h_hat, under = trim_ls(meas.received[0], meas.effective, labels, None)
        assert under

    def test_significance_pruning_drops_noise_level_entries(self):
        effective = np.eye(8, dtype=complex)[:, :4]
        coeffs = np.array([2.0, 0.01, 1.5, 0.02])
        y = effective @ coeffs
        labels = np.array([1, 1, 1, 1])
        h_hat, _ = trim_ls(y, effective, labels, None,
                           noise_variance=0.05, sig_level=6.0, resolve=True)
        assert h_hat[0] != 0 and h_hat[2] != 0
        assert h_hat[1] == 0 and h_hat[3] == 0


class TestNmse:
    def test_exact(self):
        t = np.array([[1 + 1j], [2.0]])
        assert nmse(t, t) == 0.0

    def test_zero_estimate(self):
        t = np.array([[1 + 1j], [2.0]])
        assert nmse(t, np.zeros_like(t)) == pytest.approx(1.0)

    def test_double_estimate(self):
        t = np.array([[1 + 1j], [2.0]])
        assert nmse(t, 2 * t) == pytest.approx(1.0)

    def test_zero_truth_raises(self):
        with pytest.raises(ValueError):
            nmse(np.zeros(3), np.ones(3))


class TestGraphCutEstimators:
    def test_noiseless_full_pilots_recovers_shared_cluster(self):
        cluster = ClusterSpec(center_theta=0.35, center_phi=1.1,
                              concentration=140.0, shared=True)
        scen = ScatteringScenario(clusters=(cluster,), weights=np.ones((5, 1)))
        maps = variance_maps(scen, LAT, GEOM)
        chans = sample_channels(scen, maps, np.random.default_rng(3))
        truth = np.column_stack([c.h_f for c in chans])
        meas = generate_measurements(chans, BASIS, L, math.inf, np.random.default_rng(5))
        res = jgc_ce(meas, BASIS, LAT, EstimatorConfig(max_iters=15), truth=truth)
        assert res.iterations <= 15
        assert nmse(truth, res.h_hat) < 1e-6

    def test_single_user_equals_gcse(self):
        meas, truth, cfg = drawn_setup(1, users=1)
        a = jgc_ce(meas, BASIS, LAT, cfg, truth=truth)
        b = gcse(meas, BASIS, LAT, cfg, truth=truth)
        assert np.array_equal(a.h_hat, b.h_hat)
        assert a.iterations == b.iterations

    def test_zero_channels_give_zero_estimate(self):
        chans = [UserChannel(h_f=np.zeros(L, dtype=complex), support=np.empty(0, dtype=np.int64))
                 for _ in range(3)]
        meas = generate_measurements(chans, BASIS, 16, math.inf, np.random.default_rng(1))
        res = jgc_ce(meas, BASIS, LAT, EstimatorConfig())
        assert not res.h_hat.any()
        assert res.iterations <= 2

    def test_inert_voting_matches_gcse_bitwise(self):
        for seed in range(5):
            meas, truth, cfg = drawn_setup(seed)
            import dataclasses
            inert = dataclasses.replace(cfg, k0=99)
            a = jgc_ce(meas, BASIS, LAT, inert, truth=truth)
            b = gcse(meas, BASIS, LAT, inert, truth=truth)
            assert np.array_equal(a.h_hat, b.h_hat)
            assert a.common_support.size == 0

    def test_common_support_monotone_and_contained(self):
        meas, truth, cfg = drawn_setup(7)
        res = jgc_ce(meas, BASIS, LAT, cfg, truth=truth)
        sizes = [rec.common_support_size for rec in res.trace]
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))
        # final common support is inside every user's accumulated support:
        # rerun and inspect supports via support_sizes bookkeeping
        assert res.common_support.size <= min(rec for rec in res.trace[-1].support_sizes)

    def test_final_residuals_consistent(self):
        meas, truth, cfg = drawn_setup(9)
        res = jgc_ce(meas, BASIS, LAT, cfg, truth=truth)
        expected = meas.received - (meas.effective @ res.h_hat).T
        assert np.max(np.abs(res.final_residuals - expected)) < 1e-10

    def test_trace_records_nmse_when_truth_given(self):
        meas, truth, cfg = drawn_setup(11)
        res = gcse(meas, BASIS, LAT, cfg, truth=truth)
        assert res.trace[0].nmse_joint is not None
        assert res.trace[-1].nmse_per_user.shape == (truth.shape[1],)

    def test_joint_beats_single_user_on_shared_scenarios(self):
        # aggregate sanity on a handful of paired draws at mid SNR
        import dataclasses
        g33 = ArrayGeometry(n_x=33, n_y=33, delta=0.25, lam=1.0)
        lat33 = build_lattice(g33)
        basis33 = build_basis(g33, lat33)
        diffs = []
        for seed in range(8):
            rng = np.random.default_rng(seed)
            scen = draw_scenario(5, rng)
            maps = variance_maps(scen, lat33, g33)
            chans = sample_channels(scen, maps, rng)
            floored = [apply_activity_floor(m.sigma_sq) for m in maps]
            power = float(np.mean([f.sum() for f in floored]))
            active = float(np.mean([np.count_nonzero(f >= 1e-3 * f.max()) for f in floored]))
            truth = np.column_stack([c.h_f for c in chans])
            cfg = EstimatorConfig(trim_budget=min(len(lat33), int(math.ceil(1.5 * active))),
                                  k_tilde=16)
            meas = generate_measurements(chans, basis33, 64, 20.0,
                                         np.random.default_rng(seed + 999), signal_power=power)
            a = jgc_ce(meas, basis33, lat33, cfg, truth=truth)
            b = gcse(meas, basis33, lat33, cfg, truth=truth)
            diffs.append(nmse(truth, b.h_hat) - nmse(truth, a.h_hat))
        assert np.mean(diffs) > 0

    def test_noiseless_residual_nearly_monotone(self):
        # property: per-iteration mean residual norm non-increasing without
        # noise; tolerate a small violation rate
        steps = 0
        violations = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            scen = draw_scenario(3, rng)
            maps = variance_maps(scen, LAT, GEOM)
            chans = sample_channels(scen, maps, rng)
            truth = np.column_stack([c.h_f for c in chans])
            meas = generate_measurements(chans, BASIS, 40, math.inf,
                                         np.random.default_rng(seed + 321))
            res = jgc_ce(meas, BASIS, LAT, EstimatorConfig(k0=2), truth=truth)
            norms = [float(np.mean(rec.residual_norms)) for rec in res.trace]
            for a, b in zip(norms, norms[1:]):
                steps += 1
                violations += b > a * (1 + 1e-9)
        assert steps > 0
        assert violations / steps <= 0.02


class TestWdOmp:
    def test_one_sparse_noiseless_single_iteration(self):
        rng = np.random.default_rng(31)
        ch = sparse_channel(rng, {17})
        meas = generate_measurements([ch], BASIS, 12, math.inf, np.random.default_rng(32))
        h_hat, trace = wd_omp(meas.received[0], meas.effective, EstimatorConfig(), 5)
        assert len(trace) == 1
        assert np.linalg.norm(h_hat - ch.h_f) / np.linalg.norm(ch.h_f) < 1e-10

    def test_s_sparse_noiseless_recovery_probability(self):
        # Monte-Carlo oracle: 4-sparse with 16 pilots succeeds essentially always
        ok = 0
        runs = 40
        for i in range(runs):
            rng = np.random.default_rng(600 + i)
            support = set(rng.choice(L, size=4, replace=False).tolist())
            ch = sparse_channel(rng, support)
            meas = generate_measurements([ch], BASIS, 16, math.inf,
                                         np.random.default_rng(900 + i))
            h_hat, _ = wd_omp(meas.received[0], meas.effective, EstimatorConfig(), 8)
            ok += np.linalg.norm(h_hat - ch.h_f) / np.linalg.norm(ch.h_f) < 1e-8
        assert ok / runs >= 0.95

    def test_budget_cannot_exceed_pilot_length(self):
        rng = np.random.default_rng(31)
        ch = sparse_channel(rng, {17})
        meas = generate_measurements([ch], BASIS, 8, math.inf, np.random.default_rng(32))
        with pytest.raises(ValueError):
            wd_omp(meas.received[0], meas.effective, EstimatorConfig(), 9)

    def test_trace_shape(self):
        meas, truth, cfg = drawn_setup(33, users=1)
        h_hat, trace = wd_omp(meas.received[0], meas.effective, cfg, 20, truth_i=truth[:, 0])
        assert all(len(t) == 3 for t in trace)
        iterations = [t[0] for t in trace]
        assert iterations == list(range(1, len(trace) + 1))
