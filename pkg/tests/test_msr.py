import numpy as np
import pytest

from afrelay import msr as S
from afrelay.exceptions import DegenerateError, ValidationError
from afrelay.network import (
    ChannelSet,
    GlobalPower,
    LocalPower,
    Topology,
    compute_stats,
    draw_channels,
    equal_power_gains,
    propagate,
)
from oracles import correlation, crandn


def random_gains(top, rng):
    return [crandn(rng, n) for n in top.relay_counts]


def cascade_for(top, ch, g):
    return S.build_cascade(top, ch, g, compute_stats(top, ch, g))


@pytest.fixture
def local8(top_1442):
    return LocalPower((4.0, 4.0))


class TestCascade:
    def test_two_hops(self, rng):
        top = Topology.from_snr_db((1, 3, 2), 5.0)
        ch = draw_channels(top, seed=0)
        g = random_gains(top, rng)
        casc = cascade_for(top, ch, g)
        b1 = ch.h_d @ np.diag(g[0]) @ np.diag(casc.normalizers[0])
        np.testing.assert_allclose(casc.product(0, 1), b1 @ ch.h_s, atol=1e-14)

    def test_zero_gains(self, top_1442, channels_1442):
        g = [np.zeros(4, complex), np.zeros(4, complex)]
        st = compute_stats(top_1442, channels_1442, [np.ones(4), np.ones(4)])
        casc = S.build_cascade(top_1442, channels_1442, g, st)
        assert not np.any(casc.phi)
        np.testing.assert_array_equal(casc.z, np.eye(2))

    def test_identity_convention(self, top_1442, channels_1442, rng):
        casc = cascade_for(top_1442, channels_1442, random_gains(top_1442, rng))
        np.testing.assert_array_equal(casc.product(3, 2), np.eye(2))
        np.testing.assert_array_equal(casc.product(1, 0), np.eye(4))

    def test_covariance_matches_simulation(self, top_1442, channels_1442, rng):
        g = random_gains(top_1442, rng)
        st = compute_stats(top_1442, channels_1442, g)
        casc = S.build_cascade(top_1442, channels_1442, g, st)
        n = 10**5
        d = propagate(top_1442, channels_1442, g, st, crandn(rng, (1, n)), seed=8).received
        emp = d @ d.conj().T / n
        model = top_1442.sigma_s2 * casc.phi + top_1442.sigma_n2 * casc.z
        np.testing.assert_allclose(np.diag(emp).real, np.diag(model).real, rtol=0.05)
        assert np.max(np.abs(correlation(emp) - correlation(model))) <= 0.05

    def test_multiple_sources_rejected(self):
        top = Topology((2, 2, 1))
        ch = draw_channels(top, seed=0)
        with pytest.raises(ValidationError):
            cascade_for(top, ch, [np.ones(2)])


class TestSumRate:
    def test_no_signal(self, top_1442, channels_1442):
        g = [np.zeros(4, complex), np.zeros(4, complex)]
        st = compute_stats(top_1442, channels_1442, [np.ones(4), np.ones(4)])
        casc = S.build_cascade(top_1442, channels_1442, g, st)
        assert S.sum_rate(casc, np.ones(2), top_1442) == 0.0

    def test_scale_invariance(self, top_1442, channels_1442, rng):
        casc = cascade_for(top_1442, channels_1442, random_gains(top_1442, rng))
        w = crandn(rng, 2)
        base = S.sum_rate(casc, w, top_1442)
        for _ in range(10):
            c = complex(*rng.standard_normal(2))
            assert abs(S.sum_rate(casc, c * w, top_1442) - base) <= 1e-12

    def test_scalar_chain_by_hand(self):
        # F = 1/sqrt 2, so phi = 1/2 and Z = 1/2 + 1
        top = Topology((1, 1, 1))
        ch = ChannelSet.from_links([np.ones((1, 1)), np.ones((1, 1))])
        casc = cascade_for(top, ch, [np.ones(1)])
        assert S.sum_rate(casc, np.ones(1), top) == pytest.approx(0.5 * np.log2(4.0 / 3.0), abs=1e-15)

    def test_zero_receiver(self, top_1442, channels_1442, rng):
        casc = cascade_for(top_1442, channels_1442, random_gains(top_1442, rng))
        with pytest.raises(DegenerateError):
            S.sum_rate(casc, np.zeros(2), top_1442)


class TestGeneralizedDominant:
    def test_identity_denominator(self, rng):
        x = crandn(rng, (4, 4))
        phi = x @ x.conj().T
        w = S.generalized_dominant(phi, np.eye(4))
        _, vecs = np.linalg.eigh(phi)
        assert abs(abs(np.vdot(vecs[:, -1], w)) - 1) < 1e-10

    @pytest.mark.parametrize("solver", ["qr", "power"])
    def test_rank_one(self, rng, solver):
        q = crandn(rng, 3)
        x = crandn(rng, (3, 3))
        z = x @ x.conj().T + np.eye(3)
        w = S.generalized_dominant(np.outer(q, q.conj()), z, solver)
        ref = np.linalg.solve(z, q)
        ref /= np.linalg.norm(ref)
        assert abs(abs(np.vdot(ref, w)) - 1) < 1e-10

    def test_unknown_solver(self):
        with pytest.raises(ValidationError):
            S.generalized_dominant(np.eye(2), np.eye(2), "lanczos")

    def test_qr_and_power_agree(self, top_1442, rng):
        for seed in range(20):
            ch = draw_channels(top_1442, seed=seed)
            casc = cascade_for(top_1442, ch, random_gains(top_1442, rng))
            a = S.sum_rate(casc, S.solve_receiver(casc, "qr"), top_1442)
            b = S.sum_rate(casc, S.solve_receiver(casc, "power"), top_1442)
            assert abs(a - b) <= 1e-6 * a

    def test_beats_random_receivers(self, top_1442, channels_1442, rng):
        casc = cascade_for(top_1442, channels_1442, random_gains(top_1442, rng))
        best = S.quotient(casc.phi, casc.z, S.solve_receiver(casc))
        for _ in range(1000):
            assert S.quotient(casc.phi, casc.z, crandn(rng, 2)) <= best * (1 + 1e-12)


class TestGroupMatrices:
    @pytest.mark.parametrize("topology", [(1, 4, 4, 2), (1, 2, 3, 2, 2), (1, 3, 2)])
    def test_bridge_identity(self, topology, rng):
        top = Topology.from_snr_db(topology, 7.0)
        ch = draw_channels(top, seed=5)
        g = random_gains(top, rng)
        casc = cascade_for(top, ch, g)
        w = crandn(rng, top.n_destinations)
        q = S.quotient(casc.phi, casc.z, w)
        counts = top.node_counts
        for i in range(1, top.m):
            budget = counts[i + 1] * np.vdot(g[i - 1], g[i - 1]).real
            gm = S.build_group_matrices(casc, w, i, top, budget)
            a = g[i - 1]
            assert np.vdot(a, gm.m @ a).real / np.vdot(a, gm.n @ a).real == pytest.approx(q, rel=1e-8)
            t = np.eye(top.n_destinations, dtype=complex)
            for k in range(i + 1, top.m):
                c = np.eye(casc.factors[k].shape[1])
                for f in casc.factors[k:]:
                    c = f @ c
                t += c @ c.conj().T
            assert np.vdot(gm.w_scaled, t @ gm.w_scaled).real == pytest.approx(1.0, abs=1e-10)
            np.testing.assert_allclose(gm.m, gm.m.conj().T, atol=1e-14)
            assert np.linalg.eigvalsh(gm.m).min() >= -1e-10

    def test_solve_gains_rank_one(self, rng):
        m = crandn(rng, 4)
        mats = S.GroupMatrices(np.outer(m, m.conj()), np.zeros((4, 4)), 1.0, 0.5 * np.eye(4), None)
        a = S.solve_gains(mats, 2.0, 4)
        assert abs(abs(np.vdot(m / np.linalg.norm(m), a / np.linalg.norm(a))) - 1) < 1e-10
        assert 4 * np.vdot(a, a).real == pytest.approx(2.0, rel=1e-10)

    def test_solve_gains_zero_signal(self):
        mats = S.GroupMatrices(np.zeros((2, 2)), np.zeros((2, 2)), 1.0, np.eye(2), None)
        with pytest.raises(DegenerateError):
            S.solve_gains(mats, 1.0, 1)

    def test_gains_beat_random_feasible(self, top_1442, channels_1442, rng):
        g = random_gains(top_1442, rng)
        casc = cascade_for(top_1442, channels_1442, g)
        w = S.solve_receiver(casc)
        for i, n_next in ((1, 4), (2, 2)):
            gm = S.build_group_matrices(casc, w, i, top_1442, 4.0)
            a = S.solve_gains(gm, 4.0, n_next)

            def ratio(x):
                return np.vdot(x, gm.m @ x).real / np.vdot(x, gm.n @ x).real

            best = ratio(a)
            for _ in range(1000):
                x = crandn(rng, 4)
                x *= np.sqrt(4.0 / n_next) / np.linalg.norm(x)
                assert ratio(x) <= best * (1 + 1e-12)


class TestRunMsr:
    def test_budgets_exact(self, top_1442, channels_1442, local8):
        res = S.run_msr(top_1442, channels_1442, local8, iterations=3)
        assert local8.residual(top_1442, res.gains) <= 1e-10

    def test_monotone_over_draws(self, top_1442, local8):
        for seed in range(100):
            ch = draw_channels(top_1442, seed=seed)
            tr = np.array(S.run_msr(top_1442, ch, local8, iterations=4).sr_trace)
            assert np.all(np.diff(tr) >= -1e-9)

    def test_beats_equal_power_on_average(self, top_1442, local8):
        gain = []
        for seed in range(50):
            ch = draw_channels(top_1442, seed=seed)
            res = S.run_msr(top_1442, ch, local8)
            eq = equal_power_gains(top_1442, 8.0)
            casc = cascade_for(top_1442, ch, eq)
            gain.append(res.sr_trace[-1] - S.sum_rate(casc, S.solve_receiver(casc), top_1442))
        assert np.mean(gain) > 0

    def test_power_solver_matches_qr(self, top_1442, channels_1442, local8):
        a = S.run_msr(top_1442, channels_1442, local8, solver="qr").sr_trace[-1]
        b = S.run_msr(top_1442, channels_1442, local8, solver="power").sr_trace[-1]
        assert abs(a - b) <= 1e-6 * a

    def test_rejects_global_budget(self, top_1442, channels_1442):
        with pytest.raises(ValidationError):
            S.run_msr(top_1442, channels_1442, GlobalPower(8.0))

    def test_rejects_zero_iterations(self, top_1442, channels_1442, local8):
        with pytest.raises(ValidationError):
            S.run_msr(top_1442, channels_1442, local8, iterations=0)
