import numpy as np
import pytest

from fdkdv.flow import FlowParams, TrajectoryRecord, evolve, step
from fdkdv.normal_form import (
    NormalFormFrame,
    TripleClass,
    classify_triple,
    nonresonant_cubic,
    normal_form_bilinear,
    normal_form_residual,
    resonant_cancellation_residual,
    resonant_cubic,
    smoothing_gap,
    third_antiderivative,
)
from fdkdv.spectral import CoefSeq, GridSpec, random_rough_state, sobolev_norm


def hermitian_state(grid, seed, decay=1.0, scale=1.0):
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.size, dtype=np.complex128)
    for k in range(1, grid.K + 1):
        val = scale * (rng.normal() + 1j * rng.normal()) * k**-decay
        c[k + grid.K] = val
        c[-k + grid.K] = np.conj(val)
    return CoefSeq(grid, c)


class TestThirdAntiderivative:
    def test_cosine_forcing(self):
        # f = cos x: v_k = f_k/(ik)^3 gives v_1 = (1/2)/(-i) = i/2, so v = -sin x
        g = GridSpec(8)
        v = third_antiderivative(CoefSeq.cosine(g))
        assert v.mode(1) == pytest.approx(0.5j, abs=1e-15)
        assert v.mode(-1) == pytest.approx(-0.5j, abs=1e-15)

    def test_differentiating_three_times_recovers_forcing(self):
        g = GridSpec(16)
        f = hermitian_state(g, seed=1)
        v = third_antiderivative(f)
        k = g.modes.astype(np.float64)
        back = (1j * k) ** 3 * v.coef
        back[g.K] = 0.0
        assert np.max(np.abs(back - f.coef)) < 1e-13

    def test_zero(self):
        g = GridSpec(8)
        assert np.all(third_antiderivative(CoefSeq.zeros(g)).coef == 0)

    def test_norm_never_exceeds_forcing_norm(self):
        g = GridSpec(32)
        for seed in range(5):
            f = hermitian_state(g, seed=seed, decay=0.8)
            v = third_antiderivative(f)
            assert v.l2() <= f.l2()
            assert sobolev_norm(v, 0.9) <= f.l2()


class TestNormalFormFrame:
    def frame(self, K=32, gamma=0.8):
        g = GridSpec(K)
        return NormalFormFrame.from_forcing(CoefSeq.cosine(g), gamma), g

    def test_z_at_time_zero(self):
        frame, g = self.frame()
        u = hermitian_state(g, seed=2)
        z = frame.to_z(u, 0.0)
        assert np.max(np.abs(z.coef - (u.coef - frame.v.coef))) < 1e-15

    def test_u_equal_v_gives_zero(self):
        frame, g = self.frame()
        z = frame.to_z(frame.v, 1.3)
        assert np.max(np.abs(z.coef)) == 0.0

    def test_round_trip(self):
        frame, g = self.frame()
        u = hermitian_state(g, seed=3)
        back = frame.from_z(frame.to_z(u, 2.7), 2.7)
        assert np.max(np.abs(back.coef - u.coef)) < 1e-12

    def test_y_modulus_grows_like_exp_gamma_t(self):
        frame, g = self.frame(gamma=0.8)
        t = 1.9
        y = frame.y_at(t)
        assert np.allclose(np.abs(y.coef), np.abs(frame.v.coef) * np.exp(0.8 * t))

    def test_frame_rate_equals_twisted_forcing(self):
        # d/dt y - gamma y = -i k^3 y must equal e^{(gamma - ik^3) t} f_k
        g = GridSpec(16)
        f = hermitian_state(g, seed=4)
        frame = NormalFormFrame.from_forcing(f, 0.6)
        t = 0.83
        k = g.modes.astype(np.float64)
        twisted_f = f.coef * np.exp((0.6 - 1j * k**3) * t)
        assert np.max(np.abs(frame.y_rate_minus_gamma_y(t).coef - twisted_f)) < 1e-12


class TestNormalFormBilinear:
    def test_single_pair_sum(self):
        g = GridSpec(8)
        u = CoefSeq.from_modes(g, {1: 1.0, -1: 1.0})
        b = normal_form_bilinear(u, u)
        assert b.mode(2) == pytest.approx(1.0 / 6.0, abs=1e-15)
        # the (1, -1) pairing would land at k = 0, which is zero by definition
        assert b.mode(0) == 0.0

    def test_phase_periodicity(self):
        g = GridSpec(8)
        u = CoefSeq.from_modes(g, {1: 1.0, -1: 1.0})
        b = normal_form_bilinear(u, u, t=np.pi / 3.0)
        # k=2 term has phase e^{-6it} = e^{-2 pi i} = 1
        assert b.mode(2) == pytest.approx(1.0 / 6.0, abs=1e-12)

    def test_matches_direct_sum_oracle(self):
        g = GridSpec(6)
        u = hermitian_state(g, seed=5)
        v = hermitian_state(g, seed=6)
        t = 0.37
        K = g.K
        expected = np.zeros(g.size, dtype=np.complex128)
        for k in range(-K, K + 1):
            if k == 0:
                continue
            acc = 0.0 + 0.0j
            for k1 in range(-K, K + 1):
                k2 = k - k1
                if k1 == 0 or k2 == 0 or abs(k2) > K:
                    continue
                acc += (
                    np.exp(-3j * k * k1 * k2 * t)
                    * u.coef[k1 + K]
                    * v.coef[k2 + K]
                    / (k1 * k2)
                )
            expected[k + K] = acc / 6.0
        got = normal_form_bilinear(u, v, t)
        assert np.max(np.abs(got.coef - expected)) < 1e-13

    def test_bilinear(self):
        g = GridSpec(12)
        u, v, w = (hermitian_state(g, seed=s) for s in (7, 8, 9))
        lhs = normal_form_bilinear(u.with_coef(2 * u.coef + w.coef), v).coef
        rhs = (
            2 * normal_form_bilinear(u, v).coef + normal_form_bilinear(w, v).coef
        )
        assert np.max(np.abs(lhs - rhs)) < 1e-13

    @pytest.mark.parametrize("t", [0.0, 0.61])
    def test_hermitian_preservation(self, t):
        g = GridSpec(16)
        u = hermitian_state(g, seed=10)
        v = hermitian_state(g, seed=11)
        assert normal_form_bilinear(u, v, t).is_real_field(1e-12)

    def test_two_mode_norm_ratio_closed_form(self):
        # u = v with u_{+-1} = 1: ratio ||B(u,u)||_{H^s} / (||u|| ||v||) = 2^{s-1/2}/6
        g = GridSpec(8)
        u = CoefSeq.from_modes(g, {1: 1.0, -1: 1.0})
        b = normal_form_bilinear(u, u)
        ratio = sobolev_norm(b, 0.5) / (u.l2() ** 2)
        assert ratio == pytest.approx(1.0 / 6.0, abs=1e-14)

    def test_hs_bound_stable_across_truncations(self):
        # ||B(u,v)||_{H^0.9} <= C ||u|| ||v|| with C stable in K
        worst = {}
        for K in (16, 32, 64):
            g = GridSpec(K)
            ratios = []
            for seed in range(20):
                u = hermitian_state(g, seed=100 + seed, decay=0.6)
                v = hermitian_state(g, seed=200 + seed, decay=0.6)
                b = normal_form_bilinear(u, v)
                ratios.append(sobolev_norm(b, 0.9) / (u.l2() * v.l2()))
            worst[K] = max(ratios)
        assert worst[32] <= 1.05 * max(worst[16], 1e-9) + 0.05
        assert worst[64] <= 1.05 * worst[32] + 0.05

    def test_rejects_non_mean_zero(self):
        g = GridSpec(8)
        bad = CoefSeq.from_modes(g, {0: 1.0, 1: 1.0, -1: 1.0})
        with pytest.raises(ValueError):
            normal_form_bilinear(bad, bad)


class TestResonantCubic:
    def test_two_mode_arithmetic(self):
        g = GridSpec(4)
        u = CoefSeq.from_modes(g, {1: 2.0, -1: 2.0})
        r = resonant_cubic(u)
        assert r.mode(1) == pytest.approx(-4j / 3.0, abs=1e-14)
        assert r.mode(-1) == pytest.approx(4j / 3.0, abs=1e-14)

    def test_zero(self):
        assert np.all(resonant_cubic(CoefSeq.zeros(GridSpec(4))).coef == 0)

    def test_hermitian_output(self):
        u = hermitian_state(GridSpec(32), seed=12)
        assert resonant_cubic(u).is_real_field(1e-13)

    def test_cubic_bound_random_trials(self):
        g = GridSpec(64)
        for seed in range(50):
            u = random_rough_state(g, 0.8, seed=seed, target_l2=1.0 + seed % 3)
            r = resonant_cubic(u)
            assert sobolev_norm(r, 0.5) <= u.l2() ** 3


class TestClassifyTriple:
    def test_paper_examples(self):
        assert classify_triple(-2, 2, 2) is TripleClass.DOUBLY_RESONANT
        assert classify_triple(3, -3, 1) is TripleClass.PAIR_12
        assert classify_triple(3, 1, -3) is TripleClass.PAIR_13
        assert classify_triple(1, 2, 3) is TripleClass.NONRESONANT

    def test_nonresonant_factor(self):
        k1, k2, k3 = 1, 2, 3
        assert (k1 + k2) * (k1 + k3) * (k2 + k3) == 60

    def test_excluded_domain(self):
        assert classify_triple(5, 2, -2) is TripleClass.EXCLUDED

    def test_rejects_zero_wavenumber(self):
        with pytest.raises(ValueError):
            classify_triple(0, 1, 2)

    def test_partition_is_exhaustive_and_disjoint_to_64(self):
        # vectorized oracle over the whole |k_i| <= 64 lattice: the five
        # label conditions must cover every nonzero triple exactly once
        k = np.arange(-64, 65)
        k = k[k != 0]
        K1, K2, K3 = np.meshgrid(k, k, k, indexing="ij", sparse=True)
        excluded = K2 + K3 == 0
        nonres = ~excluded & ((K1 + K2) != 0) & ((K1 + K3) != 0)
        doubly = ~excluded & ((K1 + K2) == 0) & ((K1 + K3) == 0)
        p12 = ~excluded & ((K1 + K2) == 0) & ((K1 + K3) != 0)
        p13 = ~excluded & ((K1 + K2) != 0) & ((K1 + K3) == 0)
        count = (
            excluded.astype(np.int8)
            + nonres.astype(np.int8)
            + doubly.astype(np.int8)
            + p12.astype(np.int8)
            + p13.astype(np.int8)
        )
        assert count.min() == 1 and count.max() == 1

    def test_classifier_agrees_with_pair_sum_logic_on_samples(self):
        rng = np.random.default_rng(3)
        for _ in range(2000):
            k1, k2, k3 = (int(x) for x in rng.integers(1, 65, size=3) * rng.choice([-1, 1], 3))
            label = classify_triple(k1, k2, k3)
            if k2 + k3 == 0:
                assert label is TripleClass.EXCLUDED
            elif (k1 + k2) != 0 and (k1 + k3) != 0:
                assert label is TripleClass.NONRESONANT
            elif (k1 + k2) == 0 and (k1 + k3) == 0:
                assert label is TripleClass.DOUBLY_RESONANT
            elif (k1 + k2) == 0:
                assert label is TripleClass.PAIR_12
            else:
                assert label is TripleClass.PAIR_13


class TestNonresonantCubic:
    def test_two_mode_values(self):
        g = GridSpec(4)
        u = CoefSeq.from_modes(g, {1: 1.0, -1: 1.0})
        r = nonresonant_cubic(u)
        # k=3 receives only the (1,1,1) triple; every triple summing to 1
        # from {+-1} hits a vanishing pair sum
        assert r.mode(3) == pytest.approx(1j / 6.0, abs=1e-15)
        assert r.mode(-3) == pytest.approx(-1j / 6.0, abs=1e-15)
        assert r.mode(1) == pytest.approx(0.0, abs=1e-15)

    def test_zero(self):
        assert np.all(nonresonant_cubic(CoefSeq.zeros(GridSpec(4))).coef == 0)

    def test_matches_triple_enumeration_oracle(self):
        g = GridSpec(5)
        u = hermitian_state(g, seed=13)
        t = 0.41
        K = g.K
        expected = np.zeros(g.size, dtype=np.complex128)
        for k1 in range(-K, K + 1):
            for k2 in range(-K, K + 1):
                for k3 in range(-K, K + 1):
                    if 0 in (k1, k2, k3):
                        continue
                    if (k1 + k2) * (k1 + k3) * (k2 + k3) == 0:
                        continue
                    k = k1 + k2 + k3
                    if k == 0 or abs(k) > K:
                        continue
                    phase = np.exp(-3j * t * (k1 + k2) * (k2 + k3) * (k3 + k1))
                    expected[k + K] += (
                        (1j / 6.0)
                        * phase
                        * u.coef[k1 + K]
                        * u.coef[k2 + K]
                        * u.coef[k3 + K]
                        / k1
                    )
        got = nonresonant_cubic(u, t)
        assert np.max(np.abs(got.coef - expected)) < 1e-13

    def test_cubic_homogeneity(self):
        g = GridSpec(8)
        u = hermitian_state(g, seed=14)
        lam = 1.7
        a = nonresonant_cubic(u.with_coef(lam * u.coef)).coef
        b = lam**3 * nonresonant_cubic(u).coef
        assert np.max(np.abs(a - b)) < 1e-12

    @pytest.mark.parametrize("t", [0.0, 0.29])
    def test_hermitian_preservation(self, t):
        u = hermitian_state(GridSpec(12), seed=15)
        assert nonresonant_cubic(u, t).is_real_field(1e-12)


class TestResonantCancellation:
    def test_random_hermitian_residual_roundoff(self):
        u = random_rough_state(GridSpec(16), 0.8, seed=16, target_l2=1.0)
        assert resonant_cancellation_residual(u) < 1e-12

    def test_two_mode_support_reproduces_diagonal_exactly(self):
        g = GridSpec(4)
        u = CoefSeq.from_modes(g, {1: 0.5 + 0.25j, -1: 0.5 - 0.25j})
        assert resonant_cancellation_residual(u) < 1e-16

    def test_zero(self):
        assert resonant_cancellation_residual(CoefSeq.zeros(GridSpec(8))) == 0.0


class TestDifferentialIdentity:
    def test_identity_holds_algebraically_at_truncation(self):
        """Substitute the truncated twisted equation for dz/dt and expand the
        bracket's time derivative in closed form; the residual is roundoff."""
        K, t, gamma = 6, 0.37, 0.8
        g = GridSpec(K)
        z = hermitian_state(g, seed=11)
        v = hermitian_state(g, seed=12)
        k = g.modes.astype(np.float64)
        lam = gamma - 1j * k**3
        y = v.coef * np.exp(lam * t)
        a = CoefSeq(g, z.coef + y)

        # quadratic term of the twisted equation (independent double loop)
        quad = np.zeros(g.size, dtype=np.complex128)
        for kk in range(-K, K + 1):
            if kk == 0:
                continue
            acc = 0.0 + 0.0j
            for k1 in range(-K, K + 1):
                k2 = kk - k1
                if k1 == 0 or k2 == 0 or abs(k2) > K:
                    continue
                acc += np.exp(-3j * kk * k1 * k2 * t) * a.coef[k1 + K] * a.coef[k2 + K]
            quad[kk + K] = -0.5j * kk * acc

        dz = -gamma * y + np.exp(-gamma * t) * quad
        dz[K] = 0.0
        dy = lam * y
        da = CoefSeq(g, dz + dy)

        # d/dt of the bilinear bracket: phase derivative + two slot derivatives
        phase_deriv = np.zeros(g.size, dtype=np.complex128)
        for kk in range(-K, K + 1):
            if kk == 0:
                continue
            acc = 0.0 + 0.0j
            for k1 in range(-K, K + 1):
                k2 = kk - k1
                if k1 == 0 or k2 == 0 or abs(k2) > K:
                    continue
                acc += (
                    (-3j * kk * k1 * k2)
                    * np.exp(-3j * kk * k1 * k2 * t)
                    * a.coef[k1 + K]
                    * a.coef[k2 + K]
                    / (k1 * k2)
                )
            phase_deriv[kk + K] = acc / 6.0

        B = normal_form_bilinear
        lhs = dz + gamma * np.exp(-gamma * t) * B(a, a, t).coef - np.exp(-gamma * t) * (
            phase_deriv + 2.0 * B(a, da, t).coef
        )

        from fdkdv.normal_form import _resonant_cubic_banded

        rate = CoefSeq(g, dy - gamma * y)
        rhs = (
            np.exp(-2 * gamma * t) * _resonant_cubic_banded(a.coef, K)
            - gamma * y
            + gamma * np.exp(-gamma * t) * B(a, a, t).coef
            - 2.0 * np.exp(-gamma * t) * B(a, rate, t).coef
            + np.exp(-2 * gamma * t) * nonresonant_cubic(a, t, pair_sum_band=K).coef
        )
        assert np.max(np.abs(lhs - rhs)) < 1e-13

    def _stencil(self, u0, gamma, f, t, dt):
        params = FlowParams(gamma=gamma, forcing=f, h=dt)
        traj = evolve(u0, t - dt, params, sample_every=10**9)
        s0 = traj.states[-1]
        s1 = step(s0, t - dt, params)
        s2 = step(s1, t, params)
        return TrajectoryRecord(
            times=np.array([t - dt, t, t + dt]),
            states=(s0, s1, s2),
            gamma=gamma,
            forcing_l2=f.l2(),
        )

    def test_residual_second_order_in_dt(self):
        g = GridSpec(16)
        f = CoefSeq.cosine(g)
        u0 = random_rough_state(g, 1.5, seed=7, target_l2=0.5)
        frame = NormalFormFrame.from_forcing(f, 1.0)
        res = {}
        for dt in (4e-5, 2e-5):
            traj = self._stencil(u0, 1.0, f, 0.2, dt)
            res[dt] = normal_form_residual(traj, frame, 0.2, dt)
        assert res[4e-5] < 1e-5
        assert 3.4 < res[4e-5] / res[2e-5] < 4.6

    def test_zero_trajectory_zero_residual(self):
        g = GridSpec(8)
        f = CoefSeq.zeros(g)
        traj = self._stencil(CoefSeq.zeros(g), 1.0, f, 0.01, 1e-3)
        frame = NormalFormFrame.from_forcing(f, 1.0)
        assert normal_form_residual(traj, frame, 0.01, 1e-3) == 0.0

    def test_missing_samples_rejected(self):
        g = GridSpec(8)
        f = CoefSeq.cosine(g)
        traj = self._stencil(CoefSeq.zeros(g), 1.0, f, 0.01, 1e-3)
        frame = NormalFormFrame.from_forcing(f, 1.0)
        with pytest.raises(KeyError):
            normal_form_residual(traj, frame, 0.02, 1e-3)


class TestSmoothingGap:
    def test_zero_at_time_zero(self):
        g = GridSpec(16)
        f = CoefSeq.cosine(g)
        u0 = random_rough_state(g, 1.0, seed=8, target_l2=1.0)
        traj = evolve(u0, 0.1, FlowParams(gamma=1.0, forcing=f, h=1e-3), sample_every=10)
        assert smoothing_gap(u0, traj, 0.0, 0.5) == 0.0

    def test_zero_data_zero_forcing(self):
        g = GridSpec(16)
        params = FlowParams(gamma=1.0, forcing=CoefSeq.zeros(g), h=1e-3)
        traj = evolve(CoefSeq.zeros(g), 0.1, params, sample_every=10)
        for t in traj.times:
            assert smoothing_gap(CoefSeq.zeros(g), traj, float(t), 0.5) == 0.0

    def test_positive_along_forced_trajectory(self):
        g = GridSpec(32)
        f = CoefSeq.cosine(g)
        u0 = random_rough_state(g, 0.55, seed=7, target_l2=1.0)
        traj = evolve(u0, 0.5, FlowParams(gamma=0.5, forcing=f, h=1e-3), sample_every=100)
        g05 = smoothing_gap(u0, traj, 0.5, 0.5)
        assert g05 > 0.0
