import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from bosd.upm import (BasisParams, BasisUpm, ConjugateGaussianUpm, GaussianState, GaussianUpm, GenericBank,
                      NiwPrior, ScaledSineUpm, SineParams, band_features, epoch_features, upm_from_dict)
from bosd.upm.gaussian import niw_posterior
from bosd.upm.sine import phase

from _oracles import random_basis_upm, random_gaussian_upm, random_niw_upm, random_sine_upm


def _fold(upm, z, obs, d):
    s = upm.reset(z, d)
    for y in obs:
        s = upm.update(s, y)
    return s


class TestScaledSine:
    @pytest.mark.parametrize("d", [1, 2, 7, 40])
    def test_origin_at_first_point(self, d):
        upm = ScaledSineUpm([SineParams(1.3, -0.4, 0.3)])
        lp = upm.predictive_logpdf(np.zeros(2), 0, d, 0, upm.reset(0, d))
        assert lp == pytest.approx(-np.log(2 * np.pi * 0.3), abs=1e-14)

    def test_zero_residual_on_curve(self):
        upm = ScaledSineUpm([SineParams(1.0, 2.0, 0.25)])
        # phase of r = 3 in a 6-point segment is 3 / 5
        y = np.array([np.sin(0.6), 2 * np.sin(0.6)])
        lp = upm.predictive_logpdf(y, 3, 6, 0, upm.reset(0, 6))
        assert lp == pytest.approx(-np.log(2 * np.pi * 0.25), abs=1e-14)

    def test_phase_sweeps_unit_interval(self):
        np.testing.assert_allclose(phase(np.arange(5), 5), [0, 0.25, 0.5, 0.75, 1.0])
        assert phase(0, 1) == 0.0

    def test_duration_dependence_probe(self):
        upm = ScaledSineUpm([SineParams(1.0, 0.0, 0.1)])
        y = np.array([0.5, 0.0])
        a = upm.predictive_logpdf(y, 2, 5, 0, upm.reset(0, 5))
        b = upm.predictive_logpdf(y, 2, 9, 0, upm.reset(0, 9))
        assert a != b

    def test_fit_noise_free_amplitude(self):
        truth = SineParams(3.0, -1.5, 0.01)
        segs = []
        for d in (5, 9, 14):
            wave = np.sin(phase(np.arange(d), d))
            segs.append((0, np.stack([truth.b * wave, truth.c * wave], axis=1), d))
        fit = ScaledSineUpm.fit_mle(segs, 1)
        s = fit.upm.states[0]
        assert abs(s.b - 3.0) < 1e-9 and abs(s.c + 1.5) < 1e-9
        assert s.sigma2 == 1e-12
        assert any("floored" in w for w in fit.warnings)

    def test_rejects_bad_hypothesis(self):
        upm = ScaledSineUpm([SineParams(1.0, 0.0, 0.1)])
        with pytest.raises(ValueError):
            upm.predictive_logpdf(np.zeros(2), 3, 3, 0, upm.reset(0, 3))

    def test_rejects_non_finite(self):
        upm = ScaledSineUpm([SineParams(1.0, 0.0, 0.1)])
        with pytest.raises(ValueError, match="non-finite"):
            upm.predictive_logpdf(np.array([np.nan, 0.0]), 0, 3, 0, upm.reset(0, 3))

    def test_validate(self):
        assert ScaledSineUpm([SineParams(1.0, 0.0, -1.0)]).validate()


class TestFixedGaussian:
    def test_matches_direct_density(self, rng):
        upm = random_gaussian_upm(rng, 2, dim=3)
        for _ in range(100):
            y = rng.normal(size=3) * 2
            z = int(rng.integers(2))
            s = upm.states[z]
            expected = stats.multivariate_normal(s.mu, s.sigma).logpdf(y)
            assert upm.predictive_logpdf(y, 0, 1, z, upm.reset(z)) == pytest.approx(expected, abs=1e-10)

    def test_duration_agnostic_bitwise(self, rng):
        upm = random_gaussian_upm(rng, 1, dim=2)
        y = rng.normal(size=2)
        vals = {upm.predictive_logpdf(y, r, d, 0, upm.reset(0, d)) for d in range(1, 12) for r in range(d)}
        assert len(vals) == 1

    def test_fit_sample_mean(self):
        fit = GaussianUpm.fit_mle([(0, np.array([[0.0, 0.0], [2.0, 2.0]]), 2)], 1)
        np.testing.assert_allclose(fit.upm.states[0].mu, [1.0, 1.0])
        assert any("singular" in w for w in fit.warnings)
        assert not fit.upm.validate()

    def test_fit_mle_covariance(self, rng):
        pts = rng.normal(size=(500, 2)) @ np.array([[1.0, 0.3], [0.0, 0.5]])
        fit = GaussianUpm.fit_mle([(0, pts[:200], 200), (0, pts[200:], 300)], 1)
        np.testing.assert_allclose(fit.upm.states[0].sigma, np.cov(pts.T, bias=True), rtol=1e-6)
        assert fit.warnings == []

    def test_missing_state(self):
        with pytest.raises(ValueError, match="state 1"):
            GaussianUpm.fit_mle([(0, np.zeros((3, 1)), 3)], 2)

    def test_validate_rejects_non_spd(self):
        upm = GaussianUpm([GaussianState(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))])
        assert any("positive definite" in p for p in upm.validate())


class TestConjugateGaussian:
    def test_fold_matches_batch(self, rng):
        upm = random_niw_upm(rng, 1, dim=2)
        obs = rng.normal(size=(3, 2))
        folded = _fold(upm, 0, obs, 4)
        batch = niw_posterior(upm.priors[0], obs)
        y = rng.normal(size=2)
        a = upm.predictive_logpdf(y, 3, 4, 0, folded)
        b = upm.predictive_logpdf(y, 3, 4, 0, batch)
        assert a == pytest.approx(b, abs=1e-10)

    def test_predictive_matches_quadrature(self, rng):
        prior = NiwPrior(np.array([0.3]), 1.5, 3.0, np.array([[0.8]]))
        upm = ConjugateGaussianUpm([prior])
        obs = np.array([0.1, -0.4, 0.9])
        state = _fold(upm, 0, obs[:, None], 5)
        # normal-inverse-gamma posterior written out independently
        n, xbar = obs.size, obs.mean()
        kn = prior.kappa0 + n
        mn = (prior.kappa0 * prior.mu0[0] + n * xbar) / kn
        a_n = (prior.nu0 + n) / 2
        b_n = (prior.psi0[0, 0] + np.sum((obs - xbar) ** 2) + prior.kappa0 * n / kn * (xbar - prior.mu0[0]) ** 2) / 2
        y = 0.7

        def integrand(mu, var):
            return (stats.norm.pdf(y, mu, np.sqrt(var)) * stats.norm.pdf(mu, mn, np.sqrt(var / kn))
                    * stats.invgamma.pdf(var, a_n, scale=b_n))

        dens, _ = integrate.dblquad(integrand, 1e-8, 60.0, lambda v: mn - 12 * np.sqrt(v / kn),
                                    lambda v: mn + 12 * np.sqrt(v / kn), epsabs=1e-12, epsrel=1e-10)
        assert upm.predictive_logpdf([y], 3, 5, 0, state) == pytest.approx(np.log(dens), abs=1e-6)

    def test_prior_predictive_is_single_point_evidence(self, rng):
        upm = random_niw_upm(rng, 2, dim=2)
        y = rng.normal(size=2)
        for z in range(2):
            a = upm.predictive_logpdf(y, 0, 1, z, upm.reset(z))
            assert a == pytest.approx(upm.segment_loglik(z, y[None], 1), abs=1e-10)

    def test_segment_loglik_equals_sequential_fold(self, rng):
        upm = random_niw_upm(rng, 1, dim=2)
        obs = rng.normal(size=(6, 2))
        seq = sum(upm.predictive_logpdf(y, r, 6, 0, _fold(upm, 0, obs[:r], 6)) for r, y in enumerate(obs))
        assert upm.segment_loglik(0, obs, 6) == pytest.approx(seq, abs=1e-10)

    def test_exchangeable_within_segment(self, rng):
        upm = random_niw_upm(rng, 1, dim=2)
        obs = rng.normal(size=(7, 2))
        perm = rng.permutation(7)
        seq = lambda o: sum(upm.predictive_logpdf(y, r, 7, 0, _fold(upm, 0, o[:r], 7)) for r, y in enumerate(o))
        assert seq(obs) == pytest.approx(seq(obs[perm]), abs=1e-10)

    def test_two_resets_identical(self, rng):
        upm = random_niw_upm(rng, 1)
        y = rng.normal(size=1)
        assert upm.predictive_logpdf(y, 0, 1, 0, upm.reset(0)) == upm.predictive_logpdf(y, 0, 1, 0, upm.reset(0))

    def test_fit_is_valid_prior(self, rng):
        segs = [(z, rng.normal(loc=3 * z, size=(20, 2)), 20) for z in (0, 1, 0, 1)]
        fit = ConjugateGaussianUpm.fit_mle(segs, 2)
        assert not fit.upm.validate()
        np.testing.assert_allclose(fit.upm.priors[1].mu0, 3.0, atol=0.5)


class TestBasis:
    def test_noise_free_concentration(self, rng):
        w_star = np.array([0.5, -1.0, 2.0])
        upm = BasisUpm([BasisParams(np.zeros(3), np.eye(3), 1e-12)], 3)
        d = 12
        traj = upm.basis.design(d, d) @ w_star
        state = _fold(upm, 0, traj[:10, None], d)
        f = upm.basis(10 / d)
        mean = f @ np.linalg.solve(state.precision, state.shift)
        assert abs(mean - f @ w_star) < 1e-6

    def test_time_scaling_invariance(self):
        w_star = np.array([1.0, 0.2, -0.7])
        upm = BasisUpm([BasisParams(np.zeros(3), np.eye(3), 1e-12)], 3)
        means = []
        for d in (10, 20):
            traj = upm.basis.design(d, d) @ w_star
            state = _fold(upm, 0, traj[:, None], d)
            w = np.linalg.solve(state.precision, state.shift)
            grid = np.arange(0, d, d // 10)
            means.append(upm.basis(grid / d) @ w)
        np.testing.assert_allclose(means[0], means[1], atol=1e-9)

    def test_fit_recovers_weight_covariance(self, rng):
        mu, cov = np.array([1.0, -0.5, 0.3]), np.array([[0.5, 0.1, 0.0], [0.1, 0.3, 0.05], [0.0, 0.05, 0.2]])
        ws = rng.multivariate_normal(mu, cov, size=50)
        basis_upm = BasisUpm([BasisParams(mu, cov, 1e-10)], 3)
        segs = [(0, basis_upm.basis.design(30, 30) @ w, 30) for w in ws]
        fit = BasisUpm.fit_mle(segs, 1, n_basis=3, ridge=1e-12)
        np.testing.assert_allclose(fit.upm.states[0].mu, ws.mean(axis=0), atol=1e-6)
        np.testing.assert_allclose(fit.upm.states[0].sigma, np.cov(ws.T, bias=True), atol=1e-6)

    def test_segment_loglik_equals_sequential_fold(self, rng):
        upm = random_basis_upm(rng, 1)
        obs = rng.normal(size=6)
        seq = sum(upm.predictive_logpdf([y], r, 9, 0, _fold(upm, 0, obs[:r, None], 9)) for r, y in enumerate(obs))
        assert upm.segment_loglik(0, obs, 9) == pytest.approx(seq, abs=1e-10)

    def test_stats_must_match_hypothesis(self, rng):
        upm = random_basis_upm(rng, 1)
        with pytest.raises(ValueError):
            upm.predictive_logpdf([0.0], 2, 5, 0, upm.reset(0, 5))


UPM_FACTORIES = {
    "fixed": lambda rng: random_gaussian_upm(rng, 2, dim=2),
    "conjugate": lambda rng: random_niw_upm(rng, 2, dim=2),
    "sine": lambda rng: random_sine_upm(rng, 2),
    "basis": lambda rng: random_basis_upm(rng, 2),
}


@pytest.mark.parametrize("name", sorted(UPM_FACTORIES))
class TestBankRoutes:
    def test_vectorized_bank_matches_scalar_route(self, name, rng):
        upm = UPM_FACTORIES[name](rng)
        d_max = 6
        fast, slow = upm.make_bank(d_max), GenericBank(upm, d_max)
        assert type(fast) is not GenericBank
        for t in range(9):
            y = rng.normal(size=upm.dim)
            a, b = fast.logpdf(y), slow.logpdf(y)
            assert a.shape == b.shape
            r = np.arange(d_max)
            if upm.duration_dependent:
                reach = (r[None, :] <= r[:, None]) & (r[None, :] <= t)
                a, b = a[:, reach], b[:, reach]
            else:
                a, b = a[:, r <= t], b[:, r <= t]
            np.testing.assert_allclose(a, b, atol=1e-10, rtol=0)
            fast.update(y)
            slow.update(y)

    def test_copy_is_independent(self, name, rng):
        upm = UPM_FACTORIES[name](rng)
        bank = upm.make_bank(4)
        y = rng.normal(size=upm.dim)
        bank.update(y)
        twin = bank.copy()
        bank.update(rng.normal(size=upm.dim))
        twin.update(y)
        other = upm.make_bank(4)
        other.update(y)
        other.update(y)
        np.testing.assert_array_equal(twin.logpdf(y), other.logpdf(y))

    def test_dict_round_trip(self, name, rng):
        upm = UPM_FACTORIES[name](rng)
        back = upm_from_dict(upm.to_dict())
        assert type(back) is type(upm)
        assert back.to_dict() == upm.to_dict()

    def test_restrict(self, name, rng):
        upm = UPM_FACTORIES[name](rng)
        sub = upm.restrict([1])
        y = rng.normal(size=upm.dim)
        assert sub.n_states == 1
        assert sub.predictive_logpdf(y, 0, 3, 0, sub.reset(0, 3)) == upm.predictive_logpdf(y, 0, 3, 1, upm.reset(1, 3))

    def test_sample_segment_shape(self, name, rng):
        upm = UPM_FACTORIES[name](rng)
        assert upm.sample_segment(0, 5, rng).shape == (5, upm.dim)

    def test_dimension_mismatch(self, name, rng):
        upm = UPM_FACTORIES[name](rng)
        with pytest.raises(ValueError, match="dimension"):
            upm.update(upm.reset(0, 3), np.zeros(upm.dim + 1))


class TestUpmRegistry:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown upm kind"):
            upm_from_dict({"kind": "gp"})

    def test_missing_kind(self):
        with pytest.raises(ValueError):
            upm_from_dict({})


class TestBandFeatures:
    bands = ((0.5, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0))

    def test_tone_dominates_its_band(self):
        fs = 128.0
        t = np.arange(512) / fs
        feats = band_features(np.sin(2 * np.pi * 10 * t), self.bands, fs)
        assert np.argmax(feats) == 2
        assert feats[2] > 10 * np.max(np.delete(feats, 2))

    def test_zero_signal(self):
        feats = band_features(np.zeros((3, 256)), self.bands, 128.0)
        np.testing.assert_array_equal(feats, 0.0)
        assert feats.shape == (12,)

    def test_dc_band_captures_all_power(self):
        fs, n, level = 128.0, 64, 1.7
        x = np.full(n, level)
        feats = band_features(x, [(0.0, 1.0), (1.0, 64.0)], fs)
        # bins are 2 Hz apart, so [0, 1] holds only the DC bin; its power is the mean square
        assert feats[0] ** 2 == pytest.approx(np.mean(x ** 2), rel=1e-12)
        assert feats[1] == pytest.approx(0.0, abs=1e-12)

    def test_channel_major_order(self):
        fs = 128.0
        t = np.arange(256) / fs
        x = np.stack([np.sin(2 * np.pi * 2 * t), np.sin(2 * np.pi * 20 * t)])
        feats = band_features(x, self.bands, fs).reshape(2, 4)
        assert np.argmax(feats[0]) == 0 and np.argmax(feats[1]) == 3

    @pytest.mark.parametrize("band, msg", [((5.0, 5.0), "empty"), ((10.0, 80.0), "Nyquist"),
                                           ((1.01, 1.02), "no frequency bin")])
    def test_band_errors(self, band, msg):
        with pytest.raises(ValueError, match=msg):
            band_features(np.ones(64), [band], 64.0)

    def test_log_amplitude(self):
        fs = 128.0
        x = np.sin(2 * np.pi * 10 * np.arange(256) / fs)
        np.testing.assert_allclose(band_features(x, self.bands, fs, log_amplitude=True),
                                   np.log(band_features(x, self.bands, fs) + 1e-12))

    def test_epochs_drop_partial_tail(self, rng):
        sig = rng.normal(size=(1000, 2))
        feats = epoch_features(sig, 100.0, 4.0, self.bands)
        assert feats.shape == (2, 8)
        np.testing.assert_allclose(feats[1], band_features(sig[400:800].T, self.bands, 100.0))

    @given(st.integers(0, 2 ** 32 - 1))
    def test_deterministic_and_non_negative(self, seed):
        x = np.random.default_rng(seed).normal(size=(2, 128))
        a = band_features(x, self.bands, 128.0)
        assert np.all(a >= 0)
        np.testing.assert_array_equal(a, band_features(x, self.bands, 128.0))
