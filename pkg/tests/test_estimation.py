import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvqkd_tamper import (
    BlockedChannelError,
    DegenerateInputError,
    EstimationFailureError,
    FiniteSizeConfig,
    InvalidInputError,
    LinkConfig,
)
from cvqkd_tamper.estimation import (
    QuadratureBatch,
    attacked_estimators,
    estimate_channel,
    estimate_mean_transmittance,
    estimate_noise,
    estimate_t,
    mixture_moments,
    simulate_quadratures,
    w_factor,
    weighted_params,
    worst_case_params,
)
from oracles import erfc_inverse_mpmath

T0 = 10 ** -0.8


class TestRegression:
    def test_identity(self, rng):
        x = rng.normal(size=100)
        assert estimate_t(QuadratureBatch(x, x)) == pytest.approx(1.0)

    def test_half(self, rng):
        x = rng.normal(size=100)
        assert estimate_t(QuadratureBatch(x, 0.5 * x)) == pytest.approx(0.5)

    def test_zero_alice(self):
        with pytest.raises(DegenerateInputError):
            estimate_t(QuadratureBatch(np.zeros(5), np.ones(5)))

    def test_shape_checks(self):
        with pytest.raises(InvalidInputError):
            QuadratureBatch(np.ones(3), np.ones(4))
        with pytest.raises(InvalidInputError):
            QuadratureBatch(np.ones(1), np.ones(1))

    def test_synthetic_slope(self, rng):
        batch = simulate_quadratures(np.full(10**6, 0.25), 2.8, 0.01, 0.9, 0.05, rng)
        t_hat = estimate_t(batch)
        # slope standard error: sqrt(noise var / sum x_A^2)
        se = math.sqrt((1 + 0.05 + 0.9 * 0.25 * 0.01) / (2.8 * 10**6))
        assert abs(t_hat - math.sqrt(0.225)) < 3 * se

    def test_noiseless_residual(self, rng):
        x = rng.normal(size=50)
        assert estimate_noise(QuadratureBatch(x, 0.3 * x), 0.3) == pytest.approx(0.0, abs=1e-28)

    def test_constant_residual(self, rng):
        x = rng.normal(size=50)
        assert estimate_noise(QuadratureBatch(x, 0.3 * x + 0.7), 0.3) == pytest.approx(0.49)

    def test_residual_variance(self, rng):
        x = rng.normal(size=10**6)
        z = rng.normal(0, math.sqrt(1.05), size=x.size)
        assert estimate_noise(QuadratureBatch(x, 0.4 * x + z), 0.4) == pytest.approx(1.05, abs=0.01)

    def test_mean_transmittance_from_second_moment(self, rng):
        batch = simulate_quadratures(np.full(10**6, 0.3), 3.0, 0.02, 0.9, 0.05, rng)
        assert estimate_mean_transmittance(batch, 3.0, 0.02) == pytest.approx(0.3, rel=0.01)


class TestMomentRoute:
    def test_constant_channel(self):
        T, xi = attacked_estimators(math.sqrt(T0), T0, 2.8, 0.02)
        assert T == pytest.approx(T0, rel=1e-15)
        assert xi == pytest.approx(0.02, abs=1e-14)

    def test_amplification_keeps_noise(self):
        g = 1.3
        T, xi = attacked_estimators(math.sqrt(g * T0), g * T0, 2.8, 0.02)
        assert T == pytest.approx(g * T0) and xi == pytest.approx(0.02, abs=1e-14)

    def test_hybrid_keeps_mean(self):
        g, VA, xi0 = 1.4, 2.8, 0.02
        p = 1 / math.sqrt(g)
        T, xi = attacked_estimators(p * math.sqrt(g * T0), p * g * T0, VA, xi0)
        assert T == pytest.approx(T0)
        assert xi == pytest.approx(math.sqrt(g) * (VA + xi0) - VA)

    def test_blocked(self):
        with pytest.raises(BlockedChannelError):
            attacked_estimators(0.0, 0.0, 2.8, 0.01)

    @given(st.floats(0.01, 1.0), st.floats(0.3, 1.6), st.floats(0.0, 1.0), st.floats(0, 0.2))
    def test_noise_never_drops(self, p, g, f, xi):
        T, xi_hat = weighted_params(f, p, g, T0, 2.8, xi)
        e_s, e_t = mixture_moments(f, p, g, T0)
        assert xi_hat >= xi - 1e-12
        assert T <= e_t + 1e-15

    @pytest.mark.parametrize("dist", ["two_point", "uniform", "ca_mixture"])
    def test_regression_matches_moments(self, rng, dist):
        m = 400_000
        if dist == "two_point":
            T = (rng.random(m) < 0.8) * 0.3
        elif dist == "uniform":
            T = rng.uniform(0.05, 0.4, m)
        else:
            T = np.where(rng.random(m) < 0.5, 1.58 * T0, T0)
        VA, xi, eta, vel = 2.8, 0.02, 0.9, 0.05
        batch = simulate_quadratures(T, VA, xi, eta, vel, rng)
        est = estimate_channel(batch)
        T_ref, xi_ref = attacked_estimators(np.sqrt(T).mean(), T.mean(), VA, xi)
        # delta-method standard errors of the regression estimators
        resid = batch.x_bob - est.t_hat * batch.x_alice
        se_t = math.sqrt(est.sigma_R_sq / float(batch.x_alice @ batch.x_alice))
        se_T = 2 * est.t_hat * se_t / eta
        se_s2 = float(np.std(resid * resid)) / math.sqrt(m)
        se_xi = math.hypot(se_s2 / (eta * est.T_hat), est.xi_hat / est.T_hat * se_T)
        assert abs(est.T_hat - T_ref) < 5 * se_T
        assert abs(est.xi_hat - xi_ref) < 5 * se_xi


class TestMixture:
    def test_no_attack(self):
        T, xi = weighted_params(0.0, 0.5, 1.4, T0, 2.8, 0.01)
        assert T == pytest.approx(T0, rel=1e-15) and xi == pytest.approx(0.01, abs=1e-14)

    def test_full_amplification(self):
        T, xi = weighted_params(1.0, 1.0, 1.4, T0, 2.8, 0.01)
        assert T == pytest.approx(1.4 * T0) and xi == pytest.approx(0.01, abs=1e-14)

    def test_half_block_amplified(self):
        T, _ = weighted_params(0.5, 1.0, 1.58, T0, 2.8, 0.01)
        assert T / T0 == pytest.approx(1.273490254498826768, rel=1e-13)
        assert round(T / T0, 2) == 1.27

    def test_bad_fraction(self):
        with pytest.raises(InvalidInputError):
            mixture_moments(1.2, 1, 1, T0)


class TestWFactor:
    def test_one(self):
        assert w_factor(1.0) == 0.0

    def test_tail(self):
        assert w_factor(1e-9) == pytest.approx(6.109410204869397140, abs=1e-12)

    def test_one_sigma(self):
        assert w_factor(0.3173) == pytest.approx(1.000021713322999165, abs=1e-12)

    @pytest.mark.parametrize("eps", [1e-15, 1e-12, 1e-10, 1e-7, 1e-5, 1e-3, 0.01, 0.1, 0.5, 0.9])
    def test_against_mpmath(self, eps):
        assert w_factor(eps) == pytest.approx(erfc_inverse_mpmath(eps), abs=1e-12)

    def test_against_scipy(self):
        from scipy.special import erfcinv

        for eps in np.logspace(-14, -0.1, 25):
            assert w_factor(eps) == pytest.approx(math.sqrt(2) * erfcinv(eps), rel=1e-11)

    def test_monotone(self):
        w = [w_factor(e) for e in np.logspace(-15, 0, 60)]
        assert all(a > b for a, b in zip(w, w[1:]))

    @pytest.mark.parametrize("eps", [0.0, -1e-3, 1.5])
    def test_domain(self, eps):
        with pytest.raises(InvalidInputError):
            w_factor(eps)


class TestWorstCase:
    sys = LinkConfig()

    def test_golden(self):
        cfg = FiniteSizeConfig(N=1e12, m=1e11)
        T_wc, xi_wc = worst_case_params(0.1585, 0.015, cfg, self.sys, V_A=2.8)
        assert T_wc == pytest.approx(0.1584901840550729426, rel=1e-12)
        assert xi_wc == pytest.approx(0.01529790662970270969, rel=1e-10)

    def test_no_confidence_penalty(self):
        cfg = FiniteSizeConfig(N=1e12, eps_pe=1.0)
        T_wc, xi_wc = worst_case_params(0.15, 0.02, cfg, self.sys)
        assert (T_wc, xi_wc) == (0.15, pytest.approx(0.02, rel=1e-15))

    def test_large_block_limit(self):
        T_wc, xi_wc = worst_case_params(0.15, 0.02, FiniteSizeConfig(N=1e30), self.sys)
        assert T_wc == pytest.approx(0.15, rel=1e-12) and xi_wc == pytest.approx(0.02, rel=1e-10)

    def test_monotone_in_m(self):
        prev = None
        for N in (1e8, 1e9, 1e10, 1e12):
            T_wc, xi_wc = worst_case_params(0.15, 0.02, FiniteSizeConfig(N=N), self.sys)
            assert T_wc < 0.15 and xi_wc > 0.02
            if prev:
                assert T_wc > prev[0] and xi_wc < prev[1]
            prev = (T_wc, xi_wc)

    def test_block_too_small(self):
        with pytest.raises(EstimationFailureError):
            worst_case_params(1e-4, 0.02, FiniteSizeConfig(N=1e4), self.sys)
