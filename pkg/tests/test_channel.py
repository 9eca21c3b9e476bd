import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvqkd_tamper import AttackConfig, AttackKind, InvalidInputError
from cvqkd_tamper.channel import (
    FiberSegment,
    amplification_gain,
    analytic_moments,
    sample_transmittance,
    total_excess_noise,
    transmittance,
    truncated_normal,
)

T40 = 0.1584893192461113323  # 10**-0.8, mpmath
T10 = 0.6309573444801932333  # 10**-0.2, mpmath


class TestTransmittance:
    def test_zero_length(self):
        assert transmittance(FiberSegment(0.2, 0.0)) == 1.0

    @pytest.mark.parametrize("length, expected", [(40.0, T40), (10.0, T10)])
    def test_values(self, length, expected):
        assert transmittance(FiberSegment(0.2, length)) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("loss, length", [(-0.1, 1.0), (0.2, -1.0)])
    def test_negative_rejected(self, loss, length):
        with pytest.raises(InvalidInputError):
            FiberSegment(loss, length)


class TestGain:
    @pytest.mark.parametrize("d, g", [
        (10.0, 1.122018454301963436),
        (1.0, 1.011579454259898524),
        (40.0, 1.584893192461113485),
    ])
    def test_against_mpmath(self, d, g):
        assert amplification_gain(0.2, 0.15, d) == pytest.approx(g, rel=1e-13)

    def test_unity(self):
        assert amplification_gain(0.2, 0.15, 0.0) == 1.0
        assert amplification_gain(0.2, 0.2, 17.0) == 1.0

    def test_lossier_patch_attenuates(self):
        assert amplification_gain(0.2, 0.25, 5.0) < 1.0

    def test_negative_distance(self):
        with pytest.raises(InvalidInputError):
            amplification_gain(0.2, 0.15, -1.0)

    @given(st.floats(0, 30), st.floats(0, 30))
    def test_multiplicative(self, d1, d2):
        g = amplification_gain(0.2, 0.15, d1 + d2)
        assert g == pytest.approx(amplification_gain(0.2, 0.15, d1) * amplification_gain(0.2, 0.15, d2), rel=1e-12)


class TestMoments:
    def test_unattacked(self):
        assert analytic_moments(AttackConfig.normal(), 0.25) == (0.5, 0.25)

    def test_blocked(self):
        assert analytic_moments(AttackConfig.dos(0.9, 0.0), T40) == (0.0, 0.0)

    def test_hybrid_value(self):
        e_s, e_t = analytic_moments(AttackConfig.ca_dos(1.12, 0.94), T40)
        assert e_s == pytest.approx(0.3960380057319848312, rel=1e-12)
        assert e_t == pytest.approx(0.1668575553023060107, rel=1e-12)

    @given(st.floats(0.0, 0.999), st.floats(1.001, 1.6), st.floats(1e-3, 0.6))
    def test_jensen(self, p, g, T0):
        for cfg in (AttackConfig.ca(g), AttackConfig.ca_dos(g, p), AttackConfig.dos(1.0 / g, p)):
            e_s, e_t = analytic_moments(cfg, T0)
            assert e_s * e_s <= e_t + 1e-15
            assert e_t <= 1.0


class TestExcessNoise:
    @pytest.mark.parametrize("args, expected", [
        ((0.01, 0.0, 7.0), 0.01),
        ((0.01, 0.01, 3.0), 0.02),
        ((0.01, 0.1, 2.8), 0.105),
    ])
    def test_values(self, args, expected):
        assert total_excess_noise(*args) == pytest.approx(expected, abs=1e-15)

    def test_negative(self):
        with pytest.raises(InvalidInputError):
            total_excess_noise(0.01, -0.1, 2.0)


class TestSampling:
    def test_degenerate(self):
        cfg = AttackConfig.ca(1.12, d_eve_km=10, d_bob_km=30)
        s = sample_transmittance(cfg, 1000, seed=3)
        assert np.allclose(s.values, 1.12 * T40, rtol=1e-13)
        assert s.count == 1000 and s.seed == 3

    def test_blocked(self):
        s = sample_transmittance(AttackConfig.dos(1.0, 0.0, d_bob_km=40, sigma_rin_lo=0.05), 500, seed=1)
        assert not s.values.any()

    def test_dos_mean(self):
        cfg = AttackConfig.dos(1.0, 0.9, d_bob_km=40, sigma_rin_lo=0.05)
        v = sample_transmittance(cfg, 100_000, seed=11).values
        assert abs(v.mean() - 0.9 * T40) < 5 * v.std() / math.sqrt(v.size)

    def test_bounds_and_determinism(self):
        cfg = AttackConfig.ca(1.5, d_eve_km=35, d_bob_km=5, sigma_rin_lo=0.5)
        a = sample_transmittance(cfg, 20_000, seed=9).values
        b = sample_transmittance(cfg, 20_000, seed=9).values
        assert np.array_equal(a, b)
        assert a.min() >= 0.0 and a.max() <= 1.0
        assert not np.array_equal(a, sample_transmittance(cfg, 20_000, seed=10).values)

    def test_zero_count(self):
        with pytest.raises(InvalidInputError):
            sample_transmittance(AttackConfig.normal(), 0, seed=0)

    def test_truncated_normal_in_range(self, rng):
        x = truncated_normal(rng, 0.95, 0.2, 50_000)
        assert x.min() >= 0.0 and x.max() <= 1.0 and x.size == 50_000


class TestAttackConfig:
    def test_kind_invariants(self):
        with pytest.raises(InvalidInputError):
            AttackConfig(kind=AttackKind.CA, g=1.1, p=0.9)
        with pytest.raises(InvalidInputError):
            AttackConfig(kind=AttackKind.DOS, g=1.2, p=0.9)
        with pytest.raises(InvalidInputError):
            AttackConfig(kind=AttackKind.CA, g=0.9)

    def test_cados_default_p(self):
        assert AttackConfig.ca_dos(1.21).p == pytest.approx(1 / 1.1)

    def test_parse(self):
        assert AttackKind.parse("cados") is AttackKind.CADOS
        assert AttackKind.parse("Normal") is AttackKind.NORMAL


class TestExactMomentsWithIntensityNoise:
    """The sampler against moments that keep the truncated-normal factor."""

    @staticmethod
    def _exact(cfg, loss=0.2):
        from scipy import integrate, stats

        t_eve = 10 ** (-loss * cfg.d_eve_km / 10)
        t_bob = 10 ** (-loss * cfg.d_bob_km / 10)
        s = cfg.sigma_rin_lo * t_bob
        dist = stats.truncnorm((0 - t_bob) / s, (1 - t_bob) / s, loc=t_bob, scale=s)
        e_sqrt_nu = integrate.quad(lambda x: math.sqrt(x) * dist.pdf(x), 0, 1, points=[t_bob], limit=200)[0]
        scale = cfg.g * t_eve
        return cfg.p * math.sqrt(scale) * e_sqrt_nu, cfg.p * scale * dist.mean()

    @pytest.mark.parametrize("cfg", [
        AttackConfig.ca(1.3, d_eve_km=18.7, d_bob_km=21.3, sigma_rin_lo=0.096),
        AttackConfig.ca(1.1, d_eve_km=11.1, d_bob_km=28.9, sigma_rin_lo=0.087),
        AttackConfig.ca_dos(1.2, d_eve_km=8.0, d_bob_km=1.0, sigma_rin_lo=0.1),
        AttackConfig.dos(0.8, 0.6, d_eve_km=30.0, d_bob_km=10.0, sigma_rin_lo=0.05),
    ])
    def test_within_five_standard_errors(self, cfg):
        v = sample_transmittance(cfg, 100_000, seed=21).values
        e_s, e_t = self._exact(cfg)
        n = math.sqrt(v.size)
        assert abs(np.sqrt(v).mean() - e_s) < 5 * np.sqrt(v).std() / n
        assert abs(v.mean() - e_t) < 5 * v.std() / n
