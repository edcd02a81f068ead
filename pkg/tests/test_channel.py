import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special, stats

from mmcomp.channel import (ArrayConfig, FadingModel, array_gain, f_upsilon, f_upsilon_table,
                            flat_top_constant, gain_power, gain_quadrature, mean_gain_power,
                            sample_fading, sample_upsilon, upsilon_cdf)


def ellipk_density(e):
    # closed form of the arcsine self-convolution, used as an independent oracle;
    # ellipkm1(p) = K(1 - p) keeps precision as e -> 0
    return special.ellipkm1(e * e / 4.0) / math.pi**2


class TestDensity:
    @pytest.mark.parametrize("eps", [1e-12, 1e-6, 0.01, 0.3, 0.9, 1.0, 1.5, 1.99, 1.999999])
    def test_matches_elliptic_closed_form(self, eps):
        assert f_upsilon(eps) == pytest.approx(ellipk_density(eps), rel=1e-12)
        assert f_upsilon(-eps) == f_upsilon(eps)

    def test_special_points(self):
        assert f_upsilon(0.0) == math.inf
        assert f_upsilon(2.0) == 0.0
        assert f_upsilon(-2.0) == 0.0
        with pytest.raises(ValueError):
            f_upsilon(2.0001)

    def test_normalized(self):
        val, _ = integrate.quad(f_upsilon, 0.0, 2.0, points=[1.0], limit=200)
        assert 2 * val == pytest.approx(1.0, abs=1e-8)

    def test_cdf(self):
        assert upsilon_cdf(-2.0) == 0.0
        assert upsilon_cdf(0.0) == pytest.approx(0.5, abs=1e-12)
        assert upsilon_cdf(2.0) == 1.0
        for x in (0.2, 0.7, 1.4):
            val, _ = integrate.quad(ellipk_density, 0.0, x, limit=200)
            assert upsilon_cdf(x) == pytest.approx(0.5 + val, abs=1e-9)
            assert upsilon_cdf(-x) == pytest.approx(1.0 - upsilon_cdf(x), abs=1e-12)

    def test_table_masses(self):
        t = f_upsilon_table(256)
        assert t.masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(t.masses >= 0)
        assert t.masses == pytest.approx(t.masses[::-1], abs=1e-13)
        assert t.mass_between(-1.0, 1.0) == pytest.approx(upsilon_cdf(1.0) - upsilon_cdf(-1.0),
                                                         abs=1e-9)
        with pytest.raises(ValueError):
            f_upsilon_table(4)

    def test_sampler_histogram(self):
        rng = np.random.default_rng(11)
        y = sample_upsilon(rng, 200_000)
        assert np.all(np.abs(y) <= 2.0)
        ks = stats.kstest(y, np.vectorize(upsilon_cdf))
        assert ks.statistic < 0.005


class TestArrayGain:
    @given(st.floats(-2.0, 2.0), st.sampled_from([1, 2, 8, 16, 64]))
    def test_bounded(self, y, nt):
        assert abs(array_gain(y, ArrayConfig(nt))) <= 1.0 + 1e-12

    def test_grating_lobes(self):
        # half-wavelength spacing: main lobe at 0 and grating lobes at +-2
        cfg = ArrayConfig(16)
        for y in (0.0, 2.0, -2.0):
            assert array_gain(y, cfg) == 1.0 + 0.0j
        # one-wavelength spacing puts lobes at every integer
        wide = ArrayConfig(8, spacing=1.0)
        for y in (-2.0, -1.0, 1.0):
            assert abs(array_gain(y, wide)) == pytest.approx(1.0, abs=1e-12)

    def test_nulls(self):
        cfg = ArrayConfig(16)
        for k in (1, 3, 7):
            assert abs(array_gain(k / cfg.length, cfg)) < 1e-12

    def test_near_singularity_continuous(self):
        cfg = ArrayConfig(16)
        assert gain_power(np.array([1e-10]), cfg)[0] == pytest.approx(1.0, abs=1e-12)

    def test_power_matches_modulus(self):
        cfg = ArrayConfig(32)
        y = np.linspace(-2, 2, 1001)
        assert gain_power(y, cfg) == pytest.approx(np.abs(array_gain(y, cfg)) ** 2, abs=1e-12)

    @pytest.mark.parametrize("nt,expected", [(8, 0.16593484955461957), (16, 0.09116593253444374)])
    def test_mean_power(self, nt, expected):
        # expected: 400x400 Gauss rule over both angles [DERIVED]
        assert mean_gain_power(ArrayConfig(nt)) == pytest.approx(expected, rel=1e-9)


class TestFlatTop:
    @pytest.mark.parametrize("nt,expected", [(16, 0.13070486503951972), (64, 0.04144844897760899)])
    def test_constant(self, nt, expected):
        # expected: quadrature of the elliptic density over the main lobe [DERIVED]
        assert flat_top_constant(ArrayConfig(nt)) == pytest.approx(expected, rel=1e-9)

    def test_full_support_window(self):
        assert flat_top_constant(ArrayConfig(1)) == 1.0
        assert flat_top_constant(ArrayConfig(1, spacing=0.25)) == 1.0

    def test_nonincreasing(self):
        vals = [flat_top_constant(ArrayConfig(n)) for n in (1, 2, 4, 8, 16, 32, 64, 128)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestGainQuadrature:
    @pytest.mark.parametrize("nt", [8, 16, 64])
    def test_moments(self, nt):
        cfg = ArrayConfig(nt)
        q = gain_quadrature(cfg)
        assert q.p.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((q.g >= 0) & (q.g <= 1.0 + 1e-12))
        assert q.mean == pytest.approx(mean_gain_power(cfg), rel=5e-5)

    def test_flat_top(self):
        cfg = ArrayConfig(16)
        q = gain_quadrature(cfg, "flat_top")
        assert list(q.g) == [0.0, 1.0]
        assert q.p[1] == pytest.approx(flat_top_constant(cfg))


class TestFading:
    def test_nakagami_one_is_rayleigh(self):
        rng = np.random.default_rng(5)
        h = sample_fading(FadingModel.nakagami(1), rng, 100_000)
        assert stats.kstest(np.abs(h) ** 2, "expon").statistic < 0.005

    def test_nakagami_power(self):
        rng = np.random.default_rng(6)
        h = sample_fading(FadingModel.nakagami(3), rng, 100_000)
        assert stats.kstest(np.abs(h) ** 2, stats.gamma(3, scale=1 / 3).cdf).statistic < 0.005

    def test_no_fading_is_unity(self):
        h = sample_fading(FadingModel.no_fading(), np.random.default_rng(0), 10)
        assert np.all(h == 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            FadingModel("lognormal")
        with pytest.raises(ValueError):
            FadingModel.nakagami(0)
        with pytest.raises(ValueError):
            ArrayConfig(0)
