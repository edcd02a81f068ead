"""Randomized invariants across the channel, geometry, analytic and simulator layers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from conftest import one_tier
from mmcomp.analytic import coverage_rayleigh, laplace_interference, residue_tail
from mmcomp.channel import ArrayConfig, array_gain, f_upsilon, flat_top_constant
from mmcomp.geometry import intensity, intensity_measure, sample_network
from mmcomp.simulator import SimConfig, estimate_coverage

nts = st.sampled_from([1, 2, 4, 8, 16, 32, 64])
blockages = st.one_of(st.just(0.0), st.floats(1e-4, 0.05))


@given(st.floats(1e-6, 2.0, exclude_max=True))
def test_f_upsilon_symmetric_positive(e):
    a, b = f_upsilon(e), f_upsilon(-e)
    assert a > 0
    assert a == pytest.approx(b, rel=1e-12)


@given(st.floats(-50, 50), nts, st.floats(0.1, 2.0))
def test_gain_magnitude_bounded(y, nt, spacing):
    assert abs(array_gain(y, ArrayConfig(nt, spacing))) <= 1 + 1e-12


@given(st.integers(-6, 6), nts, st.sampled_from([0.25, 0.5, 1.0]))
def test_gain_grating_lobes(k, nt, spacing):
    y = k / spacing
    assert abs(array_gain(y, ArrayConfig(nt, spacing))) == pytest.approx(1.0, abs=1e-9)


def test_flat_top_constant_nested():
    cs = [flat_top_constant(ArrayConfig(n)) for n in (1, 2, 4, 8, 16, 32, 64)]
    # only N=1 (length 1/2) has a window covering all of [-2, 2]
    assert cs[0] == 1.0 and cs[1] < 1.0
    assert all(a > b for a, b in zip(cs, cs[1:]))
    assert flat_top_constant(ArrayConfig(2, 0.25)) == 1.0


@given(blockages, st.floats(2.1, 4.0), st.floats(-1, 3), st.floats(0.01, 1.0))
def test_measure_monotone_and_differentiable(beta, a1, logv, frac):
    sc = one_tier(blockage=beta, alpha1=a1, alpha2=4.0) if beta else one_tier(blockage=0.0)
    v = 10.0 ** (logv + 7)
    lo = v * frac
    assert intensity_measure(lo, sc) <= intensity_measure(v, sc)
    h = 1e-6 * v
    fd = (intensity_measure(v + h, sc) - intensity_measure(v - h, sc)) / (2 * h)
    assert fd == pytest.approx(intensity(v, sc), rel=1e-4)


@settings(max_examples=25)
@given(blockages, st.floats(1e-3, 10.0), st.floats(1e7, 1e11))
def test_laplace_interference_bounds(beta, s_scale, gamma_n):
    sc = one_tier(blockage=beta, nt=16)
    s = s_scale * gamma_n
    real = laplace_interference(np.array([s, 2 * s]), gamma_n, sc)
    assert 0 < real[1].real <= real[0].real <= 1
    assert abs(laplace_interference(s * (1 + 1j), gamma_n, sc)) <= 1 + 1e-9
    # pushing the guard zone out can only reduce interference
    assert laplace_interference(s, 2 * gamma_n, sc).real >= real[0].real - 1e-12


@given(st.integers(1, 12), st.floats(0.05, 20), st.floats(1e-3, 30))
def test_residue_is_incomplete_gamma(shape, rate, x):
    assert residue_tail(shape, rate, x) == pytest.approx(
        special.gammaincc(shape, rate * x), abs=1e-8)


@settings(max_examples=8)
@given(st.sampled_from([50.0, 120.0, 250.0]), blockages, st.sampled_from([1, 16, 64]))
def test_analytic_coverage_monotone(radius, beta, nt):
    c = coverage_rayleigh(one_tier(radius=radius, blockage=beta, nt=nt),
                          np.arange(-10, 21, 5.0))
    assert np.all((c.coverage >= 0) & (c.coverage <= 1))
    assert np.all(np.diff(c.coverage) <= 1e-12)


@settings(max_examples=10)
@given(st.integers(0, 2**31), blockages)
def test_network_sorted_and_deterministic(seed, beta):
    sc = one_tier(radius=100.0, blockage=beta)
    a = sample_network(sc, 600.0, np.random.default_rng(seed))
    b = sample_network(sc, 600.0, np.random.default_rng(seed))
    assert np.all(np.diff(a.gamma) >= 0)
    assert np.all(a.distance <= 600.0)
    np.testing.assert_array_equal(a.gamma, b.gamma)


@settings(max_examples=5)
@given(st.integers(0, 2**31), st.integers(1, 3))
def test_simulated_coverage_monotone(seed, n):
    sc = one_tier(radius=100.0, n=n)
    c = estimate_coverage(sc, np.arange(-10, 21, 2.5), SimConfig(800, seed, 1000.0, 400), jobs=1)
    assert np.all(np.diff(c.coverage) <= 0)
    assert np.all(c.ci_halfwidth >= 0)
