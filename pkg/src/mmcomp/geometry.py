"""Tiers, mapped point-process intensities, order statistics and network sampling.

Base stations of tier k form a planar PPP of density ``density``. A station at
distance r has normalized pathloss ``r**alpha / power``; with blockage the
exponent is ``alpha1`` (LOS, probability ``exp(-blockage * r)``) or
``alpha2``. The normalized pathlosses of all tiers form a 1-D PPP on
(0, inf) whose intensity and measure are computed here.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .channel import ArrayConfig, FadingModel, mean_gain_power


@dataclass(frozen=True)
class TierConfig:
    density: float
    power: float
    blockage: float = 0.0

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError(f"tier density must be positive, got {self.density!r}")
        if not self.power > 0:
            raise ValueError(f"tier power must be positive, got {self.power!r}")
        if not self.blockage >= 0:
            raise ValueError(f"tier blockage must be nonnegative, got {self.blockage!r}")
        for name in ("density", "power", "blockage"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_radius(cls, radius_m, power, blockage=0.0):
        """Density ``1 / (pi r^2)``: one station per disk of radius ``radius_m``."""
        return cls(1.0 / (math.pi * radius_m**2), power, blockage)

    @property
    def nominal_radius(self):
        return 1.0 / math.sqrt(math.pi * self.density)


@dataclass(frozen=True)
class PathlossConfig:
    """``mode`` is ``'uniform'`` (single exponent) or ``'los_nlos'``."""

    mode: str
    alpha1: float
    alpha2: float

    def __post_init__(self):
        if self.mode not in ("uniform", "los_nlos"):
            raise ValueError(f"pathloss mode must be 'uniform' or 'los_nlos', got {self.mode!r}")
        a1, a2 = float(self.alpha1), float(self.alpha2)
        object.__setattr__(self, "alpha1", a1)
        object.__setattr__(self, "alpha2", a2)
        if self.mode == "uniform":
            if a1 != a2:
                raise ValueError("uniform pathloss takes a single exponent")
            if not a1 > 2:
                raise ValueError(f"pathloss exponent must exceed 2, got {a1}")
        else:
            if not a2 > 2:
                raise ValueError(f"NLOS exponent alpha2 must exceed 2, got {a2}")
            if not a1 > 0:
                raise ValueError(f"LOS exponent alpha1 must be positive, got {a1}")
            if a1 > a2:
                raise ValueError(f"LOS exponent must not exceed NLOS exponent ({a1} > {a2})")

    @classmethod
    def uniform(cls, alpha):
        return cls("uniform", alpha, alpha)

    @classmethod
    def los_nlos(cls, alpha1, alpha2):
        return cls("los_nlos", alpha1, alpha2)


@dataclass(frozen=True)
class NoiseConfig:
    bandwidth_hz: float
    nf_db: float = 0.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth_hz!r}")


@dataclass(frozen=True)
class Scenario:
    tiers: tuple
    pathloss: PathlossConfig
    array: ArrayConfig
    noise: NoiseConfig
    fading: FadingModel = field(default_factory=FadingModel.rayleigh)
    coop_n: int = 1
    name: str = "scenario"

    def __post_init__(self):
        tiers = tuple(self.tiers)
        object.__setattr__(self, "tiers", tiers)
        if not tiers:
            raise ValueError("scenario needs at least one tier")
        if int(self.coop_n) != self.coop_n or self.coop_n < 1:
            raise ValueError(f"coop_n must be a positive integer, got {self.coop_n!r}")
        object.__setattr__(self, "coop_n", int(self.coop_n))
        if self.pathloss.mode == "uniform" and any(t.blockage > 0 for t in tiers):
            raise ValueError("uniform pathloss requires zero blockage on every tier")
        if (self.pathloss.mode == "los_nlos" and self.pathloss.alpha1 <= 2
                and any(t.blockage == 0 for t in tiers)):
            raise ValueError("a tier without blockage needs alpha1 > 2 (interference diverges)")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def noise_power(self):
        return noise_power(self.noise)

    @property
    def noise_per_antenna(self):
        """sigma^2 / N_t, the noise term seen after transmit beamforming."""
        return self.noise_power / self.array.n_antennas


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

def noise_power(cfg: NoiseConfig) -> float:
    """Thermal noise ``-174 + 10 log10(BW) + NF`` dBm, returned in watts."""
    dbm = -174.0 + 10.0 * math.log10(cfg.bandwidth_hz) + cfg.nf_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


# --------------------------------------------------------------------------
# mapped intensity and measure
# --------------------------------------------------------------------------

def _p2(y):
    """2 P(2, y) / y**2 = 2 (1 - e^-y (1 + y)) / y**2, and 1 minus it.

    Returns ``(p2, 1 - p2)`` with a series for small y so neither loses digits.
    """
    y = np.asarray(y, dtype=float)
    small = y < 0.5
    ys = np.where(small, y, 0.0)
    # 1 - p2 = -2 sum_{k>=3} (-1)^k (k-1)/k! y^(k-2)
    one_minus = np.zeros_like(ys)
    for k in range(3, 20):
        one_minus += -2.0 * (-1.0) ** k * (k - 1) / math.factorial(k) * ys ** (k - 2)
    yl = np.where(small, 1.0, y)
    p_large = 2.0 * special.gammainc(2.0, yl) / yl**2
    p2 = np.where(small, 1.0 - one_minus, p_large)
    q2 = np.where(small, one_minus, 1.0 - p_large)
    return p2, q2


def _check_v(v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise ValueError("normalized pathloss must be positive")
    return v


def intensity(v, scenario: Scenario):
    """Intensity lambda(v) of the mapped normalized-pathloss process."""
    v = _check_v(v)
    pl = scenario.pathloss
    out = np.zeros_like(v)
    for t in scenario.tiers:
        if pl.mode == "uniform":
            a = pl.alpha1
            out += t.density * (2 * math.pi / a) * t.power ** (2 / a) * v ** (2 / a - 1)
            continue
        a1, a2 = pl.alpha1, pl.alpha2
        x1 = (v * t.power) ** (1 / a1)
        x2 = (v * t.power) ** (1 / a2)
        los = (2 * math.pi * t.density / a1) * t.power ** (2 / a1) * v ** (2 / a1 - 1) \
            * np.exp(-t.blockage * x1)
        nlos = (2 * math.pi * t.density / a2) * t.power ** (2 / a2) * v ** (2 / a2 - 1) \
            * -np.expm1(-t.blockage * x2)
        out += los + nlos
    return out[()] if out.ndim == 0 else out


def intensity_measure(v, scenario: Scenario):
    """Expected number of mapped points with normalized pathloss in (0, v]."""
    v = _check_v(v)
    pl = scenario.pathloss
    out = np.zeros_like(v)
    for t in scenario.tiers:
        if pl.mode == "uniform":
            out += math.pi * t.density * (t.power * v) ** (2 / pl.alpha1)
            continue
        x1 = (v * t.power) ** (1 / pl.alpha1)
        x2 = (v * t.power) ** (1 / pl.alpha2)
        p_los, _ = _p2(t.blockage * x1)
        _, q_nlos = _p2(t.blockage * x2)
        out += math.pi * t.density * (x1**2 * p_los + x2**2 * q_nlos)
    return out[()] if out.ndim == 0 else out


def _measure_key(scenario):
    return (scenario.tiers, scenario.pathloss)


@lru_cache(maxsize=64)
def _inverse_table(key):
    tiers, pathloss = key
    proxy = _MeasureProxy(tiers, pathloss)
    lo, hi = 1.0, 1.0
    while intensity_measure(lo, proxy) > 1e-14:
        lo /= 10.0
    while intensity_measure(hi, proxy) < 400.0:
        hi *= 10.0
    logv = np.linspace(math.log(lo), math.log(hi), 64 * int(round(math.log10(hi / lo)) + 1))
    logm = np.log(intensity_measure(np.exp(logv), proxy))
    return PchipInterpolator(logm, logv, extrapolate=True), proxy


@dataclass(frozen=True)
class _MeasureProxy:
    # the two fields the intensity functions read
    tiers: tuple
    pathloss: PathlossConfig


def inverse_measure(u, scenario: Scenario):
    """v with ``intensity_measure(v) == u`` for u > 0 (vectorized)."""
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("measure value must be positive")
    pl = scenario.pathloss
    if pl.mode == "uniform":
        coef = sum(math.pi * t.density * t.power ** (2 / pl.alpha1) for t in scenario.tiers)
        out = (u / coef) ** (pl.alpha1 / 2)
        return out[()] if out.ndim == 0 else out
    interp, proxy = _inverse_table(_measure_key(scenario))
    logu = np.log(u)
    logv = interp(logu)
    for _ in range(4):
        v = np.exp(logv)
        m = intensity_measure(v, proxy)
        slope = v * intensity(v, proxy) / m
        logv = logv - (np.log(m) - logu) / slope
    out = np.exp(logv)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# order statistics of the n strongest stations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderedPathloss:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(x) for x in np.ravel(self.values))
        if not vals:
            raise ValueError("ordered pathloss vector is empty")
        if any(not x > 0 for x in vals):
            raise ValueError("normalized pathlosses must be positive")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("normalized pathlosses must be strictly ascending")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def as_array(self):
        return np.array(self.values)


def joint_pathloss_pdf(g, scenario: Scenario) -> float:
    """Joint density of the n smallest normalized pathlosses at ascending ``g``."""
    if not isinstance(g, OrderedPathloss):
        g = OrderedPathloss(tuple(np.ravel(g)))
    arr = g.as_array()
    return float(np.prod(intensity(arr, scenario)) * math.exp(-intensity_measure(arr[-1], scenario)))


# --------------------------------------------------------------------------
# interference beyond a radius (used to size and correct the simulation window)
# --------------------------------------------------------------------------

def _radial_integral(scenario, radius, power_exp, weight):
    # sum_k 2 pi lambda_k P_k^power_exp * int_R^inf r [e^{-b r} r^{-p a1} + (1-e^{-b r}) r^{-p a2}] dr
    pl = scenario.pathloss
    total = 0.0
    for t in scenario.tiers:
        a1, a2, b = pl.alpha1, pl.alpha2, t.blockage
        if pl.mode == "uniform" or b == 0.0:
            a = a1
            term = radius ** (2 - power_exp * a) / (power_exp * a - 2)
        else:
            # all-NLOS closed form plus the exponentially damped LOS excess
            def excess(x):
                r = radius + x
                return math.exp(-b * x) * (r ** (1 - power_exp * a1) - r ** (1 - power_exp * a2))
            corr, _ = integrate.quad(excess, 0.0, np.inf, epsrel=1e-10, limit=200)
            term = (radius ** (2 - power_exp * a2) / (power_exp * a2 - 2)
                    + math.exp(-b * radius) * corr)
        total += 2 * math.pi * t.density * t.power**power_exp * term
    return weight * total


def far_field_mean(scenario: Scenario, radius: float) -> float:
    """Mean interference from stations farther than ``radius`` (Rayleigh, random beam)."""
    return _radial_integral(scenario, radius, 1, mean_gain_power(scenario.array))


def far_field_std(scenario: Scenario, radius: float) -> float:
    from .channel import gain_quadrature
    g2 = gain_quadrature(scenario.array).second_moment
    # E|h|^4 = 2 for unit-power Rayleigh
    return math.sqrt(_radial_integral(scenario, radius, 2, 2.0 * g2))


def conditional_interference_mean(scenario: Scenario, gamma_n: float) -> float:
    """E[I | n-th smallest normalized pathloss = gamma_n] (Rayleigh, random beam)."""
    val, _ = integrate.quad(lambda x: float(intensity(math.exp(x), scenario)),
                            math.log(gamma_n), math.log(gamma_n) + 200.0,
                            epsrel=1e-9, limit=400)
    return mean_gain_power(scenario.array) * val


MAX_EXPECTED_POINTS = 20000


def default_window_radius(scenario: Scenario) -> float:
    """Auto window: 10x the largest nominal tier radius, grown until the
    far-field fluctuation is below 1e-3 of the typical interference level,
    capped so a realization holds at most ``MAX_EXPECTED_POINTS`` points."""
    radius = 10.0 * max(t.nominal_radius for t in scenario.tiers)
    total_density = sum(t.density for t in scenario.tiers)
    cap = math.sqrt(MAX_EXPECTED_POINTS / (math.pi * total_density))
    gamma_ref = float(inverse_measure(float(scenario.coop_n), scenario))
    ref = conditional_interference_mean(scenario, gamma_ref)
    while radius < cap and far_field_std(scenario, radius) > 1e-3 * ref:
        radius *= 1.25
    return min(radius, max(cap, 10.0 * max(t.nominal_radius for t in scenario.tiers)))


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkRealization:
    """One deployment, sorted by ascending normalized pathloss."""

    gamma: np.ndarray
    tier: np.ndarray
    los: np.ndarray
    distance: np.ndarray
    window_radius: float

    def __len__(self):
        return self.gamma.shape[0]

    @property
    def points(self):
        return list(zip(self.gamma.tolist(), self.tier.tolist(), self.los.tolist()))


def sample_network_batch(scenario: Scenario, window_radius: float, rng, batch: int):
    """``batch`` independent deployments packed as flat arrays.

    Returns ``(offsets, gamma, tier, los, distance)``; realization b owns the
    slice ``offsets[b]:offsets[b+1]`` (unsorted).
    """
    if not window_radius > 0:
        raise ValueError("window radius must be positive")
    pl = scenario.pathloss
    counts = np.zeros(batch, dtype=np.int64)
    parts = []
    for k, t in enumerate(scenario.tiers):
        c = rng.poisson(t.density * math.pi * window_radius**2, batch)
        counts += c
        parts.append((k, t, c))
    offsets = np.zeros(batch + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    gamma = np.empty(total)
    tier = np.empty(total, dtype=np.int64)
    los = np.empty(total, dtype=bool)
    dist = np.empty(total)
    # place each tier's points in realization order
    fill = offsets[:-1].copy()
    for k, t, c in parts:
        m = int(c.sum())
        r = window_radius * np.sqrt(rng.random(m))
        if t.blockage > 0:
            is_los = rng.random(m) < np.exp(-t.blockage * r)
        else:
            is_los = np.ones(m, dtype=bool)
        alpha = np.where(is_los, pl.alpha1, pl.alpha2)
        owner = np.repeat(np.arange(batch), c)
        pos = fill[owner] + (np.arange(m) - np.repeat(np.cumsum(c) - c, c))
        gamma[pos] = r**alpha / t.power
        tier[pos] = k
        los[pos] = is_los
        dist[pos] = r
        fill += c
    return offsets, gamma, tier, los, dist


def sample_network(scenario: Scenario, window_radius: float, rng) -> NetworkRealization:
    _, gamma, tier, los, dist = sample_network_batch(scenario, window_radius, rng, 1)
    order = np.argsort(gamma, kind="stable")
    return NetworkRealization(gamma[order], tier[order], los[order], dist[order], float(window_radius))
