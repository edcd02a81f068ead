"""Antenna-array gain, the directional-cosine-difference law, and fading samplers."""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

from . import kernels


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear array: ``n_antennas`` elements, ``spacing`` in wavelengths."""

    n_antennas: int
    spacing: float = 0.5

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ValueError(f"n_antennas must be a positive integer, got {self.n_antennas!r}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing!r}")
        object.__setattr__(self, "n_antennas", int(self.n_antennas))
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def length(self):
        """Normalized array length ``n_antennas * spacing``."""
        return self.n_antennas * self.spacing


@dataclass(frozen=True)
class FadingModel:
    kind: str = "rayleigh"
    m: int = 1

    KINDS = ("rayleigh", "nakagami", "none")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"fading kind must be one of {self.KINDS}, got {self.kind!r}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"Nakagami shape m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def rayleigh(cls):
        return cls("rayleigh", 1)

    @classmethod
    def nakagami(cls, m):
        return cls("nakagami", m)

    @classmethod
    def no_fading(cls):
        return cls("none", 1)


# --------------------------------------------------------------------------
# array gain
# --------------------------------------------------------------------------

def array_gain(y, cfg: ArrayConfig):
    """Complex ULA gain for a directional-cosine difference ``y``.

    Removable singularities at ``y = k / spacing`` return their limit, which is
    exactly ``1 + 0j``.
    """
    y = np.asarray(y, dtype=float)
    n, d = cfg.n_antennas, cfg.spacing
    den = n * np.sin(np.pi * d * y)
    singular = np.abs(den) < kernels.SINGULAR_EPS * n
    ratio = np.sin(np.pi * d * n * y) / np.where(singular, 1.0, den)
    out = np.exp(1j * np.pi * d * (n - 1) * y) * ratio
    out = np.where(singular, 1.0 + 0.0j, out)
    return out[()] if out.ndim == 0 else out


def gain_power(y, cfg: ArrayConfig):
    """``|array_gain(y)|**2`` through the accelerated kernel."""
    return kernels.gain_power(y, cfg.n_antennas, cfg.spacing)


def mean_gain_power(cfg: ArrayConfig):
    """E|G(Y)|^2 for Y a difference of two independent uniform-angle cosines.

    Uses E[exp(j t cos phi)] = J0(t), so no density is involved.
    """
    n, d = cfg.n_antennas, cfg.spacing
    lags = np.arange(-(n - 1), n)
    return float(np.sum((n - np.abs(lags)) * special.j0(2 * np.pi * d * lags) ** 2) / n**2)


# --------------------------------------------------------------------------
# law of Y = cos(phi) - cos(theta), phi, theta iid U[-pi, pi]
# --------------------------------------------------------------------------

def f_upsilon(eps):
    """Density of the directional-cosine difference at ``eps`` (|eps| <= 2).

    Singularity-aware quadrature of the arcsine convolution. Logarithmically
    divergent at 0, so ``eps == 0`` returns ``inf``. At ``|eps| == 2`` the
    integration range is a single point and the value is 0 (the one-sided
    limit is 1/(2*pi)).
    """
    e = abs(float(eps))
    if e > 2.0:
        raise ValueError(f"eps must lie in [-2, 2], got {eps!r}")
    if e == 2.0:
        return 0.0
    if e == 0.0:
        return math.inf
    # y = c + h*sin(t) maps [-1, 1-e] onto [-pi/2, pi/2] and cancels both
    # inverse-square-root endpoint factors.
    a = 1.0 + 0.5 * e
    h = 1.0 - 0.5 * e

    def integrand(tau):
        # tau = pi/2 - t; a - h*sin(t) written without cancellation near tau = 0
        ct = math.cos(tau)
        near = 2.0 * math.sin(0.5 * tau) ** 2 + 0.5 * e * (1.0 + ct)
        return 1.0 / math.sqrt(near * (a + h * ct))

    # for small e the integrand peaks in a sqrt(e)-wide layer at tau = 0
    half = 0.5 * math.pi
    points = [k * math.sqrt(e) for k in (1.0, 10.0, 100.0) if k * math.sqrt(e) < half]
    val, _ = integrate.quad(integrand, 0.0, half, epsabs=0.0, epsrel=1e-12, limit=200,
                            points=points or None)
    return 2.0 * val / math.pi**2


def _arcsine_cdf(u):
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return 1.0 - math.acos(u) / math.pi


def _cdf_nonneg(x):
    # P(Y <= x) for 0 <= x <= 2 as (1/pi) * int_0^pi F_arcsine(x + cos t) dt
    if x >= 2.0:
        return 1.0
    t1 = math.acos(1.0 - x)
    span = math.pi - t1

    # t = t1 + span * r**2 removes the square-root kink at t1
    def integrand(r):
        t = t1 + span * r * r
        return _arcsine_cdf(x + math.cos(t)) * 2.0 * span * r

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-14, epsrel=1e-12, limit=200)
    return (t1 + val) / math.pi


def upsilon_cdf(x):
    """CDF of the directional-cosine difference (vectorized)."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty_like(flat)
    for i, xi in enumerate(flat):
        if xi <= -2.0:
            out[i] = 0.0
        elif xi >= 2.0:
            out[i] = 1.0
        elif xi >= 0.0:
            out[i] = _cdf_nonneg(xi)
        else:
            out[i] = 1.0 - _cdf_nonneg(-xi)
    out = out.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class UpsilonTable:
    """Piecewise-constant density of Y on ``edges`` (cell-averaged)."""

    edges: np.ndarray
    masses: np.ndarray

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def values(self):
        return self.masses / self.widths

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def mass_between(self, lo, hi):
        """Mass in [lo, hi], linear within partially covered cells."""
        left = np.clip(lo, self.edges[:-1], self.edges[1:])
        right = np.clip(hi, self.edges[:-1], self.edges[1:])
        return float(np.sum(self.values * np.maximum(right - left, 0.0)))


@lru_cache(maxsize=16)
def f_upsilon_table(grid_cells: int = 512) -> UpsilonTable:
    """Cell-averaged density of Y over ``grid_cells`` equal cells of [-2, 2]."""
    if int(grid_cells) != grid_cells or grid_cells < 16:
        raise ValueError(f"grid_cells must be an integer >= 16, got {grid_cells!r}")
    grid_cells = int(grid_cells)
    edges = np.linspace(-2.0, 2.0, grid_cells + 1)
    # exact symmetry: evaluate the CDF on the non-negative half only
    half = edges[edges >= 0.0]
    cdf_half = np.array([_cdf_nonneg(x) for x in half])
    cdf = np.empty(grid_cells + 1)
    lookup = dict(zip(half.tolist(), cdf_half.tolist()))
    for i, x in enumerate(edges):
        if x >= 0.0:
            cdf[i] = lookup[x]
        else:
            mirror = -x
            cdf[i] = 1.0 - (lookup[mirror] if mirror in lookup else _cdf_nonneg(mirror))
    cdf[0], cdf[-1] = 0.0, 1.0
    masses = np.diff(cdf)
    masses = 0.5 * (masses + masses[::-1])
    edges.setflags(write=False)
    masses.setflags(write=False)
    return UpsilonTable(edges=edges, masses=masses)


def flat_top_constant(cfg: ArrayConfig) -> float:
    """Mass of Y inside the flat-top main lobe [-1/L, 1/L]."""
    half_width = 1.0 / cfg.length
    if half_width >= 2.0:
        return 1.0
    return float(2.0 * _cdf_nonneg(half_width) - 1.0)


# --------------------------------------------------------------------------
# discrete law of |G(Y)|^2 used inside the interference Laplace transform
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GainQuadrature:
    """Weighted nodes ``(g, p)`` standing in for the distribution of |G(Y)|^2."""

    g: np.ndarray
    p: np.ndarray

    @property
    def mean(self):
        return float(self.p @ self.g)

    @property
    def second_moment(self):
        return float(self.p @ self.g**2)


_TABLE_CELLS = 8192
_SUBPOINTS = 8
_BINS_PER_DECADE = 10
_LOG_FLOOR = -16


@lru_cache(maxsize=64)
def gain_quadrature(cfg: ArrayConfig, mode: str = "exact") -> GainQuadrature:
    """Compress the law of |G(Y)|^2 to a few hundred weighted nodes.

    ``mode='exact'`` pushes the shared Y-table (each cell split into
    sub-points) through the array gain, then replaces the mass in each
    logarithmic gain bin by a two-point rule matching its mean and variance.
    ``mode='flat_top'`` returns the main-lobe indicator: gain 1 with mass c.
    """
    if mode == "flat_top":
        c = flat_top_constant(cfg)
        return GainQuadrature(g=np.array([0.0, 1.0]), p=np.array([1.0 - c, c]))
    if mode != "exact":
        raise ValueError(f"unknown Laplace mode {mode!r}")

    table = f_upsilon_table(_TABLE_CELLS)
    lo = table.edges[:-1]
    w = table.widths
    frac = (np.arange(_SUBPOINTS) + 0.5) / _SUBPOINTS
    eps = (lo[:, None] + w[:, None] * frac[None, :]).ravel()
    mass = np.repeat(table.masses / _SUBPOINTS, _SUBPOINTS)
    g = gain_power(eps, cfg)

    with np.errstate(divide="ignore"):
        lg = np.log10(g)
    nbins = -_LOG_FLOOR * _BINS_PER_DECADE
    idx = np.clip(np.floor((lg - _LOG_FLOOR) * _BINS_PER_DECADE), 0, nbins - 1).astype(int)
    pm = np.bincount(idx, weights=mass, minlength=nbins)
    m1 = np.bincount(idx, weights=mass * g, minlength=nbins)
    m2 = np.bincount(idx, weights=mass * g * g, minlength=nbins)
    keep = pm > 0
    pm, m1, m2 = pm[keep], m1[keep], m2[keep]
    mu = m1 / pm
    sd = np.sqrt(np.maximum(m2 / pm - mu**2, 0.0))
    nodes = np.concatenate([mu - sd, mu + sd])
    weights = np.concatenate([0.5 * pm, 0.5 * pm])
    nodes = np.clip(nodes, 0.0, 1.0)
    weights = weights / weights.sum()
    order = np.argsort(nodes)
    g_out, p_out = nodes[order], weights[order]
    g_out.setflags(write=False)
    p_out.setflags(write=False)
    return GainQuadrature(g=g_out, p=p_out)


# --------------------------------------------------------------------------
# samplers
# --------------------------------------------------------------------------

def sample_upsilon(rng, size=None):
    """cos(phi) - cos(theta) with phi, theta iid uniform on [-pi, pi]."""
    a = rng.uniform(-np.pi, np.pi, size)
    b = rng.uniform(-np.pi, np.pi, size)
    return np.cos(a) - np.cos(b)


def sample_fading(model: FadingModel, rng, size=None):
    """Complex small-scale gain with unit mean power."""
    if model.kind == "none":
        return np.ones(size, dtype=complex) if size is not None else 1.0 + 0.0j
    if model.kind == "rayleigh":
        re = rng.standard_normal(size)
        im = rng.standard_normal(size)
        return (re + 1j * im) / np.sqrt(2.0)
    power = rng.gamma(model.m, 1.0 / model.m, size)
    phase = rng.uniform(-np.pi, np.pi, size)
    return np.sqrt(power) * np.exp(1j * phase)
