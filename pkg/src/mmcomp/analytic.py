"""Numerical evaluation of the coverage theorems.

Layout of the computation:

* ``InterferenceLaplace`` holds, for one value of the n-th smallest normalized
  pathloss, the v-quadrature of the interference Laplace exponent and
  evaluates it at many complex ``s`` at once.
* ``_simplex_expectation`` averages a conditional coverage over the joint law
  of the n smallest normalized pathlosses. With ``u = Lambda(gamma)`` those
  become unit-rate Poisson arrivals, so ``u_n ~ Gamma(n, 1)`` is integrated
  adaptively and the remaining ``u_i / u_n`` are sorted uniforms.
* ``cf_inversion_batch`` is the characteristic-function inversion kernel
  shared by the Nakagami bound and the deterministic-signal dual route.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
import math
import warnings

import numpy as np
from scipy import integrate, special, stats
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import kernels
from .channel import gain_quadrature
from .curve import CoverageCurve, db_to_linear
from .errors import (ClampingWarning, NonConvergenceError, ResidueMismatchError,
                     UnsupportedCoopError)
from .geometry import OrderedPathloss, Scenario, intensity, inverse_measure

MAX_COOP = 6
CLAMP_SLACK = 1e-3


class LaplaceMode(str, Enum):
    EXACT = "exact"
    FLAT_TOP = "flat_top"


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-5
    outer_tail_cut: float = 1e-10
    inversion_tail_tol: float = 1e-6
    max_subdivisions: int = 200
    inner_nodes: int = 32      # Gauss-Legendre nodes for n = 2
    qmc_points: int = 1024     # scrambled Sobol points for n >= 3
    qmc_seed: int = 20150601
    outer_rule: str = "gauss"  # "gauss" (fixed composite rule) or "adaptive"
    outer_nodes: int = 12      # Gauss-Legendre nodes per outer panel

    def __post_init__(self):
        for name in ("rel_tol", "outer_tail_cut", "inversion_tail_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_subdivisions < 1 or self.inner_nodes < 1 or self.qmc_points < 1:
            raise ValueError("node counts must be positive")


DEFAULT_QUAD = QuadratureConfig()


def _mode(mode):
    return LaplaceMode(mode).value


# --------------------------------------------------------------------------
# Laplace transforms
# --------------------------------------------------------------------------

def laplace_noise(s, scenario: Scenario):
    """exp(-s sigma^2 / N_t)."""
    out = np.exp(-np.asarray(s, dtype=complex) * scenario.noise_per_antenna)
    return out[()] if out.ndim == 0 else out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@lru_cache(maxsize=64)
def _tail_table(key):
    """log T(v) on a log-v grid, T(v) = int_v^inf lambda(w) / w dw (blockage mode)."""
    proxy = _IntensityProxy(*key)
    pl = proxy.pathloss
    # beyond t_hi every tier is NLOS to double precision: lambda ~ B v^(d2 - 1)
    t_lo = -60.0
    t_hi = 60.0
    while True:
        v = math.exp(t_hi)
        if all(t.blockage * (v * t.power) ** (1 / pl.alpha2) > 80 for t in proxy.tiers):
            break
        t_hi += 10.0
    t = np.linspace(t_lo, t_hi, int((t_hi - t_lo) / 0.02) + 1)
    lam = intensity(np.exp(t), proxy)
    d2 = 2.0 / pl.alpha2
    b_coef = sum((2 * math.pi * tr.density / pl.alpha2) * tr.power**d2 for tr in proxy.tiers)
    far = b_coef * math.exp(t_hi) ** (d2 - 1) / (1 - d2)
    # cumulative Simpson from the top end
    h = t[1] - t[0]
    seg = h / 6.0 * (lam[:-1] + 4 * intensity(np.exp(t[:-1] + h / 2), proxy) + lam[1:])
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]]) + far
    return t, np.log(tail), CubicSpline(t, np.log(tail))


@dataclass(frozen=True)
class _IntensityProxy:
    tiers: tuple
    pathloss: object


def _tail_integral(scenario, v_cut):
    """int_{v_cut}^inf lambda(v) / v dv."""
    pl = scenario.pathloss
    if pl.mode == "uniform":
        d = 2.0 / pl.alpha1
        coef = sum(t.density * (2 * math.pi / pl.alpha1) * t.power**d for t in scenario.tiers)
        return coef * v_cut ** (d - 1) / (1 - d)
    t, logtail, spline = _tail_table((scenario.tiers, scenario.pathloss))
    x = math.log(v_cut)
    if x < t[0]:
        # only reachable for absurd pathloss scales; fall back to adaptive quadrature
        val, _ = integrate.quad(lambda y: float(intensity(math.exp(y), scenario)),
                                x, t[0], epsrel=1e-11, limit=400)
        return val + math.exp(logtail[0])
    if x > t[-1]:
        d2 = 2.0 / pl.alpha2
        return math.exp(logtail[-1]) * math.exp((d2 - 1) * (x - t[-1]))
    return float(np.exp(spline(x)))


class InterferenceLaplace:
    """E[exp(-s I)] given that the n-th cooperating station sits at ``gamma_n``.

    Interferers are the mapped points beyond ``gamma_n`` with Rayleigh power
    and random-beam gain |G(Y)|^2. The exponent is

        psi(s) = int_{gamma_n}^inf lambda(v) E_g[s g / (v + s g)] dv

    with v = gamma_n e^x on unit panels of 8 Gauss-Legendre nodes up to a cut
    V >= 1e4 |s|, beyond which s g / (v + s g) ~ s g / v is integrated exactly.
    """

    MIN_SPAN = 6

    def __init__(self, scenario: Scenario, gamma_n: float, mode="exact"):
        if not gamma_n > 0:
            raise ValueError("gamma_n must be positive")
        self.scenario = scenario
        self.gamma_n = float(gamma_n)
        gq = gain_quadrature(scenario.array, _mode(mode))
        self.gbar = gq.mean
        keep = gq.g > 0
        self.g = np.ascontiguousarray(gq.g[keep])
        self.p = np.ascontiguousarray(gq.p[keep])
        self._panels = {}
        self._ray_cache = ({}, {})
        self._ray_splines = [None, None]
        self.use_rays = True

    def _nodes(self, span):
        hit = self._panels.get(span)
        if hit is None:
            starts = np.arange(span, dtype=float)
            x = (starts[:, None] + _GL_X[None, :]).ravel()
            w = np.tile(_GL_W, span)
            v = self.gamma_n * np.exp(x)
            weights = w * v * intensity(v, self.scenario)
            tail = _tail_integral(self.scenario, self.gamma_n * math.exp(span))
            hit = (v, weights, tail)
            self._panels[span] = hit
        return hit

    def _span_for(self, smax):
        need = math.log(max(1e4 * smax / self.gamma_n, 1.0))
        return int(min(max(self.MIN_SPAN, math.ceil(need)), 400))

    # batches this large along the real or imaginary axis go through the ray table
    RAY_BATCH = 24
    RAY_STEP = math.log(10.0) / 24

    def exponent(self, s):
        s = np.asarray(s, dtype=complex)
        flat = s.ravel()
        if flat.size == 0:
            return np.zeros(s.shape, dtype=complex)
        if self.use_rays:
            for axis, part in ((0, flat.real), (1, flat.imag)):
                other = flat.imag if axis == 0 else flat.real
                if np.all(other == 0) and np.all(part >= 0) and (
                        flat.size >= self.RAY_BATCH or self._ray_covers(part, axis)):
                    return self._ray_exponent(part, axis).reshape(s.shape)
        return self.exact_exponent(flat).reshape(s.shape)

    def _ray_covers(self, r, axis):
        spl = self._ray_splines[axis]
        if spl is None:
            return False
        pos = r[r > 0]
        return pos.size == 0 or (np.log(pos.min()) >= spl[0] and np.log(pos.max()) <= spl[1])

    def _ray_exponent(self, r, axis):
        """psi on the positive real (axis 0) or imaginary (axis 1) ray by interpolation.

        Exact values are cached on a fixed grid in log r; log Re(psi) and
        log Im(psi) are both smooth there, so a cubic spline through them
        reproduces psi to about 1e-7 relative. The spline is rebuilt only when
        a request leaves its range, and then grows by a decade each way.
        """
        out = np.zeros(r.shape, dtype=complex)
        pos = r > 0
        if not np.any(pos):
            return out
        lr = np.log(r[pos])
        spl = self._ray_splines[axis]
        if spl is None or lr.min() < spl[0] or lr.max() > spl[1]:
            pad = 24
            k0 = int(math.floor(lr.min() / self.RAY_STEP)) - pad
            k1 = int(math.ceil(lr.max() / self.RAY_STEP)) + pad
            if spl is not None:
                k0 = min(k0, spl[2])
                k1 = max(k1, spl[3])
            cache = self._ray_cache[axis]
            missing = [k for k in range(k0, k1 + 1) if k not in cache]
            if missing:
                km = np.array(missing, dtype=float)
                pts = np.exp(km * self.RAY_STEP) * (1.0 if axis == 0 else 1j)
                for k, val in zip(missing, self.exact_exponent(pts)):
                    cache[k] = val
            ks = np.arange(k0, k1 + 1)
            vals = np.array([cache[k] for k in ks])
            x = ks * self.RAY_STEP
            re = CubicSpline(x, np.log(np.maximum(vals.real, 1e-300)))
            im = CubicSpline(x, np.log(np.maximum(vals.imag, 1e-300))) if axis == 1 else None
            # keep one grid step of margin at each end
            spl = (x[1], x[-2], k0, k1, re, im)
            self._ray_splines[axis] = spl
        re, im = spl[4], spl[5]
        if axis == 1:
            out[pos] = np.exp(re(lr)) + 1j * np.exp(im(lr))
        else:
            out[pos] = np.exp(re(lr))
        return out

    def exact_exponent(self, flat):
        flat = np.asarray(flat, dtype=complex).ravel()
        # group by the v-range each |s| needs so small |s| skip the far panels
        mags = np.abs(flat)
        spans = np.array([self._span_for(m) for m in mags]) if flat.size < 64 else \
            np.clip(np.ceil(np.log(np.maximum(1e4 * mags / self.gamma_n, 1.0))),
                    self.MIN_SPAN, 400).astype(int)
        psi = np.empty(flat.shape, dtype=complex)
        for span in np.unique(spans):
            idx = np.flatnonzero(spans == span)
            v, w, tail = self._nodes(int(span))
            part = flat[idx]
            psi[idx] = kernels.interference_exponent(part, v, w, self.g, self.p) \
                + part * self.gbar * tail
        return psi

    def __call__(self, s):
        return np.exp(-self.exponent(s))

    def mean(self):
        """E[I | gamma_n]."""
        v, w, tail = self._nodes(self.MIN_SPAN + 30)
        return self.gbar * (float(np.sum(w / v)) + tail)


@lru_cache(maxsize=256)
def _cached_kernel(scenario, gamma_n, mode):
    return InterferenceLaplace(scenario, gamma_n, mode)


def laplace_interference(s, gamma_n, scenario: Scenario, mode="exact"):
    """Laplace transform of the interference beyond ``gamma_n`` (Re s >= 0)."""
    s = np.asarray(s, dtype=complex)
    if np.any(s.real < -1e-14):
        raise ValueError("laplace_interference needs Re(s) >= 0")
    out = _cached_kernel(scenario, float(gamma_n), _mode(mode))(s)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# outer integral over the n strongest stations
# --------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _inner_rule(n, cfg: QuadratureConfig):
    """Nodes (K, n-1) of sorted ratios u_i/u_n in (0,1) and weights summing to 1."""
    if n == 1:
        return np.zeros((1, 0)), np.ones(1)
    if n == 2:
        t, w = np.polynomial.legendre.leggauss(cfg.inner_nodes)
        t = 0.5 * (t + 1.0)
        w = 0.5 * w
        # ratio = t^2 smooths the gamma_1 -> 0 end
        return (t**2)[:, None], w * 2.0 * t
    sob = stats.qmc.Sobol(d=n - 1, scramble=True, seed=cfg.qmc_seed)
    pts = sob.random(cfg.qmc_points)
    pts = np.sort(pts, axis=1)
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


def _check_coop(n):
    if n > MAX_COOP:
        raise UnsupportedCoopError(
            f"cooperation size n={n} exceeds the supported maximum of {MAX_COOP}")


def _simplex_expectation(scenario, conditional, cfg: QuadratureConfig):
    """E[conditional(gammas, gamma_n)] over the n smallest normalized pathlosses.

    ``conditional(gammas, gamma_n)`` receives a (K, n) ascending array whose
    last column equals ``gamma_n`` and returns (K, m) values.
    """
    n = scenario.coop_n
    _check_coop(n)
    ratios, weights = _inner_rule(n, cfg)
    u_max = float(stats.gamma.isf(cfg.outer_tail_cut, n))

    def f(u):
        if u <= 0.0:
            u = 1e-300
        us = np.concatenate([u * ratios, np.full((ratios.shape[0], 1), u)], axis=1)
        us = np.maximum(us, 1e-300)
        gam = inverse_measure(us, scenario)
        vals = conditional(gam, float(gam[0, -1]))
        dens = math.exp((n - 1) * math.log(u) - u - math.lgamma(n)) if u > 1e-300 else 0.0
        return dens * (weights @ vals)

    if cfg.outer_rule == "adaptive":
        res, _ = integrate.quad_vec(f, 0.0, u_max, epsabs=1e-7, epsrel=cfg.rel_tol, norm="max",
                                    limit=cfg.max_subdivisions, points=[max(n - 1.0, 0.5)])
    else:
        nodes, wts = _outer_rule(n, u_max, cfg.outer_nodes)
        res = sum(w * f(u) for u, w in zip(nodes, wts))
    if not np.all(np.isfinite(res)):
        raise NonConvergenceError("outer integral produced non-finite values")
    return res


@lru_cache(maxsize=32)
def _outer_rule(n, u_max, per_panel):
    """Composite Gauss-Legendre on [0, u_max] with panels doubling from 2^-8."""
    edges = [0.0]
    e = 2.0 ** -8
    while e < u_max:
        edges.append(e)
        e *= 2.0
    edges.append(u_max)
    x, w = np.polynomial.legendre.leggauss(per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(a + (b - a) * 0.5 * (x + 1.0))
        weights.append(0.5 * (b - a) * w)
    return tuple(np.concatenate(nodes)), tuple(np.concatenate(weights))


def _finalize(raw, method, thresholds_db, extra=None):
    raw = np.asarray(raw, dtype=float)
    bad = (raw < -CLAMP_SLACK) | (raw > 1 + CLAMP_SLACK)
    if np.any(bad):
        warnings.warn(f"{method}: raw coverage outside [0,1] by more than {CLAMP_SLACK} "
                      f"(min {raw.min():.4g}, max {raw.max():.4g}); clamped",
                      ClampingWarning, stacklevel=3)
    cov = np.clip(raw, 0.0, 1.0)
    # monotone in T up to quadrature noise; never let noise invert the order
    return CoverageCurve(np.asarray(thresholds_db, float), cov, method, raw=raw,
                         diagnostics=dict(extra or {}))


def _as_db(thresholds_db):
    t = np.atleast_1d(np.asarray(thresholds_db, dtype=float))
    if np.any(np.diff(t) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    return t


# --------------------------------------------------------------------------
# Rayleigh cooperating links
# --------------------------------------------------------------------------

def coverage_rayleigh(scenario: Scenario, thresholds_db, mode="exact",
                      cfg: QuadratureConfig = DEFAULT_QUAD) -> CoverageCurve:
    """Coverage with Rayleigh cooperating links, with or without blockage.

    Given the cooperating set, the combined signal power is exponential with
    mean sum(1/gamma_i), so coverage = E[L_I(s) L_N(s)] at s = T / sum(1/gamma_i).
    """
    tdb = _as_db(thresholds_db)
    T = db_to_linear(tdb)
    mode = _mode(mode)

    def conditional(gam, gamma_n):
        kern = InterferenceLaplace(scenario, gamma_n, mode)
        s = T[None, :] / np.sum(1.0 / gam, axis=1)[:, None]
        return np.real(kern(s) * laplace_noise(s, scenario))

    raw = _simplex_expectation(scenario, conditional, cfg)
    method = "th1" if scenario.pathloss.mode == "uniform" else "th2"
    return _finalize(raw, method, tdb)


# --------------------------------------------------------------------------
# characteristic-function inversion
# --------------------------------------------------------------------------

class GammaSignal:
    """Normalized signal G ~ Gamma(shape, rate): L(s) = (1 + s / rate)^(-shape)."""

    delay = 0.0

    def __init__(self, shape, rate):
        self.shape = float(shape)
        self.rate = float(rate)

    def transform(self, s):
        return (1.0 + np.asarray(s, dtype=complex) / self.rate) ** (-self.shape)

    def magnitude(self, u):
        # |L(-j u)|
        return (1.0 + (np.asarray(u) / self.rate) ** 2) ** (-0.5 * self.shape)

    @property
    def mean(self):
        return self.shape / self.rate

    def phase_change(self, a, b, y):
        # arg L(-j u / y) = shape * atan(u / (rate y)): bounded, monotone
        return self.shape * (np.arctan(b / (self.rate * y)) - np.arctan(a / (self.rate * y)))


class DeterministicSignal:
    """Constant signal S0: L(s) = exp(-s S0), carried as a pure delay."""

    def __init__(self, s0):
        self.delay = float(s0)

    def transform(self, s):
        return np.ones_like(np.asarray(s, dtype=complex))

    def magnitude(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def phase_change(self, a, b, y):
        return np.zeros_like(np.asarray(y, dtype=float))  # carried by the delay

    mean = 0.0


class _CallableSignal:
    def __init__(self, fn):
        self.fn = fn

    delay = 0.0
    mean = 1.0

    def transform(self, s):
        return np.asarray(self.fn(s), dtype=complex)

    def magnitude(self, u):
        return np.abs(self.transform(-1j * np.asarray(u, dtype=float)))

    def phase_change(self, a, b, y):
        # unknown transform: assume the phase may turn at the mean rate
        return (b - a) * self.mean / np.asarray(y, dtype=float)


def _as_signal(signal):
    if isinstance(signal, (GammaSignal, DeterministicSignal, _CallableSignal)):
        return signal
    if callable(signal):
        return _CallableSignal(signal)
    raise TypeError("signal must be a GammaSignal, DeterministicSignal or callable")


_GL16_X, _GL16_W = np.polynomial.legendre.leggauss(16)
_PANEL_RULES = (16, 32, 64, 128, 256)


def _gl(nodes):
    if nodes == 16:
        return _GL16_X, _GL16_W
    return _gl_cached(nodes)


def _panel_rule(a, b, phase):
    """Gauss-Legendre nodes on [a, b] resolving ``phase`` radians of turning.

    About 0.7 nodes per radian plus 16; long panels are split into equal
    sub-panels of at most 256 nodes so only a few rules are ever built.
    """
    need = 16 + int(math.ceil(0.7 * phase))
    pieces = max(1, -(-need // _PANEL_RULES[-1]))
    per = next(r for r in _PANEL_RULES if r * pieces >= need)
    xg, wg = _gl(per)
    edges = np.linspace(a, b, pieces + 1)
    half = 0.5 * np.diff(edges)
    u = ((edges[:-1] + half)[:, None] + half[:, None] * xg[None, :]).ravel()
    wu = (half[:, None] * wg[None, :]).ravel()
    return u, wu


@lru_cache(maxsize=64)
def _gl_cached(nodes):
    return np.polynomial.legendre.leggauss(nodes)


def cf_inversion_batch(signal, y, noise, lap_i=None, interference_mean=0.0,
                       cfg: QuadratureConfig = DEFAULT_QUAD, return_raw=False):
    """P(G / y > noise + I) for each scale ``y`` (1-D array).

    Gil-Pelaez half-line form of the complex kernel

        P = 1/2 + (1/pi) int_0^inf Im[L_G(-j u / y) L_I(j u) e^{-j u noise}] / u du

    where ``L_I`` is ``lap_i`` (``None`` means no interference). A
    deterministic signal enters as a phase ``e^{j u S0 / y}`` instead.
    The integral is taken on geometrically growing Gauss-Legendre panels that
    share one set of u-nodes for every y; it stops once the envelope bound on
    the remaining tail is below ``inversion_tail_tol``, adding the leading
    integration-by-parts term of the oscillatory tail.
    """
    sig = _as_signal(signal)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(~(y > 0)):
        raise ValueError("scaled thresholds must be positive")
    c = sig.delay / y - noise  # per-y phase rate of the non-decaying part
    # one panel grid per group of comparable scale; a single grid for scales
    # decades apart wastes nodes on the slowly decaying members
    scales = sig.mean / y + np.abs(c) + interference_mean
    key = np.floor(np.log2(np.maximum(scales, 1e-300)) / 3.0)
    raw = np.empty(y.shape[0])
    for k in np.unique(key):
        idx = np.flatnonzero(key == k)
        raw[idx] = _cf_panels(sig, y[idx], c[idx], lap_i, interference_mean, cfg)
    if return_raw:
        return raw
    return np.clip(raw, 0.0, 1.0)


def _interference_phase(lap_i, u):
    # -arg L_I(j u), unwrapped when the kernel exposes its exponent
    if hasattr(lap_i, "exponent"):
        return float(np.imag(lap_i.exponent(np.array([1j * u]))[0]))
    return float(-np.angle(complex(lap_i(np.array([1j * u]))[0])))


def _cf_panels(sig, y, c, lap_i, interference_mean, cfg):
    tol = cfg.inversion_tail_tol
    abs_c = np.abs(c)
    scale = float(np.max(sig.mean / y + abs_c) + interference_mean)
    scale = max(scale, 1e-300)
    a = 0.0
    b = 0.5 / scale
    acc = np.zeros(y.shape[0])
    done = np.zeros(y.shape[0], dtype=bool)
    final = np.zeros(y.shape[0])
    total_nodes = 0
    node_budget = 60_000

    def phi(u):
        # (M,) u -> (len(y), M) complex integrand numerator
        uy = u[None, :] / y[:, None]
        val = sig.transform(-1j * uy) * np.exp(1j * c[:, None] * u[None, :])
        if lap_i is not None:
            val = val * lap_i(1j * u)[None, :]
        return val

    psi_prev = 0.0
    for _ in range(cfg.max_subdivisions):
        width = b - a
        phase = float(np.max(abs_c)) * width + float(np.max(sig.phase_change(a, b, y)))
        if lap_i is not None:
            psi_b = _interference_phase(lap_i, b)
            phase += abs(psi_b - psi_prev)
            psi_prev = psi_b
        u, wu = _panel_rule(a, b, phase)
        nodes = u.shape[0]
        vals = phi(u)
        contrib = (np.imag(vals) / u[None, :]) @ wu
        acc = np.where(done, acc, acc + contrib)
        total_nodes += nodes
        # tail bound at b
        ub = np.array([b])
        mag = sig.magnitude(ub[None, :] / y[:, None])[:, 0]
        if lap_i is not None:
            mag = mag * abs(complex(lap_i(1j * ub)[0]))
        env = mag / b
        with np.errstate(divide="ignore"):
            reach = np.where(abs_c > 0, np.minimum(b, 1.0 / np.maximum(abs_c, 1e-300)), b)
        ok = (env * reach < tol) & ~done
        if np.any(ok):
            phib = phi(ub)[:, 0]
            ibp = np.where(abs_c * b > 5.0,
                           np.imag(1j * phib / (b * np.where(abs_c > 0, c, 1.0))), 0.0)
            final = np.where(ok, acc + ibp, final)
            done |= ok
        if np.all(done):
            break
        if total_nodes > node_budget:
            break
        a, b = b, 2.0 * b
    if not np.all(done):
        # non-decaying amplitude: finish each remaining tail with a Fourier quadrature
        for i in np.flatnonzero(~done):
            final[i] = acc[i] + _fourier_tail(sig, y[i], c[i], lap_i, b, tol)
    return 0.5 + final / math.pi


def _fourier_tail(sig, y, c, lap_i, start, tol):
    """int_start^inf Im[a(u) e^{j c u}] du with a(u) = L_G(-ju/y) L_I(ju) / u."""

    def amp(u):
        val = complex(sig.transform(-1j * u / y))
        if lap_i is not None:
            val *= complex(lap_i(np.array([1j * u]))[0])
        return val / u

    if c == 0.0:
        val, err = integrate.quad(lambda u: amp(u).imag, start, np.inf, limit=200)
        if err > 10 * tol:
            raise NonConvergenceError("inversion tail did not converge")
        return val
    w = abs(c)
    sgn = 1.0 if c > 0 else -1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            re_sin, e1 = integrate.quad(lambda u: amp(u).real, start, np.inf,
                                        weight="sin", wvar=w, limlst=200)
            im_cos, e2 = integrate.quad(lambda u: amp(u).imag, start, np.inf,
                                        weight="cos", wvar=w, limlst=200)
        except integrate.IntegrationWarning:
            re_sin = None
        if re_sin is None:
            # slow phase relative to the decay: QAWF cycles are useless, integrate directly
            try:
                val, _ = integrate.quad(lambda u: (amp(u) * np.exp(1j * c * u)).imag,
                                        start, np.inf, limit=500)
            except integrate.IntegrationWarning as exc:
                raise NonConvergenceError(f"inversion tail did not converge: {exc}") from None
            return val
    # Im[a e^{jcu}] = Im(a) cos(cu) + Re(a) sin(cu)
    return im_cos + sgn * re_sin


def cf_inversion(signal_transform, gamma, scenario: Scenario, T, T_scaled=None,
                 mode="exact", include_interference=True,
                 cfg: QuadratureConfig = DEFAULT_QUAD, return_raw=False):
    """Coverage given the cooperating set ``gamma`` by characteristic-function inversion.

    ``signal_transform`` is a ``GammaSignal``/``DeterministicSignal`` or any
    callable Laplace transform of the normalized signal. The event scored is
    ``G / T_scaled > sigma^2/N_t + I``; ``T_scaled`` defaults to
    ``T / sum(1/gamma_i)``.
    """
    if not isinstance(gamma, OrderedPathloss):
        gamma = OrderedPathloss(tuple(np.ravel(gamma)))
    g = gamma.as_array()
    if T_scaled is None:
        T_scaled = T / float(np.sum(1.0 / g))
    kern = None
    mean_i = 0.0
    if include_interference:
        kern = _cached_kernel(scenario, float(g[-1]), _mode(mode))
        mean_i = kern.mean()
    raw = cf_inversion_batch(signal_transform, np.array([T_scaled]), scenario.noise_per_antenna,
                             kern, mean_i, cfg, return_raw=True)[0]
    if raw < -CLAMP_SLACK or raw > 1 + CLAMP_SLACK:
        warnings.warn(f"cf_inversion raw value {raw:.6g} outside [0,1]; clamped",
                      ClampingWarning, stacklevel=2)
    if return_raw:
        return float(raw)
    return float(min(max(raw, 0.0), 1.0))


# --------------------------------------------------------------------------
# Nakagami cooperating links
# --------------------------------------------------------------------------

def _require_fading(scenario, kind):
    if scenario.fading.kind != kind:
        raise ValueError(f"scenario fading is {scenario.fading.kind!r}, this theorem needs {kind!r}")


def coverage_nakagami_ub(scenario: Scenario, thresholds_db, mode="exact",
                         cfg: QuadratureConfig = DEFAULT_QUAD) -> CoverageCurve:
    """Upper bound on coverage with Nakagami-m cooperating links (exact for n=1).

    Cauchy-Schwarz bounds the coherent signal by sum(1/gamma_i) * sum|h_i|^2,
    and sum|h_i|^2 ~ Gamma(n m, rate m).
    """
    _require_fading(scenario, "nakagami")
    tdb = _as_db(thresholds_db)
    T = db_to_linear(tdb)
    n, m = scenario.coop_n, scenario.fading.m
    sig = GammaSignal(n * m, m)
    noise = scenario.noise_per_antenna

    def conditional(gam, gamma_n):
        kern = InterferenceLaplace(scenario, gamma_n, _mode(mode))
        y = (T[None, :] / np.sum(1.0 / gam, axis=1)[:, None]).ravel()
        raw = cf_inversion_batch(sig, y, noise, kern, kern.mean(), cfg, return_raw=True)
        return raw.reshape(gam.shape[0], T.shape[0])

    raw = _simplex_expectation(scenario, conditional, cfg)
    return _finalize(raw, "th3", tdb)


def residue_tail(shape, rate, x, nodes=128):
    """P(G > x), G ~ Gamma(shape, rate) with integer shape, via a contour residue.

    The CDF is the Bromwich integral of L_G(s) e^{sx} / s; closing left picks
    the pole at 0 (residue 1) and the order-``shape`` pole at ``-rate``, so
    P(G > x) = -Res_{s=-rate}[rate^shape e^{sx} / ((s + rate)^shape s)].
    The residue is the (shape-1)-th Taylor coefficient of
    rate^shape e^{sx} / s about -rate, taken with a trapezoid rule on a circle.
    """
    k = int(shape) - 1
    if k + 1 != shape or shape < 1:
        raise ValueError("shape must be a positive integer")
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    z0 = -float(rate)
    # saddle-point radius, kept clear of the pole at 0
    radius = np.minimum(0.5 * rate, np.maximum(k, 1) / np.maximum(flat, 1e-300))
    theta = 2 * np.pi * np.arange(nodes) / nodes
    z = z0 + radius[:, None] * np.exp(1j * theta)[None, :]
    # rate^shape e^{zx} / z, with e^{-rate x} factored out for range safety
    logg = shape * math.log(rate) + (z - z0) * flat[:, None]
    g = np.exp(logg) / z
    coef = (g * np.exp(-1j * k * theta)[None, :]).mean(axis=1) / radius**k
    out = -np.real(coef) * np.exp(z0 * flat)
    out = out.reshape(x.shape)
    return out[()] if out.ndim == 0 else out


def gamma_tail(shape, rate, x):
    """Regularized upper incomplete gamma Q(shape, rate * x)."""
    return special.gammaincc(shape, rate * np.asarray(x, dtype=float))


RESIDUE_AGREEMENT = 1e-6


def snr_coverage_given(shape, rate, x):
    """Gamma route with the residue route as a cross-check."""
    prod = gamma_tail(shape, rate, x)
    res = residue_tail(shape, rate, x)
    diff = np.max(np.abs(prod - res)) if np.size(prod) else 0.0
    if diff > RESIDUE_AGREEMENT:
        raise ResidueMismatchError(f"residue and incomplete-gamma routes differ by {diff:.3g}")
    return prod


def coverage_snr_nakagami(scenario: Scenario, thresholds_db,
                          cfg: QuadratureConfig = DEFAULT_QUAD) -> CoverageCurve:
    """Interference-free upper bound with Nakagami-m cooperating links."""
    _require_fading(scenario, "nakagami")
    tdb = _as_db(thresholds_db)
    T = db_to_linear(tdb)
    n, m = scenario.coop_n, scenario.fading.m
    noise = scenario.noise_per_antenna

    def conditional(gam, gamma_n):
        x = T[None, :] / np.sum(1.0 / gam, axis=1)[:, None] * noise
        return snr_coverage_given(n * m, m, x)

    raw = _simplex_expectation(scenario, conditional, cfg)
    return _finalize(raw, "cor1", tdb)


# --------------------------------------------------------------------------
# no small-scale fading
# --------------------------------------------------------------------------

_EULER_A = 18.4
_EULER_N = 15
_EULER_M = 11
_EULER_BINOM = np.array([math.comb(_EULER_M, j) for j in range(_EULER_M + 1)]) / 2.0**_EULER_M


def interference_cdf(kern: InterferenceLaplace, x):
    """P(I <= x) by Euler-summed Fourier-series inversion of L_I(s) / s."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    kmax = _EULER_N + _EULER_M
    k = np.arange(kmax + 1)
    s = (_EULER_A + 2j * np.pi * k[None, :]) / (2.0 * x[:, None])
    fs = kern(s) / s
    terms = np.real(fs) * ((-1.0) ** k)[None, :]
    terms[:, 0] *= 0.5
    terms *= (math.exp(_EULER_A / 2) / x)[:, None]
    partial = np.cumsum(terms, axis=1)
    return partial[:, _EULER_N:_EULER_N + _EULER_M + 1] @ _EULER_BINOM


class InterferenceCDF:
    """Tabulated P(I <= x | gamma_n), monotone PCHIP in log x.

    The table covers ``[x_min, x_max]`` (the arguments the caller will ask
    for), shrunk to where the CDF is neither ~0 nor ~1.
    """

    PER_DECADE = 32
    FLOOR = 1e-9

    def __init__(self, kern: InterferenceLaplace, x_min=None, x_max=None):
        mean = kern.mean()
        lo = 1e-4 * mean if x_min is None else max(x_min, 1e-8 * mean)
        hi = 60.0 / kern.gamma_n if x_max is None else min(x_max, 60.0 / kern.gamma_n)
        hi = max(hi, lo * 10.0)
        # coarse scan, one point per decade, to trim the saturated ends
        coarse = np.logspace(math.log10(lo), math.log10(hi),
                             max(2, int(math.ceil(math.log10(hi / lo))) + 1))
        fc = interference_cdf(kern, coarse)
        low = np.flatnonzero(fc < self.FLOOR)
        high = np.flatnonzero(fc > 1 - self.FLOOR)
        if low.size:
            lo = coarse[low[-1]]
        if high.size:
            hi = coarse[high[0]]
        if hi <= lo * 1.5:  # coarse points only match lo up to rounding
            hi = lo * 10.0
        count = max(8, int(math.ceil(math.log10(hi / lo) * self.PER_DECADE)) + 1)
        xs = np.logspace(math.log10(lo), math.log10(hi), count)
        fx = np.clip(interference_cdf(kern, xs), 0.0, 1.0)
        fx = np.maximum.accumulate(fx)
        self.lo, self.hi = float(xs[0]), float(xs[-1])
        self.f_lo, self.f_hi = float(fx[0]), float(fx[-1])
        self._interp = PchipInterpolator(np.log(xs), fx, extrapolate=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        below = x < self.lo
        above = x > self.hi
        mid = ~(below | above)
        # outside the table the CDF is within FLOOR of its saturated value
        out[below] = np.where(self.f_lo < self.FLOOR, 0.0, self.f_lo)
        out[below & (x <= 0)] = 0.0
        out[above] = np.where(self.f_hi > 1 - self.FLOOR, 1.0, self.f_hi)
        out[mid] = self._interp(np.log(x[mid]))
        return out


def coverage_nofading(scenario: Scenario, thresholds_db, mode="exact",
                      cfg: QuadratureConfig = DEFAULT_QUAD) -> CoverageCurve:
    """Coverage with unfaded, coherently combined cooperating links.

    The signal is the constant S0 = (sum gamma_i^{-1/2})^2, so coverage given
    the cooperating set is P(I < S0 / T - sigma^2/N_t), read off the
    interference CDF.
    """
    _require_fading(scenario, "none")
    tdb = _as_db(thresholds_db)
    T = db_to_linear(tdb)
    noise = scenario.noise_per_antenna
    mode = _mode(mode)

    def conditional(gam, gamma_n):
        s0 = np.sum(gam ** -0.5, axis=1) ** 2
        x = s0[:, None] / T[None, :] - noise
        pos = x[x > 0]
        if pos.size == 0:
            return np.zeros_like(x)
        kern = InterferenceLaplace(scenario, gamma_n, mode)
        lo, hi = float(pos.min()), float(pos.max())
        table_size = InterferenceCDF.PER_DECADE * (math.log10(hi / lo) + 1)
        if pos.size <= table_size:
            out = np.zeros_like(x)
            out[x > 0] = np.clip(interference_cdf(kern, pos), 0.0, 1.0)
            return out
        return InterferenceCDF(kern, lo, hi)(x)

    raw = _simplex_expectation(scenario, conditional, cfg)
    return _finalize(raw, "th4", tdb)


def coverage_nofading_given(gamma, scenario: Scenario, T, mode="exact", route="cdf",
                            cfg: QuadratureConfig = DEFAULT_QUAD):
    """Conditional no-fading coverage given the cooperating set.

    ``route='cdf'`` reads the Euler-inverted interference CDF (production);
    ``route='kernel'`` runs the characteristic-function kernel with a
    deterministic signal. Both exist so each can check the other.
    """
    if not isinstance(gamma, OrderedPathloss):
        gamma = OrderedPathloss(tuple(np.ravel(gamma)))
    g = gamma.as_array()
    s0 = float(np.sum(g ** -0.5) ** 2)
    kern = InterferenceLaplace(scenario, float(g[-1]), _mode(mode))
    if route == "cdf":
        x = s0 / T - scenario.noise_per_antenna
        if x <= 0:
            return 0.0
        return float(InterferenceCDF(kern, x / 10, x * 10)(np.array([x]))[0])
    if route == "kernel":
        return float(cf_inversion_batch(DeterministicSignal(s0), np.array([float(T)]),
                                        scenario.noise_per_antenna, kern, kern.mean(), cfg)[0])
    raise ValueError(f"unknown route {route!r}")


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def theorem_for(scenario: Scenario, no_interference=False):
    kind = scenario.fading.kind
    if kind == "rayleigh":
        if no_interference:
            raise ValueError("--no-interference applies to Nakagami fading only")
        return "th1" if scenario.pathloss.mode == "uniform" else "th2"
    if kind == "nakagami":
        return "cor1" if no_interference else "th3"
    if no_interference:
        raise ValueError("--no-interference applies to Nakagami fading only")
    return "th4"


def analytic_curve(scenario: Scenario, thresholds_db, no_interference=False, mode="exact",
                   cfg: QuadratureConfig = DEFAULT_QUAD) -> CoverageCurve:
    """Evaluate the theorem matching the scenario's fading model."""
    method = theorem_for(scenario, no_interference)
    if method in ("th1", "th2"):
        return coverage_rayleigh(scenario, thresholds_db, mode, cfg)
    if method == "th3":
        return coverage_nakagami_ub(scenario, thresholds_db, mode, cfg)
    if method == "cor1":
        return coverage_snr_nakagami(scenario, thresholds_db, cfg)
    return coverage_nofading(scenario, thresholds_db, mode, cfg)
