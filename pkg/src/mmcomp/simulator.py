"""Monte Carlo coverage engine.

Realizations are drawn in fixed-size blocks; block b always uses the random
stream ``SeedSequence(seed, spawn_key=(b,))`` and contributes integer hit
counts, so a curve is bit-identical for any number of workers.

Stations beyond the finite window are not dropped: their mean contribution
(Rayleigh power, random-beam gain) is added as a constant, so the window only
has to be large enough for the *fluctuation* of the far field to be
negligible.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import logging
import math
import os
from typing import Optional

import numpy as np

from . import kernels
from .channel import FadingModel, sample_fading, sample_upsilon
from .curve import CoverageCurve, db_to_linear
from .errors import InsufficientPointsError
from .geometry import (Scenario, default_window_radius, far_field_mean,
                       sample_network_batch)

log = logging.getLogger(__name__)

MAX_RETRIES = 3
WINDOW_GROWTH = 1.5
POINTS_PER_BLOCK = 2_000_000


@dataclass(frozen=True)
class SimConfig:
    realizations: int = 100_000
    seed: int = 0
    window_radius: Optional[float] = None  # None -> automatic
    block_size: int = 2000

    def __post_init__(self):
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise ValueError("realizations must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.window_radius is not None and not self.window_radius > 0:
            raise ValueError("window radius must be positive")
        if self.block_size < 1:
            raise ValueError("block size must be positive")


def default_jobs():
    env = os.environ.get("MMCOMP_JOBS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))


def combined_signal(gammas, fading: FadingModel, rng):
    """|sum_i gamma_i^{-1/2} h_i|^2 for each row of ``gammas`` (B, n)."""
    h = sample_fading(fading, rng, gammas.shape)
    return np.abs(np.sum(gammas ** -0.5 * h, axis=1)) ** 2


def _draw(scenario, window, rng, batch):
    """One batch of realizations -> (selected (B,n), interference (B,), counts)."""
    offsets, gamma, _, _, _ = sample_network_batch(scenario, window, rng, batch)
    m = gamma.shape[0]
    power = rng.exponential(1.0, m)
    gain = kernels.gain_power(sample_upsilon(rng, m), scenario.array.n_antennas,
                              scenario.array.spacing)
    contrib = power * gain / gamma
    return kernels.select_strongest(offsets, gamma, contrib, scenario.coop_n)


def simulate_block(scenario: Scenario, window, seed, block, size, far_mean=None,
                   interference=True):
    """SINR samples of one block plus the number of resampled realizations.

    With ``interference=False`` the same draws are scored as SNR.
    """
    include = interference
    rng = block_rng(seed, block)
    if far_mean is None:
        far_mean = far_field_mean(scenario, window)
    n = scenario.coop_n
    selected, interference, counts = _draw(scenario, window, rng, size)
    resampled = 0
    short = np.flatnonzero(counts < n)
    w, extra = window, far_mean
    for _ in range(MAX_RETRIES):
        if short.size == 0:
            break
        resampled += short.size
        w *= WINDOW_GROWTH
        extra_w = far_field_mean(scenario, w)
        sel2, int2, cnt2 = _draw(scenario, w, rng, short.size)
        # keep the far-field correction consistent with the larger window
        selected[short] = sel2
        interference[short] = int2 + (extra_w - far_mean)
        counts[short] = cnt2
        short = short[cnt2 < n]
        extra = extra_w
    if short.size:
        raise InsufficientPointsError(
            f"{short.size} realizations kept fewer than n={n} stations after {MAX_RETRIES} retries")
    signal = combined_signal(selected, scenario.fading, rng)
    if not include:
        return signal / scenario.noise_per_antenna, resampled
    sinr = signal / (scenario.noise_per_antenna + interference + far_mean)
    return sinr, resampled


def simulate_sinr(scenario: Scenario, rng, window_radius=None):
    """One SINR sample drawn from ``rng``."""
    window = window_radius or default_window_radius(scenario)
    far = far_field_mean(scenario, window)
    n = scenario.coop_n
    for attempt in range(MAX_RETRIES + 1):
        selected, interference, counts = _draw(scenario, window, rng, 1)
        if counts[0] >= n:
            signal = combined_signal(selected, scenario.fading, rng)[0]
            return float(signal / (scenario.noise_per_antenna + interference[0] + far))
        window *= WINDOW_GROWTH
        far = far_field_mean(scenario, window)
    raise InsufficientPointsError(f"fewer than n={n} stations after {MAX_RETRIES} retries")


def _block_plan(scenario, window, sim: SimConfig):
    expected = sum(t.density for t in scenario.tiers) * math.pi * window**2
    size = int(max(1, min(sim.block_size, POINTS_PER_BLOCK // max(expected, 1.0))))
    starts = list(range(0, sim.realizations, size))
    return [(b, min(size, sim.realizations - s)) for b, s in enumerate(starts)]


def _block_hits(args):
    scenario, window, seed, block, size, far, thresholds, interference = args
    sinr, resampled = simulate_block(scenario, window, seed, block, size, far, interference)
    hits = np.count_nonzero(sinr[:, None] > thresholds[None, :], axis=0)
    return hits.astype(np.int64), resampled


def estimate_coverage(scenario: Scenario, thresholds_db, sim: SimConfig = SimConfig(),
                      jobs: Optional[int] = None, interference=True) -> CoverageCurve:
    """Empirical coverage on shared SINR samples with 95% normal-approximation CIs.

    ``interference=False`` scores SNR instead (the counterpart of the
    noise-only closed form).
    """
    tdb = np.atleast_1d(np.asarray(thresholds_db, dtype=float))
    if np.any(np.diff(tdb) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    T = db_to_linear(tdb)
    window = sim.window_radius or default_window_radius(scenario)
    far = far_field_mean(scenario, window)
    plan = _block_plan(scenario, window, sim)
    tasks = [(scenario, window, sim.seed, b, size, far, T, interference) for b, size in plan]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or len(tasks) == 1:
        results = [_block_hits(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_block_hits, tasks))
    hits = np.zeros(T.shape[0], dtype=np.int64)
    resampled = 0
    for h, r in results:
        hits += h
        resampled += r
    if resampled:
        log.info("resampled %d short realizations with a larger window", resampled)
    total = sim.realizations
    p = hits / total
    half = 1.96 * np.sqrt(p * (1 - p) / total)
    return CoverageCurve(tdb, p, "mc", ci_halfwidth=half,
                         diagnostics={"window_radius": window, "far_field_mean": far,
                                      "resampled": resampled, "blocks": len(plan)})
