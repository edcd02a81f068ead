#!/usr/bin/env python3
"""Time the numba and pure-numpy versions of each hot kernel.

    python benchmarks/bench_kernels.py [--repeat 5]

Both versions are imported directly, so the MMCOMP_DISABLE_NUMBA flag does
not matter here. The first numba call (compilation) is excluded.
"""

import argparse
import time

import numpy as np

from mmcomp import kernels
from mmcomp._accel import HAVE_NUMBA
from mmcomp.channel import ArrayConfig, gain_quadrature


def best_of(fn, repeat):
    fn()  # warm-up / compile
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    y = rng.uniform(-2, 2, 1_000_000)
    yield ("gain_power 1e6", kernels.gain_power_numpy, kernels.gain_power_numba, (y, 64, 0.5))

    q = gain_quadrature(ArrayConfig(16))
    s = 1j * np.geomspace(1e3, 1e9, 2000)
    v = np.geomspace(1e4, 1e12, 800)
    w = rng.uniform(0.5, 1.5, v.size)
    yield ("interference_exponent 2000x800", kernels.interference_exponent_numpy,
           kernels.interference_exponent_numba, (s, v, w, q.g, q.p))

    batch, per = 2000, 400
    offsets = np.arange(0, batch * per + 1, per, dtype=np.int64)
    gamma = rng.uniform(1e4, 1e10, batch * per)
    contrib = rng.exponential(1.0, gamma.size) / gamma
    yield ("select_strongest 2000x400", kernels.select_strongest_numpy,
           kernels.select_strongest_numba, (offsets, gamma, contrib, 2))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path exists")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, f_np, f_nb, fargs in cases(rng):
        t_np = best_of(lambda: f_np(*fargs), args.repeat)
        t_nb = best_of(lambda: f_nb(*fargs), args.repeat)
        print(f"{name:34s} {1e3 * t_np:11.2f} {1e3 * t_nb:11.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
