"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public names (``gain_power``, ``interference_exponent``,
``select_strongest``) resolve to the numba versions unless numba is disabled
through ``MMCOMP_DISABLE_NUMBA``. The ``*_numpy`` / ``*_numba`` variants stay
importable for tests and the benchmark.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit, pick

# |sin(pi*spacing*y)| below this is treated as a grating-lobe / main-lobe peak.
SINGULAR_EPS = 1e-9


# --------------------------------------------------------------------------
# array-gain power |G(y)|^2
# --------------------------------------------------------------------------

def gain_power_numpy(y, n_antennas, spacing):
    y = np.asarray(y, dtype=float)
    den = n_antennas * np.sin(np.pi * spacing * y)
    num = np.sin(np.pi * spacing * n_antennas * y)
    singular = np.abs(den) < SINGULAR_EPS * n_antennas
    safe = np.where(singular, 1.0, den)
    out = np.where(singular, 1.0, (num / safe) ** 2)
    return np.minimum(out, 1.0)


@njit
def _gain_power_numba_1d(y, n_antennas, spacing, out):
    for i in range(y.shape[0]):
        s = math.sin(math.pi * spacing * y[i])
        if abs(s) < SINGULAR_EPS:
            out[i] = 1.0
        else:
            r = math.sin(math.pi * spacing * n_antennas * y[i]) / (n_antennas * s)
            r = r * r
            out[i] = r if r < 1.0 else 1.0


def gain_power_numba(y, n_antennas, spacing):
    y = np.asarray(y, dtype=float)
    flat = np.ascontiguousarray(y.ravel())
    out = np.empty_like(flat)
    _gain_power_numba_1d(flat, int(n_antennas), float(spacing), out)
    return out.reshape(y.shape)


# --------------------------------------------------------------------------
# Laplace exponent of the interference shot noise
#   psi(s) = sum_k W_k sum_q p_q * s g_q / (v_k + s g_q)
# --------------------------------------------------------------------------

_CHUNK_ELEMS = 4_000_000


def interference_exponent_numpy(s, v, w, g, p):
    s = np.asarray(s, dtype=complex).ravel()
    out = np.empty(s.shape[0], dtype=complex)
    per_s = max(1, v.shape[0] * g.shape[0])
    step = max(1, _CHUNK_ELEMS // per_s)
    sg_cache = g[None, None, :]
    for lo in range(0, s.shape[0], step):
        sc = s[lo:lo + step, None, None]
        sg = sc * sg_cache
        frac = sg / (v[None, :, None] + sg)
        out[lo:lo + step] = (frac @ p) @ w
    return out


@njit
def _interference_exponent_numba(s, v, w, g, p, out):
    m = s.shape[0]
    for i in range(m):
        si = s[i]
        acc = 0.0 + 0.0j
        for k in range(v.shape[0]):
            vk = v[k]
            inner = 0.0 + 0.0j
            for q in range(g.shape[0]):
                sg = si * g[q]
                inner += p[q] * sg / (vk + sg)
            acc += w[k] * inner
        out[i] = acc


def interference_exponent_numba(s, v, w, g, p):
    s = np.ascontiguousarray(np.asarray(s, dtype=complex).ravel())
    out = np.empty(s.shape[0], dtype=complex)
    _interference_exponent_numba(s, np.ascontiguousarray(v, dtype=float),
                                 np.ascontiguousarray(w, dtype=float),
                                 np.ascontiguousarray(g, dtype=float),
                                 np.ascontiguousarray(p, dtype=float), out)
    return out


# --------------------------------------------------------------------------
# per-realization selection of the n strongest points (smallest normalized
# pathloss) and the interference carried by the rest
# --------------------------------------------------------------------------

def select_strongest_numpy(offsets, gamma, contrib, n):
    """Return ``(selected, interference, counts)``.

    ``selected`` is ``(B, n)`` ascending with ``inf`` padding for short
    realizations; ``interference[b]`` sums ``contrib`` over the points of
    realization ``b`` that were not selected.
    """
    counts = np.diff(offsets)
    b = counts.shape[0]
    seg = np.repeat(np.arange(b), counts)
    order = np.lexsort((gamma, seg))
    g_sorted = gamma[order]
    c_sorted = contrib[order]
    rank = np.arange(gamma.shape[0]) - np.repeat(offsets[:-1], counts)
    selected = np.full((b, n), np.inf)
    keep = rank < n
    selected[seg[keep], rank[keep]] = g_sorted[keep]
    interference = np.zeros(b)
    np.add.at(interference, seg[~keep], c_sorted[~keep])
    return selected, interference, counts


@njit
def _select_strongest_numba(offsets, gamma, contrib, n, selected, interference):
    b = offsets.shape[0] - 1
    idx = np.empty(n, dtype=np.int64)
    for r in range(b):
        lo = offsets[r]
        hi = offsets[r + 1]
        filled = 0
        for i in range(lo, hi):
            gi = gamma[i]
            if filled < n:
                j = filled
                filled += 1
            elif gi < gamma[idx[n - 1]]:
                j = n - 1
            else:
                continue
            while j > 0 and gamma[idx[j - 1]] > gi:
                idx[j] = idx[j - 1]
                j -= 1
            idx[j] = i
        total = 0.0
        for i in range(lo, hi):
            total += contrib[i]
        for j in range(filled):
            selected[r, j] = gamma[idx[j]]
            total -= contrib[idx[j]]
        interference[r] = total if total > 0.0 else 0.0


def select_strongest_numba(offsets, gamma, contrib, n):
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    b = offsets.shape[0] - 1
    selected = np.full((b, n), np.inf)
    interference = np.zeros(b)
    _select_strongest_numba(offsets, np.ascontiguousarray(gamma, dtype=float),
                            np.ascontiguousarray(contrib, dtype=float), int(n),
                            selected, interference)
    return selected, interference, np.diff(offsets)


gain_power = pick(gain_power_numba, gain_power_numpy)
interference_exponent = pick(interference_exponent_numba, interference_exponent_numpy)
select_strongest = pick(select_strongest_numba, select_strongest_numpy)

__all__ = [
    "USE_NUMBA",
    "gain_power", "gain_power_numba", "gain_power_numpy",
    "interference_exponent", "interference_exponent_numba",
    "interference_exponent_numpy",
    "select_strongest", "select_strongest_numba", "select_strongest_numpy",
]
