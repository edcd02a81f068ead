"""Acceptance criteria C1-C7.

Each test prints one ``Cn PASS`` / ``Cn FAIL`` line (visible without ``-s``)
plus ``INFO`` lines with the numbers behind the verdict. Figure-derived
criteria (C2-C6) are judged with the flat-top Laplace transform and the
physical noise floor of the shipped tables; the same quantities under the
exact transform, and with the noise floor raised by 30 dB, are printed as
INFO for comparison. Criteria that do not hold are left failing.
"""

import math

import numpy as np
import pytest
from scipy import special

from conftest import one_tier
from mmcomp import cli
from mmcomp.analytic import (analytic_curve, coverage_rayleigh, coverage_snr_nakagami,
                             residue_tail)
from mmcomp.channel import ArrayConfig, FadingModel, array_gain, f_upsilon_table
from mmcomp.config import load_scenario, shipped_scenarios
from mmcomp.curve import db_to_linear
from mmcomp.geometry import NoiseConfig, intensity, intensity_measure
from mmcomp.simulator import SimConfig, default_jobs, estimate_coverage

pytestmark = pytest.mark.acceptance

PRIMARY = "flat_top"


@pytest.fixture
def report(capsys):
    fresh = [True]

    def emit(line):
        # start below pytest's progress dots
        with capsys.disabled():
            print("\n" + line if fresh[0] else line, flush=True)
        fresh[0] = False
    return emit


def verdict(report, name, checks):
    """``checks``: list of (label, ok). Prints the C line and returns overall ok."""
    ok = all(c for _, c in checks)
    failed = [label for label, c in checks if not c]
    tail = "all checks hold" if ok else "failed: " + "; ".join(failed)
    report(f"{name} {'PASS' if ok else 'FAIL'} ({tail})")
    return ok


def at(curve, t_db):
    i = int(np.argmin(np.abs(curve.thresholds_db - t_db)))
    assert abs(curve.thresholds_db[i] - t_db) < 1e-9
    return float(curve.coverage[i])


def loud(sc, extra_db=30.0):
    """Same scenario with the noise floor raised by ``extra_db``."""
    return sc.replace(noise=NoiseConfig(sc.noise.bandwidth_hz, sc.noise.nf_db + extra_db))


def within(x, target, tol):
    return abs(x - target) <= tol


# --------------------------------------------------------------------------
# C1: analytic vs Monte Carlo on every shipped scenario
# --------------------------------------------------------------------------

def _c1_cases():
    for fname in shipped_scenarios():
        sf = load_scenario(fname)
        yield sf, False
        if sf.scenario.fading.kind == "nakagami":
            yield sf, True


@pytest.mark.slow
def test_c1_cross_engine(report):
    checks = []
    for sf, no_int in _c1_cases():
        sc = sf.scenario
        an = analytic_curve(sc, sf.thresholds_db, no_interference=no_int, mode="exact")
        mc = estimate_coverage(sc, sf.thresholds_db, SimConfig(100_000, sf.sim.seed),
                               default_jobs(), interference=not no_int)
        bound = cli.is_upper_bound(sc, no_int)
        ok, allow, delta = cli.gate(an, mc, bound)
        kind = "bound" if bound else "equality"
        worst = float(np.max(-delta - allow)) if bound else float(np.max(np.abs(delta) - allow))
        report(f"INFO C1 {sf.scenario_id:10s} {an.method:5s} {kind:8s} "
               f"max|delta| {np.max(np.abs(delta)):.4f} worst margin {worst:+.4f} "
               f"{'ok' if ok else 'VIOLATED'}")
        checks.append((f"{sf.scenario_id}/{an.method}", ok))
    assert verdict(report, "C1", checks)


# --------------------------------------------------------------------------
# C2: two-tier reference scenario (table5, th1)
# --------------------------------------------------------------------------

def _c2_numbers(sc, mode):
    t = [5.0, 10.0]
    out = {}
    for nt in (8, 16, 32, 64):
        s = sc.replace(array=ArrayConfig(nt))
        out[(2, nt)] = coverage_rayleigh(s.replace(coop_n=2), t, mode)
        if nt in (8, 16):
            out[(1, nt)] = coverage_rayleigh(s.replace(coop_n=1), t, mode)
    return out


def test_c2_two_tier(report):
    sc = load_scenario("table5").scenario
    for label, mode, s in (("exact", "exact", sc), ("noise+30dB", PRIMARY, loud(sc))):
        c = _c2_numbers(s, mode)
        report(f"INFO C2 [{label}] p(n2,16,10dB)={at(c[(2, 16)], 10):.3f} "
               f"p(n2,32,10dB)={at(c[(2, 32)], 10):.3f} "
               f"gain5dB nt8={at(c[(2, 8)], 5) - at(c[(1, 8)], 5):.3f} "
               f"nt16={at(c[(2, 16)], 5) - at(c[(1, 16)], 5):.3f}")
    c = _c2_numbers(sc, PRIMARY)
    p16, p32 = at(c[(2, 16)], 10), at(c[(2, 32)], 10)
    g8 = at(c[(2, 8)], 5) - at(c[(1, 8)], 5)
    g16 = at(c[(2, 16)], 5) - at(c[(1, 16)], 5)
    by_nt = [at(c[(2, nt)], 10) for nt in (8, 16, 32, 64)]
    report(f"INFO C2 [{PRIMARY}] p(n2,16,10dB)={p16:.3f} p(n2,32,10dB)={p32:.3f} "
           f"gain5dB nt8={g8:.3f} nt16={g16:.3f} p10dB by nt={np.round(by_nt, 3).tolist()}")
    assert verdict(report, "C2", [
        ("p(n=2,Nt=16,10dB)=0.50+-0.05", within(p16, 0.50, 0.05)),
        ("p(n=2,Nt=32,10dB)=0.65+-0.05", within(p32, 0.65, 0.05)),
        ("gain Nt=8 at 5dB=0.11+-0.03", within(g8, 0.11, 0.03)),
        ("gain Nt=16 at 5dB=0.11+-0.03", within(g16, 0.11, 0.03)),
        ("coverage increases with Nt at 10dB", bool(np.all(np.diff(by_nt) > 0))),
    ])


# --------------------------------------------------------------------------
# C3: light blockage (table6, th2)
# --------------------------------------------------------------------------

def _c3_numbers(sf, sf_p2, mode, noisy):
    prep = loud if noisy else (lambda s: s)
    t = sf.thresholds_db
    sc = prep(sf.scenario)
    n2 = coverage_rayleigh(sc, t, mode)
    n1 = coverage_rayleigh(sc.replace(coop_n=1), t, mode)
    p2 = coverage_rayleigh(prep(sf_p2.scenario), t, mode)
    by_beta = [coverage_rayleigh(prep(sf.scenario.replace(tiers=tuple(
        tt.__class__(tt.density, tt.power, b) for tt in sf.scenario.tiers))), t, mode)
        for b in sf.sweep["blockage"]]
    return t, n2, n1, p2, by_beta


def test_c3_light_blockage(report):
    sf, sf_p2 = load_scenario("table6"), load_scenario("table6_p2")
    for label, mode, noisy in (("exact", "exact", False), ("noise+30dB", PRIMARY, True)):
        t, n2, n1, p2, _ = _c3_numbers(sf, sf_p2, mode, noisy)
        report(f"INFO C3 [{label}] gain 5dB={at(n2, 5) - at(n1, 5):.3f} "
               f"10dB={at(n2, 10) - at(n1, 10):.3f} "
               f"max|p2-n2|={np.max(np.abs(p2.coverage - n2.coverage)):.3f} "
               f"max|p2-n1|={np.max(np.abs(p2.coverage - n1.coverage)):.3f}")
    t, n2, n1, p2, by_beta = _c3_numbers(sf, sf_p2, PRIMARY, False)
    g5, g10 = at(n2, 5) - at(n1, 5), at(n2, 10) - at(n1, 10)
    stack = np.array([c.coverage for c in by_beta])
    ordered = bool(np.all(np.diff(stack, axis=0) > 0))
    gap = float(np.max(np.abs(p2.coverage - n2.coverage)))
    report(f"INFO C3 [{PRIMARY}] gain 5dB={g5:.3f} 10dB={g10:.3f} "
           f"p(n2,10dB) by beta={[round(at(c, 10), 3) for c in by_beta]} "
           f"max|p2-n2|={gap:.3f} max|p2-n1|={np.max(np.abs(p2.coverage - n1.coverage)):.3f}")
    assert verdict(report, "C3", [
        ("gain at 5dB=0.12+-0.04", within(g5, 0.12, 0.04)),
        ("gain at 10dB=0.12+-0.04", within(g10, 0.12, 0.04)),
        ("coverage increases with beta at every T", ordered),
        (f"P=2W n=1 within 0.03 of n=2 (max gap {gap:.3f})", gap <= 0.03),
    ])


# --------------------------------------------------------------------------
# C4: sparse tier with heavy blockage (table7)
# --------------------------------------------------------------------------

def _c4_numbers(mode, noisy):
    prep = loud if noisy else (lambda s: s)
    sf, sf_p2 = load_scenario("table7"), load_scenario("table7_p2")
    t = sf.thresholds_db
    sc = prep(sf.scenario)
    n2 = coverage_rayleigh(sc, t, mode)
    n1 = coverage_rayleigh(sc.replace(coop_n=1), t, mode)
    p2 = coverage_rayleigh(prep(sf_p2.scenario), t, mode)
    return n2.coverage - n1.coverage, p2.coverage - n2.coverage


def test_c4_heavy_blockage(report):
    for label, mode, noisy in (("exact", "exact", False), ("noise+30dB", PRIMARY, True)):
        gain, lead = _c4_numbers(mode, noisy)
        report(f"INFO C4 [{label}] max gain={gain.max():.3f} min(p2-n2)={lead.min():+.3f}")
    gain, lead = _c4_numbers(PRIMARY, False)
    report(f"INFO C4 [{PRIMARY}] max gain={gain.max():.3f} min(p2-n2)={lead.min():+.3f} "
           f"max(p2-n2)={lead.max():+.3f}")
    assert verdict(report, "C4", [
        ("gain <= 0.08 at all T", bool(np.all(gain <= 0.08))),
        (f"P=2W n=1 above n=2 at all T (min lead {lead.min():+.3f})", bool(np.all(lead > 0))),
    ])


# --------------------------------------------------------------------------
# C5: Nakagami SINR vs SNR-only (table8, th3 vs cor1)
# --------------------------------------------------------------------------

def _c5_gap(sc, t, mode):
    sinr = analytic_curve(sc, t, mode=mode)
    snr = coverage_snr_nakagami(sc, t)
    return float(np.max(np.abs(sinr.coverage - snr.coverage)))


def test_c5_sinr_vs_snr(report):
    sf = load_scenario("table8")
    t = sf.thresholds_db
    checks = []
    for m in (3, 1):
        sc = sf.scenario.replace(fading=FadingModel.nakagami(m))
        exact = _c5_gap(sc, t, "exact")
        noisy = _c5_gap(loud(sc), t, PRIMARY)
        gap = _c5_gap(sc, t, PRIMARY)
        report(f"INFO C5 m={m} max|SINR-SNR|: [{PRIMARY}] {gap:.3f} [exact] {exact:.3f} "
               f"[noise+30dB] {noisy:.3f}")
        checks.append((f"m={m} SINR vs SNR within 0.02 (max gap {gap:.3f})", gap <= 0.02))
    assert verdict(report, "C5", checks)


# --------------------------------------------------------------------------
# C6: unfaded vs Rayleigh cooperation gain (th4 on table9 and table6)
# --------------------------------------------------------------------------

def _gains(sc, t_db, mode):
    out = {}
    for kind, fading in (("none", FadingModel.no_fading()), ("rayleigh", FadingModel.rayleigh())):
        s = sc.replace(fading=fading)
        two = analytic_curve(s.replace(coop_n=2), [t_db], mode=mode).coverage[0]
        one = analytic_curve(s.replace(coop_n=1), [t_db], mode=mode).coverage[0]
        out[kind] = float(two - one)
    return out


def test_c6_no_fading(report):
    t9 = load_scenario("table9").scenario
    t6 = load_scenario("table6").scenario
    for label, mode, prep in (("exact", "exact", lambda s: s), ("noise+30dB", PRIMARY, loud)):
        g9, g6 = _gains(prep(t9), 5.0, mode), _gains(prep(t6), 10.0, mode)
        report(f"INFO C6 [{label}] table9@5dB none={g9['none']:.3f} rayleigh={g9['rayleigh']:.3f}"
               f" | table6@10dB none={g6['none']:.3f} rayleigh={g6['rayleigh']:.3f}")
    g9, g6 = _gains(t9, 5.0, PRIMARY), _gains(t6, 10.0, PRIMARY)
    report(f"INFO C6 [{PRIMARY}] table9@5dB none={g9['none']:.3f} rayleigh={g9['rayleigh']:.3f}"
           f" | table6@10dB none={g6['none']:.3f} rayleigh={g6['rayleigh']:.3f}")
    assert verdict(report, "C6", [
        (f"table9 no-fading gain 0.18+-0.04 (got {g9['none']:.3f})", within(g9["none"], 0.18, 0.04)),
        (f"table9 Rayleigh gain 0.05+-0.03 (got {g9['rayleigh']:.3f})",
         within(g9["rayleigh"], 0.05, 0.03)),
        (f"table6 no-fading gain 0.16+-0.04 (got {g6['none']:.3f})", within(g6["none"], 0.16, 0.04)),
        (f"table6 Rayleigh gain 0.12+-0.04 (got {g6['rayleigh']:.3f})",
         within(g6["rayleigh"], 0.12, 0.04)),
    ])


# --------------------------------------------------------------------------
# C7: property suite
# --------------------------------------------------------------------------

def _cor1_oracle(sc, T):
    # E exp(-T gamma sigma^2 / N_t) over the smallest normalized pathloss
    from scipy import integrate
    noise = sc.noise_per_antenna
    f = lambda x: math.exp(x) * float(intensity(math.exp(x), sc)) \
        * math.exp(-float(intensity_measure(math.exp(x), sc)) - T * math.exp(x) * noise)
    return integrate.quad(f, -20, 60, limit=400, points=np.linspace(0, 40, 11))[0]


def test_c7_properties(report):
    checks = []
    t_db = np.array([-10.0, -5.0, 0.0, 5.0, 10.0, 20.0])

    table = f_upsilon_table(4096)
    checks.append(("f_Y normalization", abs(table.masses.sum() - 1) <= 1e-6))
    checks.append(("f_Y symmetry", np.allclose(table.values, table.values[::-1], rtol=1e-12)))

    y = np.linspace(-4, 4, 20001)
    bounded = all(np.all(np.abs(array_gain(y, ArrayConfig(n))) <= 1 + 1e-12) for n in (4, 16, 64))
    lobes = all(abs(abs(array_gain(k * 2.0, ArrayConfig(n))) - 1) < 1e-9
                for n in (4, 16, 64) for k in (-1, 0, 1))
    checks.append(("|G| <= 1 with grating lobes", bounded and lobes))

    fd_ok = True
    for sc in (one_tier(blockage=0.0), one_tier(blockage=0.01)):
        for v in (1e6, 1e8, 1e10):
            h = 1e-6 * v
            fd = (intensity_measure(v + h, sc) - intensity_measure(v - h, sc)) / (2 * h)
            fd_ok &= abs(fd / float(intensity(v, sc)) - 1) < 1e-5
    checks.append(("Lambda' = lambda (both modes)", fd_ok))

    worst = 0.0
    for n in (1, 2):
        base = dict(radius=150.0, nt=16, n=n, nf=10.0)
        a = coverage_rayleigh(one_tier(blockage=0.0, alpha2=3.0, **base), t_db)
        b = coverage_rayleigh(one_tier(blockage=1e-9, alpha1=3.0, alpha2=3.0, **base), t_db)
        worst = max(worst, float(np.max(np.abs(a.coverage - b.coverage))))
    report(f"INFO C7 Th2->Th1 limit max diff {worst:.2e}")
    checks.append(("Th2 -> Th1 within 2e-3", worst <= 2e-3))

    x = np.geomspace(1e-3, 40, 60)
    err = max(float(np.max(np.abs(residue_tail(k, r, x) - special.gammaincc(k, r * x))))
              for k in range(1, 13) for r in (0.5, 1.0, 3.0))
    report(f"INFO C7 residue vs incomplete gamma max err {err:.1e}")
    checks.append(("residue = incomplete gamma to 1e-8", err <= 1e-8))

    sc = one_tier(fading=FadingModel.nakagami(1))
    cor = coverage_snr_nakagami(sc, t_db)
    oracle = [_cor1_oracle(sc, T) for T in db_to_linear(t_db)]
    checks.append(("Cor1 n=m=1 closed form", np.allclose(cor.coverage, oracle, atol=1e-6)))

    sc = one_tier(fading=FadingModel.nakagami(3))
    an = analytic_curve(sc, t_db)
    mc = estimate_coverage(sc, t_db, SimConfig(40_000, 7), jobs=1)
    ok, _, delta = cli.gate(an, mc, upper_bound=False)
    report(f"INFO C7 Th3 n=1 vs MC max|delta| {np.max(np.abs(delta)):.4f}")
    checks.append(("Th3 n=1 exact vs MC", ok))
    checks.append(("monotone in T", bool(np.all(np.diff(an.coverage) <= 0)
                                         and np.all(np.diff(mc.coverage) <= 0))))

    sim = SimConfig(6000, 99, block_size=1000)
    a = estimate_coverage(one_tier(n=2), t_db, sim, jobs=1)
    b = estimate_coverage(one_tier(n=2), t_db, sim, jobs=3)
    checks.append(("seed determinism across jobs", np.array_equal(a.coverage, b.coverage)))
    assert verdict(report, "C7", checks)
