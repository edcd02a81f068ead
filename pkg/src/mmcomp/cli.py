"""Command-line front end: analytic / simulate / compare / density / sweep.

Data goes to ``--output`` (or stdout); everything else goes to stderr.
Exit status: 0 ok, 2 invalid scenario or arguments, 3 compare gate failed,
4 numerical non-convergence.
"""

import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import analytic
from .channel import FadingModel, ArrayConfig, f_upsilon_table
from .config import SWEEPABLE, ScenarioError, load_scenario, with_parameter
from .errors import NonConvergenceError, UnsupportedCoopError
from .simulator import SimConfig, default_jobs, estimate_coverage

log = logging.getLogger("mmcomp")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_GATE = 3
EXIT_NONCONVERGENCE = 4

HEADER = ("threshold_db", "coverage", "ci_low", "ci_high", "method", "scenario_id", "n", "nt")
GATE_FLOOR = 0.02
BOUND_SLACK = 1e-5


class UsageError(ValueError):
    pass


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _num(x):
    return format(float(x), ".10g")


def result_rows(curve, scenario_id, scenario):
    rows = []
    ci = curve.ci_halfwidth
    for i, (t, p) in enumerate(zip(curve.thresholds_db, curve.coverage)):
        row = {"threshold_db": float(t), "coverage": float(p), "ci_low": None, "ci_high": None,
               "method": curve.method, "scenario_id": scenario_id,
               "n": scenario.coop_n, "nt": scenario.array.n_antennas}
        if ci is not None:
            row["ci_low"] = max(0.0, float(p - ci[i]))
            row["ci_high"] = min(1.0, float(p + ci[i]))
        rows.append(row)
    return rows


def format_rows(rows, fmt):
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(["" if r[k] is None else (_num(r[k]) if isinstance(r[k], float) else r[k])
                    for k in HEADER])
    return buf.getvalue()


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


# --------------------------------------------------------------------------
# scenario assembly
# --------------------------------------------------------------------------

def _resolve(args):
    sf = load_scenario(args.scenario)
    sc = sf.scenario
    if getattr(args, "fading", None):
        if args.fading == "nakagami":
            m = args.m if args.m is not None else (sc.fading.m if sc.fading.kind == "nakagami" else None)
            if m is None:
                raise UsageError("--fading nakagami needs --m")
            sc = sc.replace(fading=FadingModel.nakagami(m))
        elif args.fading == "rayleigh":
            sc = sc.replace(fading=FadingModel.rayleigh())
        else:
            sc = sc.replace(fading=FadingModel.no_fading())
    elif getattr(args, "m", None) is not None:
        sc = with_parameter(sc, "m", args.m)
    if getattr(args, "n", None) is not None:
        sc = sc.replace(coop_n=args.n)
    if getattr(args, "nt", None) is not None:
        sc = sc.replace(array=ArrayConfig(args.nt, sc.array.spacing))
    laplace = getattr(args, "laplace", None) or sf.laplace
    return sf, sc, laplace


def _sim_config(args, sf):
    sim = sf.sim
    window = sim.window_radius
    if getattr(args, "window", None) not in (None, "auto"):
        try:
            window = float(args.window)
        except ValueError:
            raise UsageError(f"--window must be a number or 'auto', got {args.window!r}") from None
    elif getattr(args, "window", None) == "auto":
        window = None
    return SimConfig(realizations=args.realizations if args.realizations is not None else sim.realizations,
                     seed=args.seed if args.seed is not None else sim.seed,
                     window_radius=window, block_size=sim.block_size)


def _jobs(args):
    return args.jobs if args.jobs is not None else default_jobs()


def _analytic(sc, tdb, laplace, no_interference):
    if no_interference and sc.fading.kind != "nakagami":
        raise UsageError("--no-interference applies to Nakagami fading only")
    return analytic.analytic_curve(sc, tdb, no_interference=no_interference, mode=laplace)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_analytic(args):
    sf, sc, laplace = _resolve(args)
    curve = _analytic(sc, sf.thresholds_db, laplace, args.no_interference)
    _emit(format_rows(result_rows(curve, sf.scenario_id, sc), args.format), args.output)
    return EXIT_OK


def cmd_simulate(args):
    sf, sc, _ = _resolve(args)
    curve = estimate_coverage(sc, sf.thresholds_db, _sim_config(args, sf), _jobs(args),
                              interference=not args.no_interference)
    log.info("window %.1f m, %d blocks, %d resampled", curve.diagnostics["window_radius"],
             curve.diagnostics["blocks"], curve.diagnostics["resampled"])
    _emit(format_rows(result_rows(curve, sf.scenario_id, sc), args.format), args.output)
    return EXIT_OK


def gate(an, mc, upper_bound=False):
    """(passed, per-threshold allowance, deltas) for analytic vs Monte Carlo."""
    delta = an.coverage - mc.coverage
    if upper_bound:
        # the CI collapses where every sample is covered; keep room for
        # quadrature error there
        sigma = mc.ci_halfwidth / 1.96
        allow = 3.0 * sigma + BOUND_SLACK
        ok = bool(np.all(delta >= -allow))
    else:
        allow = np.maximum(GATE_FLOOR, 3.0 * mc.ci_halfwidth)
        ok = bool(np.all(np.abs(delta) <= allow))
    return ok, allow, delta


def is_upper_bound(sc, no_interference=False):
    # the Nakagami results (with or without interference) bound the coherent
    # sum; only n=1 is exact
    return sc.fading.kind == "nakagami" and sc.coop_n >= 2


def cmd_compare(args):
    sf, sc, laplace = _resolve(args)
    an = _analytic(sc, sf.thresholds_db, laplace, args.no_interference)
    mc = estimate_coverage(sc, sf.thresholds_db, _sim_config(args, sf), _jobs(args),
                           interference=not args.no_interference)
    bound = is_upper_bound(sc, args.no_interference)
    ok, allow, delta = gate(an, mc, bound)
    rows = result_rows(an, sf.scenario_id, sc) + result_rows(mc, sf.scenario_id, sc)
    _emit(format_rows(rows, args.format), args.output)
    err = sys.stderr
    err.write(f"{'threshold_db':>12} {an.method:>8} {'mc':>8} {'delta':>9} {'allow':>8}\n")
    for t, a, m, d, w in zip(an.thresholds_db, an.coverage, mc.coverage, delta,
                             np.broadcast_to(allow, delta.shape)):
        err.write(f"{t:12.2f} {a:8.4f} {m:8.4f} {d:+9.4f} {w:8.4f}\n")
    kind = "upper-bound" if bound else "equality"
    if bound:
        worst = float(np.max(-delta - allow))
    else:
        worst = float(np.max(np.abs(delta) - allow))
    err.write(f"gate ({kind}): {'PASS' if ok else 'FAIL'} (worst margin {worst:+.4f})\n")
    return EXIT_OK if ok else EXIT_GATE


def cmd_density(args):
    table = f_upsilon_table(args.cells)
    if args.format == "json":
        rows = [{"eps_low": float(a), "eps_high": float(b), "mass": float(m), "density": float(d)}
                for a, b, m, d in zip(table.edges[:-1], table.edges[1:], table.masses, table.values)]
        text = json.dumps(rows, indent=1) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("eps_low", "eps_high", "mass", "density"))
        for a, b, m, d in zip(table.edges[:-1], table.edges[1:], table.masses, table.values):
            w.writerow((_num(a), _num(b), _num(m), _num(d)))
        text = buf.getvalue()
    _emit(text, args.output)
    return EXIT_OK


def _parse_values(text, key):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok) if key in ("nt", "coop_n", "m") else float(tok))
        except ValueError:
            raise UsageError(f"bad value {tok!r} for {key}") from None
    if not out:
        raise UsageError("--values is empty")
    return out


def cmd_sweep(args):
    sf, sc, laplace = _resolve(args)
    if args.param:
        key = args.param
        values = _parse_values(args.values, key) if args.values else sf.sweep.get(key)
        if not values:
            raise UsageError(f"no values for {key}: pass --values or declare it in the scenario")
    elif len(sf.sweep) == 1:
        key, values = next(iter(sf.sweep.items()))
    else:
        raise UsageError("scenario declares no single sweep; pass --param and --values")
    rows = []
    for v in values:
        scv = with_parameter(sc, key, v)
        sid = sf.scenario_id if key in ("nt", "coop_n") else f"{sf.scenario_id}[{key}={v}]"
        log.info("sweep %s=%s", key, v)
        if args.engine == "simulate":
            curve = estimate_coverage(scv, sf.thresholds_db, _sim_config(args, sf), _jobs(args),
                                      interference=not args.no_interference)
        else:
            curve = _analytic(scv, sf.thresholds_db, laplace, args.no_interference)
        rows += result_rows(curve, sid, scv)
    _emit(format_rows(rows, args.format), args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _positive_int(text):
    val = int(text)
    if val < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return val


def build_parser():
    p = argparse.ArgumentParser(prog="mmcomp", description="Coverage of cooperative mmWave networks.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=False):
        sp.add_argument("--scenario", required=True, help="scenario file, or a shipped name such as table5")
        sp.add_argument("--n", type=_positive_int, help="cooperating base stations")
        sp.add_argument("--nt", type=_positive_int, help="antennas per base station")
        sp.add_argument("--fading", choices=("rayleigh", "nakagami", "none"))
        sp.add_argument("--m", type=_positive_int, help="Nakagami shape")
        sp.add_argument("--no-interference", action="store_true",
                        help="noise-only coverage (Nakagami closed form / SNR simulation)")
        sp.add_argument("--laplace", choices=("exact", "flat_top"))
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--output", "-o", help="output file (default stdout)")
        if sim:
            sp.add_argument("--realizations", type=_positive_int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--window", help="window radius in m, or 'auto'")
            sp.add_argument("--jobs", type=_positive_int)

    common(sub.add_parser("analytic", help="evaluate the matching theorem"))
    common(sub.add_parser("simulate", help="Monte Carlo estimate"), sim=True)
    common(sub.add_parser("compare", help="analytic vs Monte Carlo with a pass/fail gate"), sim=True)
    sp = sub.add_parser("sweep", help="one curve per value of a parameter")
    common(sp, sim=True)
    sp.add_argument("--param", choices=SWEEPABLE)
    sp.add_argument("--values", help="comma-separated values (default: the scenario's sweep)")
    sp.add_argument("--engine", choices=("analytic", "simulate"), default="analytic")
    sp = sub.add_parser("density", help="dump the direction-difference density table")
    sp.add_argument("--cells", type=_positive_int, default=512)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--output", "-o")
    return p


COMMANDS = {"analytic": cmd_analytic, "simulate": cmd_simulate, "compare": cmd_compare,
            "density": cmd_density, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergenceError as exc:
        print(f"error: numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (UsageError, UnsupportedCoopError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
