"""Scenario files.

A scenario file is YAML text (``.cfg`` by convention)::

    id: table6
    tiers:
      - {density_radius_m: 80, power_w: 1.0, blockage_per_m: 0.003}
    pathloss: {mode: los_nlos, alpha1: 2, alpha2: 4}
    array: {nt: 16, spacing: 0.5}
    noise: {bandwidth_hz: 1.0e9, nf_db: 5}
    fading: {model: rayleigh}          # rayleigh | nakagami (+ m) | none
    coop_n: 2
    thresholds_db: {start: -10, stop: 20, step: 2.5}
    sim: {realizations: 100000, seed: 7, window: auto}
    sweep: {nt: [8, 16, 32, 64]}        # optional
    laplace: exact                      # optional, exact | flat_top

Every error names the line it refers to.
"""

from dataclasses import dataclass, field
from importlib import resources
import math
import re
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .channel import ArrayConfig, FadingModel
from .geometry import NoiseConfig, PathlossConfig, Scenario, TierConfig
from .simulator import SimConfig


class ScenarioError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None or line is not None:
            where = f"{source or '<scenario>'}:{line if line is not None else '?'}: "
        super().__init__(where + message)


SWEEPABLE = ("nt", "coop_n", "blockage", "power_w", "m")


@dataclass
class ScenarioFile:
    scenario: Scenario
    thresholds_db: np.ndarray
    sim: SimConfig
    scenario_id: str
    sweep: dict = field(default_factory=dict)
    laplace: str = "exact"
    source: Optional[str] = None
    window_auto: bool = True


# --------------------------------------------------------------------------
# node helpers: keep yaml marks so diagnostics can cite lines
# --------------------------------------------------------------------------

class _Ctx:
    def __init__(self, source):
        self.source = source

    def fail(self, msg, node=None):
        line = node.start_mark.line + 1 if node is not None else None
        raise ScenarioError(msg, line, self.source)


def _mapping(ctx, node, what):
    if not isinstance(node, yaml.MappingNode):
        ctx.fail(f"{what} must be a mapping", node)
    out = {}
    for k, v in node.value:
        if k.value in out:
            ctx.fail(f"duplicate key {k.value!r} in {what}", k)
        out[k.value] = (k, v)
    return out


_FLOAT_RE = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")


def _scalar(ctx, node, what):
    if not isinstance(node, yaml.ScalarNode):
        ctx.fail(f"{what} must be a scalar", node)
    return yaml.safe_load(yaml.serialize(node))


def _number(ctx, entry, what, integer=False):
    key, node = entry
    val = _scalar(ctx, node, what)
    if isinstance(val, str):
        # YAML 1.1 reads "1.0e9" (no exponent sign) as a string
        try:
            val = float(val) if _FLOAT_RE.fullmatch(val.strip()) else val
        except ValueError:
            pass
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        ctx.fail(f"{what} must be a number, got {node.value!r}", node)
    if integer:
        if float(val) != int(val):
            ctx.fail(f"{what} must be an integer, got {val!r}", node)
        return int(val)
    if not math.isfinite(val):
        ctx.fail(f"{what} must be finite", node)
    return float(val)


def _require(ctx, m, key, parent_node, what):
    if key not in m:
        ctx.fail(f"missing {what}.{key}" if what else f"missing {key}", parent_node)
    return m[key]


def _check_keys(ctx, m, allowed, what):
    for k, (knode, _) in m.items():
        if k not in allowed:
            ctx.fail(f"unknown key {k!r} in {what}", knode)


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def parse_scenario_text(text, source=None) -> ScenarioFile:
    ctx = _Ctx(source)
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"syntax error: {getattr(exc, 'problem', exc)}", line, source) from None
    if root is None:
        raise ScenarioError("empty scenario file", 1, source)
    top = _mapping(ctx, root, "scenario")
    _check_keys(ctx, top, ("id", "tiers", "pathloss", "array", "noise", "fading", "coop_n",
                           "thresholds_db", "sim", "sweep", "laplace"), "scenario")

    # tiers
    tk, tnode = _require(ctx, top, "tiers", root, "")
    if not isinstance(tnode, yaml.SequenceNode) or not tnode.value:
        ctx.fail("tiers must be a non-empty list", tnode)
    tiers = []
    for i, item in enumerate(tnode.value):
        m = _mapping(ctx, item, f"tiers[{i}]")
        _check_keys(ctx, m, ("density_radius_m", "density_per_m2", "power_w", "blockage_per_m"),
                    f"tiers[{i}]")
        if ("density_radius_m" in m) == ("density_per_m2" in m):
            ctx.fail(f"tiers[{i}] needs exactly one of density_radius_m / density_per_m2", item)
        if "density_radius_m" in m:
            r = _number(ctx, m["density_radius_m"], "density_radius_m")
            if not r > 0:
                ctx.fail("density_radius_m must be positive", m["density_radius_m"][1])
            density = 1.0 / (math.pi * r * r)
        else:
            density = _number(ctx, m["density_per_m2"], "density_per_m2")
        power = _number(ctx, _require(ctx, m, "power_w", item, f"tiers[{i}]"), "power_w")
        if not power > 0:
            ctx.fail("power_w must be positive", m["power_w"][1])
        blockage = _number(ctx, m["blockage_per_m"], "blockage_per_m") if "blockage_per_m" in m else 0.0
        if blockage < 0:
            ctx.fail("blockage_per_m must be nonnegative", m["blockage_per_m"][1])
        try:
            tiers.append(TierConfig(density, power, blockage))
        except ValueError as exc:
            ctx.fail(f"tiers[{i}]: {exc}", item)

    # pathloss
    pk, pnode = _require(ctx, top, "pathloss", root, "")
    pm = _mapping(ctx, pnode, "pathloss")
    _check_keys(ctx, pm, ("mode", "alpha", "alpha1", "alpha2"), "pathloss")
    mode = _scalar(ctx, _require(ctx, pm, "mode", pnode, "pathloss")[1], "pathloss.mode")
    try:
        if mode == "uniform":
            if "alpha" not in pm:
                ctx.fail("uniform pathloss needs alpha", pnode)
            pathloss = PathlossConfig.uniform(_number(ctx, pm["alpha"], "alpha"))
        elif mode == "los_nlos":
            a1 = _number(ctx, _require(ctx, pm, "alpha1", pnode, "pathloss"), "alpha1")
            a2 = _number(ctx, _require(ctx, pm, "alpha2", pnode, "pathloss"), "alpha2")
            pathloss = PathlossConfig.los_nlos(a1, a2)
        else:
            ctx.fail(f"pathloss.mode must be uniform or los_nlos, got {mode!r}", pm["mode"][1])
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        ctx.fail(f"pathloss: {exc}", pnode)

    # array
    ak, anode = _require(ctx, top, "array", root, "")
    am = _mapping(ctx, anode, "array")
    _check_keys(ctx, am, ("nt", "spacing"), "array")
    nt = _number(ctx, _require(ctx, am, "nt", anode, "array"), "array.nt", integer=True)
    spacing = _number(ctx, am["spacing"], "array.spacing") if "spacing" in am else 0.5
    try:
        array = ArrayConfig(nt, spacing)
    except ValueError as exc:
        ctx.fail(f"array: {exc}", anode)

    # noise
    nk, nnode = _require(ctx, top, "noise", root, "")
    nm = _mapping(ctx, nnode, "noise")
    _check_keys(ctx, nm, ("bandwidth_hz", "nf_db"), "noise")
    bw = _number(ctx, _require(ctx, nm, "bandwidth_hz", nnode, "noise"), "noise.bandwidth_hz")
    nf = _number(ctx, nm["nf_db"], "noise.nf_db") if "nf_db" in nm else 0.0
    try:
        noise = NoiseConfig(bw, nf)
    except ValueError as exc:
        ctx.fail(f"noise: {exc}", nnode)

    # fading
    fading = FadingModel.rayleigh()
    if "fading" in top:
        fnode = top["fading"][1]
        fm = _mapping(ctx, fnode, "fading")
        _check_keys(ctx, fm, ("model", "m"), "fading")
        model = _scalar(ctx, _require(ctx, fm, "model", fnode, "fading")[1], "fading.model")
        m_val = _number(ctx, fm["m"], "fading.m", integer=True) if "m" in fm else 1
        try:
            if model == "rayleigh":
                fading = FadingModel.rayleigh()
            elif model == "nakagami":
                fading = FadingModel.nakagami(m_val)
            elif model == "none":
                fading = FadingModel.no_fading()
            else:
                ctx.fail(f"fading.model must be rayleigh, nakagami or none, got {model!r}",
                         fm["model"][1])
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            ctx.fail(f"fading: {exc}", fnode)

    coop_n = 1
    if "coop_n" in top:
        coop_n = _number(ctx, top["coop_n"], "coop_n", integer=True)
        if coop_n < 1:
            ctx.fail("coop_n must be >= 1", top["coop_n"][1])

    scenario_id = "scenario"
    if "id" in top:
        scenario_id = str(_scalar(ctx, top["id"][1], "id"))
    elif source:
        scenario_id = Path(source).stem

    try:
        scenario = Scenario(tuple(tiers), pathloss, array, noise, fading, coop_n, scenario_id)
    except ValueError as exc:
        ctx.fail(str(exc), root)

    # thresholds
    thresholds = np.arange(-10.0, 20.0 + 1e-9, 2.5)
    if "thresholds_db" in top:
        thnode = top["thresholds_db"][1]
        if isinstance(thnode, yaml.SequenceNode):
            thresholds = np.array([_number(ctx, (None, v), "thresholds_db[]") for v in thnode.value])
        else:
            tm = _mapping(ctx, thnode, "thresholds_db")
            _check_keys(ctx, tm, ("start", "stop", "step"), "thresholds_db")
            start = _number(ctx, _require(ctx, tm, "start", thnode, "thresholds_db"), "start")
            stop = _number(ctx, _require(ctx, tm, "stop", thnode, "thresholds_db"), "stop")
            step = _number(ctx, _require(ctx, tm, "step", thnode, "thresholds_db"), "step")
            if not step > 0 or stop < start:
                ctx.fail("thresholds_db needs step > 0 and stop >= start", thnode)
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            thresholds = np.round(start + step * np.arange(count), 9)
        if thresholds.size == 0 or np.any(np.diff(thresholds) <= 0):
            ctx.fail("thresholds must be strictly ascending", thnode)

    # sim
    sim = SimConfig()
    window_auto = True
    if "sim" in top:
        snode = top["sim"][1]
        sm = _mapping(ctx, snode, "sim")
        _check_keys(ctx, sm, ("realizations", "seed", "window"), "sim")
        reals = _number(ctx, sm["realizations"], "sim.realizations", integer=True) \
            if "realizations" in sm else sim.realizations
        seed = _number(ctx, sm["seed"], "sim.seed", integer=True) if "seed" in sm else 0
        window = None
        if "window" in sm:
            wv = _scalar(ctx, sm["window"][1], "sim.window")
            if wv != "auto":
                window = _number(ctx, sm["window"], "sim.window")
                window_auto = False
        try:
            sim = SimConfig(reals, seed, window)
        except ValueError as exc:
            ctx.fail(f"sim: {exc}", snode)

    sweep = {}
    if "sweep" in top:
        swnode = top["sweep"][1]
        swm = _mapping(ctx, swnode, "sweep")
        _check_keys(ctx, swm, SWEEPABLE, "sweep")
        for key, (knode, vnode) in swm.items():
            if not isinstance(vnode, yaml.SequenceNode) or not vnode.value:
                ctx.fail(f"sweep.{key} must be a non-empty list", vnode)
            sweep[key] = [_number(ctx, (None, v), f"sweep.{key}[]",
                                  integer=key in ("nt", "coop_n", "m")) for v in vnode.value]

    laplace = "exact"
    if "laplace" in top:
        laplace = _scalar(ctx, top["laplace"][1], "laplace")
        if laplace not in ("exact", "flat_top"):
            ctx.fail(f"laplace must be exact or flat_top, got {laplace!r}", top["laplace"][1])

    return ScenarioFile(scenario, thresholds, sim, scenario_id, sweep, laplace, source, window_auto)


def load_scenario(path) -> ScenarioFile:
    """Parse a scenario file; bare names resolve against the shipped scenarios."""
    p = Path(path)
    if not p.exists():
        shipped = shipped_scenario_path(p.name if p.suffix else p.name + ".cfg")
        if shipped is None:
            raise ScenarioError(f"no such scenario file: {path}", None, str(path))
        p = shipped
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}", None, str(path)) from None
    return parse_scenario_text(text, str(path))


def shipped_scenario_path(name):
    ref = resources.files("mmcomp") / "data" / "scenarios" / name
    return Path(str(ref)) if ref.is_file() else None


def shipped_scenarios():
    base = resources.files("mmcomp") / "data" / "scenarios"
    return sorted(Path(str(p)).name for p in base.iterdir() if str(p).endswith(".cfg"))


# --------------------------------------------------------------------------
# writing (round trip) and parameter overrides
# --------------------------------------------------------------------------

def dump_scenario(sf: ScenarioFile) -> str:
    sc = sf.scenario
    doc = {"id": sf.scenario_id, "tiers": []}
    for t in sc.tiers:
        doc["tiers"].append({"density_per_m2": t.density, "power_w": t.power,
                             "blockage_per_m": t.blockage})
    if sc.pathloss.mode == "uniform":
        doc["pathloss"] = {"mode": "uniform", "alpha": sc.pathloss.alpha1}
    else:
        doc["pathloss"] = {"mode": "los_nlos", "alpha1": sc.pathloss.alpha1,
                           "alpha2": sc.pathloss.alpha2}
    doc["array"] = {"nt": sc.array.n_antennas, "spacing": sc.array.spacing}
    doc["noise"] = {"bandwidth_hz": sc.noise.bandwidth_hz, "nf_db": sc.noise.nf_db}
    doc["fading"] = {"model": sc.fading.kind}
    if sc.fading.kind == "nakagami":
        doc["fading"]["m"] = sc.fading.m
    doc["coop_n"] = sc.coop_n
    doc["thresholds_db"] = [float(x) for x in sf.thresholds_db]
    doc["sim"] = {"realizations": sf.sim.realizations, "seed": sf.sim.seed,
                  "window": "auto" if sf.sim.window_radius is None else sf.sim.window_radius}
    if sf.sweep:
        doc["sweep"] = {k: list(v) for k, v in sf.sweep.items()}
    doc["laplace"] = sf.laplace
    return yaml.safe_dump(doc, sort_keys=False)


def with_parameter(scenario: Scenario, key, value) -> Scenario:
    """Scenario with one sweepable parameter replaced."""
    if key == "nt":
        return scenario.replace(array=ArrayConfig(int(value), scenario.array.spacing))
    if key == "coop_n":
        return scenario.replace(coop_n=int(value))
    if key == "blockage":
        return scenario.replace(tiers=tuple(TierConfig(t.density, t.power, float(value))
                                            for t in scenario.tiers))
    if key == "power_w":
        return scenario.replace(tiers=tuple(TierConfig(t.density, float(value), t.blockage)
                                            for t in scenario.tiers))
    if key == "m":
        if scenario.fading.kind != "nakagami":
            raise ValueError("sweeping m needs Nakagami fading")
        return scenario.replace(fading=FadingModel.nakagami(int(value)))
    raise ValueError(f"parameter {key!r} is not sweepable (choose from {', '.join(SWEEPABLE)})")
