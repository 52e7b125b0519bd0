"""Subcommand handlers.

Each handler receives the resolved config and a context holding the
emitter; it writes its files through the emitter and returns a flat
summary that the entry point prints as ``key=value`` lines.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .. import cycles, exocytosis, ghg, tipping
from ..core import BracketError, TimeSeries
from ..glassmd import protocols
from ..glassmd.analysis import diffusion_coefficient
from ..glassmd.potential import SPECIES_NAMES
from .config import ValidationError
from .output import Emitter


@dataclass
class Context:
    emitter: Emitter
    quiet: bool = False


@dataclass
class Command:
    group: str
    name: str
    help: str
    defaults: Callable[[], dict]
    run: Callable[[dict, Context], dict]

    @property
    def label(self) -> str:
        return f"{self.group} {self.name}"


def _series_table(ctx, stem, ts: TimeSeries, time_name="t"):
    ctx.emitter.table(stem, (time_name,) + tuple(ts.columns),
                      [ts.times] + [ts.values[:, i] for i in range(ts.dim)])


def _strip(cfg: dict, *keys) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("schema_version",) + keys}


# --- tipping ----------------------------------------------------------------------

def _tipping_defaults() -> dict:
    d = tipping.default_hysteresis_params().to_dict()
    d["T0"] = 0.0
    return d


def _tipping_hysteresis_defaults() -> dict:
    d = _tipping_defaults()
    d["n_seeds"] = 100
    return d


def tipping_run(cfg, ctx):
    params = tipping.TippingParams.from_dict(_strip(cfg, "T0"))
    run = tipping.langevin_run(params, cfg["T0"])
    T = run.column("T")
    basins = [tipping.basin_of(x).value for x in T]
    ctx.emitter.table("trajectory", ("t", "T", "alpha", "basin"),
                      [run.times, T, run.column("alpha"), basins])
    return {"T_final": float(T[-1]), "basin_final": run.meta["basin"],
            "step_sane": run.meta["step_sane"]}


def tipping_hysteresis(cfg, ctx):
    params = tipping.TippingParams.from_dict(_strip(cfg, "T0", "n_seeds"))
    result = tipping.hysteresis_experiment(params, cfg["n_seeds"], cfg["T0"])
    ctx.emitter.document("hysteresis", result.to_dict())
    return {"forward_fraction": result.forward_fraction,
            "return_fraction": result.return_fraction, "n_seeds": cfg["n_seeds"]}


def tipping_critical_alpha(cfg, ctx):
    a = tipping.critical_alpha(tol=cfg["tol"])
    ctx.emitter.document("critical_alpha", {"mode": "tilted", "alpha_c": a})
    return {"alpha_c": a}


# --- glass ------------------------------------------------------------------------

def _glass_params(cfg, ctx) -> dict:
    params = _strip(cfg)
    params["progress"] = not ctx.quiet
    return params


def glass_run(cfg, ctx):
    series, field = protocols.thermo_and_displacement(_glass_params(cfg, ctx))
    _series_table(ctx, "thermo", series)
    names = [SPECIES_NAMES[s] for s in field.species]
    ctx.emitter.table("displacement", ("id", "species", "dx", "dy", "magnitude"),
                      [np.arange(len(names)), names, field.vectors[:, 0], field.vectors[:, 1],
                       field.magnitudes])
    E = series.column("total")
    return {"mean_temperature": float(series.column("temperature").mean()),
            "max_rel_energy_drift": float(np.max(np.abs(E / E[0] - 1.0))),
            "mobile_fraction": field.mobile_fraction,
            "neighbor_rebuilds": int(series.meta["rebuilds"])}


def glass_msd(cfg, ctx):
    ts = protocols.msd_run(_glass_params(cfg, ctx))
    _series_table(ctx, "msd", ts, "lag_time")
    fit = diffusion_coefficient(ts.times, ts.column("msd_total"))
    return {"diffusion_coefficient": fit.D, "diffusive": fit.converged,
            "loglog_slope": fit.loglog_slope,
            "mean_temperature": float(np.mean(ts.meta["mean_temperature"]))}


def glass_scaling_check(cfg, ctx):
    result = protocols.scaling_check(_glass_params(cfg, ctx))
    _series_table(ctx, "scaling", result.as_series(), "reduced_time")
    return {"gamma_1": result.gammas[0], "gamma_2": result.gammas[1],
            "max_rel_deviation": result.max_rel_deviation}


# --- exocytosis ---------------------------------------------------------------------

def _exo_defaults() -> dict:
    d = {"schema_version": 1, **exocytosis.default_protocol_params()}
    d["kinetics"] = exocytosis.KineticParams().to_dict()
    return d


def _exo_resting_defaults() -> dict:
    proto = exocytosis.CalciumProtocol()
    return {"schema_version": 1, "variant": exocytosis.Variant.CORRECTED.value,
            "C_i_basal": proto.C_i_basal, "C_md_basal": proto.C_md_basal,
            "kinetics": exocytosis.KineticParams().to_dict()}


def _exo_simulate(cfg):
    protocol = exocytosis.CalciumProtocol.from_dict(cfg["protocol"])
    kinetics = exocytosis.KineticParams.from_dict(cfg["kinetics"])
    series = exocytosis.simulate(protocol, kinetics, cfg["variant"], cfg["t_end"],
                                 cfg["dt_out"])
    return protocol, series


def exo_run(cfg, ctx):
    _, series = _exo_simulate(cfg)
    _series_table(ctx, "trajectory", series)
    return {"variant": series.meta["variant"], "SR_final": float(series.column("SR")[-1]),
            "mass_balance_rate": exocytosis.mass_balance_rate(series),
            "accepted_steps": int(series.meta["accepted_steps"])}


def exo_resting(cfg, ctx):
    kinetics = exocytosis.KineticParams.from_dict(cfg["kinetics"])
    state = exocytosis.resting_state(cfg["C_i_basal"], kinetics, cfg["variant"],
                                     cfg["C_md_basal"])
    rhs = exocytosis.derivatives(state, cfg["C_md_basal"], cfg["C_i_basal"], kinetics,
                                 cfg["variant"])
    residual = float(np.max(np.abs(rhs)))
    pools = dict(zip(exocytosis.POOLS, map(float, state)))
    ctx.emitter.document("resting", {"variant": cfg["variant"], "pools": pools,
                                     "residual": residual})
    return {**pools, "residual": residual}


def exo_metrics(cfg, ctx):
    protocol, series = _exo_simulate(cfg)
    m = exocytosis.phase_metrics(series, t_on=protocol.t_on)
    doc = {"t_peak": m.t_peak, "SR_peak": m.SR_peak, "t_nadir": m.t_nadir,
           "SR_nadir": m.SR_nadir, "SR_plateau": m.SR_plateau, "variant": series.meta["variant"]}
    ctx.emitter.document("metrics", doc)
    return {**doc, "monophasic": m.monophasic}


# --- cycles -------------------------------------------------------------------------

def _cycles_defaults() -> dict:
    return {"schema_version": 1, "c": 0.6, "nu": 1.2, "A": 10.0, "g": 0.0, "Y_init": None,
            "steps": 200}


def _cycles_run_defaults() -> dict:
    return {**_cycles_defaults(), "floor": None, "ceiling": None, "long_window": 41,
            "short_window": 5}


def _cycle_params(cfg) -> cycles.CycleParams:
    return cycles.CycleParams.from_dict({k: cfg[k] for k in ("c", "nu", "A", "g", "Y_init")})


def cycles_run(cfg, ctx):
    p = _cycle_params(cfg)
    bounded = cfg["floor"] is not None or cfg["ceiling"] is not None
    if bounded:
        lo = -math.inf if cfg["floor"] is None else cfg["floor"]
        hi = math.inf if cfg["ceiling"] is None else cfg["ceiling"]
        ts = cycles.restricted_iterate(p, lo, hi, cfg["steps"])
    else:
        ts = cycles.iterate(p, cfg["steps"])
    d = cycles.decompose(ts, cfg["long_window"], cfg["short_window"])
    _series_table(ctx, "cycles", d.as_series())
    roots = cycles.characteristic_roots(p.c, p.nu)
    ctx.emitter.document("roots", roots.to_dict())
    out = {"regime": roots.regime, "period": roots.period,
           "explosive": bool(ts.meta.get("explosive", False))}
    if bounded:
        out.update(floor_hits=ts.meta["floor_hits"], ceiling_hits=ts.meta["ceiling_hits"])
    return out


def cycles_classify(cfg, ctx):
    p = cycles.CycleParams(c=cfg["c"], nu=cfg["nu"])  # same ranges as the other commands
    roots = cycles.characteristic_roots(p.c, p.nu)
    doc = roots.to_dict()
    ctx.emitter.document("roots", doc)
    return doc


def cycles_closed_form(cfg, ctx):
    p = _cycle_params(cfg)
    t = np.arange(cfg["steps"])
    y = cycles.iterate(p, cfg["steps"]).values[:, 0]
    cf = cycles.closed_form(p, t)
    rel = np.abs(cf - y) / np.maximum(np.abs(y), np.finfo(float).tiny)
    ctx.emitter.table("closed_form", ("t", "Y_iterate", "Y_closed_form", "rel_error"),
                      [t.astype(float), y, cf, rel])
    out = {"max_rel_error": float(rel.max()), "regime": cycles.characteristic_roots(p.c, p.nu).regime}
    if cycles.characteristic_roots(p.c, p.nu).complex_pair:
        out["delta"], out["epsilon"] = cycles.fit_initial(p)
    return out


def _read_input_csv(path) -> dict[str, np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise ValidationError("input_not_found", f"input file not found: {path}")
    with p.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValidationError("invalid_input", f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValidationError("invalid_input", f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValidationError("invalid_input", f"{path}: ragged rows")
    return {h: data[:, i] for i, h in enumerate(header)}


def cycles_decompose(cfg, ctx):
    if cfg["input"] is None:
        raise ValidationError("missing_input", "decompose needs an input CSV (--input PATH)")
    cols = _read_input_csv(cfg["input"])
    ratios_cols = ("t", "W", "L", "p", "Y", "Ls")
    if set(ratios_cols) <= set(cols):
        value = cols["Y"]
    elif {"t", "value"} <= set(cols):
        value = cols["value"]
    else:
        raise ValidationError("invalid_input", "input columns must be t,value or t,W,L,p,Y,Ls")
    d = cycles.decompose(TimeSeries(cols["t"], value[:, None]), cfg["long_window"],
                         cfg["short_window"])
    _series_table(ctx, "decomposition", d.as_series())
    out = {"points": len(value), "cycle_std": float(np.std(d.cycle))}
    if set(ratios_cols) <= set(cols):
        r = cycles.great_ratios(cols["W"], cols["L"], cols["p"], cols["Y"], cols["Ls"])
        ctx.emitter.table("ratios", ("t", "e", "v"), [cols["t"], r.e, r.v])
        out["ratios_plausible"] = r.plausible
    return out


# --- greenhouse gases --------------------------------------------------------------

def _ghg_model_defaults() -> dict:
    return {"schema_version": 1, "preset": "clathrate", "rates": {}}


def _model(cfg) -> ghg.LinearCompartmentModel:
    return ghg.build_interaction_model(cfg["preset"], cfg["rates"])


def ghg_gwp(cfg, ctx):
    ref = math.inf if cfg["reference_half_life"] is None else cfg["reference_half_life"]
    spec = ghg.GwpSpec(cfg["horizon"], ghg.Abundance(cfg["half_life"]), ghg.Abundance(ref),
                       cfg["a_ratio"])
    doc = {"gwp": ghg.gwp(spec), "closed_form": ghg.gwp_closed_form(spec)}
    ctx.emitter.document("gwp", doc)
    return doc


def _gain(model, cfg):
    return ghg.critical_gain(model.gain_family(), tuple(cfg["bracket"]), cfg["tol"])


def ghg_stability(cfg, ctx):
    model = _model(cfg)
    report = ghg.stability(model)
    try:
        g_crit = _gain(model, cfg)
    except BracketError:
        g_crit = None  # no crossing inside the bracket
    ctx.emitter.document("stability", {"eigs": report.to_dict()["eigs"],
                                       "stable": report.stable, "g_crit": g_crit})
    return {"stable": report.stable, "max_real_part": report.max_real_part, "g_crit": g_crit}


def ghg_critical_gain(cfg, ctx):
    g = _gain(_model(cfg), cfg)
    ctx.emitter.document("critical_gain", {"preset": cfg["preset"], "g_crit": g})
    return {"g_crit": g}


def ghg_simulate(cfg, ctx):
    model = _model(cfg)
    years = math.inf if cfg["emission_years"] is None else cfg["emission_years"]
    out = ghg.simulate_compartments(model, cfg["emissions"], cfg["horizon"], cfg["threshold"],
                                    cfg["x0"], years, cfg["n_out"])
    _series_table(ctx, "trajectory", out.trajectory)
    doc = {"preset": model.preset, "classification": out.classification,
           "divergence_time": out.divergence_time, "bound": out.bound,
           "rates": model.rates}
    ctx.emitter.document("outcome", doc)
    return {"classification": out.classification, "divergence_time": out.divergence_time}


COMMANDS = [
    Command("tipping", "run", "one Langevin trajectory under the control schedule",
            _tipping_defaults, tipping_run),
    Command("tipping", "hysteresis", "forward and return basin fractions over many seeds",
            _tipping_hysteresis_defaults, tipping_hysteresis),
    Command("tipping", "critical-alpha", "control value where the low well disappears",
            lambda: {"schema_version": 1, "tol": 1e-12}, tipping_critical_alpha),
    Command("glass", "run", "prepared liquid plus a production run (energies, displacements)",
            lambda: protocols.default_params("run"), glass_run),
    Command("glass", "msd", "multi-origin mean squared displacement",
            lambda: protocols.default_params("msd"), glass_msd),
    Command("glass", "scaling-check", "reduced-unit MSD at two state points of equal Gamma",
            lambda: protocols.default_params("scaling_check"), glass_scaling_check),
    Command("exo", "run", "secretion under a calcium protocol", _exo_defaults, exo_run),
    Command("exo", "resting", "steady pools at basal calcium", _exo_resting_defaults,
            exo_resting),
    Command("exo", "metrics", "peak, nadir and plateau of the secretion rate", _exo_defaults,
            exo_metrics),
    Command("cycles", "run", "iterate the recurrence and decompose the path",
            _cycles_run_defaults, cycles_run),
    Command("cycles", "classify", "characteristic roots and regime",
            lambda: {"schema_version": 1, "c": 0.6, "nu": 1.2}, cycles_classify),
    Command("cycles", "closed-form", "closed-form path against the recurrence",
            _cycles_defaults, cycles_closed_form),
    Command("cycles", "decompose", "trend, cycle and residual of an input series",
            lambda: {"schema_version": 1, "input": None, "long_window": 41, "short_window": 5},
            cycles_decompose),
    Command("ghg", "gwp", "global warming potential of a decaying gas",
            lambda: {"schema_version": 1, "half_life": ghg.METHANE_HALF_LIFE * 1.0,
                     "horizon": 20.0, "a_ratio": 1.0, "reference_half_life": None},
            ghg_gwp),
    Command("ghg", "stability", "eigenvalues, stability and critical gain of a preset",
            lambda: {**_ghg_model_defaults(), "bracket": [0.0, 1.0], "tol": 1e-6},
            ghg_stability),
    Command("ghg", "critical-gain", "feedback gain at which the preset loses stability",
            lambda: {**_ghg_model_defaults(), "bracket": [0.0, 1.0], "tol": 1e-6},
            ghg_critical_gain),
    Command("ghg", "simulate", "integrate a preset and classify bounded or runaway",
            lambda: {**_ghg_model_defaults(), "horizon": float(ghg.DEFAULT_HORIZON),
                     "threshold": False, "emissions": None, "emission_years": None,
                     "x0": None, "n_out": 501},
            ghg_simulate),
]
