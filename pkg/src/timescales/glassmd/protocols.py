"""Run protocols: preparation, MSD measurement and the density-scaling check.

Every protocol takes a plain parameter dict (see ``default_params``) so the
command line and the tests share one code path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..core import TimeSeries, child_seeds, rng_stream
from .analysis import (DisplacementField, StatePoint, burst_sampling, displacement_field, msd,
                       reduced_scaling)
from .configuration import Configuration, init_configuration
from .dynamics import Langevin, RunRecord, Simulation
from .potential import PotentialSpec

ENSEMBLES = ("nve", "langevin")


def default_params(name: str) -> dict:
    """Packaged defaults for ``run``, ``msd`` or ``scaling_check``."""
    text = resources.files("timescales.configs").joinpath(f"glass_{name}.json").read_text()
    params = json.loads(text)
    params.pop("schema_version", None)
    return params


def _spec(params) -> PotentialSpec:
    return PotentialSpec(r_cut=float(params.get("r_cut", 1.5)))


def prepare(n, rho, T, seed, dt=0.002, melt_T=1.0, melt_steps=20_000, equil_steps=50_000,
            gamma=1.0, spec: PotentialSpec = PotentialSpec(), progress=False):
    """Lattice start, Langevin melt at ``melt_T``, Langevin equilibration at ``T``.

    Returns the simulation and its rng; the configuration's total momentum
    is zeroed at the end so a following NVE run has no centre-of-mass drift.
    """
    config = init_configuration(n, rho=rho, T_init=melt_T if melt_steps else T, seed=seed,
                                spec=spec)
    sim = Simulation(config, spec)
    rng = rng_stream(seed)
    if melt_steps:
        sim.run(melt_steps, dt, Langevin(melt_T, gamma), rng, progress=progress)
    if equil_steps:
        sim.run(equil_steps, dt, Langevin(T, gamma), rng, progress=progress)
    config.zero_momentum()
    config.time = 0.0
    return sim, rng


def _production(sim, rng, params, steps, snapshot_steps=None) -> RunRecord:
    ensemble = params.get("ensemble", "nve")
    if ensemble not in ENSEMBLES:
        raise ValueError(f"ensemble must be one of {ENSEMBLES}")
    thermostat = Langevin(params["T"], params["gamma"]) if ensemble == "langevin" else None
    return sim.run(steps, params["dt"], thermostat, rng, snapshot_steps=snapshot_steps,
                   progress=params.get("progress", False))


def thermo_run(params) -> TimeSeries:
    """Prepared state followed by a production run; per-step energies and temperature."""
    return thermo_and_displacement(params)[0]


def thermo_and_displacement(params) -> tuple[TimeSeries, DisplacementField]:
    """``thermo_run`` plus the per-particle displacement over the production run."""
    sim, rng = prepare(params["N"], params["rho"], params["T"], params["seed"], params["dt"],
                       params["melt_T"], params["melt_steps"], params["equil_steps"],
                       params["gamma"], _spec(params), params.get("progress", False))
    start = sim.config.copy()
    rec = _production(sim, rng, params, params["steps"])
    every = max(1, int(params.get("record_every", 1)))
    values = np.column_stack([rec.kinetic, rec.potential, rec.total, rec.temperature])[::every]
    series = TimeSeries(rec.times[::every], values,
                        columns=("kinetic", "potential", "total", "temperature"),
                        meta={"rebuilds": sim.rebuilds, "dof": rec.dof})
    return series, displacement_field(start, sim.config)


def msd_run(params) -> TimeSeries:
    """Multi-origin MSD with log-spaced lags, averaged over independent seeds.

    Each seed prepares its own configuration, then samples repeated
    log-spaced bursts (``max_lag_steps`` long, one every ``origin_every``
    steps) during ``prod_steps`` of production.
    """
    n_seeds = int(params.get("n_seeds", 1))
    seeds = [params["seed"]] if n_seeds == 1 else child_seeds(params["seed"], n_seeds)
    steps, lag_steps = burst_sampling(params["prod_steps"], params["max_lag_steps"],
                                      params["origin_every"])
    curves = []
    temps = []
    for s in seeds:
        sim, rng = prepare(params["N"], params["rho"], params["T"], int(s), params["dt"],
                           params["melt_T"], params["melt_steps"], params["equil_steps"],
                           params["gamma"], _spec(params), params.get("progress", False))
        rec = _production(sim, rng, params, params["prod_steps"], steps)
        ts = msd(rec.snapshot_times, rec.snapshots, sim.config.species, multi_origin=True,
                 lags=lag_steps * params["dt"], remove_com=params.get("remove_com", False))
        curves.append(ts.values)
        temps.append(float(rec.temperature.mean()))
    return TimeSeries(ts.times, np.mean(curves, axis=0), columns=ts.columns,
                      meta={"seeds": [int(s) for s in seeds], "mean_temperature": temps})


def map_configuration(config: Configuration, source: StatePoint, target: StatePoint,
                      exponent=18) -> Configuration:
    """Scale a configuration to another state point of equal Gamma.

    Lengths scale with ``rho^(-1/d)`` and velocities with length over time
    scale, so for a pure inverse power law the mapped trajectory is the
    original one in reduced units.
    """
    rs = reduced_scaling(source, exponent)
    rt = reduced_scaling(target, exponent)
    a = rt.length_scale / rs.length_scale
    v = a * rs.time_scale / rt.time_scale
    return Configuration(config.positions * a, config.unwrapped * a, config.velocities * v,
                         config.species.copy(), config.box * a, config.mass, 0.0)


@dataclass
class ScalingCheck:
    reduced_time: np.ndarray
    reduced_msd: np.ndarray  # shape (points, 2)
    rel_deviation: np.ndarray
    gammas: tuple[float, float]

    @property
    def max_rel_deviation(self) -> float:
        return float(np.max(self.rel_deviation))

    def as_series(self) -> TimeSeries:
        return TimeSeries(self.reduced_time,
                          np.column_stack([self.reduced_msd, self.rel_deviation]),
                          columns=("msd_reduced_1", "msd_reduced_2", "rel_deviation"),
                          meta={"gamma_1": self.gammas[0], "gamma_2": self.gammas[1],
                                "max_rel_deviation": self.max_rel_deviation})


def scaling_check(params) -> ScalingCheck:
    """Reduced-unit MSD at two state points, paired per seed.

    For every seed one configuration is equilibrated at the first state
    point and mapped exactly onto the second; both then run NVE with time
    steps in the ratio of their time scales, so lag times coincide in
    reduced units. Each curve is averaged over seeds before comparison.
    """
    s1 = StatePoint(params["rho_1"], params["T_1"])
    s2 = StatePoint(params["rho_2"], params["T_2"])
    spec = _spec(params)
    r1 = reduced_scaling(s1, spec.exponent)
    r2 = reduced_scaling(s2, spec.exponent)
    dt1 = params["dt"]
    dt2 = dt1 * r2.time_scale / r1.time_scale
    n_seeds = int(params.get("n_seeds", 1))
    seeds = [params["seed"]] if n_seeds == 1 else child_seeds(params["seed"], n_seeds)
    steps, lag_steps = burst_sampling(params["prod_steps"], params["max_lag_steps"],
                                      params["origin_every"])
    first, second = [], []
    for s in seeds:
        sim, _ = prepare(params["N"], s1.rho, s1.T, int(s), dt1, params["melt_T"],
                         params["melt_steps"], params["equil_steps"], params["gamma"], spec,
                         params.get("progress", False))
        mapped = map_configuration(sim.config, s1, s2, spec.exponent)
        for config, dt, scale, acc in ((sim.config, dt1, r1, first), (mapped, dt2, r2, second)):
            rec = Simulation(config, spec).run(params["prod_steps"], dt, snapshot_steps=steps,
                                               progress=params.get("progress", False))
            ts = msd(rec.snapshot_times, rec.snapshots, config.species, multi_origin=True,
                     lags=lag_steps * dt)
            acc.append(ts.values[:, 0] / scale.length_scale ** 2)
    m1 = np.mean(first, axis=0)
    m2 = np.mean(second, axis=0)
    t_red = lag_steps * dt1 / r1.time_scale
    return ScalingCheck(t_red, np.column_stack([m1, m2]), np.abs(m2 / m1 - 1.0),
                        (r1.Gamma, r2.Gamma))
