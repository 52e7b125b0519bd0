"""Leapfrog molecular dynamics with an optional Langevin thermostat."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numba
import numpy as np

from ..core.errors import BlowupError
from .configuration import DIM, Configuration
from .neighbors import (MIN_CELLS, ForceField, NeighborList, _forces_neighbors, _min_image,
                        _neighbors_all_pairs, _neighbors_cells, build_cells_and_neighbors,
                        compute_forces)
from .potential import PotentialSpec

BLOCK = 512
PROGRESS_EVERY = 10_000


@dataclass(frozen=True)
class Langevin:
    """Heat bath: drag ``-gamma v`` plus Gaussian kicks of variance ``2 gamma T / dt``."""

    temperature: float
    gamma: float

    def __post_init__(self):
        if not (self.temperature > 0 and self.gamma > 0):
            raise ValueError("Langevin thermostat needs positive temperature and gamma")


@numba.njit(cache=True)
def _rebuild(pos, species, box, rlist2, ncell):
    if ncell >= MIN_CELLS:
        return _neighbors_cells(pos, species, box, rlist2, ncell)
    return _neighbors_all_pairs(pos, species, box, rlist2)


@numba.njit(cache=True)
def _run_block(pos, upos, vel, species, box, mass, dt, nsteps, nbr_start, nbr_idx, ref,
               sig2, rcut2, n_exp, eps, shift, rlist2, ncell, skin, max_disp,
               langevin, gamma, kick, noise, forces, ke_out, u_out):
    n = pos.shape[0]
    rebuilds = 0
    half_skin2 = 0.25 * skin * skin
    max_disp2 = max_disp * max_disp
    for s in range(nsteps):
        u_out[s] = _forces_neighbors(pos, species, box, nbr_start, nbr_idx,
                                     sig2, rcut2, n_exp, eps, shift, forces)
        ke = 0.0
        for i in range(n):
            ax = forces[i, 0]
            ay = forces[i, 1]
            if langevin:
                ax += -gamma * vel[i, 0] + kick * noise[s, i, 0]
                ay += -gamma * vel[i, 1] + kick * noise[s, i, 1]
            vx = vel[i, 0] + ax * dt / mass
            vy = vel[i, 1] + ay * dt / mass
            mx = 0.5 * (vel[i, 0] + vx)
            my = 0.5 * (vel[i, 1] + vy)
            ke += mx * mx + my * my
            dx = vx * dt
            dy = vy * dt
            if not (dx * dx + dy * dy <= max_disp2):
                return nbr_start, nbr_idx, s, rebuilds
            vel[i, 0] = vx
            vel[i, 1] = vy
            upos[i, 0] += dx
            upos[i, 1] += dy
            x = pos[i, 0] + dx
            y = pos[i, 1] + dy
            x -= box * math.floor(x / box)
            y -= box * math.floor(y / box)
            if x >= box:
                x = 0.0
            if y >= box:
                y = 0.0
            pos[i, 0] = x
            pos[i, 1] = y
        ke_out[s] = 0.5 * mass * ke
        moved = 0.0
        for i in range(n):
            ddx = _min_image(pos[i, 0] - ref[i, 0], box)
            ddy = _min_image(pos[i, 1] - ref[i, 1], box)
            moved = max(moved, ddx * ddx + ddy * ddy)
        if moved > half_skin2:
            nbr_start, nbr_idx = _rebuild(pos, species, box, rlist2, ncell)
            for i in range(n):
                ref[i, 0] = pos[i, 0]
                ref[i, 1] = pos[i, 1]
            rebuilds += 1
    return nbr_start, nbr_idx, -1, rebuilds


@dataclass
class RunRecord:
    """Per-step thermodynamics and optional position snapshots.

    ``kinetic`` and ``potential`` refer to the on-step state at ``times``;
    the kinetic energy uses the mean of the two adjacent half-step velocities.
    """

    times: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    dof: int
    snapshot_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snapshots: np.ndarray = field(default_factory=lambda: np.zeros((0, 0, DIM)))

    @property
    def total(self):
        return self.kinetic + self.potential

    @property
    def temperature(self):
        return 2.0 * self.kinetic / self.dof


class Simulation:
    """Owns a configuration and advances it in place.

    Forces come from a Verlet neighbor list that is rebuilt whenever a
    particle has moved more than half the skin since the last build.
    """

    def __init__(self, config: Configuration, spec: PotentialSpec = PotentialSpec(),
                 skin: float = 0.3):
        self.config = config
        self.spec = spec
        self.field = ForceField(spec, skin)
        self.ncell = self.field.n_cells(config.box)
        self.nlist = build_cells_and_neighbors(config.positions, config.species, config.box,
                                               self.field)
        self.rebuilds = 0
        self._forces = np.empty_like(config.positions)

    def forces(self):
        return compute_forces(self.config.positions, self.config.species, self.config.box,
                              self.field, self.nlist)

    def run(self, steps, dt, thermostat: Langevin | None = None, rng=None,
            snapshot_steps=None, record_every=1, progress=False) -> RunRecord:
        """Advance ``steps`` leapfrog steps of size ``dt``.

        ``snapshot_steps`` lists step counts (relative to the start of this
        call, 0 allowed) after which unwrapped positions are stored.
        """
        if not dt > 0:
            raise ValueError("dt must be positive")
        if thermostat is not None and rng is None:
            raise ValueError("a Langevin run needs an rng")
        c = self.config
        snap_at = np.unique(np.asarray([] if snapshot_steps is None else snapshot_steps,
                                       dtype=np.int64))
        if snap_at.size and (snap_at[0] < 0 or snap_at[-1] > steps):
            raise ValueError("snapshot steps must lie in [0, steps]")
        ke = np.empty(steps)
        u = np.empty(steps)
        snaps = []
        t0 = c.time
        max_disp = 0.5 * self.spec.r_cut * self.spec.sigma
        sig2, rcut2, n_exp, eps, shift = self.field.kernel_args()
        langevin = thermostat is not None
        gamma = thermostat.gamma if langevin else 0.0
        kick = math.sqrt(2.0 * gamma * thermostat.temperature / dt) if langevin else 0.0
        empty_noise = np.zeros((0, c.n, DIM))
        done = 0
        k_snap = 0
        next_report = PROGRESS_EVERY
        while True:
            while k_snap < snap_at.size and snap_at[k_snap] == done:
                snaps.append(c.unwrapped.copy())
                k_snap += 1
            if done == steps:
                break
            target = steps if k_snap == snap_at.size else int(snap_at[k_snap])
            nb = min(BLOCK, target - done)
            noise = rng.standard_normal((nb, c.n, DIM)) if langevin else empty_noise
            start, idx, bad, nre = _run_block(
                c.positions, c.unwrapped, c.velocities, c.species, float(c.box), float(c.mass),
                float(dt), nb, self.nlist.start, self.nlist.index, self.nlist.reference,
                sig2, rcut2, n_exp, eps, shift, self.field.rlist2, self.ncell,
                float(self.field.skin), max_disp, langevin, gamma, kick, noise, self._forces,
                ke[done:done + nb], u[done:done + nb])
            self.nlist = NeighborList(start, idx, self.nlist.reference, self.ncell >= MIN_CELLS)
            self.rebuilds += nre
            if bad >= 0:
                c.time = t0 + (done + bad) * dt
                raise BlowupError(
                    f"particle displacement exceeded {max_disp:g} in one step "
                    f"(step {done + bad}, t={c.time:.6g})", step=done + bad, time=c.time)
            done += nb
            c.time = t0 + done * dt
            if progress and done >= next_report:
                print(f"[glass] step {done}/{steps} t={c.time:.4g} "
                      f"T={2 * ke[done - 1] / c.degrees_of_freedom:.4f}", file=sys.stderr)
                next_report += PROGRESS_EVERY
        times = t0 + dt * np.arange(steps)
        sl = slice(None, None, max(1, int(record_every)))
        snap_arr = np.array(snaps) if snaps else np.zeros((0, c.n, DIM))
        return RunRecord(times[sl], ke[sl], u[sl], c.degrees_of_freedom,
                         t0 + dt * snap_at.astype(float), snap_arr)


def potential_energy(config: Configuration, spec: PotentialSpec = PotentialSpec()) -> float:
    return compute_forces(config.positions, config.species, config.box, ForceField(spec))[1]


def leapfrog_step(config: Configuration, dt, spec: PotentialSpec = PotentialSpec()) -> Configuration:
    """One NVE step on a copy: kick the half-step velocity, drift, wrap."""
    out = config.copy()
    Simulation(out, spec).run(1, dt)
    return out


def langevin_step(config: Configuration, dt, T_target, gamma, rng,
                  spec: PotentialSpec = PotentialSpec()) -> Configuration:
    """One leapfrog step with drag ``-gamma v(t - dt/2)`` and random kicks."""
    out = config.copy()
    Simulation(out, spec).run(1, dt, Langevin(T_target, gamma), rng)
    return out


def reverse_velocities(config: Configuration, dt, spec: PotentialSpec = PotentialSpec()) -> Configuration:
    """Time-reversed state for the staggered scheme.

    Holding ``(x_n, v_{n-1/2})``, the reversed run must start from
    ``-v_{n+1/2} = -(v_{n-1/2} + F(x_n) dt / m)``.
    """
    out = config.copy()
    f, _ = compute_forces(out.positions, out.species, out.box, ForceField(spec))
    out.velocities = -(out.velocities + f * dt / out.mass)
    return out


def kinetic_temperature(config: Configuration, v_next=None, k_B=1.0) -> float:
    """``sum m |v|^2 / (N_f k_B)`` with ``N_f = d N - d``.

    If ``v_next`` (the following half-step velocities) is given, the on-step
    velocity is the average of the two half steps.
    """
    if config.n < 2:
        raise ValueError("need at least two particles")
    v = config.velocities if v_next is None else 0.5 * (config.velocities + v_next)
    return float(config.mass * np.sum(v * v) / (config.degrees_of_freedom * k_B))
