from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..core import rng_stream
from .potential import A, B, SPECIES_NAMES, PotentialSpec

DIM = 2


@dataclass
class Configuration:
    """Particle state of a periodic 2D box.

    ``velocities`` are leapfrog half-step velocities ``v(t - dt/2)``;
    ``positions`` are wrapped into ``[0, L)`` and ``unwrapped`` accumulate
    the same displacements without wrapping.
    """

    positions: np.ndarray
    unwrapped: np.ndarray
    velocities: np.ndarray
    species: np.ndarray
    box: float
    mass: float = 1.0
    time: float = 0.0

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def density(self) -> float:
        return self.n / self.box ** DIM

    @property
    def degrees_of_freedom(self) -> int:
        return DIM * self.n - DIM

    def copy(self) -> "Configuration":
        return replace(self, positions=self.positions.copy(), unwrapped=self.unwrapped.copy(),
                       velocities=self.velocities.copy(), species=self.species.copy())

    def momentum(self) -> np.ndarray:
        return self.mass * self.velocities.sum(axis=0)

    def zero_momentum(self) -> None:
        """Remove centre-of-mass velocity (a thermostat run leaves some behind)."""
        self.velocities -= self.velocities.mean(axis=0)


def init_configuration(n, composition=0.7, rho=1.0, T_init=1.0, seed=0, mass=1.0,
                       spec: PotentialSpec = PotentialSpec()) -> Configuration:
    """Square-lattice start with random species and Maxwell-Boltzmann velocities.

    ``composition`` is the fraction of A particles. Velocities are shifted
    to zero total momentum and rescaled to kinetic temperature ``T_init``.
    """
    side = math.isqrt(n)
    if side * side != n:
        raise ValueError(f"N={n} is not a perfect square")
    if not 0 < composition < 1:
        raise ValueError("composition must lie strictly between 0 and 1")
    if rho <= 0 or T_init < 0 or mass <= 0:
        raise ValueError("density and mass must be positive, T_init non-negative")
    box = math.sqrt(n / rho)
    spacing = box / side
    if spacing < 0.5 * spec.sigma * spec.sigma_BB:
        raise ValueError(f"lattice spacing {spacing:.3f} below half the B diameter")
    rng = rng_stream(seed)

    grid = (np.arange(side) + 0.5) * spacing
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    pos = np.column_stack([xx.ravel(), yy.ravel()])

    n_a = int(round(composition * n))
    species = np.array([A] * n_a + [B] * (n - n_a), dtype=np.int64)
    species = rng.permutation(species)

    vel = rng.standard_normal((n, DIM))
    vel -= vel.mean(axis=0)
    if T_init == 0:
        vel[:] = 0.0
    else:
        t_now = mass * np.sum(vel ** 2) / (DIM * n - DIM)
        vel *= math.sqrt(T_init / t_now)
    return Configuration(pos, pos.copy(), vel, species, box, mass, 0.0)


def wrap(positions, box):
    out = positions - box * np.floor(positions / box)
    out[out >= box] = 0.0
    return out


def write_snapshot(path, config: Configuration):
    """Plain-text snapshot; every float written with 17 significant digits."""
    lines = [f"N {config.n}", f"L {config.box:.17g}", f"t {config.time:.17g}"]
    for s, (x, y), (ux, uy), (vx, vy) in zip(config.species, config.positions,
                                             config.unwrapped, config.velocities):
        lines.append(f"{SPECIES_NAMES[s]} {x:.17g} {y:.17g} {ux:.17g} {uy:.17g} "
                     f"{vx:.17g} {vy:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path, mass=1.0) -> Configuration:
    lines = Path(path).read_text().splitlines()
    header = {}
    for line in lines[:3]:
        key, value = line.split()
        header[key] = value
    n = int(header["N"])
    rows = [line.split() for line in lines[3:3 + n]]
    if len(rows) != n:
        raise ValueError(f"snapshot declares N={n} but holds {len(rows)} particles")
    species = np.array([SPECIES_NAMES.index(r[0]) for r in rows], dtype=np.int64)
    data = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(n, 6)
    return Configuration(data[:, 0:2].copy(), data[:, 2:4].copy(), data[:, 4:6].copy(),
                         species, float(header["L"]), mass, float(header["t"]))
