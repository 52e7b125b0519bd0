"""Cell lists, Verlet neighbor lists and pair-force kernels.

Neighbor lists are stored per particle (each pair appears twice) in CSR
form with ascending neighbor indices. Forces are accumulated per particle
in that order, which makes the result independent of how the list was
built and bit-identical to the all-pairs loop in ascending ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .potential import PotentialSpec

MIN_CELLS = 3


@numba.njit(cache=True, inline="always")
def _min_image(d, box):
    return d - box * math.floor(d / box + 0.5)


@numba.njit(cache=True)
def _insertion_sort(a, lo, hi):
    for k in range(lo + 1, hi):
        v = a[k]
        m = k - 1
        while m >= lo and a[m] > v:
            a[m + 1] = a[m]
            m -= 1
        a[m + 1] = v


@numba.njit(cache=True)
def _build_cell_list(pos, box, ncell):
    n = pos.shape[0]
    cell_of = np.empty(n, dtype=np.int64)
    counts = np.zeros(ncell * ncell, dtype=np.int64)
    for i in range(n):
        cx = int(pos[i, 0] / box * ncell)
        cy = int(pos[i, 1] / box * ncell)
        cx = min(max(cx, 0), ncell - 1)
        cy = min(max(cy, 0), ncell - 1)
        c = cx * ncell + cy
        cell_of[i] = c
        counts[c] += 1
    cell_start = np.zeros(ncell * ncell + 1, dtype=np.int64)
    for c in range(ncell * ncell):
        cell_start[c + 1] = cell_start[c] + counts[c]
    fill = cell_start[:-1].copy()
    members = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = cell_of[i]
        members[fill[c]] = i
        fill[c] += 1
    return cell_of, cell_start, members


@numba.njit(cache=True)
def _neighbors_cells(pos, species, box, rlist2, ncell):
    n = pos.shape[0]
    cell_of, cell_start, members = _build_cell_list(pos, box, ncell)
    nbr_start = np.zeros(n + 1, dtype=np.int64)
    nbr_idx = np.empty(0, dtype=np.int64)
    for sweep in range(2):
        if sweep == 1:
            nbr_idx = np.empty(nbr_start[n], dtype=np.int64)
        for i in range(n):
            cnt = 0
            cx = cell_of[i] // ncell
            cy = cell_of[i] % ncell
            xi = pos[i, 0]
            yi = pos[i, 1]
            si = species[i]
            for ox in range(-1, 2):
                for oy in range(-1, 2):
                    c = ((cx + ox) % ncell) * ncell + (cy + oy) % ncell
                    for k in range(cell_start[c], cell_start[c + 1]):
                        j = members[k]
                        if j == i:
                            continue
                        dx = _min_image(pos[j, 0] - xi, box)
                        dy = _min_image(pos[j, 1] - yi, box)
                        if dx * dx + dy * dy < rlist2[si, species[j]]:
                            if sweep == 1:
                                nbr_idx[nbr_start[i] + cnt] = j
                            cnt += 1
            if sweep == 0:
                nbr_start[i + 1] = nbr_start[i] + cnt
            else:
                _insertion_sort(nbr_idx, nbr_start[i], nbr_start[i + 1])
    return nbr_start, nbr_idx


@numba.njit(cache=True)
def _neighbors_all_pairs(pos, species, box, rlist2):
    n = pos.shape[0]
    nbr_start = np.zeros(n + 1, dtype=np.int64)
    nbr_idx = np.empty(0, dtype=np.int64)
    for sweep in range(2):
        if sweep == 1:
            nbr_idx = np.empty(nbr_start[n], dtype=np.int64)
        for i in range(n):
            cnt = 0
            for j in range(n):
                if j == i:
                    continue
                dx = _min_image(pos[j, 0] - pos[i, 0], box)
                dy = _min_image(pos[j, 1] - pos[i, 1], box)
                if dx * dx + dy * dy < rlist2[species[i], species[j]]:
                    if sweep == 1:
                        nbr_idx[nbr_start[i] + cnt] = j
                    cnt += 1
            if sweep == 0:
                nbr_start[i + 1] = nbr_start[i] + cnt
    return nbr_start, nbr_idx


@numba.njit(cache=True, inline="always")
def _pair(dx, dy, sig2, rcut2, n_exp, eps, shift):
    """Return (fx, fy, u) acting on the first particle for separation (dx, dy) = r_i - r_j."""
    r2 = (dx * dx + dy * dy) / sig2
    if r2 >= rcut2:
        return 0.0, 0.0, 0.0
    inv2 = 1.0 / r2
    rn = inv2 ** (n_exp // 2)
    if n_exp % 2 == 1:
        rn *= math.sqrt(inv2)
    f = n_exp * eps * rn * inv2 / sig2
    return f * dx, f * dy, eps * (rn - shift)


@numba.njit(cache=True)
def _forces_neighbors(pos, species, box, nbr_start, nbr_idx, sig2, rcut2, n_exp, eps, shift,
                      forces):
    n = pos.shape[0]
    upot = 0.0
    for i in range(n):
        fx = 0.0
        fy = 0.0
        ui = 0.0
        xi = pos[i, 0]
        yi = pos[i, 1]
        si = species[i]
        for k in range(nbr_start[i], nbr_start[i + 1]):
            j = nbr_idx[k]
            dx = _min_image(xi - pos[j, 0], box)
            dy = _min_image(yi - pos[j, 1], box)
            gx, gy, u = _pair(dx, dy, sig2[si, species[j]], rcut2, n_exp, eps, shift)
            fx += gx
            fy += gy
            ui += u
        forces[i, 0] = fx
        forces[i, 1] = fy
        upot += 0.5 * ui
    return upot


@numba.njit(cache=True)
def _forces_all_pairs(pos, species, box, sig2, rcut2, n_exp, eps, shift, forces):
    n = pos.shape[0]
    upot = 0.0
    for i in range(n):
        fx = 0.0
        fy = 0.0
        ui = 0.0
        xi = pos[i, 0]
        yi = pos[i, 1]
        si = species[i]
        for j in range(n):
            if j == i:
                continue
            dx = _min_image(xi - pos[j, 0], box)
            dy = _min_image(yi - pos[j, 1], box)
            gx, gy, u = _pair(dx, dy, sig2[si, species[j]], rcut2, n_exp, eps, shift)
            fx += gx
            fy += gy
            ui += u
        forces[i, 0] = fx
        forces[i, 1] = fy
        upot += 0.5 * ui
    return upot


@dataclass
class ForceField:
    """Precomputed kernel arguments for a potential and neighbor skin."""

    spec: PotentialSpec
    skin: float = 0.3

    def __post_init__(self):
        if self.skin < 0:
            raise ValueError("skin must be non-negative")
        psig = self.spec.pair_sigma()
        self.sig2 = psig ** 2
        self.rcut2 = self.spec.r_cut ** 2
        self.shift = self.spec.r_cut ** -self.spec.exponent
        self.rlist2 = (self.spec.r_cut * psig + self.skin) ** 2
        self.cell_min = self.spec.max_range() + self.skin

    def n_cells(self, box):
        return int(box // self.cell_min)

    def kernel_args(self):
        return (self.sig2, self.rcut2, int(self.spec.exponent), float(self.spec.epsilon),
                self.shift)


@dataclass
class NeighborList:
    start: np.ndarray
    index: np.ndarray
    reference: np.ndarray  # wrapped positions at build time
    used_cells: bool

    def pairs_of(self, i):
        return self.index[self.start[i]:self.start[i + 1]]


def build_cells_and_neighbors(positions, species, box, field: ForceField) -> NeighborList:
    """Neighbor list of every pair within ``r_cut*sigma_XY + skin``.

    Uses a cell list with cell edge at least the largest list radius; boxes
    with fewer than three cells per axis fall back to an all-pairs sweep.
    """
    pos = np.ascontiguousarray(positions, dtype=float)
    species = np.ascontiguousarray(species, dtype=np.int64)
    if box < 2.0 * field.cell_min:
        raise ValueError("box must exceed twice the neighbor-list radius (minimum image)")
    ncell = field.n_cells(box)
    if ncell >= MIN_CELLS:
        start, idx = _neighbors_cells(pos, species, float(box), field.rlist2, ncell)
    else:
        start, idx = _neighbors_all_pairs(pos, species, float(box), field.rlist2)
    return NeighborList(start, idx, pos.copy(), ncell >= MIN_CELLS)


def needs_rebuild(nlist: NeighborList, positions, box, skin) -> bool:
    d = positions - nlist.reference
    d -= box * np.floor(d / box + 0.5)
    return bool(np.max(np.einsum("ij,ij->i", d, d), initial=0.0) > (0.5 * skin) ** 2)


def compute_forces(positions, species, box, field: ForceField, nlist: NeighborList | None = None):
    """Forces and total potential energy; all-pairs when ``nlist`` is None."""
    pos = np.ascontiguousarray(positions, dtype=float)
    species = np.ascontiguousarray(species, dtype=np.int64)
    forces = np.empty_like(pos)
    if nlist is None:
        u = _forces_all_pairs(pos, species, float(box), *field.kernel_args(), forces)
    else:
        u = _forces_neighbors(pos, species, float(box), nlist.start, nlist.index,
                              *field.kernel_args(), forces)
    return forces, u
