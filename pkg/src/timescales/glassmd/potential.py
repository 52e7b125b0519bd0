"""Binary inverse-power-law pair potential (shifted, truncated)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

A, B = 0, 1
SPECIES_NAMES = ("A", "B")


class OverlapError(ValueError):
    """Zero pair distance."""


@dataclass(frozen=True)
class PotentialSpec:
    """``u(r) = eps (r^-n - r_cut^-n)`` for reduced distance ``r < r_cut``.

    The reduced distance of a pair is ``|r_ij| / (sigma * sigma_XY)``. The
    force is the exact derivative inside the cutoff and zero beyond it, so
    it jumps by ``n eps r_cut^(-n-1) / (sigma sigma_XY)`` at the cutoff.
    """

    exponent: int = 18
    r_cut: float = 1.5
    epsilon: float = 1.0
    sigma: float = 1.0
    sigma_AA: float = 1.1
    sigma_AB: float = 0.9
    sigma_BB: float = 0.9

    def __post_init__(self):
        if self.exponent <= 0 or int(self.exponent) != self.exponent:
            raise ValueError("exponent must be a positive integer")
        if not self.r_cut > 1:
            raise ValueError("r_cut must exceed 1")
        if min(self.sigma_AA, self.sigma_AB, self.sigma_BB, self.sigma, self.epsilon) <= 0:
            raise ValueError("length and energy scales must be positive")

    def pair_sigma(self) -> np.ndarray:
        """Absolute pair length scales ``sigma * sigma_XY`` indexed by species."""
        s = self.sigma
        return np.array([[s * self.sigma_AA, s * self.sigma_AB],
                         [s * self.sigma_AB, s * self.sigma_BB]])

    def max_range(self) -> float:
        return self.r_cut * float(self.pair_sigma().max())


def pair_energy(r_reduced, spec: PotentialSpec = PotentialSpec()):
    r = np.asarray(r_reduced, dtype=float)
    if np.any(r <= 0):
        raise OverlapError("pair distance must be positive")
    n = spec.exponent
    with np.errstate(over="ignore"):
        u = spec.epsilon * (r ** -n - spec.r_cut ** -n)
    out = np.where(r < spec.r_cut, u, 0.0)
    return out if out.ndim else float(out)


def pair_force_magnitude(r_reduced, spec: PotentialSpec = PotentialSpec(), sigma_ij=1.0):
    """Repulsive force along the pair separation, ``-du/d|r_ij|``."""
    r = np.asarray(r_reduced, dtype=float)
    if np.any(r <= 0):
        raise OverlapError("pair distance must be positive")
    n = spec.exponent
    with np.errstate(over="ignore"):
        f = n * spec.epsilon * r ** (-n - 1) / (spec.sigma * sigma_ij)
    out = np.where(r < spec.r_cut, f, 0.0)
    return out if out.ndim else float(out)
