"""Displacement statistics, characteristic times and density scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import TimeSeries
from .configuration import DIM, Configuration
from .potential import A, B

MOBILE_DISPLACEMENT = 0.5  # sigma


@dataclass(frozen=True)
class StatePoint:
    rho: float
    T: float
    d: int = DIM

    def __post_init__(self):
        if not (self.rho > 0 and self.T > 0):
            raise ValueError("density and temperature must be positive")


def msd(times, unwrapped, species, multi_origin=False, lags=None,
        remove_com=False) -> TimeSeries:
    """Mean squared displacement of unwrapped positions versus lag time.

    ``unwrapped`` has shape (samples, N, d). By default the first sample is
    the only time origin and every later sample gives one lag. With
    ``multi_origin`` each lag (default: every offset from the first sample)
    is averaged over all sample pairs separated by exactly that lag, so a
    sampling grid of repeated log-spaced bursts gives log-spaced lags with
    many origins. ``remove_com`` measures positions relative to the centre
    of mass of each sample (equal masses), which discards the random walk a
    thermostat imposes on the whole system. Columns are
    ``msd_total, msd_A, msd_B``; lag zero is omitted.
    """
    times = np.asarray(times, dtype=float)
    r = np.asarray(unwrapped, dtype=float)
    species = np.asarray(species)
    if r.ndim != 3 or len(r) != len(times):
        raise ValueError("unwrapped must have shape (samples, N, d) matching times")
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    if remove_com:
        r = r - r.mean(axis=1, keepdims=True)
    masks = [np.ones(len(species), bool), species == A, species == B]
    if not multi_origin:
        d2 = np.sum((r[1:] - r[0]) ** 2, axis=2)
        lag_out = times[1:] - times[0]
    else:
        targets = times[1:] - times[0] if lags is None else np.asarray(lags, dtype=float)
        span = times[-1] - times[0]
        tol = 1e-9 * max(span, 1.0)
        rows, lag_out = [], []
        for lag in targets:
            j = np.searchsorted(times, times + lag - tol)
            ok = (j < len(times))
            ok[ok] = np.abs(times[j[ok]] - times[ok] - lag) <= tol
            if not ok.any():
                continue
            i_idx = np.nonzero(ok)[0]
            disp = r[j[i_idx]] - r[i_idx]
            rows.append(np.mean(np.sum(disp ** 2, axis=2), axis=0))
            lag_out.append(lag)
        d2 = np.array(rows).reshape(len(rows), r.shape[1])
        lag_out = np.array(lag_out)
    cols = [d2[:, m].mean(axis=1) if m.any() else np.full(len(lag_out), np.nan) for m in masks]
    return TimeSeries(lag_out, np.column_stack(cols), columns=("msd_total", "msd_A", "msd_B"))


def burst_sampling(n_steps, max_lag_steps, origin_every, per_decade=10):
    """Snapshot steps for log-spaced lags up to ``max_lag_steps`` repeated from many origins.

    Returns ``(snapshot_steps, lag_steps)``.
    """
    if max_lag_steps > n_steps or origin_every <= 0:
        raise ValueError("need max_lag_steps <= n_steps and a positive origin spacing")
    offsets = log_spaced_steps(max_lag_steps, per_decade)
    origins = np.arange(0, n_steps - max_lag_steps + 1, origin_every)
    steps = np.unique((origins[:, None] + offsets[None, :]).ravel())
    return steps, offsets[1:]


def local_slopes(lag, values):
    """d log(values) / d log(lag) by centered differences on the sample grid."""
    return np.gradient(np.log(values), np.log(lag))


@dataclass
class DiffusionFit:
    D: float
    converged: bool
    loglog_slope: float
    window: tuple[float, float]


def diffusion_coefficient(lag, r2, d=DIM, slope_tol=0.2) -> DiffusionFit:
    """Diffusion constant from ``R^2 = 2 d D t`` over the final decade of lag times.

    The fit is flagged as not converged (``D`` is NaN) when the log-log
    slope over that window is further than ``slope_tol`` from 1.
    """
    lag = np.asarray(lag, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    sel = (lag >= lag[-1] / 10.0) & (lag > 0) & (r2 > 0)
    if sel.sum() < 3:
        return DiffusionFit(math.nan, False, math.nan, (math.nan, math.nan))
    window = (float(lag[sel][0]), float(lag[sel][-1]))
    slope_ll = np.polyfit(np.log(lag[sel]), np.log(r2[sel]), 1)[0]
    if abs(slope_ll - 1.0) > slope_tol:
        return DiffusionFit(math.nan, False, float(slope_ll), window)
    slope = np.polyfit(lag[sel], r2[sel], 1)[0]
    return DiffusionFit(float(slope / (2 * d)), True, float(slope_ll), window)


@dataclass
class DisplacementField:
    vectors: np.ndarray
    magnitudes: np.ndarray
    species: np.ndarray
    mobile_fraction: float


def displacement_field(config_t0: Configuration, config_t: Configuration,
                       threshold=MOBILE_DISPLACEMENT) -> DisplacementField:
    """Per-particle unwrapped displacement between two configurations.

    ``mobile_fraction`` is the share of particles displaced by more than
    ``threshold`` (in units of sigma).
    """
    if config_t0.n != config_t.n or not np.array_equal(config_t0.species, config_t.species):
        raise ValueError("configurations must hold the same particles in the same order")
    vec = config_t.unwrapped - config_t0.unwrapped
    mag = np.hypot(vec[:, 0], vec[:, 1])
    return DisplacementField(vec, mag, config_t.species.copy(), float(np.mean(mag > threshold)))


def collision_time(statepoint: StatePoint, m=1.0, k_B=1.0) -> float:
    """Mean-field collision time ``0.1 rho^(-1/d) sqrt(m / (d k_B T))``."""
    d = statepoint.d
    return 0.1 * (1.0 / statepoint.rho) ** (1.0 / d) * math.sqrt(m / (d * k_B * statepoint.T))


@dataclass(frozen=True)
class ReducedScaling:
    Gamma: float
    gamma_scale: float
    time_scale: float
    length_scale: float


def reduced_scaling(statepoint: StatePoint, exponent=18, m=1.0, k_B=1.0) -> ReducedScaling:
    """Density-scaling variable ``Gamma = rho^(n/d) / T`` and reduced units.

    Lengths scale with ``rho^(-1/d)`` and times with
    ``rho^(-1/d) sqrt(m / (k_B T))``.
    """
    d = statepoint.d
    length = statepoint.rho ** (-1.0 / d)
    return ReducedScaling(
        Gamma=statepoint.rho ** (exponent / d) / statepoint.T,
        gamma_scale=exponent / d,
        time_scale=length * math.sqrt(m / (k_B * statepoint.T)),
        length_scale=length,
    )


def log_spaced_steps(n_steps, per_decade=10, first=1):
    """Distinct integer step counts from ``first`` to ``n_steps``, roughly log-spaced."""
    n_dec = math.log10(n_steps / first)
    raw = first * np.logspace(0, n_dec, int(math.ceil(n_dec * per_decade)) + 1)
    return np.unique(np.concatenate([[0], np.round(raw).astype(np.int64), [n_steps]]))
