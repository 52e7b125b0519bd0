"""Eight-pool exocytosis cascade driven by microdomain and cytosolic calcium.

Pools ``N1..N4`` carry 0-3 bound calcium ions on the way to fusion, ``N5``
and ``N6`` hold the resupply reserve, ``NF`` counts fused and ``NR``
released granules. For fixed calcium levels the system is affine in the
pool state, ``dN/dt = M(C_md, C_i) N + b(C_i)``, which the resting-state
solver and the segment-wise simulator both exploit.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from importlib import resources

import numba
import numpy as np
from scipy.integrate import solve_ivp

from .core import StiffnessError, TimeSeries, integrate_adaptive, solve_linear

POOLS = ("N1", "N2", "N3", "N4", "N5", "N6", "NF", "NR")
OUTPUT_COLUMNS = POOLS + ("SR", "C_md", "C_i")
N_POOLS = 8
# extra integrated channels: net source, u2*NF (release), u3*NR (decay)
N_AUG = N_POOLS + 3
NEG_FLOOR = -1e-9


class Variant(str, Enum):
    PAPER_VERBATIM = "paper_verbatim"
    CORRECTED = "mass_action_corrected"


@dataclass(frozen=True)
class KineticParams:
    k1: float = 20.0       # 1/(uM s)
    k_1: float = 100.0     # 1/s
    r1: float = 0.6
    r_1: float = 1.0
    r2_0: float = 0.006
    r_2: float = 0.001
    r3_0: float = 1.205
    r_3: float = 0.0001
    u1: float = 2000.0
    u2: float = 3.0
    u3: float = 0.02
    Kp: float = 2.3        # uM

    def __post_init__(self):
        bad = [f.name for f in fields(self) if not getattr(self, f.name) > 0]
        if bad:
            raise ValueError(f"kinetic parameters must be positive: {', '.join(bad)}")

    @classmethod
    def from_dict(cls, d) -> "KineticParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown kinetic parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self):
        return asdict(self)

    def rate_constants(self):
        return [self.k_1, self.r1, self.r_1, self.r2_0, self.r_2, self.r3_0, self.r_3,
                self.u1, self.u2, self.u3]


@dataclass(frozen=True)
class CalciumProtocol:
    """Step or pulse-train stimulus.

    ``C_md`` sits at ``C_md_basal`` before ``t_on`` and switches to
    ``C_md_high`` (for the whole run, or during the first ``duty`` fraction
    of each of ``n_pulses`` periods). The cytosolic level follows as
    ``C_i = C_i_basal + ratio_i_to_md * C_md``.
    """

    kind: str = "step"
    C_md_high: float = 10.0
    C_md_basal: float = 0.1
    C_i_basal: float = 0.05
    ratio_i_to_md: float = 0.01
    t_on: float = 60.0
    n_pulses: int = 5
    period: float = 120.0
    duty: float = 0.5

    def __post_init__(self):
        if self.kind not in ("step", "pulse_train"):
            raise ValueError("protocol kind must be 'step' or 'pulse_train'")
        if min(self.C_md_high, self.C_md_basal, self.C_i_basal, self.ratio_i_to_md) < 0:
            raise ValueError("calcium levels must be non-negative")
        if not 0 < self.duty < 1:
            raise ValueError("duty must lie in (0, 1)")
        if self.period <= 0 or self.n_pulses < 1 or self.t_on < 0:
            raise ValueError("pulse timing must be positive")

    @classmethod
    def from_dict(cls, d) -> "CalciumProtocol":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise KeyError(f"unknown protocol field(s): {sorted(unknown)}")
        return cls(**d)

    def cytosolic(self, c_md):
        return self.C_i_basal + self.ratio_i_to_md * c_md

    def segments(self, t_end):
        """Constant-calcium pieces ``(t_start, t_stop, C_md)`` covering ``[0, t_end]``."""
        edges = [(0.0, self.C_md_basal)]
        if self.kind == "step":
            edges.append((self.t_on, self.C_md_high))
        else:
            for k in range(self.n_pulses):
                start = self.t_on + k * self.period
                edges.append((start, self.C_md_high))
                edges.append((start + self.duty * self.period, self.C_md_basal))
        out = []
        for (t_a, c), (t_b, _) in zip(edges, edges[1:] + [(math.inf, None)]):
            lo, hi = max(t_a, 0.0), min(t_b, t_end)
            if hi > lo:
                out.append((lo, hi, c))
        return out

    def levels(self, t):
        """Vectorized ``(C_md, C_i)`` at times ``t`` (right-continuous)."""
        t = np.asarray(t, dtype=float)
        c_md = np.full(t.shape, self.C_md_basal)
        for lo, hi, c in self.segments(float(np.max(t)) + 1.0):
            c_md[(t >= lo) & (t < hi)] = c
        return c_md, self.cytosolic(c_md)


def default_protocol_params() -> dict:
    text = resources.files("timescales.configs").joinpath("exo_default.json").read_text()
    params = json.loads(text)
    params.pop("schema_version", None)
    return params


def rates(C_i, params: KineticParams = KineticParams()):
    """Calcium-dependent resupply and priming rates ``(r2, r3)``."""
    if C_i < 0:
        raise ValueError("C_i must be non-negative")
    sat = C_i / (C_i + params.Kp)
    return params.r2_0 * sat, params.r3_0 * sat


def _param_vector(params: KineticParams, c_md, c_i, variant) -> np.ndarray:
    r2, r3 = rates(c_i, params)
    corrected = 1.0 if Variant(variant) is Variant.CORRECTED else 0.0
    return np.array([params.k1, params.k_1, params.r1, params.r_1, r2, params.r_2, r3,
                     params.r_3, params.u1, params.u2, params.u3, c_md, corrected])


@numba.njit(cache=True)
def _rhs(t, y, p, out):
    k1, km1, r1, rm1, r2, rm2, r3, rm3, u1, u2, u3, c, corr = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12])
    n1, n2, n3, n4, n5, n6, nf, nr = y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]
    if corr > 0.5:
        back1 = km1          # unbinding in the N1 <- N2 and N3 <- N4 steps
        to_reserve = rm1     # N1 -> N5 at the same rate N1 loses to it
    else:
        back1 = k1
        to_reserve = r1
    out[0] = -(3.0 * k1 * c + rm1) * n1 + back1 * n2 + r1 * n5
    out[1] = 3.0 * k1 * c * n1 - (2.0 * k1 * c + km1) * n2 + 2.0 * km1 * n3
    out[2] = 2.0 * k1 * c * n2 - (k1 * c + 2.0 * km1) * n3 + 3.0 * back1 * n4
    out[3] = k1 * c * n3 - (3.0 * km1 + u1) * n4
    out[4] = to_reserve * n1 - (r1 + rm2) * n5 + r2 * n6
    out[5] = r3 + rm2 * n5 - (rm3 + r2) * n6
    out[6] = u1 * n4 - u2 * nf
    out[7] = u2 * nf - u3 * nr
    if y.shape[0] > N_POOLS:
        out[8] = r3 - rm3 * n6 - u3 * nr
        out[9] = u2 * nf
        out[10] = u3 * nr


def _check_state(state):
    s = np.asarray(state, dtype=float)
    if s.shape != (N_POOLS,):
        raise ValueError(f"pool state must have {N_POOLS} components")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("pool state must be finite and non-negative")
    return s


def derivatives(state, C_md, C_i, params: KineticParams = KineticParams(),
                variant=Variant.CORRECTED) -> np.ndarray:
    """Time derivative of the eight pools at fixed calcium levels."""
    s = _check_state(state)
    if C_md < 0 or C_i < 0:
        raise ValueError("calcium levels must be non-negative")
    out = np.empty(N_POOLS)
    _rhs(0.0, s, _param_vector(params, C_md, C_i, variant), out)
    return out


def linear_system(C_md, C_i, params: KineticParams = KineticParams(),
                  variant=Variant.CORRECTED):
    """``(M, b)`` with ``dN/dt = M N + b``, read off the right-hand side column by column."""
    p = _param_vector(params, C_md, C_i, variant)
    b = np.empty(N_POOLS)
    _rhs(0.0, np.zeros(N_POOLS), p, b)
    M = np.empty((N_POOLS, N_POOLS))
    col = np.empty(N_POOLS)
    for j in range(N_POOLS):
        e = np.zeros(N_POOLS)
        e[j] = 1.0
        _rhs(0.0, e, p, col)
        M[:, j] = col - b
    return M, b


def resting_state(C_i_basal, params: KineticParams = KineticParams(),
                  variant=Variant.CORRECTED, C_md_basal=0.1) -> np.ndarray:
    """Steady pools at basal calcium, from ``M N = -b``."""
    if C_i_basal < 0:
        raise ValueError("C_i_basal must be non-negative")
    M, b = linear_system(C_md_basal, C_i_basal, params, variant)
    x = solve_linear(M, -b)
    # exact zeros come out as -0.0 or tiny negatives from rounding
    return np.where(np.abs(x) <= 1e-14 * max(1.0, np.abs(x).max()), 0.0, x)


def _radau_segment(y0, lo, hi, t_eval, p, rel_tol, abs_tol):
    # at fixed calcium the augmented system is affine, y' = J y + f(0)
    f0 = np.empty(N_AUG)
    _rhs(lo, np.zeros(N_AUG), p, f0)
    jac = np.empty((N_AUG, N_AUG))
    unit = np.zeros(N_AUG)
    for i in range(N_AUG):
        unit[i] = 1.0
        _rhs(lo, unit, p, jac[:, i])
        jac[:, i] -= f0
        unit[i] = 0.0
    sol = solve_ivp(lambda t, y: jac @ y + f0, (lo, hi), y0, method="Radau",
                    dense_output=True, rtol=rel_tol, atol=abs_tol, jac=jac)
    if not sol.success:
        raise StiffnessError(f"Radau failed on [{lo:g}, {hi:g}]: {sol.message}", lo)
    vals = sol.sol(t_eval).T
    vals[-1] = sol.y[:, -1]
    return vals, len(sol.t) - 1


def simulate(protocol: CalciumProtocol = CalciumProtocol(),
             params: KineticParams = KineticParams(), variant=Variant.CORRECTED,
             t_end=4 * 3600.0, dt_out=1.0, initial=None, rel_tol=1e-8,
             abs_tol=1e-10, method="radau") -> TimeSeries:
    """Integrate the cascade through the calcium protocol, starting at rest.

    ``method`` is ``"radau"`` (implicit, scipy) or ``"dopri5"`` (the explicit
    core integrator). The fastest and slowest rates differ by about seven
    orders of magnitude, so the explicit method is pinned to millisecond steps
    and only suits runs of a few hours.

    Output columns are the eight pools, the secretion rate ``SR = u2 NF``
    and the calcium levels. ``meta`` holds running integrals of the net
    source (``net_source``), of ``SR`` (``released``) and of ``u3 NR``
    (``decayed``), integrated alongside the pools.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if method not in ("radau", "dopri5"):
        raise ValueError(f"unknown method {method!r}")
    variant = Variant(variant)
    segs = protocol.segments(t_end)
    if initial is None:
        initial = resting_state(protocol.cytosolic(segs[0][2]), params, variant, segs[0][2])
    y = np.zeros(N_AUG)
    y[:N_POOLS] = _check_state(initial)
    n_out = int(math.floor(t_end / dt_out + 1e-9)) + 1
    grid = dt_out * np.arange(n_out)
    if grid[-1] < t_end:
        grid = np.append(grid, t_end)
    rows = np.empty((len(grid), N_AUG))
    steps = 0
    for lo, hi, c_md in segs:
        p = _param_vector(params, c_md, protocol.cytosolic(c_md), variant)
        inside = (grid >= lo) & (grid < hi) if hi < t_end else (grid >= lo) & (grid <= hi)
        t_eval = np.concatenate([[lo], grid[inside & (grid > lo)], [hi]])
        t_eval = np.unique(t_eval)
        if method == "dopri5":
            ts = integrate_adaptive(_rhs, y, lo, hi, rel_tol, abs_tol, t_eval=t_eval, params=p)
            steps += ts.meta["accepted_steps"]
            vals = ts.values
        else:
            vals, n = _radau_segment(y, lo, hi, t_eval, p, rel_tol, abs_tol)
            steps += n
        sel = np.searchsorted(t_eval, grid[inside])
        rows[inside] = vals[sel]
        y = vals[-1].copy()
    pools = rows[:, :N_POOLS]
    if np.any(pools < NEG_FLOOR):
        raise ValueError("pool went negative beyond the numerical floor")
    c_md, c_i = protocol.levels(grid)
    sr = params.u2 * pools[:, 6]
    values = np.column_stack([pools, sr, c_md, c_i])
    return TimeSeries(grid, values, columns=OUTPUT_COLUMNS, meta={
        "variant": variant.value,
        "net_source": rows[:, 8], "released": rows[:, 9], "decayed": rows[:, 10],
        "accepted_steps": steps})


def mass_balance_rate(series: TimeSeries) -> float:
    """Largest ``|d/dt (sum N - net source integral)|`` by finite differences.

    Zero for the corrected variant up to integration error; the verbatim
    equations leak through the N1 <-> N5 exchange and the binding chain.
    """
    total = series.values[:, :N_POOLS].sum(axis=1) - series.meta["net_source"]
    return float(np.max(np.abs(np.diff(total) / np.diff(series.times))))


@dataclass
class PhaseMetrics:
    t_peak: float
    SR_peak: float
    t_nadir: float
    SR_nadir: float
    SR_plateau: float
    monophasic: bool
    end_slope_per_min: float  # relative change of SR per minute at the end

    def to_dict(self):
        return asdict(self)


def phase_metrics(secretion: TimeSeries, t_on=0.0, column="SR") -> PhaseMetrics:
    """Peak, nadir and plateau of a secretion-rate series.

    The peak is the first local maximum at or after ``t_on``; the nadir is the
    minimum between the peak and the final 10% window; the plateau is the
    mean over that window.
    """
    t = secretion.times
    sr = secretion.column(column) if secretion.columns else secretion.values[:, 0]
    if t[-1] - t[0] < 1800.0 - 1e-9:
        raise ValueError("phase metrics need at least 30 simulated minutes")
    window = t >= t[-1] - 0.1 * (t[-1] - t[0])
    plateau = float(sr[window].mean())
    w0 = int(np.argmax(window))
    # end slope from a line through the final window, per minute relative to plateau
    slope = np.polyfit(t[window], sr[window], 1)[0] * 60.0
    end_slope = float(slope / plateau) if plateau != 0 else 0.0
    after = np.nonzero(t >= t_on)[0]
    peak = None
    for i in after:
        if i >= w0:
            break
        # the first sample at or after onset has no left neighbour to compare with
        rising = i == after[0] or sr[i] >= sr[i - 1]
        if rising and sr[i] > sr[i + 1]:
            peak = i
            break
    if peak is None:
        return PhaseMetrics(math.nan, math.nan, math.nan, math.nan, plateau, True, end_slope)
    seg = slice(peak, w0)
    nadir = peak + int(np.argmin(sr[seg]))
    return PhaseMetrics(float(t[peak]), float(sr[peak]), float(t[nadir]), float(sr[nadir]),
                        plateau, False, end_slope)


def stiffness_ratio(params: KineticParams = KineticParams()) -> float:
    """Largest over smallest first-order rate constant (binding rate excluded)."""
    r = params.rate_constants()
    return max(r) / min(r)
