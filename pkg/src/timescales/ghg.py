"""Greenhouse-gas toy models: GWP, methane decay, compartment feedback.

Two interaction presets are provided. ``clathrate`` tracks excess CO2
``c``, excess methane ``m`` and atmospheric/oceanic temperature anomalies;
ocean warming releases methane with gain ``beta_f``. ``albedo`` replaces
the gases by the ice-free area ``a``, which grows with ocean warming and
heats the atmosphere. All rate defaults are illustrative, in units of
years.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy import integrate

from .core import BracketError, TimeSeries, eigenvalues_small, find_root_bisect, integrate_adaptive

METHANE_HALF_LIFE = 7.0  # years
METHANE_POTENCY = 84.0   # heating rate of methane relative to CO2
# clathrate phase data: 13 C threshold at 100 at, from 5 C ambient; +23 C needed at 4000 m
PHASE_THRESHOLD_100AT = 13.0
AMBIENT_TROPICAL = 5.0
DEEP_RELEASE_INCREASE = 23.0
DIVERGENCE_FACTOR = 1e3
DEFAULT_HORIZON = 500.0


def methane_decay(m0, t_years, half_life=METHANE_HALF_LIFE):
    if np.any(np.asarray(m0) < 0):
        raise ValueError("m0 must be non-negative")
    return m0 * 2.0 ** (-np.asarray(t_years, dtype=float) / half_life)


def superposition_heating(c, m, kappa, potency=METHANE_POTENCY):
    """Independent heating of both gases, ``kappa c + potency kappa m``."""
    return kappa * c + potency * kappa * m


# --- global warming potential ------------------------------------------------

@dataclass(frozen=True)
class Abundance:
    """Abundance profile of unit initial excess: exponential decay or constant."""

    half_life: float = math.inf

    def __post_init__(self):
        if not self.half_life > 0:
            raise ValueError("half-life must be positive")

    def __call__(self, t):
        if math.isinf(self.half_life):
            return np.ones_like(np.asarray(t, dtype=float))
        return 2.0 ** (-np.asarray(t, dtype=float) / self.half_life)

    def integral(self, TH) -> float:
        if math.isinf(self.half_life):
            return float(TH)
        k = math.log(2.0) / self.half_life
        return -math.expm1(-k * TH) / k


@dataclass(frozen=True)
class GwpSpec:
    TH: float
    gas: Abundance = Abundance(METHANE_HALF_LIFE)
    reference: Abundance = Abundance()
    a_ratio: float = 1.0

    def __post_init__(self):
        if not self.TH > 0:
            raise ValueError("time horizon must be positive")


def gwp(spec: GwpSpec) -> float:
    """Ratio of time-integrated forcing of a gas to that of the reference gas."""
    num, _ = integrate.quad(spec.gas, 0.0, spec.TH, epsabs=0.0, epsrel=1e-12)
    den, _ = integrate.quad(spec.reference, 0.0, spec.TH, epsabs=0.0, epsrel=1e-12)
    if den == 0:
        raise ZeroDivisionError("reference forcing integrates to zero")
    return spec.a_ratio * num / den


def gwp_closed_form(spec: GwpSpec) -> float:
    return spec.a_ratio * spec.gas.integral(spec.TH) / spec.reference.integral(spec.TH)


# --- compartment models --------------------------------------------------------

CLATHRATE_RATES = {
    "lam_c": 0.01,                              # CO2 uptake by sinks
    "lam_m": math.log(2.0) / METHANE_HALF_LIFE,  # total methane loss
    "ox_fraction": 0.9,                          # share of methane loss oxidised to CO2
    "kappa": 0.01,                               # heating per unit CO2 excess
    "potency": METHANE_POTENCY,
    "rho_out": 0.5,                              # out-radiation of atmospheric anomaly
    "stir": 0.2,                                 # atmosphere-ocean exchange
    "h": 1.0 / 400.0,                            # heat capacity ratio atmosphere/ocean
    "beta_f": 0.0,
    "T_thr": PHASE_THRESHOLD_100AT - AMBIENT_TROPICAL,
    "emissions": 0.1,
}

ALBEDO_RATES = {
    "beta_a": 0.05,    # heating per unit ice-free area
    "rho_out": 0.5,
    "stir": 0.2,
    "h": 1.0 / 400.0,
    "beta_f": 0.0,
    "T_thr": 0.0,
    "emissions": 0.01,  # external forcing on the atmosphere
}

PRESETS = {"clathrate": CLATHRATE_RATES, "albedo": ALBEDO_RATES}


@dataclass(frozen=True)
class LinearCompartmentModel:
    """``x' = A x + b`` with one feedback entry ``A[row, col] = beta_f``.

    In threshold mode the feedback acts as ``beta_f (x[col] - T_thr)_+``
    instead of ``beta_f x[col]``.
    """

    names: tuple[str, ...]
    A: np.ndarray
    b: np.ndarray
    beta_f: float = 0.0
    feedback: tuple[int, int] = (0, 0)
    T_thr: float = 0.0
    preset: str = "custom"
    rates: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        n = len(self.names)
        if A.shape != (n, n) or np.asarray(self.b).shape != (n,):
            raise ValueError("matrix and input must match the state names")
        if not np.all(np.isfinite(A)):
            raise ValueError("system matrix must be finite")
        if self.beta_f < 0:
            raise ValueError("feedback gain must be non-negative")

    def with_gain(self, beta_f) -> "LinearCompartmentModel":
        A = np.array(self.A, dtype=float)
        A[self.feedback] = beta_f
        return replace(self, A=A, beta_f=float(beta_f),
                       rates={**self.rates, "beta_f": float(beta_f)})

    def gain_family(self):
        return lambda g: self.with_gain(g).A


def build_interaction_model(preset="clathrate", overrides=None) -> LinearCompartmentModel:
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    rates = dict(PRESETS[preset])
    unknown = set(overrides or {}) - set(rates)
    if unknown:
        raise KeyError(f"unknown rate(s) for {preset}: {sorted(unknown)}")
    rates.update({k: float(v) for k, v in (overrides or {}).items()})
    r = rates
    if preset == "clathrate":
        lam_ox = r["ox_fraction"] * r["lam_m"]
        A = np.array([
            [-r["lam_c"], lam_ox, 0.0, 0.0],
            [0.0, -r["lam_m"], 0.0, r["beta_f"]],
            [r["kappa"], r["potency"] * r["kappa"], -r["rho_out"] - r["stir"], r["stir"]],
            [0.0, 0.0, r["h"] * r["stir"], -r["h"] * r["stir"]],
        ])
        b = np.array([r["emissions"], 0.0, 0.0, 0.0])
        return LinearCompartmentModel(("c", "m", "T_at", "T_oc"), A, b, r["beta_f"], (1, 3),
                                      r["T_thr"], preset, rates)
    A = np.array([
        [0.0, 0.0, r["beta_f"]],
        [r["beta_a"], -r["rho_out"] - r["stir"], r["stir"]],
        [0.0, r["h"] * r["stir"], -r["h"] * r["stir"]],
    ])
    b = np.array([0.0, r["emissions"], 0.0])
    return LinearCompartmentModel(("a", "T_at", "T_oc"), A, b, r["beta_f"], (0, 2),
                                  r["T_thr"], preset, rates)


@dataclass
class StabilityReport:
    eigenvalues: np.ndarray
    max_real_part: float
    stable: bool

    def to_dict(self):
        return {"eigs": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
                "max_real_part": self.max_real_part, "stable": self.stable}


def stability(model) -> StabilityReport:
    """Eigenvalues of the linear system; stable iff every real part is negative."""
    A = model.A if isinstance(model, LinearCompartmentModel) else np.asarray(model, float)
    eigs = eigenvalues_small(A)
    top = float(np.max(eigs.real))
    return StabilityReport(eigs, top, top < 0)


def critical_gain(family, bracket=(0.0, 10.0), tol=1e-6) -> float:
    """Gain at which the leading eigenvalue of ``family(g)`` crosses zero.

    Raises ``BracketError`` when the leading real part keeps one sign over
    the bracket.
    """
    def top(g):
        return stability(family(g)).max_real_part

    lo, hi = bracket
    if top(lo) * top(hi) >= 0:
        raise BracketError(f"no stability crossing on [{lo}, {hi}]")
    return find_root_bisect(top, lo, hi, tol=tol)


@numba.njit(cache=True)
def _rhs(t, y, p, out):
    # p = [n, threshold, row, col, beta, T_thr, A (n*n), b (n)]
    n = int(p[0])
    for i in range(n):
        acc = p[6 + n * n + i]
        for j in range(n):
            acc += p[6 + i * n + j] * y[j]
        out[i] = acc
    if p[1] > 0.5:
        excess = y[int(p[3])] - p[5]
        if excess > 0.0:
            out[int(p[2])] += p[4] * excess


def _pack(model: LinearCompartmentModel, b, threshold: bool) -> np.ndarray:
    A = np.array(model.A, dtype=float)
    if threshold:
        A[model.feedback] = 0.0
    n = len(model.names)
    head = [n, 1.0 if threshold else 0.0, model.feedback[0], model.feedback[1],
            model.beta_f, model.T_thr]
    return np.concatenate([head, A.ravel(), b])


@dataclass
class SimOutcome:
    trajectory: TimeSeries
    classification: str  # "bounded" or "runaway"
    divergence_time: float | None
    bound: float


def simulate_compartments(model: LinearCompartmentModel, emissions=None, horizon=DEFAULT_HORIZON,
                          threshold=False, x0=None, emission_years=math.inf, n_out=501,
                          bound=None, rel_tol=1e-8, abs_tol=1e-10) -> SimOutcome:
    """Integrate the compartment model and classify the outcome.

    ``emissions`` overrides the magnitude of the preset input (the input
    vector is scaled so its largest entry equals it) and switches off after
    ``emission_years``. The run stops early, and is called a runaway, once
    any state exceeds ``bound`` (default ``1e3 max(|x0|_inf, 1)``).
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = len(model.names)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bound is None:
        bound = DIVERGENCE_FACTOR * max(float(np.max(np.abs(x), initial=0.0)), 1.0)
    b_on = np.asarray(model.b, dtype=float)
    if emissions is not None:
        peak = np.max(np.abs(b_on))
        b_on = b_on * (emissions / peak) if peak > 0 else b_on
    grid = np.linspace(0.0, horizon, n_out)
    rows = [x.copy()]
    times = [0.0]
    params_on = _pack(model, b_on, threshold)
    params_off = _pack(model, np.zeros(n), threshold)
    divergence = None
    chunk_edges = np.unique(np.concatenate([grid[::max(1, (n_out - 1) // 20)], [horizon],
                                            [emission_years] if emission_years < horizon else []]))
    for lo, hi in zip(chunk_edges[:-1], chunk_edges[1:]):
        p = params_on if lo < emission_years else params_off
        t_eval = np.unique(np.concatenate([[lo], grid[(grid > lo) & (grid <= hi)], [hi]]))
        ts = integrate_adaptive(_rhs, x, lo, hi, rel_tol, abs_tol, t_eval=t_eval, params=p)
        keep = np.isin(ts.times[1:], grid)
        times.extend(ts.times[1:][keep])
        rows.extend(ts.values[1:][keep])
        x = ts.values[-1].copy()
        over = np.nonzero(np.max(np.abs(ts.values[1:]), axis=1) > bound)[0]
        if len(over):
            divergence = float(ts.times[1:][over[0]])
            break
    traj = TimeSeries(np.array(times), np.array(rows), columns=model.names,
                      meta={"preset": model.preset, "beta_f": model.beta_f,
                            "threshold": bool(threshold)})
    return SimOutcome(traj, "runaway" if divergence is not None else "bounded", divergence, bound)


def runaway_onset(model: LinearCompartmentModel, bracket, horizon, x0=None, tol=1e-4) -> float:
    """Smallest feedback gain whose simulation is classified as runaway.

    Bisection on the simulated classification (no eigenvalues involved),
    threshold off and no emissions, to relative bracket width ``tol``.
    """
    lo, hi = map(float, bracket)
    if x0 is None:
        x0 = np.zeros(len(model.names))
        x0[model.feedback[1]] = 1.0

    def runaway(g):
        out = simulate_compartments(model.with_gain(g), emissions=0.0, horizon=horizon, x0=x0,
                                    n_out=201)
        return out.classification == "runaway"

    if runaway(lo) or not runaway(hi):
        raise BracketError("bracket must run from bounded to runaway")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if runaway(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
