"""Double-well temperature dynamics with a control parameter.

Two potentials are provided:

* ``coupled``: ``V(T, a) = T^2 (T-1)^2 + a^2``, a 2D gradient system with
  wells at (0, 0) and (1, 0) and a saddle at (1/2, 0).
* ``tilted``: ``V(T, a) = T^2 (T-1)^2 - a T``, where ``a`` is an external
  control. The low well flattens and vanishes at ``a = sqrt(3)/9``.

Stochastic runs use overdamped Langevin dynamics on T only.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib import resources

import numba
import numpy as np

from .core import TimeSeries, child_seeds, find_root_bisect, rng_stream
from .core.errors import BlowupError

LOW_T_MAX = 0.5  # basin threshold, T == 0.5 counts as low


class Mode(str, Enum):
    COUPLED = "coupled"
    TILTED = "tilted"


class Basin(str, Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class AlphaSchedule:
    """Piecewise-linear control path.

    ``a(t) = 0`` before ``t_change``; afterwards it rises at ``ramp_rate``
    and is clamped to ``[-alpha_max, alpha_max]``. If ``t_return`` is set,
    ``a`` falls from its value at ``t_return`` at ``return_rate`` until it
    reaches zero, and stays there.
    """

    t_change: float = 0.0
    ramp_rate: float = 0.0
    alpha_max: float = 0.0
    return_rate: float | None = None
    t_return: float | None = None

    def __post_init__(self):
        if self.t_change < 0:
            raise ValueError("t_change must be non-negative")
        if self.alpha_max < 0:
            raise ValueError("alpha_max must be non-negative")
        if self.t_return is not None:
            if self.return_rate is None or self.return_rate <= 0:
                raise ValueError("a return phase needs a positive return_rate")
            if self.t_return < self.t_change:
                raise ValueError("t_return precedes t_change")

    def _ramp(self, t):
        a = self.ramp_rate * np.maximum(t - self.t_change, 0.0)
        return np.clip(a, -self.alpha_max, self.alpha_max)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a = self._ramp(t)
        if self.t_return is not None:
            a_top = float(self._ramp(np.array(self.t_return)))
            back = a_top - math.copysign(1.0, a_top) * self.return_rate * (t - self.t_return)
            if a_top >= 0:
                back = np.maximum(back, 0.0)
            else:
                back = np.minimum(back, 0.0)
            a = np.where(t >= self.t_return, back, a)
        return a if a.ndim else float(a)


@dataclass(frozen=True)
class TippingParams:
    mode: Mode = Mode.TILTED
    noise: float = 0.0  # D, T^2 per unit time
    dt: float = 0.01
    steps: int = 1000
    schedule: AlphaSchedule = field(default_factory=AlphaSchedule)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.noise < 0:
            raise ValueError("noise amplitude must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 1:
            raise ValueError("steps must be positive")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        sched = d.pop("schedule", {})
        if not isinstance(sched, AlphaSchedule):
            sched = AlphaSchedule(**sched)
        return cls(schedule=sched, **d)

    def to_dict(self):
        d = asdict(self)
        d["mode"] = self.mode.value
        return d


@dataclass(frozen=True)
class TippingState:
    T: float
    alpha: float


def default_hysteresis_params() -> TippingParams:
    """Calibrated configuration shipped with the package."""
    text = resources.files("timescales.configs").joinpath("tipping_hysteresis.json").read_text()
    cfg = json.loads(text)
    cfg.pop("schema_version", None)
    cfg.pop("n_seeds", None)
    cfg.pop("T0", None)
    return TippingParams.from_dict(cfg)


def potential_value(T, alpha, mode=Mode.COUPLED):
    mode = Mode(mode)
    well = T * T * (T - 1.0) ** 2
    if mode is Mode.COUPLED:
        return well + alpha * alpha
    return well - alpha * T


def gradient(T, alpha, mode=Mode.COUPLED):
    """(dV/dT, dV/dalpha)."""
    mode = Mode(mode)
    dT = 2.0 * T * (T - 1.0) * (2.0 * T - 1.0)
    if mode is Mode.COUPLED:
        return dT, 2.0 * alpha
    return dT - alpha, 0.0 * alpha


def basin_of(T) -> Basin:
    return Basin.LOW if T <= LOW_T_MAX else Basin.HIGH


@dataclass
class FlowResult:
    series: TimeSeries
    basin: Basin
    diverged: bool


def gradient_flow(start: TippingState, dt, steps, mode=Mode.COUPLED) -> FlowResult:
    """Explicit Euler descent along ``-grad V``.

    In tilted mode the control stays fixed and only T moves. Integration
    stops early (``diverged=True``) if |T| exceeds 10.
    """
    mode = Mode(mode)
    if not dt > 0:
        raise ValueError("dt must be positive")
    T, a = float(start.T), float(start.alpha)
    out = [(T, a)]
    diverged = False
    for _ in range(int(steps)):
        gT, ga = gradient(T, a, mode)
        T, a = T - dt * gT, a - dt * ga
        out.append((T, a))
        if not abs(T) <= 10.0:
            diverged = True
            break
    vals = np.array(out)
    series = TimeSeries(dt * np.arange(len(vals)), vals, columns=("T", "alpha"))
    return FlowResult(series, basin_of(vals[-1, 0]), diverged)


@numba.njit(cache=True)
def _langevin_kernel(T0, alphas, xi, dt, noise, tilted):
    n = alphas.shape[0]
    T = np.empty(n)
    T[0] = T0
    amp = math.sqrt(2.0 * noise * dt)
    for k in range(n - 1):
        x = T[k]
        g = 2.0 * x * (x - 1.0) * (2.0 * x - 1.0)
        if tilted:
            g -= alphas[k]
        x_new = x - g * dt + amp * xi[k]
        if not (abs(x_new) < 1e6):
            return T, k
        T[k + 1] = x_new
    return T, -1


def _noise_for(seed, steps):
    return rng_stream(seed).standard_normal(steps)


def langevin_run(params: TippingParams, T0: float) -> TimeSeries:
    """Overdamped Langevin trajectory ``T <- T - dV/dT dt + sqrt(2 D dt) xi``.

    The control follows ``params.schedule``. In coupled mode dV/dT does not
    depend on the control, so the schedule is only recorded. The series has
    columns ``(T, alpha)``; ``meta`` holds the terminal basin and the
    post-hoc step check ``dt * max|grad V| < 0.5``.
    """
    n = params.steps + 1
    times = params.dt * np.arange(n)
    alphas = np.asarray(params.schedule(times), dtype=float)
    xi = _noise_for(params.seed, params.steps)
    T, bad = _langevin_kernel(float(T0), alphas, xi, params.dt, params.noise,
                              params.mode is Mode.TILTED)
    if bad >= 0:
        raise BlowupError(f"trajectory left |T| < 1e6 at step {bad + 1}", step=bad + 1)
    gT, ga = gradient(T, alphas, params.mode)
    max_grad = float(np.max(np.hypot(gT, ga)))
    meta = {
        "basin": basin_of(T[-1]).value,
        "max_grad": max_grad,
        "step_sane": params.dt * max_grad < 0.5,
        "seed": params.seed,
    }
    return TimeSeries(times, np.column_stack([T, alphas]), columns=("T", "alpha"), meta=meta)


def critical_alpha(mode=Mode.TILTED, tol=1e-12) -> float:
    """Smallest control value at which the low well of the tilted potential vanishes.

    dV/dT = 4T^3 - 6T^2 + 2T - a acquires a double root where the cubic's
    local maximum in (0, 1/2) equals ``a``.
    """
    if Mode(mode) is not Mode.TILTED:
        raise ValueError("the low well only disappears in tilted mode")
    t_star = find_root_bisect(lambda x: 12.0 * x * x - 12.0 * x + 2.0, 0.0, 0.5, tol=tol)
    return 2.0 * t_star * (t_star - 1.0) * (2.0 * t_star - 1.0)


@dataclass
class HysteresisResult:
    forward_fraction: float
    return_fraction: float
    seeds: list[int]

    def to_dict(self):
        return {"forward_fraction": self.forward_fraction,
                "return_fraction": self.return_fraction,
                "seeds": list(self.seeds)}


def hysteresis_experiment(params: TippingParams, n_seeds: int, T0: float = 0.0) -> HysteresisResult:
    """Ramp the control past the critical value, then restore it to zero.

    ``forward_fraction`` counts runs in the high basin when the return
    starts; ``return_fraction`` counts runs back in the low basin at the end.
    Per-run seeds derive from ``params.seed``.
    """
    sched = params.schedule
    if sched.t_return is None:
        raise ValueError("schedule needs a return phase (t_return, return_rate)")
    t_end = params.dt * params.steps
    if sched(t_end) != 0.0:
        raise ValueError("the control is not back at zero by the end of the run")
    k_return = int(round(sched.t_return / params.dt))
    seeds = child_seeds(params.seed, n_seeds)
    n_forward = n_back = 0
    for s in seeds:
        run = langevin_run(_with_seed(params, s), T0)
        T = run.column("T")
        n_forward += basin_of(T[k_return]) is Basin.HIGH
        n_back += basin_of(T[-1]) is Basin.LOW
    return HysteresisResult(n_forward / n_seeds, n_back / n_seeds, seeds)


def _with_seed(params, seed):
    d = params.to_dict()
    d["seed"] = int(seed)
    return TippingParams.from_dict(d)


def first_passage_times(params: TippingParams, n_seeds: int, T0: float = 0.0,
                        threshold: float = LOW_T_MAX) -> np.ndarray:
    """Time of the first step with T > threshold for each derived seed.

    Runs that never cross are reported as ``inf``.
    """
    out = np.empty(n_seeds)
    for i, s in enumerate(child_seeds(params.seed, n_seeds)):
        run = langevin_run(_with_seed(params, s), T0)
        above = np.nonzero(run.column("T") > threshold)[0]
        out[i] = run.times[above[0]] if above.size else math.inf
    return out
