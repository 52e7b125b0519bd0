"""Multiplier-accelerator income recurrence with exogenous growth.

Income follows ``Y_t = (c + nu) Y_{t-1} - nu Y_{t-2} + A (1+g)^t``. The
closed form splits ``Y`` into the growth path ``K (1+g)^t`` and a
homogeneous part set by the roots of ``lambda^2 - (c+nu) lambda + nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TimeSeries

OVERFLOW_GUARD = 1e15
# relative size of the discriminant below which the two roots are treated as one
_REPEATED_TOL = 1e-12


@dataclass(frozen=True)
class CycleParams:
    c: float = 0.6
    nu: float = 1.2
    A: float = 10.0
    g: float = 0.0
    Y_init: tuple[float, float] | None = None  # (Y_0, Y_1); default steady state + 1

    def __post_init__(self):
        if not 0 < self.c < 1:
            raise ValueError("c must lie in (0, 1)")
        if self.nu < 0 or self.A <= 0 or self.g < 0:
            raise ValueError("need nu >= 0, A > 0 and g >= 0")

    @property
    def s(self) -> float:
        return 1.0 - self.c

    @property
    def initial(self) -> tuple[float, float]:
        if self.Y_init is not None:
            return float(self.Y_init[0]), float(self.Y_init[1])
        y = steady_state(self.c, self.A) + 1.0
        return y, y

    @classmethod
    def from_dict(cls, d) -> "CycleParams":
        d = dict(d)
        if d.get("Y_init") is not None:
            d["Y_init"] = tuple(d["Y_init"])
        return cls(**d)


def steady_state(c, A) -> float:
    if c >= 1:
        raise ValueError("steady state needs c < 1")
    return A / (1.0 - c)


def growth_level(params: CycleParams) -> float:
    """``K`` in the particular solution ``K (1+g)^t``."""
    q = 1.0 + params.g
    denom = q * (params.s + params.g) - params.nu * params.g
    if denom == 0:
        raise ZeroDivisionError("growth resonates with the recurrence: (1+g)(s+g) = nu g")
    return q * q * params.A / denom


def trend(params: CycleParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return growth_level(params) * (1.0 + params.g) ** t


def iterate(params: CycleParams, steps: int) -> TimeSeries:
    """``steps`` values of the recurrence from the two initial incomes.

    Once ``|Y|`` passes the overflow guard the remaining values are reported
    as ``±1e15`` and ``meta["explosive"]`` is set.
    """
    if steps < 2:
        raise ValueError("need at least the two initial values")
    y = np.empty(steps)
    y[0], y[1] = params.initial
    a1, a2 = params.c + params.nu, -params.nu
    explosive = False
    for t in range(2, steps):
        if explosive:
            y[t] = y[t - 1]
            continue
        y[t] = a1 * y[t - 1] + a2 * y[t - 2] + params.A * (1.0 + params.g) ** t
        if not abs(y[t]) < OVERFLOW_GUARD:
            explosive = True
            y[t] = math.copysign(OVERFLOW_GUARD, y[t]) if not math.isnan(y[t]) else OVERFLOW_GUARD
    return TimeSeries(np.arange(steps, dtype=float), y[:, None], columns=("Y",),
                      meta={"explosive": explosive})


@dataclass(frozen=True)
class RootAnalysis:
    lambda1: complex
    lambda2: complex
    modulus: float
    theta: float
    period: float
    regime: str
    discriminant: float

    def to_dict(self):
        return {"lambda_re": self.lambda1.real, "lambda_im": self.lambda1.imag,
                "modulus": self.modulus, "theta": self.theta, "period": self.period,
                "regime": self.regime}

    @property
    def complex_pair(self) -> bool:
        return self.lambda1.imag != 0.0


def characteristic_roots(c, nu) -> RootAnalysis:
    """Roots of ``lambda^2 - (c+nu) lambda + nu`` and the dynamic regime.

    Complex roots give ``damped_oscillatory`` or ``explosive_oscillatory``
    (``boundary`` when the modulus is one); real roots give ``monotone``.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    S = c + nu
    disc = S * S - 4.0 * nu
    if disc < -_REPEATED_TOL * S * S:
        re = 0.5 * S
        im = 0.5 * math.sqrt(-disc)
        modulus = math.sqrt(nu)
        theta = math.atan2(im, re)
        if abs(modulus - 1.0) <= 1e-12:
            regime = "boundary"
        else:
            regime = "damped_oscillatory" if modulus < 1 else "explosive_oscillatory"
        return RootAnalysis(complex(re, im), complex(re, -im), modulus, theta,
                            2 * math.pi / theta, regime, disc)
    if disc <= _REPEATED_TOL * S * S:
        l1 = l2 = 0.5 * S
    else:
        # larger-magnitude root first, the other from the product to avoid cancellation
        l1 = 0.5 * (S + math.copysign(math.sqrt(disc), S))
        l2 = nu / l1
    modulus = max(abs(l1), abs(l2))
    return RootAnalysis(complex(l1), complex(l2), modulus, 0.0, math.inf, "monotone", disc)


def _deviations(params: CycleParams):
    k = growth_level(params)
    y0, y1 = params.initial
    return y0 - k, y1 - k * (1.0 + params.g)


def fit_initial(params: CycleParams) -> tuple[float, float]:
    """Amplitude and phase ``(delta, epsilon)`` of the oscillatory part.

    Chosen so that ``delta cos(epsilon)`` and ``|lambda| delta cos(theta - epsilon)``
    equal the deviations of ``Y_0`` and ``Y_1`` from the growth path.
    """
    roots = characteristic_roots(params.c, params.nu)
    if not roots.complex_pair:
        raise ValueError("amplitude/phase form needs complex roots")
    z0, z1 = _deviations(params)
    x = z0
    y = (z1 / roots.modulus - z0 * math.cos(roots.theta)) / math.sin(roots.theta)
    delta = math.hypot(x, y)
    if delta == 0.0:
        return 0.0, 0.0
    eps = math.atan2(y, x)
    return delta, (math.pi if eps == -math.pi else eps)


def closed_form(params: CycleParams, t) -> np.ndarray:
    """Closed-form income at times ``t``.

    Complex roots use ``K (1+g)^t + |lambda|^t delta cos(theta t - epsilon)``.
    Real roots use ``a lambda1^t + b lambda2^t`` (or ``(a + b t) lambda^t``
    for a repeated root) fitted to the same two initial values.
    """
    t = np.asarray(t, dtype=float)
    base = trend(params, t)
    roots = characteristic_roots(params.c, params.nu)
    if roots.complex_pair:
        delta, eps = fit_initial(params)
        return base + roots.modulus ** t * delta * np.cos(roots.theta * t - eps)
    z0, z1 = _deviations(params)
    l1, l2 = roots.lambda1.real, roots.lambda2.real
    if l1 == l2:
        b = z1 / l1 - z0
        return base + (z0 + b * t) * l1 ** t
    b = (z1 - l1 * z0) / (l2 - l1)
    a = z0 - b
    return base + a * np.power(l1, t) + b * np.power(l2, t)


def restricted_iterate(params: CycleParams, floor_path, ceiling_path, steps: int) -> TimeSeries:
    """Recurrence with income clamped between floor and ceiling.

    Bounds are multipliers of ``(1+g)^t`` (scalars or per-step arrays,
    ``±inf`` allowed). Every value, the two initial incomes included, is
    clamped before it enters the history of the next step.
    """
    if steps < 2:
        raise ValueError("need at least the two initial values")
    growth = (1.0 + params.g) ** np.arange(steps, dtype=float)
    with np.errstate(invalid="ignore"):
        lo = np.broadcast_to(np.asarray(floor_path, dtype=float), (steps,)) * growth
        hi = np.broadcast_to(np.asarray(ceiling_path, dtype=float), (steps,)) * growth
    if np.any(lo > hi):
        raise ValueError("floor must not exceed ceiling")
    y = np.empty(steps)
    y[0], y[1] = params.initial
    y[:2] = np.clip(y[:2], lo[:2], hi[:2])
    a1, a2 = params.c + params.nu, -params.nu
    for t in range(2, steps):
        raw = a1 * y[t - 1] + a2 * y[t - 2] + params.A * growth[t]
        y[t] = min(max(raw, lo[t]), hi[t])
    at_ceiling = np.isclose(y, hi, rtol=1e-12, atol=0.0)
    at_floor = np.isclose(y, lo, rtol=1e-12, atol=0.0)
    return TimeSeries(np.arange(steps, dtype=float), y[:, None], columns=("Y",),
                      meta={"ceiling_hits": int(at_ceiling.sum()),
                            "floor_hits": int(at_floor.sum())})


def oscillation_period(values, level=0.0) -> float:
    """Mean period from linearly interpolated crossings of ``level``.

    Two crossings per period; NaN when fewer than three crossings occur.
    """
    z = np.asarray(values, dtype=float) - level
    idx = np.nonzero(np.sign(z[:-1]) * np.sign(z[1:]) < 0)[0]
    if len(idx) < 3:
        return math.nan
    crossings = idx + z[idx] / (z[idx] - z[idx + 1])
    return float(2.0 * np.mean(np.diff(crossings)))


def _centered_mean(x, window):
    """Centered moving average; the window shrinks symmetrically near the ends."""
    n = len(x)
    h = window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(n)
    half = np.minimum(h, np.minimum(i, n - 1 - i))
    return (csum[i + half + 1] - csum[i - half]) / (2 * half + 1)


@dataclass
class Decomposition:
    times: np.ndarray
    series: np.ndarray
    trend: np.ndarray
    cycle: np.ndarray
    residual: np.ndarray
    windows: tuple[int, int] = field(default=(41, 5))

    def as_series(self) -> TimeSeries:
        values = np.column_stack([self.series, self.trend, self.cycle, self.residual])
        return TimeSeries(self.times, values, columns=("Y", "trend", "cycle", "residual"),
                          meta={"long_window": self.windows[0], "short_window": self.windows[1]})


def decompose(series: TimeSeries, long_window=41, short_window=5) -> Decomposition:
    """Split a series into trend, cycle and residual with two moving averages.

    Both windows must be odd so the averages are centered.
    """
    if not long_window > short_window >= 1:
        raise ValueError("need long_window > short_window >= 1")
    if long_window % 2 == 0 or short_window % 2 == 0:
        raise ValueError("window lengths must be odd")
    y = series.values[:, 0] if series.values.ndim == 2 else np.asarray(series.values)
    if len(y) <= 2 * long_window:
        raise ValueError("series must be longer than twice the long window")
    tr = _centered_mean(y, long_window)
    cyc = _centered_mean(y - tr, short_window)
    res = y - tr - cyc
    return Decomposition(series.times, y.copy(), tr, cyc, res, (long_window, short_window))


@dataclass
class GreatRatios:
    e: np.ndarray
    v: np.ndarray

    @property
    def plausible(self) -> bool:
        return bool(np.all((self.e > 0) & (self.e < 1.2)) and np.all((self.v > 0) & (self.v < 1)))


def great_ratios(W, L, p, Y, L_supply) -> GreatRatios:
    """Employment rate ``L / L_supply`` and wage share ``W L / (p Y)``."""
    arrays = [np.asarray(a, dtype=float) for a in (W, L, p, Y, L_supply)]
    if len({a.shape for a in arrays}) != 1:
        raise ValueError("all series must have equal length")
    W, L, p, Y, Ls = arrays
    if np.any(Ls == 0) or np.any(p * Y == 0):
        raise ZeroDivisionError("zero denominator in great ratios")
    if any(np.any(a <= 0) for a in arrays):
        raise ValueError("inputs must be positive")
    return GreatRatios(L / Ls, W * L / (p * Y))
