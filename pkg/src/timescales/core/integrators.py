"""Time steppers: classical RK4, Euler-Maruyama and adaptive Dormand-Prince 5(4).

The adaptive loop is written with explicit element loops so the same source
runs either as plain Python (for ordinary callables) or compiled by numba
(when the right-hand side is itself a numba-jitted function). Compiled
right-hand sides use the in-place signature ``f(t, y, params, out)``.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from numba.core.registry import CPUDispatcher

from .errors import BlowupError, StiffnessError
from .series import TimeSeries

DT_MIN = 1e-12


def rk4_step(f, state, t, dt):
    """One classical fourth-order Runge-Kutta step of ``y' = f(t, y)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = np.asarray(state, dtype=float)
    k1 = np.asarray(f(t, y), dtype=float)
    if not np.all(np.isfinite(k1)):
        raise BlowupError(f"non-finite derivative at t={t}", time=t)
    k2 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(f(t + dt, y + dt * k3), dtype=float)
    out = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise BlowupError(f"non-finite state after RK4 step at t={t}", time=t)
    return out


def euler_maruyama_step(drift, noise_amp, state, dt, rng, t=0.0):
    """``state + drift(t, state) dt + noise_amp sqrt(dt) xi`` with xi ~ N(0, I)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if noise_amp < 0:
        raise ValueError("noise_amp must be non-negative")
    y = np.asarray(state, dtype=float)
    xi = rng.standard_normal(y.shape)
    return y + np.asarray(drift(t, y), dtype=float) * dt + noise_amp * math.sqrt(dt) * xi


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920,
                                -17253 / 339200, 22 / 525, -1 / 40)

# continuous extension (4th order), rows = stages, cols = powers sigma^1..sigma^4
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


_BETA = 0.04
_EXPO1 = 0.2 - 0.75 * _BETA


def _dopri5(f, y0, t0, t1, rtol, atol, t_eval, p, h0, hmin, max_steps, P):
    n = y0.shape[0]
    m = t_eval.shape[0]
    out = np.empty((m, n))
    y = y0.copy()
    ynew = np.empty(n)
    ytmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    status = 0
    fail_t = t0
    n_acc = 0
    n_rej = 0

    t = t0
    f(t, y, p, k1)
    for i in range(n):
        if not math.isfinite(k1[i]):
            return out, 2, t, n_acc, n_rej
    j = 0
    while j < m and t_eval[j] <= t0:
        for i in range(n):
            out[j, i] = y[i]
        j += 1

    h = h0
    if h <= 0.0:
        # starting step heuristic (Hairer, Norsett & Wanner II.4)
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k1[i] / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        if d0 < 1e-5 or d1 < 1e-5:
            ha = 1e-6
        else:
            ha = 0.01 * d0 / d1
        ha = min(ha, t1 - t0)
        for i in range(n):
            ytmp[i] = y[i] + ha * k1[i]
        f(t + ha, ytmp, p, k2)
        d2 = 0.0
        for i in range(n):
            sc = atol + rtol * abs(y[i])
            d2 += ((k2[i] - k1[i]) / sc) ** 2
        d2 = math.sqrt(d2 / n) / ha
        dm = max(d1, d2)
        if dm <= 1e-15:
            hb = max(1e-6, ha * 1e-3)
        else:
            hb = (0.01 / dm) ** 0.2
        h = min(100.0 * ha, hb)
    h = min(h, t1 - t0)

    rejected_last = False
    err_old = 1e-4
    while t < t1:
        if n_acc + n_rej >= max_steps:
            status = 3
            fail_t = t
            break
        last = False
        if t + h >= t1:
            h = t1 - t
            last = True
        elif h < hmin:
            status = 1
            fail_t = t
            break

        for i in range(n):
            ytmp[i] = y[i] + h * _A21 * k1[i]
        f(t + _C2 * h, ytmp, p, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        f(t + _C3 * h, ytmp, p, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        f(t + _C4 * h, ytmp, p, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        f(t + _C5 * h, ytmp, p, k5)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i]
                                  + _A64 * k4[i] + _A65 * k5[i])
        f(t + h, ytmp, p, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i]
                                  + _B5 * k5[i] + _B6 * k6[i])
        f(t + h, ynew, p, k7)

        err = 0.0
        finite = True
        for i in range(n):
            if not (math.isfinite(ynew[i]) and math.isfinite(k7[i])):
                finite = False
            e = h * (_E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i]
                     + _E6 * k6[i] + _E7 * k7[i])
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
        err = math.sqrt(err / n)
        if not finite:
            err = math.inf

        if err <= 1.0:
            tnew = t1 if last else t + h
            while j < m and t_eval[j] <= tnew:
                s = (t_eval[j] - t) / h
                s2 = s * s
                s3 = s2 * s
                s4 = s3 * s
                for i in range(n):
                    acc = 0.0
                    acc += k1[i] * (P[0, 0] * s + P[0, 1] * s2 + P[0, 2] * s3 + P[0, 3] * s4)
                    acc += k3[i] * (P[2, 0] * s + P[2, 1] * s2 + P[2, 2] * s3 + P[2, 3] * s4)
                    acc += k4[i] * (P[3, 0] * s + P[3, 1] * s2 + P[3, 2] * s3 + P[3, 3] * s4)
                    acc += k5[i] * (P[4, 0] * s + P[4, 1] * s2 + P[4, 2] * s3 + P[4, 3] * s4)
                    acc += k6[i] * (P[5, 0] * s + P[5, 1] * s2 + P[5, 2] * s3 + P[5, 3] * s4)
                    acc += k7[i] * (P[6, 0] * s + P[6, 1] * s2 + P[6, 2] * s3 + P[6, 3] * s4)
                    out[j, i] = y[i] + h * acc
                j += 1
            t = tnew
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            n_acc += 1
            # PI step control (Lund stabilization) keeps the step steady when
            # it is limited by stability rather than accuracy
            if err == 0.0:
                fac = 10.0
            else:
                fac = 0.9 * err ** -_EXPO1 * err_old ** _BETA
                fac = min(10.0, max(0.2, fac))
            if rejected_last:
                fac = min(fac, 1.0)
            err_old = max(err, 1e-4)
            rejected_last = False
            h = h * fac
        else:
            n_rej += 1
            rejected_last = True
            if math.isfinite(err):
                h = h * max(0.2, 0.9 * err ** -_EXPO1)
            else:
                h = h * 0.2
            if h < hmin:
                status = 1
                fail_t = t
                break
    # samples requested past t1 are filled with the final state
    while j < m:
        for i in range(n):
            out[j, i] = y[i]
        j += 1
    return out, status, fail_t, n_acc, n_rej


_dopri5_jit = numba.njit(cache=True)(_dopri5)


def _wrap_python_rhs(f):
    def g(t, y, p, out):
        out[:] = f(t, y)
    return g


def integrate_adaptive(f, state0, t0, t1, rel_tol=1e-8, abs_tol=1e-12, t_eval=None,
                       params=None, dt_init=0.0, dt_min=DT_MIN, max_steps=10**9,
                       columns=None):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1`` with Dormand-Prince 5(4).

    Parameters
    ----------
    f : callable
        Either ``f(t, y) -> array`` or, for speed, a numba-jitted
        ``f(t, y, params, out)`` that writes the derivative into ``out``.
    t_eval : array-like, optional
        Output times inside ``[t0, t1]``; defaults to ``[t0, t1]``. Values
        between accepted steps come from the method's dense output.
    params : ndarray, optional
        Parameter vector handed to a jitted right-hand side.

    Raises
    ------
    StiffnessError
        If the step size drops below ``dt_min``.
    BlowupError
        If the state or derivative becomes non-finite.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    y0 = np.array(state0, dtype=float).ravel()
    if t_eval is None:
        t_eval = np.array([t0, t1], dtype=float)
    else:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.ndim != 1 or np.any(np.diff(t_eval) <= 0):
            raise ValueError("t_eval must be strictly increasing")
        if t_eval[0] < t0 or t_eval[-1] > t1:
            raise ValueError("t_eval must lie inside [t0, t1]")
    p = np.zeros(0) if params is None else np.asarray(params, dtype=float)

    if isinstance(f, CPUDispatcher):
        core, rhs = _dopri5_jit, f
    else:
        core, rhs = _dopri5, _wrap_python_rhs(f)
    out, status, fail_t, n_acc, n_rej = core(
        rhs, y0, float(t0), float(t1), float(rel_tol), float(abs_tol), t_eval, p,
        float(dt_init), float(dt_min), int(max_steps), _P)
    if status == 1:
        raise StiffnessError(
            f"step size fell below dt_min={dt_min:g} at t={fail_t:.17g}", fail_t)
    if status == 2:
        raise BlowupError(f"non-finite derivative at t={fail_t:.17g}", time=fail_t)
    if status == 3:
        raise StiffnessError(f"step budget exhausted at t={fail_t:.17g}", fail_t)
    return TimeSeries(t_eval, out, columns=columns,
                      meta={"accepted_steps": int(n_acc), "rejected_steps": int(n_rej)})
