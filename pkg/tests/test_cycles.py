import math

import numpy as np
import pytest

from timescales.core import TimeSeries, eigenvalues_small, rng_stream
from timescales.cycles import (CycleParams, characteristic_roots, closed_form, decompose,
                               fit_initial, great_ratios, growth_level, iterate,
                               oscillation_period, restricted_iterate, steady_state, trend)

EXPLOSIVE = CycleParams(c=0.6, nu=1.2, A=10.0)


def test_steady_state_examples():
    assert steady_state(0.8, 100) == pytest.approx(500)
    assert steady_state(0.0, 7) == 7
    assert steady_state(0.5, 10) == 20
    with pytest.raises(ValueError):
        steady_state(1.0, 1.0)


def test_iterate_without_accelerator_stays_at_steady_state():
    p = CycleParams(c=0.5, nu=0.0, A=10.0, Y_init=(20.0, 20.0))
    assert np.all(iterate(p, 50).values[:, 0] == 20.0)


def test_iterate_period_matches_roots():
    y = iterate(EXPLOSIVE, 200).values[:, 0]
    period = oscillation_period(y, steady_state(0.6, 10.0))
    assert period == pytest.approx(characteristic_roots(0.6, 1.2).period, rel=0.01)
    assert period == pytest.approx(10.4, abs=0.1)


def test_growth_ratio_converges_to_particular_level():
    p = CycleParams(c=0.6, nu=0.8, A=10.0, g=0.03)
    assert characteristic_roots(0.6, 0.8).modulus < 1.03
    y = iterate(p, 600).values[:, 0]
    k = 1.03 ** 2 * 10 / (1.03 * (0.4 + 0.03) - 0.8 * 0.03)
    assert y[-1] / 1.03 ** 599 == pytest.approx(k, rel=1e-10)
    assert growth_level(p) == pytest.approx(k)


def test_overflow_guard():
    p = CycleParams(c=0.1, nu=20.0, A=1.0)
    ts = iterate(p, 400)
    assert ts.meta["explosive"]
    assert np.max(np.abs(ts.values)) == 1e15


def test_iterate_needs_two_steps():
    with pytest.raises(ValueError):
        iterate(EXPLOSIVE, 1)


# --- roots -------------------------------------------------------------------------

def test_root_example_explosive():
    r = characteristic_roots(0.6, 1.2)
    assert r.lambda1.real == pytest.approx(0.9)
    assert abs(r.lambda1.imag) == pytest.approx(0.6245, abs=1e-4)
    assert r.modulus == pytest.approx(math.sqrt(1.2))
    assert r.theta == pytest.approx(math.acos(0.9 / math.sqrt(1.2)), abs=1e-14)
    assert r.period == pytest.approx(10.36, abs=0.01)
    assert r.regime == "explosive_oscillatory"


def test_root_regimes():
    assert characteristic_roots(0.9, 0.01).regime == "monotone"
    assert characteristic_roots(1 - 1e-6, 1.0).regime == "boundary"
    assert characteristic_roots(0.5, 0.5).regime == "damped_oscillatory"


def test_roots_agree_with_companion_eigenvalues():
    for c, nu in [(0.6, 1.2), (0.9, 0.01), (0.3, 0.7)]:
        r = characteristic_roots(c, nu)
        ev = sorted(eigenvalues_small(np.array([[c + nu, -nu], [1.0, 0.0]])),
                    key=lambda z: (z.real, z.imag))
        mine = sorted([r.lambda1, r.lambda2], key=lambda z: (z.real, z.imag))
        assert np.allclose(ev, mine, atol=1e-10)


def test_root_identities_random():
    rng = rng_stream(7)
    for c, nu in zip(rng.uniform(0.01, 0.99, 1000), rng.uniform(0.01, 4.0, 1000)):
        r = characteristic_roots(c, nu)
        assert abs(r.lambda1 + r.lambda2 - (c + nu)) <= 1e-12 * max(1.0, c + nu)
        assert abs(r.lambda1 * r.lambda2 - nu) <= 1e-12 * max(1.0, nu)
        if r.complex_pair:
            assert abs(abs(r.lambda1) - math.sqrt(nu)) <= 1e-12


def test_discriminant_vanishes_on_boundary_curve():
    for nu in np.linspace(0.05, 3.9, 50):
        c = 2 * math.sqrt(nu) - nu
        assert abs(characteristic_roots(c, nu).discriminant) <= 1e-12


# --- closed form -----------------------------------------------------------------

@pytest.mark.parametrize("g", [0.0, 0.03])
def test_closed_form_matches_recurrence(g):
    p = CycleParams(c=0.6, nu=1.2, A=10.0, g=g)
    y = iterate(p, 200).values[:, 0]
    cf = closed_form(p, np.arange(200))
    assert np.max(np.abs(cf - y) / np.abs(y)) < 1e-9


@pytest.mark.parametrize("c,nu", [(0.9, 0.01), (0.5, 0.2), (2 * math.sqrt(0.3) - 0.3, 0.3)])
def test_real_root_closed_form(c, nu):
    p = CycleParams(c=c, nu=nu, A=5.0, g=0.02, Y_init=(3.0, 40.0))
    y = iterate(p, 80).values[:, 0]
    assert np.allclose(closed_form(p, np.arange(80)), y, rtol=1e-9)


def test_closed_form_reproduces_initial_values():
    p = CycleParams(c=0.6, nu=1.2, A=10.0, g=0.03, Y_init=(31.0, 19.5))
    assert closed_form(p, [0, 1]) == pytest.approx([31.0, 19.5], abs=1e-12)


def test_particular_term_without_growth():
    assert growth_level(CycleParams(c=0.6, nu=1.2, A=10.0)) == pytest.approx(25.0)


def test_fit_initial_examples():
    k = growth_level(CycleParams(g=0.03))
    on_path = CycleParams(g=0.03, Y_init=(k, k * 1.03))
    assert fit_initial(on_path) == (0.0, 0.0)
    base = CycleParams(g=0.03, Y_init=(k + 1.0, k * 1.03 - 0.5))
    twice = CycleParams(g=0.03, Y_init=(k + 2.0, k * 1.03 - 1.0))
    d1, e1 = fit_initial(base)
    d2, e2 = fit_initial(twice)
    assert d2 == pytest.approx(2 * d1) and e2 == pytest.approx(e1)
    assert -math.pi < e1 <= math.pi
    with pytest.raises(ValueError):
        fit_initial(CycleParams(c=0.9, nu=0.01))


def test_superposition_in_autonomous_demand():
    p1 = CycleParams(c=0.6, nu=1.2, A=10.0, g=0.02,
                     Y_init=tuple(trend(CycleParams(A=10.0, g=0.02), [0, 1])))
    p2 = CycleParams(c=0.6, nu=1.2, A=20.0, g=0.02,
                     Y_init=tuple(trend(CycleParams(A=20.0, g=0.02), [0, 1])))
    y1 = iterate(p1, 60).values[:, 0]
    y2 = iterate(p2, 60).values[:, 0]
    assert np.allclose(y2, 2 * y1, rtol=1e-12)


# --- floors and ceilings -----------------------------------------------------------

def test_inactive_bounds_match_iterate():
    free = iterate(EXPLOSIVE, 100).values[:, 0]
    bounded = restricted_iterate(EXPLOSIVE, -np.inf, np.inf, 100).values[:, 0]
    assert np.array_equal(free, bounded)


def test_tight_bounds_keep_explosive_cycle_bounded():
    p = CycleParams(c=0.6, nu=1.2, A=10.0, g=0.02)
    k = growth_level(p)
    ts = restricted_iterate(p, 0.9 * k, 1.1 * k, 300)
    y = ts.values[:, 0] / 1.02 ** np.arange(300)
    assert np.all((y >= 0.9 * k - 1e-9) & (y <= 1.1 * k + 1e-9))
    hits = np.isclose(y, 1.1 * k, rtol=1e-12)
    # the ceiling binds briefly in each cycle rather than permanently
    assert 0 < hits.sum() < 0.5 * len(y)
    assert ts.meta["ceiling_hits"] == hits.sum()


def test_pinned_bounds_give_trend():
    p = CycleParams(c=0.6, nu=1.2, A=10.0, g=0.02)
    k = growth_level(p)
    ts = restricted_iterate(p, k, k, 50)
    assert np.allclose(ts.values[:, 0], trend(p, np.arange(50)), rtol=1e-14)


def test_floor_above_ceiling_rejected():
    with pytest.raises(ValueError):
        restricted_iterate(EXPLOSIVE, 2.0, 1.0, 10)


# --- decomposition ---------------------------------------------------------------

def series(y):
    return TimeSeries(np.arange(len(y), dtype=float), np.asarray(y, float)[:, None])


def test_linear_ramp_is_all_trend():
    y = 3.0 + 0.5 * np.arange(200)
    d = decompose(series(y))
    assert np.allclose(d.trend, y, atol=1e-10)
    assert np.allclose(d.cycle, 0.0, atol=1e-10)


def test_two_scale_synthetic():
    t = np.arange(600)
    slow = np.sin(2 * np.pi * t / 60)
    fast = np.sin(2 * np.pi * t / 8)
    d = decompose(series(slow + fast), long_window=15, short_window=3)
    inner = slice(15, -15)
    assert np.corrcoef(d.cycle[inner], fast[inner])[0, 1] > 0.9


def test_decomposition_is_additive_and_translation_equivariant():
    y = rng_stream(4).normal(size=300).cumsum()
    d = decompose(series(y))
    assert np.max(np.abs(d.trend + d.cycle + d.residual - y)) <= 1e-12 * np.abs(y).max()
    shifted = decompose(series(y + 7.0))
    assert np.allclose(shifted.trend, d.trend + 7.0, atol=1e-10)
    assert np.allclose(shifted.cycle, d.cycle, atol=1e-10)


def test_decompose_refusals():
    with pytest.raises(ValueError):
        decompose(series(np.zeros(50)))
    with pytest.raises(ValueError):
        decompose(series(np.zeros(500)), long_window=5, short_window=5)
    with pytest.raises(ValueError):
        decompose(series(np.zeros(500)), long_window=40)


# --- great ratios ----------------------------------------------------------------------

def test_great_ratio_examples():
    L = np.array([90.0, 95.0])
    r = great_ratios(W=[1.0, 1.0], L=L, p=[1.0, 1.0], Y=[150.0, 160.0], L_supply=L)
    assert np.all(r.e == 1.0)
    same = great_ratios(W=[2.0, 3.0], L=[5.0, 4.0], p=[1.0, 2.0], Y=[10.0, 6.0], L_supply=[6, 6])
    assert np.allclose(same.v, 1.0)
    half = great_ratios(W=[2.0, 3.0], L=[5.0, 4.0], p=[0.5, 1.0], Y=[10.0, 6.0], L_supply=[6, 6])
    assert np.allclose(half.v, 2 * same.v) and np.array_equal(half.e, same.e)
    with pytest.raises(ZeroDivisionError):
        great_ratios([1.0], [1.0], [1.0], [1.0], [0.0])
    with pytest.raises(ValueError):
        great_ratios([1.0], [1.0, 2.0], [1.0], [1.0], [1.0])
