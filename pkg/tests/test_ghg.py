import math

import numpy as np
import pytest

from timescales.core import BracketError, rng_stream
from timescales.ghg import (Abundance, GwpSpec, LinearCompartmentModel, build_interaction_model,
                            critical_gain, gwp, gwp_closed_form, methane_decay, runaway_onset,
                            simulate_compartments, stability, superposition_heating)


def two_by_two(g):
    return np.array([[-1.0, g], [1.0, -1.0]])


# --- decay, heating, GWP -------------------------------------------------------

def test_methane_decay_examples():
    assert methane_decay(1.0, 7.0) == pytest.approx(0.5)
    assert methane_decay(3.0, 0.0) == 3.0
    assert methane_decay(1.0, 70.0) == pytest.approx(2.0 ** -10)
    with pytest.raises(ValueError):
        methane_decay(-1.0, 1.0)


def test_superposition_heating():
    assert superposition_heating(5.0, 0.0, 0.3) == pytest.approx(1.5)
    assert superposition_heating(84.0, 1.0, 1.0) == 168.0
    assert superposition_heating(3.0, 2.0, 0.0) == 0.0
    rng = rng_stream(1)
    c1, c2, m1, m2 = rng.uniform(0, 10, 4)
    assert superposition_heating(c1 + c2, m1 + m2, 0.7) == pytest.approx(
        superposition_heating(c1, m1, 0.7) + superposition_heating(c2, m2, 0.7), rel=1e-15)


def test_gwp_identity():
    gas = Abundance(12.0)
    assert gwp(GwpSpec(50.0, gas, gas)) == pytest.approx(1.0, rel=1e-14)


def test_gwp_methane_examples():
    k = math.log(2) / 7
    g20 = gwp(GwpSpec(20.0))
    assert g20 == pytest.approx((1 - math.exp(-20 * k)) / (k * 20), rel=1e-10)
    assert g20 == pytest.approx(0.4353, abs=1e-4)
    g100 = gwp(GwpSpec(100.0))
    assert g100 == pytest.approx(0.1009, abs=1e-4)
    assert g20 / g100 == pytest.approx(4.3, abs=0.05)


@pytest.mark.parametrize("TH", [1.0, 20.0, 100.0, 500.0])
@pytest.mark.parametrize("half_lives", [(7.0, math.inf), (3.0, 40.0), (math.inf, 12.0)])
def test_gwp_quadrature_matches_closed_form(TH, half_lives):
    spec = GwpSpec(TH, Abundance(half_lives[0]), Abundance(half_lives[1]), a_ratio=2.5)
    assert abs(gwp(spec) / gwp_closed_form(spec) - 1) < 1e-6


def test_gwp_decreases_with_horizon():
    values = [gwp(GwpSpec(th)) for th in np.linspace(1, 200, 40)]
    assert np.all(np.diff(values) < 0)


def test_gwp_validation():
    with pytest.raises(ValueError):
        GwpSpec(0.0)
    with pytest.raises(ValueError):
        Abundance(0.0)


# --- presets and stability --------------------------------------------------------

@pytest.mark.parametrize("preset", ["clathrate", "albedo"])
def test_zero_feedback_presets_do_not_grow(preset):
    model = build_interaction_model(preset)
    report = stability(model)
    assert report.max_real_part <= 1e-12
    eigs = np.sort_complex(report.eigenvalues)
    assert np.min(np.abs(np.diff(eigs))) > 1e-6  # distinct, hence diagonalizable
    assert np.allclose(np.sort_complex(np.linalg.eigvals(model.A)), eigs, atol=1e-10)


def test_doubling_kappa_doubles_forcing_entries():
    base = build_interaction_model("clathrate")
    double = build_interaction_model("clathrate", {"kappa": 2 * base.rates["kappa"]})
    assert np.array_equal(double.A[2, :2], 2 * base.A[2, :2])
    assert np.array_equal(double.A[2, 2:], base.A[2, 2:])
    assert np.array_equal(double.A[[0, 1, 3]], base.A[[0, 1, 3]])


def test_preset_errors():
    with pytest.raises(ValueError):
        build_interaction_model("permafrost")
    with pytest.raises(KeyError):
        build_interaction_model("albedo", {"kappa": 1.0})


def test_stability_examples():
    r = stability(np.diag([-1.0, -2.0]))
    assert r.stable and r.max_real_part == pytest.approx(-1.0)
    r = stability(two_by_two(2.0))
    assert not r.stable
    assert sorted(r.eigenvalues.real) == pytest.approx([-1 - math.sqrt(2), -1 + math.sqrt(2)])
    r = stability(two_by_two(0.5))
    assert r.stable and r.max_real_part == pytest.approx(-1 + math.sqrt(0.5))


def test_critical_gain_examples():
    assert critical_gain(two_by_two, (0.0, 4.0)) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(BracketError):
        critical_gain(lambda g: np.diag([-1.0 - g, -2.0]), (0.0, 4.0))


def test_albedo_runs_away_for_any_positive_gain():
    model = build_interaction_model("albedo")
    assert not stability(model.with_gain(1e-4)).stable


# --- simulation -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def clathrate():
    model = build_interaction_model("clathrate")
    return model, critical_gain(model.gain_family(), (0.0, 1.0))


def test_no_input_no_excess_stays_zero(clathrate):
    model, _ = clathrate
    out = simulate_compartments(model, emissions=0.0)
    assert np.all(out.trajectory.values == 0.0) and out.classification == "bounded"


def test_above_critical_gain_runs_away(clathrate):
    model, g = clathrate
    hot = model.with_gain(1.2 * g)
    rate = stability(hot).max_real_part
    out = simulate_compartments(hot, horizon=20 / rate)
    assert out.classification == "runaway" and out.divergence_time < 20 / rate


def test_below_critical_gain_settles_to_static_gain(clathrate):
    model, g = clathrate
    cool = model.with_gain(0.8 * g)
    out = simulate_compartments(cool, horizon=5e5)
    steady = -np.linalg.solve(cool.A, cool.b)
    assert out.classification == "bounded"
    assert out.trajectory.column("T_at")[-1] == pytest.approx(steady[2], rel=1e-4)


def test_threshold_mode_matches_no_feedback_below_threshold(clathrate):
    model, g = clathrate
    hot = model.with_gain(0.5 * g)
    gated = simulate_compartments(hot, emissions=5.0, horizon=20000.0, threshold=True)
    free = simulate_compartments(model.with_gain(0.0), emissions=5.0, horizon=20000.0)
    t_oc = free.trajectory.column("T_oc")
    crossed = np.nonzero(t_oc >= model.T_thr)[0]
    assert len(crossed) and crossed[0] > 10
    before = slice(0, crossed[0])
    assert np.allclose(gated.trajectory.values[before], free.trajectory.values[before],
                       rtol=1e-7, atol=1e-9)
    # after the crossing the release term adds methane
    assert gated.trajectory.column("m")[-1] > free.trajectory.column("m")[-1]


def test_emissions_switch_off(clathrate):
    model, _ = clathrate
    out = simulate_compartments(model, horizon=100.0, emission_years=50.0)
    c = out.trajectory.column("c")
    assert c[-1] < c[250]


def random_model(rng, n, top):
    A = rng.normal(size=(n, n))
    A -= (np.max(np.linalg.eigvals(A).real) - top) * np.eye(n)
    return LinearCompartmentModel(tuple(f"x{i}" for i in range(n)), A, np.zeros(n))


def test_random_stable_models_stay_bounded():
    rng = rng_stream(11)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        model = random_model(rng, n, -rng.uniform(0.05, 1.0))
        x0 = rng.normal(size=n)
        assert stability(model).stable
        out = simulate_compartments(model, x0=x0, horizon=100.0)
        assert out.classification == "bounded"


def test_random_unstable_models_diverge_in_time():
    rng = rng_stream(12)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        model = random_model(rng, n, rng.uniform(0.05, 1.0))
        rate = stability(model).max_real_part
        assert rate > 0.05 - 1e-9
        out = simulate_compartments(model, x0=rng.normal(size=n), horizon=20 / rate)
        assert out.classification == "runaway"


@pytest.mark.slow
def test_simulated_onset_matches_eigenvalue_gain(clathrate):
    model, g = clathrate
    onset = runaway_onset(model, (0.5 * g, 3 * g), horizon=1e6)
    assert onset == pytest.approx(g, rel=0.05)
