import math

import numpy as np
import pytest
from scipy.integrate import quad

from errors import ConvergenceError
from resonance import (
    ResonanceConfig,
    closed_form_weight,
    compare_routes_near_resonance,
    delta_e_closed_form,
    detuning_grid,
    eta_scaling_study,
    integrated_closed_form,
    kernel_normalization,
    regularized_delta,
    spectral_lineshape,
    truncation_for,
    window_mass,
)
from thermal import pair_weight_closed_form


def _config(beta=1.0, eta=0.01, gamma=0.01):
    return ResonanceConfig(1.0, 1.0, beta, gamma, eta)


@pytest.mark.parametrize("eta", [0.1, 0.01, 0.001])
def test_regularized_delta_has_unit_weight(eta):
    assert kernel_normalization(eta) == pytest.approx(1.0, abs=1e-9)


def test_window_mass_matches_quadrature():
    eta = 0.02
    value, _ = quad(lambda w: regularized_delta(w, eta), -10 * eta, 10 * eta, points=[0.0], epsrel=1e-12)
    assert window_mass(10.0) == pytest.approx(value, rel=1e-9)
    assert window_mass(10.0) == pytest.approx(0.8735, abs=1e-4)


def test_closed_form_weight_sinh_form():
    beta, gamma, eta, omega = 1.3, 0.02, 0.01, 1.1
    expected = math.pi * beta * gamma ** 2 / (8 * eta * math.sinh(beta * omega / 2) ** 2)
    assert closed_form_weight(beta, gamma, eta, omega) == pytest.approx(expected, rel=1e-12)
    assert closed_form_weight(math.inf, gamma, eta, omega) == 0.0
    assert closed_form_weight(5000.0, gamma, eta, omega) == 0.0


def test_closed_form_weight_is_pair_weight_times_prefactor():
    beta, gamma, eta = 0.8, 0.01, 0.005
    prefactor = math.pi * beta * gamma ** 2 / (4 * eta)
    assert closed_form_weight(beta, gamma, eta, 1.0) == pytest.approx(prefactor * pair_weight_closed_form(beta, 1.0))


def test_closed_form_vanishes_at_resonance():
    assert delta_e_closed_form(_config()).delta_e == 0.0
    assert delta_e_closed_form(_config().with_detuning(0.01)).delta_e > 0.0


def test_spectral_route_vanishes_exactly_at_resonance():
    result = spectral_lineshape(_config(), [0.0])[0]
    assert result.delta_e == 0.0


def test_spectral_route_positive_off_resonance():
    config = _config()
    for result in spectral_lineshape(config, [-config.eta, config.eta]):
        assert result.delta_e > 0.0


def test_pointwise_agreement_near_resonance():
    config = _config(beta=1.0, eta=0.01)
    comparison = compare_routes_near_resonance(config, span=3.0, points=13)
    for row in comparison["rows"]:
        if row["detuning"] != 0.0:
            assert row["rel_gap"] < 1e-2, row


@pytest.mark.timeout(120)
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_detuning_integral_matches_closed_form(beta):
    config = _config(beta=beta, eta=0.01)
    comparison = compare_routes_near_resonance(config, span=10.0, points=201)
    assert comparison["integrated_gap"] < 1e-2
    assert comparison["integrated_closed_form"] == pytest.approx(integrated_closed_form(config, 10.0))
    assert comparison["kernel_normalization"] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.timeout(120)
def test_eta_times_dissipation_converges():
    rows = eta_scaling_study(_config(beta=1.0), [0.02, 0.01, 0.005], span=10.0, points=201)
    assert [r["eta"] for r in rows] == [0.02, 0.01, 0.005]
    for row in rows:
        assert row["eta_delta_e"] == pytest.approx(row["eta"] * row["closed_form"], rel=2e-2)
    # dissipation itself grows like 1/eta
    assert rows[-1]["delta_e"] > 3.5 * rows[0]["delta_e"]


def test_high_temperature_dissipation_grows_like_temperature():
    ratios = {}
    for beta in (1e-3, 5e-4):
        ratios[beta] = integrated_closed_form(_config(beta=beta / 2)) / integrated_closed_form(_config(beta=beta))
        assert ratios[beta] == pytest.approx(2.0, rel=1e-6)
    assert abs(ratios[5e-4] - 2.0) < abs(ratios[1e-3] - 2.0)


@pytest.mark.parametrize("beta", [20.0, 40.0])
def test_low_temperature_dissipation_is_activated(beta):
    config = _config(beta=beta, eta=0.1, gamma=0.01)
    bounded = integrated_closed_form(config) * math.exp(beta) / beta
    assert bounded == pytest.approx(math.pi * 0.01 ** 2 / (2 * 0.1) * window_mass(10.0), rel=1e-8)


@pytest.mark.timeout(300)
def test_integrated_dissipation_increases_with_temperature():
    integrated = [
        compare_routes_near_resonance(_config(beta=beta, eta=0.01), span=10.0, points=101)["integrated_spectral"]
        for beta in (4.0, 2.0, 1.0, 0.5)
    ]
    assert all(lo < hi for lo, hi in zip(integrated, integrated[1:]))


def test_zero_temperature_rows_are_zero():
    rows = eta_scaling_study(_config(beta=math.inf), [0.02, 0.01], span=10.0, points=21)
    for row in rows:
        assert row["delta_e"] == 0.0
        assert row["closed_form"] == 0.0


def test_eta_list_must_decrease():
    with pytest.raises(ValueError) as e:
        eta_scaling_study(_config(), [0.01, 0.02], points=21)
    assert "strictly decreasing" in str(e.value)


def test_detuning_grid_needs_odd_points():
    grid = detuning_grid(0.01, 10.0, 5)
    assert np.allclose(grid, [-0.1, -0.05, 0.0, 0.05, 0.1])
    with pytest.raises(ValueError):
        detuning_grid(0.01, 10.0, 4)


def test_window_reaching_zero_frequency_raises():
    with pytest.raises(ValueError) as e:
        truncation_for(_config(eta=0.2), 10.0, 1e-10)
    assert "non-positive" in str(e.value)


def test_explicit_truncation_too_small_raises():
    with pytest.raises(ConvergenceError) as e:
        spectral_lineshape(_config(beta=0.5), [0.01], n_max=3)
    assert "occupancy tail" in str(e.value)


def test_config_validation():
    with pytest.raises(ValueError):
        ResonanceConfig(1.0, 1.0, 1.0, 0.01, 0.0)
    with pytest.raises(ValueError):
        ResonanceConfig(1.0, 1.0, -1.0, 0.01, 0.1)
    assert _config().with_detuning(0.05).detuning == pytest.approx(0.05)
