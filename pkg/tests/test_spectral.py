import math

import numpy as np
import pytest

from drive import gaussian_pulse, power_kernel, ramp_exp, superposition
from errors import ConvergenceError
from fockspace import (
    HermitianOperator,
    OscillatorSpec,
    build_basis,
    full_coupling,
    rwa_coupling,
    rwa_coupling_sparse,
)
from kubo import delta_e_kubo_freq, response
from spectral import (
    DissipationResult,
    amplitudes,
    coupling_support,
    degeneracy_threshold,
    delta_e_on_support,
    delta_e_spectral,
    pair_terms,
    spectral_dissipation,
)
from thermal import make_ensemble


def _setup(omega1=1.0, omega2=1.3, n_max=4, beta=1.0):
    basis = build_basis(OscillatorSpec(omega1), OscillatorSpec(omega2), n_max)
    return basis, make_ensemble(basis, beta)


def test_two_level_exchange_closed_form():
    basis, ensemble = _setup(n_max=1)
    signal = gaussian_pulse(0.05, 2.0)
    result = spectral_dissipation(rwa_coupling(basis), signal, ensemble, basis)
    w = ensemble.weights
    expected = 0.3 * (w[basis.index(1, 0)] - w[basis.index(0, 1)]) * power_kernel(signal, 0.3)
    assert result.delta_e == pytest.approx(expected, rel=1e-12)
    assert result.route == "spectral"
    assert result.meta["pairs"] == 2


def test_ground_state_rwa_dissipates_nothing():
    basis, ensemble = _setup(n_max=3, beta=math.inf)
    result = spectral_dissipation(rwa_coupling(basis), ramp_exp(1.0, 0.1), ensemble, basis)
    assert result.delta_e == 0.0


def test_ground_state_full_coupling_single_channel():
    basis, ensemble = _setup(omega1=1.0, omega2=1.5, n_max=1, beta=math.inf)
    result = spectral_dissipation(full_coupling(basis), ramp_exp(1.0, 0.5), ensemble, basis)
    assert result.delta_e == pytest.approx(10.0 / 169.0, rel=1e-13)


def test_every_summand_is_nonnegative():
    basis, ensemble = _setup(n_max=5, beta=0.7)
    kernel = amplitudes(full_coupling(basis), gaussian_pulse(0.1, 1.0), basis)
    _, _, _, summand = pair_terms(kernel, ensemble, basis)
    assert summand.size > 0
    assert np.all(summand >= 0.0)


def test_positive_for_random_superposed_drives():
    rng = np.random.default_rng(7)
    basis, ensemble = _setup(n_max=4, beta=0.8)
    A = full_coupling(basis)
    for _ in range(20):
        pulses = [
            gaussian_pulse(rng.normal(0, 0.05), rng.uniform(0.5, 4.0), rng.uniform(-5, 5))
            for _ in range(3)
        ]
        result = spectral_dissipation(A, superposition(pulses), ensemble, basis)
        assert result.is_positive()
        assert result.delta_e >= 0.0


@pytest.mark.timeout(120)
def test_positive_for_random_hermitian_couplings():
    rng = np.random.default_rng(19)
    basis, _ = _setup(n_max=3)
    for trial in range(200):
        m = rng.normal(size=(basis.dim, basis.dim)) + 1j * rng.normal(size=(basis.dim, basis.dim))
        A = HermitianOperator(0.5 * (m + m.conj().T))
        ensemble = make_ensemble(basis, rng.uniform(0.1, 10.0))
        pulses = [
            gaussian_pulse(rng.normal(0, 0.05), rng.uniform(0.5, 4.0), rng.uniform(-5, 5))
            for _ in range(3)
        ]
        signal = superposition(pulses)
        result = spectral_dissipation(A, signal, ensemble, basis)
        assert result.is_positive(), trial
        assert delta_e_kubo_freq(response(A, ensemble, basis), signal).relative_gap(result) <= 1e-10, trial


def test_quadratic_in_amplitude():
    basis, ensemble = _setup(n_max=4)
    A = rwa_coupling(basis)
    small = spectral_dissipation(A, gaussian_pulse(0.01, 3.0), ensemble, basis).delta_e
    large = spectral_dissipation(A, gaussian_pulse(0.03, 3.0), ensemble, basis).delta_e
    assert large == pytest.approx(9.0 * small, rel=1e-12)


def test_degenerate_pairs_are_excluded():
    basis, ensemble = _setup(omega1=1.0, omega2=1.0, n_max=3)
    result = spectral_dissipation(rwa_coupling(basis), ramp_exp(1.0, 0.1), ensemble, basis)
    assert result.delta_e == 0.0
    assert result.meta["pairs"] == 0


def test_sum_on_sparse_support_matches_dense():
    basis, ensemble = _setup(n_max=6, beta=0.5)
    signal = ramp_exp(0.02, 0.2)
    dense = spectral_dissipation(rwa_coupling(basis), signal, ensemble, basis)
    on_support = delta_e_on_support(coupling_support(rwa_coupling_sparse(basis)), signal, ensemble, basis)
    assert on_support.delta_e == pytest.approx(dense.delta_e, rel=1e-12)


def test_amplitudes_vanish_off_support():
    basis, _ = _setup(n_max=3)
    A = rwa_coupling(basis)
    kernel = amplitudes(A, gaussian_pulse(1.0, 1.0), basis)
    assert np.all(kernel.B_matrix[A.entries == 0] == 0.0)
    assert np.allclose(kernel.B_matrix, np.abs(kernel.b_matrix) ** 2)


def test_dimension_mismatch_raises():
    basis, ensemble = _setup(n_max=3)
    other, _ = _setup(n_max=2)
    with pytest.raises(ValueError):
        spectral_dissipation(rwa_coupling(other), gaussian_pulse(1.0, 1.0), ensemble, basis)
    kernel = amplitudes(rwa_coupling(other), gaussian_pulse(1.0, 1.0), other)
    with pytest.raises(ValueError):
        delta_e_spectral(kernel, ensemble, basis)


def test_negative_result_fails_positivity_check():
    result = DissipationResult(-1e-3, "kubo_time", {}, scale=1.0)
    assert not result.is_positive()
    with pytest.raises(ConvergenceError) as e:
        result.check_positive()
    assert "negative dissipation" in str(e.value)


def test_relative_gap():
    reference = DissipationResult(2.0, "spectral")
    assert DissipationResult(2.0, "kubo_freq").relative_gap(reference) == 0.0
    assert DissipationResult(2.2, "kubo_freq").relative_gap(reference) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        DissipationResult(1.0, "nonsense")


def test_degeneracy_threshold_scales_with_energies():
    basis, _ = _setup(omega1=100.0, omega2=130.0, n_max=2)
    assert degeneracy_threshold(basis) == pytest.approx(1e-12 * np.max(basis.energies))
