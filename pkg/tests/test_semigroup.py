import logging
import math

import numpy as np
import pytest

from dampwave.diagnostics.decay import fit_decay
from dampwave.diagnostics.energy import energy_series
from dampwave.diagnostics.semigroup import (
    SemigroupEstimate,
    compare_estimates,
    estimate_semigroup_constants,
    generator_spectrum,
    is_dissipative,
    propagate_norms,
    spectral_abscissa,
    state_operator_norm,
)
from dampwave.dynamics import GeneratorMode, Mode, RunSpec, State, assemble_generator, integrate
from dampwave.errors import InvalidInputError, NotExponentiallyStableError, NumericalError
from dampwave.grid import build_grid


def coupled_coefficients(coefficients, grid):
    b = np.where((grid.nodes > 0.3) & (grid.nodes < 0.7), 0.3, 0.0)
    return coefficients(grid, a1=1.0, b=b)


def test_undamped_system_has_zero_abscissa(coefficients):
    g = build_grid(9, 1.0)
    G = assemble_generator(coefficients(g), GeneratorMode.LINEAR_REFERENCE)
    assert abs(spectral_abscissa(G)) < 1e-10


def test_uncoupled_damping_leaves_y_block_neutral(coefficients):
    g = build_grid(9, 1.0)
    coeffs = coefficients(g, a1=1.0)
    G = assemble_generator(coeffs, GeneratorMode.LINEAR_REFERENCE)
    assert abs(spectral_abscissa(G)) < 1e-9
    u_block = G.toarray()[:18, :18]
    assert spectral_abscissa(u_block) == pytest.approx(-0.5, abs=1e-8)
    with pytest.raises(NotExponentiallyStableError) as info:
        estimate_semigroup_constants(coeffs, g)
    assert info.value.mode == "linear_reference"


def test_reference_generator_is_a_contraction(coefficients):
    g = build_grid(9, 1.0)
    G = assemble_generator(coefficients(g, a1=1.0, b=0.5), GeneratorMode.LINEAR_REFERENCE)
    assert is_dissipative(G, g)
    assert state_operator_norm(G, g, 0.0) == pytest.approx(1.0)
    times, norms = propagate_norms(G, g, 5.0, 50)
    assert times[-1] == pytest.approx(5.0)
    assert norms[0] == 1.0
    assert np.all(np.diff(norms) <= 1e-12)
    assert norms[-1] < 1.0


def test_negative_damping_is_not_dissipative(coefficients):
    g = build_grid(9, 1.0)
    coeffs = coefficients(g, a1=1.0, a2=-0.5, b=0.5)
    assert not is_dissipative(assemble_generator(coeffs, GeneratorMode.INDEFINITE), g)
    with pytest.raises(InvalidInputError):
        estimate_semigroup_constants(coeffs, g, mode=GeneratorMode.INDEFINITE)


def test_spectral_estimate_constants(coefficients):
    g = build_grid(9, 1.0)
    coeffs = coefficients(g, a1=1.0, b=0.5)
    est = estimate_semigroup_constants(coeffs, g, safety_margin=0.1)
    assert est.method == "spectral"
    assert est.abscissa < 0
    assert est.alpha == pytest.approx(-0.9 * est.abscissa)
    assert est.M >= 1.0
    # the estimate bounds the propagator on the probe grid by construction
    times, norms = propagate_norms(assemble_generator(coeffs, GeneratorMode.LINEAR_REFERENCE), g, est.T_probe, 200)
    assert np.all(norms <= est.M * np.exp(-est.alpha * times) * (1.0 + 1e-12))


def test_indefinite_plus_uses_positive_part(coefficients):
    g = build_grid(9, 1.0)
    a2 = np.where(g.nodes < 0.5, -0.2, 0.6)
    coeffs = coefficients(g, a1=1.0, a2=a2, b=0.5)
    plus = estimate_semigroup_constants(coeffs, g, mode=GeneratorMode.INDEFINITE_PLUS)
    reference = estimate_semigroup_constants(coefficients(g, a1=1.0, a2=np.maximum(a2, 0.0), b=0.5), g,
                                             mode=GeneratorMode.INDEFINITE_PLUS)
    assert plus.alpha == pytest.approx(reference.alpha, rel=1e-12)
    assert plus.mode == "indefinite_plus"


def test_compare_estimates_warns_on_disagreement(caplog):
    first = SemigroupEstimate(M=1.0, alpha=0.5, method="spectral")
    second = SemigroupEstimate(M=1.0, alpha=1.0, method="ensemble")
    with caplog.at_level(logging.WARNING):
        spread = compare_estimates(first, second)
    assert spread == pytest.approx(0.5)
    assert "disagree" in caplog.text
    assert compare_estimates(first, first) == 0.0


def test_spectrum_rejects_bad_matrices():
    with pytest.raises(InvalidInputError):
        generator_spectrum(np.zeros((2, 3)))
    with pytest.raises(NumericalError) as info:
        generator_spectrum(np.full((2, 2), np.nan))
    assert info.value.metadata["finite"] is False


@pytest.mark.slow
def test_spectral_and_ensemble_estimates_agree(coefficients):
    g = build_grid(99, 1.0)
    coeffs = coupled_coefficients(coefficients, g)
    spectral = estimate_semigroup_constants(coeffs, g, method="spectral")
    ensemble = estimate_semigroup_constants(coeffs, g, method="ensemble", n_samples=16, seed=0)
    assert ensemble.M >= 1.0
    assert ensemble.n_samples == 16
    assert spectral.alpha > 0
    assert compare_estimates(spectral, ensemble) <= 0.15


@pytest.mark.slow
def test_energy_decays_at_twice_the_eigenvalue_rate(coefficients):
    g = build_grid(29, 1.0)
    coeffs = coupled_coefficients(coefficients, g)
    G = assemble_generator(coeffs, GeneratorMode.LINEAR_REFERENCE).toarray()
    eigvals, eigvecs = np.linalg.eig(G)
    low = np.flatnonzero((eigvals.imag > 1e-6) & (eigvals.imag < 4.0 * math.pi))
    pick = low[np.argmax(eigvals.real[low])]
    rate = -eigvals.real[pick]
    assert rate > 0

    vec = np.real(eigvecs[:, pick])
    initial = State.from_vector(vec / np.linalg.norm(vec), g)
    T = 4.0 / (2.0 * rate)
    traj = integrate(RunSpec(coeffs=coeffs, initial=initial, T_final=T, mode=Mode.LINEAR_REFERENCE,
                             output_stride=5))
    energies = [rep.total for rep in energy_series(traj)]
    fit = fit_decay(traj.times, energies, window=(0.25 * T, traj.times[-1]))
    assert fit.rate == pytest.approx(2.0 * rate, rel=0.1)
