import math

import numpy as np
import pytest

from dampwave.diagnostics.energy import (
    dissipation_identity,
    dissipation_residual,
    energy_delayed,
    energy_indefinite,
    energy_linear,
    energy_series,
    gronwall_premise_holds,
    initial_energy_positive,
    state_norm_sq,
)
from dampwave.dynamics import (
    HistorySpec,
    InitialDataSpec,
    Mode,
    ModeAmplitude,
    RunSpec,
    State,
    build_initial_state,
    init_history,
    integrate,
)
from dampwave.errors import InvalidInputError, OutOfWindowError
from dampwave.grid import Field, build_grid, l2_sq
from dampwave.model import ZERO, odd_power

SMOOTH = InitialDataSpec(
    kind="modes",
    u0=[ModeAmplitude(k=1, amplitude=1.0)],
    u1=[ModeAmplitude(k=2, amplitude=0.5)],
    y0=[ModeAmplitude(k=2, amplitude=0.3)],
    y1=[ModeAmplitude(k=1, amplitude=1.0)],
)


def test_zero_state_has_zero_energy(grid19, coefficients):
    zero = State.zeros(grid19)
    assert energy_linear(zero).total == 0.0
    assert energy_indefinite(zero, odd_power(1.0, 3.0), ZERO).total == 0.0
    buf = init_history(HistorySpec(), 0.2, 0.05, grid19)
    assert energy_delayed(zero, buf, coefficients(grid19, a2=0.5), ZERO, ZERO).total == 0.0


def test_linear_energy_is_half_the_state_norm(grid19, sine_state):
    state = sine_state(grid19, u={1: 0.3}, v={2: -0.7}, y={3: 1.1}, w={1: 0.2, 4: 0.5})
    assert energy_linear(state).total == pytest.approx(0.5 * state_norm_sq(state), rel=1e-14)


def test_energy_of_first_sine_mode(sine_state):
    g = build_grid(199, 1.0)
    state = sine_state(g, u={1: 1.0})
    assert energy_linear(state).total == pytest.approx(math.pi ** 2 / 4.0, abs=1e-2)
    cubic = energy_indefinite(state, odd_power(1.0, 3.0), ZERO)
    assert cubic.nonlinear_u == pytest.approx(-3.0 / 32.0, rel=1e-10)
    assert cubic.total == pytest.approx(math.pi ** 2 / 4.0 - 3.0 / 32.0, abs=1e-2)


def test_delay_window_of_constant_history(coefficients):
    g = build_grid(199, 1.0)
    buf = init_history(HistorySpec(kind="constant", value=1.0), 0.4, 0.1, g)
    report = energy_delayed(State.zeros(g), buf, coefficients(g, a2=-0.5), ZERO, ZERO)
    assert report.delay_window == pytest.approx(0.1 * g.n_interior * g.h, rel=1e-12)
    assert abs(report.delay_window - 0.1) <= 0.1 * g.h + 1e-12
    assert report.total == pytest.approx(report.delay_window)


def test_energies_collapse_without_nonlinearity_or_memory(grid19, coefficients, rng):
    state = State.from_vector(rng.standard_normal(4 * grid19.n_interior), grid19)
    linear = energy_linear(state).total
    assert energy_indefinite(state, ZERO, ZERO).total == linear
    buf = init_history(HistorySpec(kind="constant", value=2.0), 0.2, 0.05, grid19)
    assert energy_delayed(state, buf, coefficients(grid19, a2=0.0), ZERO, ZERO).total == linear
    assert linear == pytest.approx(0.5 * state.norm_sq(), rel=1e-14)


def test_delayed_energy_requires_matching_head(grid19, coefficients):
    buf = init_history(HistorySpec(), 0.2, 0.05, grid19)
    with pytest.raises(OutOfWindowError):
        energy_delayed(State.zeros(grid19, t=1.0), buf, coefficients(grid19), ZERO, ZERO)


def test_conservative_run_has_vanishing_residual(coefficients):
    g = build_grid(49, 1.0)
    coeffs = coefficients(g, b=1.0)
    initial = build_initial_state(SMOOTH, g)
    traj = integrate(RunSpec(coeffs=coeffs, initial=initial, T_final=1.0, dt=g.h / 8))
    report = dissipation_residual(traj, coeffs)
    assert report.kind == "E_linear"
    assert report.max_identity == 0.0
    assert report.max_abs_residual <= 1e-8


def test_definite_residual_converges_at_second_order(coefficients):
    g = build_grid(49, 1.0)
    coeffs = coefficients(g, a1=1.0, a2=0.5, b=1.0)
    initial = build_initial_state(SMOOTH, g)
    residuals = []
    for dt in (g.h / 2, g.h / 4):
        traj = integrate(RunSpec(coeffs=coeffs, initial=initial, T_final=1.0, mode=Mode.DEFINITE, dt=dt))
        report = dissipation_residual(traj, coeffs)
        assert all(value <= 0.0 for value in report.identity)
        energies = np.array([rep.total for rep in energy_series(traj)])
        assert np.all(np.diff(energies) <= 1e-12)
        residuals.append(report.max_abs_residual)
    assert residuals[0] / residuals[1] > 3.0


def test_indefinite_identity_is_bounded_by_negative_part(coefficients):
    g = build_grid(49, 1.0)
    a2 = np.where(g.nodes < 0.5, -0.3, 0.5)
    coeffs = coefficients(g, a1=1.0, a2=a2, b=1.0)
    initial = build_initial_state(SMOOTH, g)
    cubic = odd_power(0.5, 3.0)
    residuals = []
    for dt in (g.h / 2, g.h / 4):
        traj = integrate(RunSpec(coeffs=coeffs, initial=initial, T_final=1.0, mode=Mode.INDEFINITE,
                                 dt=dt, nl1=cubic, nl2=cubic))
        report = dissipation_residual(traj, coeffs, nl1=cubic, nl2=cubic)
        assert report.kind == "E_indefinite"
        for k, value in enumerate(report.identity):
            w = traj.states[k + 1].w.values
            assert value <= coeffs.a2_minus_inf * l2_sq(w, g.h) + 1e-14
        residuals.append(report.max_abs_residual)
    assert residuals[0] / residuals[1] > 3.0


def test_delayed_identity_and_residual(coefficients):
    g = build_grid(49, 1.0)
    coeffs = coefficients(g, a1=1.0, a2=0.4, b=1.0)
    initial = build_initial_state(SMOOTH, g)
    dt = g.h / 2
    traj = integrate(RunSpec(coeffs=coeffs, initial=initial, T_final=1.0, mode=Mode.DELAYED, dt=dt,
                             tau=10 * dt, history=HistorySpec(kind="initial_velocity")))
    report = dissipation_residual(traj, coeffs)
    assert report.kind == "E_delayed"
    for k, value in enumerate(report.identity):
        w = traj.states[k + 1].w.values
        assert value <= coeffs.a2_inf * l2_sq(w, g.h) + 1e-14
    assert report.max_abs_residual <= 0.05 * max(abs(value) for value in report.identity)


def test_identity_needs_delayed_velocity(grid19, coefficients):
    with pytest.raises(InvalidInputError):
        dissipation_identity(State.zeros(grid19), coefficients(grid19), Mode.DELAYED)


def test_residual_needs_three_samples(grid19, coefficients):
    coeffs = coefficients(grid19)
    traj = integrate(RunSpec(coeffs=coeffs, initial=State.zeros(grid19), T_final=grid19.h / 2))
    with pytest.raises(InvalidInputError):
        dissipation_residual(traj, coeffs)


def test_small_data_energy_is_positive(sine_state):
    g = build_grid(49, 1.0)
    cubic = odd_power(1.0, 3.0)
    small = sine_state(g, u={1: 0.1}, y={2: 0.1}, w={1: 0.2})
    report = initial_energy_positive(small, cubic, cubic)
    assert report.premise
    assert report.holds
    assert report.energy > report.lower_bound

    zero = initial_energy_positive(State.zeros(g), cubic, cubic)
    assert zero.holds
    assert zero.energy == zero.lower_bound == 0.0


def test_small_data_energy_with_history(sine_state, coefficients):
    g = build_grid(49, 1.0)
    state = sine_state(g, w={1: 0.2})
    buf = init_history(HistorySpec(kind="initial_velocity"), 0.3, 0.01, g, initial_velocity=state.w.values)
    report = initial_energy_positive(state, ZERO, ZERO, buf, coefficients(g, a2=0.5))
    assert report.holds
    with pytest.raises(InvalidInputError):
        initial_energy_positive(state, ZERO, ZERO, buf)


def test_gronwall_premise_along_a_run(coefficients):
    g = build_grid(19, 1.0)
    coeffs = coefficients(g, a1=1.0, a2=0.2, b=0.5)
    initial = build_initial_state(SMOOTH, g)
    traj = integrate(RunSpec(coeffs=coeffs, initial=initial, T_final=1.0, mode=Mode.INDEFINITE))
    flags = gronwall_premise_holds(traj, energy_series(traj))
    assert flags.dtype == bool
    assert flags.shape == (len(traj.states),)
    assert flags.all()


def test_series_kind_override(coefficients):
    g = build_grid(19, 1.0)
    coeffs = coefficients(g, a1=1.0)
    traj = integrate(RunSpec(coeffs=coeffs, initial=build_initial_state(SMOOTH, g), T_final=0.2))
    assert all(rep.kind == "E_linear" for rep in energy_series(traj))
    with pytest.raises(InvalidInputError):
        energy_series(traj, kind="E_delayed")
    indefinite = energy_series(traj, kind="E_indefinite")
    assert indefinite[0].total == pytest.approx(energy_series(traj)[0].total)
