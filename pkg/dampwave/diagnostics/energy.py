"""
Energy functionals and dissipation identities for dampwave
"""
import logging
import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel

from ..dynamics import HistoryBuffer, Mode, State, Trajectory
from ..errors import InvalidInputError, OutOfWindowError
from ..grid import h1_sq, l2_sq
from ..model import CoefficientSet, Nonlinearity, ZERO

logger = logging.getLogger(__name__)

EnergyKind = Literal["E_delayed", "E_indefinite", "E_linear"]


class EnergyReport(BaseModel):
    """Contributions to one energy functional at time t."""

    kind: EnergyKind
    t: float = 0.0
    kinetic_u: float
    potential_u: float
    kinetic_y: float
    potential_y: float
    nonlinear_u: float = 0.0
    nonlinear_y: float = 0.0
    delay_window: float = 0.0
    total: float

    @property
    def quadratic(self) -> float:
        return self.kinetic_u + self.potential_u + self.kinetic_y + self.potential_y


def _report(st: State, kind: EnergyKind, nl1: Nonlinearity, nl2: Nonlinearity,
            window_integral: float = 0.0) -> EnergyReport:
    h = st.grid.h
    kinetic_u = 0.5 * l2_sq(st.v.values, h)
    potential_u = 0.5 * h1_sq(st.u.values, h)
    kinetic_y = 0.5 * l2_sq(st.w.values, h)
    potential_y = 0.5 * h1_sq(st.y.values, h)
    nonlinear_u = nonlinear_y = 0.0
    if kind != "E_linear":
        nonlinear_u = -h * float(np.sum(nl1.F(st.u.values)))
        nonlinear_y = -h * float(np.sum(nl2.F(st.y.values)))
    delay_window = 0.5 * window_integral if kind == "E_delayed" else 0.0
    total = kinetic_u + potential_u + kinetic_y + potential_y + nonlinear_u + nonlinear_y + delay_window
    return EnergyReport(
        kind=kind,
        t=st.t,
        kinetic_u=kinetic_u,
        potential_u=potential_u,
        kinetic_y=kinetic_y,
        potential_y=potential_y,
        nonlinear_u=nonlinear_u,
        nonlinear_y=nonlinear_y,
        delay_window=delay_window,
        total=total,
    )


def energy_delayed(st: State, buf: HistoryBuffer, coeffs: CoefficientSet,
                   nl1: Nonlinearity, nl2: Nonlinearity) -> EnergyReport:
    """
    E(t) = ½‖U‖²_𝓗 − ∫F₁(u) − ∫F₂(y) + ½∫_{t−τ}^{t}‖√|a₂| y_t(s)‖² ds.

    Args:
        st: State at time t
        buf: History buffer whose newest sample is at t
        coeffs: Coefficient set (supplies |a₂|)
        nl1: Nonlinearity of the u equation
        nl2: Nonlinearity of the y equation

    Returns:
        EnergyReport of kind E_delayed
    """
    if abs(buf.t_head - st.t) > 1e-9 * max(1.0, abs(st.t)):
        raise OutOfWindowError(f"history head at t={buf.t_head} does not cover state time t={st.t}")
    return _report(st, "E_delayed", nl1, nl2, buf.window_integral(coeffs.a2_abs))


def energy_indefinite(st: State, nl1: Nonlinearity, nl2: Nonlinearity) -> EnergyReport:
    """Ẽ(t): quadratic part minus the nonlinear potentials."""
    return _report(st, "E_indefinite", nl1, nl2)


def energy_linear(st: State) -> EnergyReport:
    return _report(st, "E_linear", ZERO, ZERO)


def energy_kind_for(mode: Mode) -> EnergyKind:
    mode = Mode(mode)
    if mode == Mode.DELAYED:
        return "E_delayed"
    if mode == Mode.INDEFINITE:
        return "E_indefinite"
    return "E_linear"


def energy_series(traj: Trajectory, nl1: Nonlinearity = ZERO, nl2: Nonlinearity = ZERO,
                  kind: Optional[EnergyKind] = None) -> List[EnergyReport]:
    """Energy at every output time; the kind defaults to the one matching the run mode."""
    kind = kind or energy_kind_for(traj.mode)
    reports = []
    for st, snap in zip(traj.states, traj.snapshots):
        if kind == "E_delayed":
            if snap is None:
                raise InvalidInputError("E_delayed needs a trajectory with history snapshots")
            reports.append(_report(st, kind, nl1, nl2, snap.window_integral))
        else:
            reports.append(_report(st, kind, nl1, nl2))
    return reports


def state_norm_sq(st: State) -> float:
    return st.norm_sq()


class DissipationReport(BaseModel):
    """Centered-difference energy derivative against the dissipation identity."""

    kind: EnergyKind
    times: List[float]
    derivative: List[float]
    identity: List[float]
    residual: List[float]
    max_abs_residual: float
    max_identity: float


def dissipation_identity(st: State, coeffs: CoefficientSet, mode: Mode,
                         delayed_w: Optional[np.ndarray] = None) -> float:
    """
    Right-hand side of the energy identity for a mode.

    delayed: −∫a₁v² − ∫a₂ w w(t−τ) + ½∫|a₂|w² − ½∫|a₂|w(t−τ)²
    indefinite, definite: −∫a₁v² − ∫a₂w²
    linear_reference: −∫a₁v²
    """
    mode = Mode(mode)
    h = st.grid.h
    v, w = st.v.values, st.w.values
    a1, a2 = coeffs.a1.values, coeffs.a2.values
    value = -h * float(np.dot(a1, v * v))
    if mode == Mode.DELAYED:
        if delayed_w is None:
            raise InvalidInputError("delayed identity needs y_t(t - tau)")
        a2_abs = coeffs.a2_abs
        value += h * float(
            -np.dot(a2, w * delayed_w) + 0.5 * np.dot(a2_abs, w * w) - 0.5 * np.dot(a2_abs, delayed_w * delayed_w)
        )
    elif mode in (Mode.INDEFINITE, Mode.DEFINITE):
        value -= h * float(np.dot(a2, w * w))
    return value


def dissipation_residual(traj: Trajectory, coeffs: CoefficientSet, mode: Optional[Mode] = None,
                         nl1: Nonlinearity = ZERO, nl2: Nonlinearity = ZERO) -> DissipationReport:
    """
    Compare the centered difference of the mode's energy with its dissipation identity.

    Args:
        traj: Trajectory with at least three outputs
        coeffs: Coefficient set of the run
        mode: Mode whose identity is checked (defaults to the run mode)
        nl1: Nonlinearity of the u equation
        nl2: Nonlinearity of the y equation

    Returns:
        DissipationReport over the interior output times
    """
    mode = Mode(mode or traj.mode)
    if len(traj.states) < 3:
        raise InvalidInputError(f"dissipation residual needs >= 3 samples, got {len(traj.states)}")
    kind = energy_kind_for(mode)
    energies = np.array([rep.total for rep in energy_series(traj, nl1, nl2, kind)])
    times = np.asarray(traj.times)

    derivative = (energies[2:] - energies[:-2]) / (times[2:] - times[:-2])
    identity = []
    for k in range(1, len(times) - 1):
        snap = traj.snapshots[k]
        delayed_w = snap.delayed_w if (mode == Mode.DELAYED and snap is not None) else None
        identity.append(dissipation_identity(traj.states[k], coeffs, mode, delayed_w))
    identity = np.asarray(identity)
    residual = derivative - identity
    report = DissipationReport(
        kind=kind,
        times=times[1:-1].tolist(),
        derivative=derivative.tolist(),
        identity=identity.tolist(),
        residual=residual.tolist(),
        max_abs_residual=float(np.max(np.abs(residual))),
        max_identity=float(np.max(identity)),
    )
    logger.debug(f"Dissipation residual ({kind}): max |r| = {report.max_abs_residual:.3e}")
    return report


class PositivityReport(BaseModel):
    """Small-data positivity of the initial energy."""

    h_u: float
    h_y: float
    premise: bool
    energy: float
    lower_bound: float
    holds: bool


def initial_energy_positive(st: State, nl1: Nonlinearity, nl2: Nonlinearity,
                            buf: Optional[HistoryBuffer] = None,
                            coeffs: Optional[CoefficientSet] = None) -> PositivityReport:
    """
    If h₁(‖∇u₀‖) and h₂(‖∇y₀‖) are below ½ the energy dominates ¼‖U₀‖²_𝓗 (plus ¼ of the window).
    """
    h = st.grid.h
    h_u = float(nl1.h(math.sqrt(h1_sq(st.u.values, h))))
    h_y = float(nl2.h(math.sqrt(h1_sq(st.y.values, h))))
    window = 0.0
    if buf is not None:
        if coeffs is None:
            raise InvalidInputError("the delayed energy needs the coefficient set")
        report = energy_delayed(st, buf, coeffs, nl1, nl2)
        window = 2.0 * report.delay_window
    else:
        report = energy_indefinite(st, nl1, nl2)
    lower = 0.25 * st.norm_sq() + 0.25 * window
    holds = report.total > lower or (report.total == 0.0 and lower == 0.0)
    return PositivityReport(
        h_u=h_u,
        h_y=h_y,
        premise=h_u < 0.5 and h_y < 0.5,
        energy=report.total,
        lower_bound=lower,
        holds=bool(holds),
    )


def gronwall_premise_holds(traj: Trajectory, energies: List[EnergyReport]) -> np.ndarray:
    """Per-output flag of E(t) ≥ ¼‖y_t(t)‖²."""
    h = traj.grid.h
    return np.array([
        rep.total >= 0.25 * l2_sq(st.w.values, h) for rep, st in zip(energies, traj.states)
    ])
