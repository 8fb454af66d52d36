"""
Stability conditions, smallness certificates and a-posteriori energy bounds
"""
import logging
import math
from typing import Callable, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field as PydField
from scipy.integrate import trapezoid

from ..dynamics import HistoryBuffer, HistoryFunction, HistorySpec, Mode, State, Trajectory, init_history
from ..errors import InvalidInputError
from ..grid import Grid1D
from ..model import CoefficientSet, Nonlinearity, certified_lipschitz
from .energy import energy_series
from .semigroup import SemigroupEstimate

logger = logging.getLogger(__name__)

HORIZON_TARGET = 0.9
LIPSCHITZ_SLACK = 0.9


class ConditionCheck(BaseModel):
    """One strict inequality lhs < rhs, with margin = rhs − lhs."""

    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


def _condition(name: str, lhs: float, rhs: float) -> ConditionCheck:
    margin = rhs - lhs
    return ConditionCheck(name=name, lhs=lhs, rhs=rhs, margin=margin, passed=bool(margin > 0))


def _check_constants(M: float, alpha: float):
    if not M >= 1.0:
        raise InvalidInputError(f"M must be >= 1, got {M}")
    if not alpha > 0.0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")


def check_delay_condition(M: float, alpha: float, tau: float, a2_inf: float) -> ConditionCheck:
    """e^{ατ}‖a₂‖_∞ < α/M."""
    _check_constants(M, alpha)
    if tau < 0:
        raise InvalidInputError(f"tau must be nonnegative, got {tau}")
    return _condition("delay", math.exp(alpha * tau) * a2_inf, alpha / M)


def check_indefinite_condition(M: float, alpha: float, a2_minus_inf: float) -> ConditionCheck:
    """‖a₂⁻‖_∞ < α̃/M̃."""
    _check_constants(M, alpha)
    return _condition("indefinite", a2_minus_inf, alpha / M)


class StabilityCertificate(BaseModel):
    """Constants and verdicts of the small-data exponential stability argument."""

    mode: Literal["delayed", "indefinite"]
    M: float
    alpha: float
    estimate_method: str
    tau: Optional[float] = None
    a2_inf: float
    a2_minus_inf: float
    gamma: float
    T: Optional[float] = None
    C_T: Optional[float] = None
    horizon_with_rho: Optional[float] = None
    C_of_T: Optional[float] = None
    rho_h: Optional[float] = None
    rho_L: Optional[float] = None
    rho: Optional[float] = None
    data_norm_sq: float
    C_rho: Optional[float] = None
    L_at_Crho: Optional[float] = None
    envelope_rate: Optional[float] = None
    envelope_amplitude: Optional[float] = None
    conditions: List[ConditionCheck] = PydField(default_factory=list)
    short_circuited: bool = False
    passed: bool = False

    def condition(self, name: str) -> Optional[ConditionCheck]:
        for check in self.conditions:
            if check.name == name:
                return check
        return None

    @property
    def primary_margin(self) -> float:
        return self.conditions[0].margin

    def envelope(self, t) -> np.ndarray:
        """Duhamel envelope M(‖U₀‖ + history term)·e^{−rate·t}."""
        if self.envelope_rate is None or self.envelope_amplitude is None:
            raise InvalidInputError("certificate carries no decay envelope")
        return self.envelope_amplitude * np.exp(-self.envelope_rate * np.asarray(t, dtype=float))


def _search_horizon(constant: float, gamma: float, start: float, step: float) -> float:
    """Smallest T = start + k·step, k >= 1, with constant·e^{−γT} <= HORIZON_TARGET."""
    value = lambda k: constant * math.exp(-gamma * (start + k * step))
    k = max(1, math.ceil((math.log(constant / HORIZON_TARGET) / gamma - start) / step - 1e-9))
    while value(k) > HORIZON_TARGET:
        k += 1
    while k > 1 and value(k - 1) <= HORIZON_TARGET:
        k -= 1
    return start + k * step


def _growth_factor(exponent: float) -> float:
    """e^{exponent}, saturating to +inf past the float range."""
    try:
        return math.exp(exponent)
    except OverflowError:
        return math.inf


def _radius(C_of_T: float, rho: float) -> float:
    """2√C(T)·ρ with 0·∞ = 0."""
    if rho == 0.0:
        return 0.0
    return 2.0 * math.sqrt(C_of_T) * rho


def _rho_from_h(nl1: Nonlinearity, nl2: Nonlinearity, C_of_T: float) -> float:
    threshold = min(nl1.h_inverse(0.5), nl2.h_inverse(0.5))
    if math.isinf(threshold):
        return math.inf
    return threshold / (2.0 * math.sqrt(C_of_T))


def _shrink_rho(lipschitz: Callable[[float], float], rho: float, C_of_T: float, target: float) -> float:
    """Largest ρ' <= ρ (by geometric bisection) with L(2√C ρ') <= target."""
    if rho == 0.0:
        return 0.0
    if lipschitz(_radius(C_of_T, rho)) <= target:
        return rho
    if math.isinf(C_of_T):
        return 0.0
    scale = 2.0 * math.sqrt(C_of_T)
    hi = rho if math.isfinite(rho) else 1e6
    lo = hi * 2.0 ** -60
    if lipschitz(scale * lo) > target:
        return 0.0
    for _ in range(100):
        mid = math.sqrt(lo * hi)
        if lipschitz(scale * mid) <= target:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1.0 + 1e-12:
            break
    return lo


def _history_buffer(history: Union[HistoryBuffer, HistorySpec, HistoryFunction], tau: float,
                    grid: Grid1D, U0: State) -> HistoryBuffer:
    if isinstance(history, HistoryBuffer):
        if history.t_head != 0.0:
            raise InvalidInputError("certificate needs the initial history buffer (t_head = 0)")
        return history
    return init_history(history, tau, tau / 100.0, grid, initial_velocity=U0.w.values)


def _history_envelope_integral(buf: HistoryBuffer, coeffs: CoefficientSet, alpha: float) -> float:
    """∫₀^τ e^{αs}‖a₂ g(s−τ)‖ ds by trapezoid over the buffered samples."""
    h = buf.grid.h
    a2 = coeffs.a2.values
    ratio = buf.tau / buf.dt
    whole = int(math.floor(ratio + 1e-9))
    lags = [float(k) for k in range(whole + 1)]
    rows = [buf.at_lag(k) for k in range(whole + 1)]
    if ratio - whole > 1e-9:
        lags.append(ratio)
        rows.append(buf.query(-buf.tau))
    s = buf.tau - np.array(lags) * buf.dt
    q = np.array([math.sqrt(h * float(np.sum((a2 * row) ** 2))) for row in rows]) * np.exp(alpha * s)
    # s decreases along the lags
    return float(-trapezoid(q, x=s))


def smallness_certificate(U0: State, history: Optional[Union[HistoryBuffer, HistorySpec, HistoryFunction]],
                          coeffs: CoefficientSet, nl1: Nonlinearity, nl2: Nonlinearity,
                          est: SemigroupEstimate, mode: Mode, tau: Optional[float] = None,
                          T_step: float = 0.01, shrink_rho: bool = True,
                          lipschitz_samples: int = 200, seed: int = 0) -> StabilityCertificate:
    """
    Evaluate the chain of constants of the small-data stability theorem.

    Delayed mode: delay condition, horizon T with C_T <= 0.9, C(T) = e^{4‖a₂‖T},
    ρ from the h-thresholds (optionally shrunk so the Lipschitz gate holds with slack),
    data check, Lipschitz gate and decay envelope. Indefinite mode follows the same
    chain with (M̃, α̃), ‖a₂⁻‖ and C̃(T) = e^{4‖a₂⁻‖T}; its horizon is chosen from
    M̃²e^{−γ̃T} <= 0.9 with no ρ² factor, and M̃²ρ²e^{−γ̃T} is reported as
    horizon_with_rho.

    C(T) saturates to +inf when e^{4‖a₂‖T} leaves the float range. With a nonzero
    nonlinearity ρ is then 0, the data check fails and no Lipschitz gate or envelope
    is produced.

    Args:
        U0: Initial state
        history: Initial history (delayed mode only)
        coeffs: Coefficient set
        nl1: Nonlinearity of the u equation
        nl2: Nonlinearity of the y equation
        est: Semigroup constants of the reference (or indefinite_plus) semigroup
        mode: delayed or indefinite
        tau: Delay (delayed mode only)
        T_step: Grid step of the horizon search
        shrink_rho: Shrink ρ until the Lipschitz gate holds with 10% slack
        lipschitz_samples: Samples for empirical Lipschitz constants
        seed: Seed for empirical Lipschitz constants

    Returns:
        StabilityCertificate; a failing structural condition short-circuits the chain
    """
    mode = Mode(mode)
    if mode not in (Mode.DELAYED, Mode.INDEFINITE):
        raise InvalidInputError(f"certificates exist for delayed and indefinite modes, got {mode.value}")
    grid = U0.grid
    M, alpha = est.M, est.alpha
    a2_inf, a2_minus_inf = coeffs.a2_inf, coeffs.a2_minus_inf
    U0_norm_sq = U0.norm_sq()

    def lipschitz(r: float) -> float:
        return max(
            certified_lipschitz(nl1, r, grid, lipschitz_samples, seed),
            certified_lipschitz(nl2, r, grid, lipschitz_samples, seed),
        )

    if mode == Mode.DELAYED:
        if tau is None or history is None:
            raise InvalidInputError("delayed certificate needs tau and the initial history")
        structural = check_delay_condition(M, alpha, tau, a2_inf)
        growth = a2_inf
        buf = _history_buffer(history, tau, grid, U0)
        data_norm_sq = U0_norm_sq + buf.window_integral(coeffs.a2_abs)
        gamma = alpha - M * a2_inf * math.exp(alpha * tau)
    else:
        structural = check_indefinite_condition(M, alpha, a2_minus_inf)
        growth = a2_minus_inf
        buf = None
        data_norm_sq = U0_norm_sq
        gamma = alpha - M * a2_minus_inf

    base = dict(
        mode=mode.value, M=M, alpha=alpha, estimate_method=est.method, tau=tau,
        a2_inf=a2_inf, a2_minus_inf=a2_minus_inf, gamma=gamma, data_norm_sq=data_norm_sq,
    )
    if not structural.passed:
        logger.info(f"Certificate short-circuited: {structural.name} margin {structural.margin:.4g}")
        return StabilityCertificate(**base, conditions=[structural], short_circuited=True, passed=False)

    if mode == Mode.DELAYED:
        C_T_constant = (2.0 * M ** 2 * (1.0 + tau * math.exp(2.0 * alpha * tau) * a2_inf)
                        * (1.0 + tau * a2_inf * math.exp(alpha * tau)))
        T = _search_horizon(C_T_constant, gamma, tau, T_step)
    else:
        C_T_constant = M ** 2
        T = _search_horizon(C_T_constant, gamma, 0.0, T_step)
    C_T = C_T_constant * math.exp(-gamma * T)
    horizon = _condition("horizon", C_T, 1.0)

    C_of_T = _growth_factor(4.0 * growth * T)
    rho_h = _rho_from_h(nl1, nl2, C_of_T)
    gate = gamma / (2.0 * M)
    rho_L = None
    rho = rho_h
    if shrink_rho:
        rho_L = _shrink_rho(lipschitz, rho_h, C_of_T, LIPSCHITZ_SLACK * gate)
        rho = min(rho_h, rho_L)

    data = _condition("data", data_norm_sq, rho ** 2)
    C_rho = _radius(C_of_T, rho)
    conditions = [structural, horizon, data]
    L_at_Crho = envelope_rate = envelope_amplitude = None
    if C_rho > 0.0:
        L_at_Crho = lipschitz(C_rho)
        conditions.append(_condition("lipschitz", L_at_Crho, gate))
        envelope_rate = gamma - M * L_at_Crho
        if buf is not None:
            envelope_amplitude = M * (math.sqrt(U0_norm_sq) + _history_envelope_integral(buf, coeffs, alpha))
        else:
            envelope_amplitude = M * math.sqrt(U0_norm_sq)
    else:
        # ρ = 0 fails the strict data check for every initial state
        logger.warning(f"Certificate radius collapsed to zero (C(T)={C_of_T:.4g})")

    certificate = StabilityCertificate(
        **base,
        T=T,
        C_T=C_T,
        horizon_with_rho=(C_T_constant * rho ** 2 * math.exp(-gamma * T)
                          if mode == Mode.INDEFINITE and math.isfinite(rho) else None),
        C_of_T=C_of_T,
        rho_h=rho_h,
        rho_L=rho_L,
        rho=rho,
        C_rho=C_rho,
        L_at_Crho=L_at_Crho,
        envelope_rate=envelope_rate,
        envelope_amplitude=envelope_amplitude,
        conditions=conditions,
        passed=all(check.passed for check in conditions),
    )
    logger.info(
        f"Certificate ({mode.value}): T={T:.4g}, rho={rho:.4g}, L(C_rho)={L_at_Crho}, "
        f"passed={certificate.passed}"
    )
    return certificate


class BoundsReport(BaseModel):
    """Worst violations of the lower, Gronwall and envelope bounds along a trajectory."""

    n_times: int
    tol: float
    lower_bound_holds: bool
    gronwall_holds: bool
    envelope_holds: bool
    envelope_available: bool
    worst_lower_gap: float
    worst_gronwall_ratio: float
    worst_envelope_ratio: Optional[float] = None
    energy_growth: bool
    passed: bool


def verify_energy_bounds(traj: Trajectory, coeffs: CoefficientSet, nl1: Nonlinearity, nl2: Nonlinearity,
                         cert: StabilityCertificate, tol: float = 5e-2) -> BoundsReport:
    """
    Check E(t) > ¼‖U‖²_𝓗 + ¼·window, E(t) <= C(t)E(0)(1+tol) and ‖U(t)‖ <= envelope(t)(1+tol).

    Args:
        traj: Trajectory of a delayed or indefinite run
        coeffs: Coefficient set of the run
        nl1: Nonlinearity of the u equation
        nl2: Nonlinearity of the y equation
        cert: Certificate for the run's initial data
        tol: Relative tolerance of the upper bounds

    Returns:
        BoundsReport; violations are report content
    """
    mode = Mode(traj.mode)
    if mode not in (Mode.DELAYED, Mode.INDEFINITE):
        raise InvalidInputError(f"energy bounds apply to delayed and indefinite runs, got {mode.value}")
    energies = energy_series(traj, nl1, nl2)
    times = np.asarray(traj.times)
    totals = np.array([rep.total for rep in energies])
    windows = np.array([2.0 * rep.delay_window for rep in energies])
    norms_sq = np.array([st.norm_sq() for st in traj.states])

    lower = 0.25 * norms_sq + 0.25 * windows
    both_zero = (totals == 0.0) & (lower == 0.0)
    lower_ok = (totals > lower) | both_zero
    scale = np.maximum(np.abs(lower), 1e-300)
    worst_lower_gap = float(np.max(np.where(lower_ok, 0.0, (lower - totals) / scale)))

    growth = cert.a2_inf if mode == Mode.DELAYED else cert.a2_minus_inf
    gronwall = np.exp(4.0 * growth * times) * totals[0]
    gronwall_ok = totals <= gronwall * (1.0 + tol) + 1e-300
    ratios = np.divide(totals, gronwall, out=np.zeros_like(totals), where=gronwall > 0)
    worst_gronwall = float(np.max(ratios))

    envelope_available = cert.envelope_rate is not None and cert.envelope_amplitude is not None
    worst_envelope = None
    envelope_ok = False
    if envelope_available:
        env = cert.envelope(times)
        norms = np.sqrt(norms_sq)
        envelope_ok = bool(np.all(norms <= env * (1.0 + tol) + 1e-300))
        worst_envelope = float(np.max(np.divide(norms, env, out=np.zeros_like(norms), where=env > 0)))

    energy_growth = bool(totals[-1] > totals[0] * (1.0 + 1e-12) and totals[-1] > 0)
    report = BoundsReport(
        n_times=len(times),
        tol=tol,
        lower_bound_holds=bool(np.all(lower_ok)),
        gronwall_holds=bool(np.all(gronwall_ok)),
        envelope_holds=envelope_ok,
        envelope_available=envelope_available,
        worst_lower_gap=worst_lower_gap,
        worst_gronwall_ratio=worst_gronwall,
        worst_envelope_ratio=worst_envelope,
        energy_growth=energy_growth,
        passed=bool(np.all(lower_ok) and np.all(gronwall_ok) and envelope_ok),
    )
    if not report.passed:
        logger.warning(
            f"Energy bounds violated: lower={report.lower_bound_holds}, "
            f"gronwall={report.gronwall_holds}, envelope={report.envelope_holds}"
        )
    return report
