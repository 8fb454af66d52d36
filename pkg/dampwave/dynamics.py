"""
Semi-discrete dynamics: state, delay history, right-hand side, RK4 stepping, generators
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydField
from scipy import sparse
from scipy.integrate import trapezoid

from .errors import HypothesisViolationError, InvalidConfigError, InvalidInputError, OutOfWindowError
from .grid import Field, Grid1D, h1_sq, l2_sq, laplacian_matrix, laplacian_values, sine_mode
from .model import CoefficientSet, Nonlinearity, ZERO

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    """Which member of the system family is evolved."""

    DELAYED = "delayed"
    INDEFINITE = "indefinite"
    DEFINITE = "definite"
    LINEAR_REFERENCE = "linear_reference"


class GeneratorMode(str, Enum):
    """Linear operators that can be assembled as matrices."""

    LINEAR_REFERENCE = "linear_reference"
    DEFINITE = "definite"
    INDEFINITE_PLUS = "indefinite_plus"
    INDEFINITE = "indefinite"


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    """U = (u, u_t, y, y_t) at time t."""

    u: Field
    v: Field
    y: Field
    w: Field
    t: float = 0.0

    @property
    def grid(self) -> Grid1D:
        return self.u.grid

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.u.values, self.v.values, self.y.values, self.w.values])

    @classmethod
    def from_vector(cls, vec: np.ndarray, grid: Grid1D, t: float = 0.0) -> "State":
        n = grid.n_interior
        return cls(
            Field(vec[:n], grid),
            Field(vec[n:2 * n], grid),
            Field(vec[2 * n:3 * n], grid),
            Field(vec[3 * n:], grid),
            t,
        )

    @classmethod
    def zeros(cls, grid: Grid1D, t: float = 0.0) -> "State":
        return cls.from_vector(np.zeros(4 * grid.n_interior), grid, t)

    def norm_sq(self) -> float:
        """‖U‖²_𝓗 = ‖∇u‖² + ‖u_t‖² + ‖∇y‖² + ‖y_t‖²."""
        return vector_norm_sq(self.to_vector(), self.grid)


# derivatives share the layout of states
StateDerivative = State


def vector_norm_sq(vec: np.ndarray, grid: Grid1D) -> float:
    n, h = grid.n_interior, grid.h
    return (h1_sq(vec[:n], h) + l2_sq(vec[n:2 * n], h)
            + h1_sq(vec[2 * n:3 * n], h) + l2_sq(vec[3 * n:], h))


def energy_gram(grid: Grid1D) -> sparse.csr_matrix:
    """Gram matrix W of the 𝓗 inner product: ⟨U, V⟩_𝓗 = Uᵀ W V."""
    n, h = grid.n_interior, grid.h
    stiffness = -h * laplacian_matrix(grid)
    mass = h * sparse.identity(n, format="csr")
    return sparse.block_diag([stiffness, mass, stiffness, mass], format="csr")


class ModeAmplitude(BaseModel):
    """Amplitude of the sine mode sin(kπx/L)."""
    model_config = ConfigDict(extra="forbid")

    k: int = PydField(ge=1)
    amplitude: float


class InitialDataSpec(BaseModel):
    """Initial data (u0, u1, y0, y1)."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["zero", "modes", "random_fourier"] = "modes"
    u0: List[ModeAmplitude] = PydField(default_factory=list)
    u1: List[ModeAmplitude] = PydField(default_factory=list)
    y0: List[ModeAmplitude] = PydField(default_factory=list)
    y1: List[ModeAmplitude] = PydField(default_factory=list)
    n_modes: int = PydField(default=8, ge=1)
    norm: float = PydField(default=1.0, ge=0.0)
    seed: Optional[int] = None


def _mode_sum(grid: Grid1D, modes: List[ModeAmplitude]) -> np.ndarray:
    out = np.zeros(grid.n_interior)
    for mode in modes:
        out += mode.amplitude * sine_mode(grid, mode.k)
    return out


def build_initial_state(spec: InitialDataSpec, grid: Grid1D, seed: int = 0) -> State:
    """Assemble U₀ from an initial-data description."""
    if spec.kind == "zero":
        return State.zeros(grid)

    if spec.kind == "modes":
        return State(
            Field(_mode_sum(grid, spec.u0), grid),
            Field(_mode_sum(grid, spec.u1), grid),
            Field(_mode_sum(grid, spec.y0), grid),
            Field(_mode_sum(grid, spec.y1), grid),
        )

    rng = np.random.default_rng(spec.seed if spec.seed is not None else seed)
    n_modes = min(spec.n_modes, grid.n_interior)
    basis = np.stack([sine_mode(grid, k) for k in range(1, n_modes + 1)])
    weights = 1.0 / np.arange(1, n_modes + 1) ** 2
    parts = [(rng.standard_normal(n_modes) * weights) @ basis for _ in range(4)]
    vec = np.concatenate(parts)
    norm = math.sqrt(vector_norm_sq(vec, grid))
    if norm > 0:
        vec *= spec.norm / norm
    return State.from_vector(vec, grid)


# ---------------------------------------------------------------------------
# Delay history
# ---------------------------------------------------------------------------

class HistorySpec(BaseModel):
    """Initial history g(x, s) of y_t on [−τ, 0]."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["zero", "constant", "modes", "initial_velocity"] = "zero"
    value: float = 0.0
    modes: List[ModeAmplitude] = PydField(default_factory=list)
    # coefficients c0, c1, ... of the time factor c0 + c1 s + c2 s² + ...
    time_poly: List[float] = PydField(default_factory=lambda: [1.0])


HistoryFunction = Callable[[np.ndarray, float], np.ndarray]


def history_function(spec: HistorySpec, grid: Grid1D,
                     initial_velocity: Optional[np.ndarray] = None) -> HistoryFunction:
    """Turn a history description into a callable g(x, s)."""
    poly = np.polynomial.Polynomial(spec.time_poly)

    if spec.kind == "zero":
        return lambda x, s: np.zeros_like(x)
    if spec.kind == "constant":
        return lambda x, s: np.full_like(x, spec.value * poly(s))
    if spec.kind == "modes":
        profile = _mode_sum(grid, spec.modes)
        return lambda x, s: profile * poly(s)
    if initial_velocity is None:
        raise InvalidConfigError("history kind initial_velocity needs the initial state")
    frozen = np.array(initial_velocity, dtype=float)
    return lambda x, s: frozen.copy()


class HistoryBuffer:
    """
    Ring of y_t samples at s = t_head − k·dt, k = 0..m, with m = ceil(τ/dt) + 1.
    """

    def __init__(self, tau: float, dt: float, grid: Grid1D, samples: np.ndarray, t_head: float = 0.0):
        self.tau = float(tau)
        self.dt = float(dt)
        self.grid = grid
        self.m = samples.shape[0] - 1
        self._data = np.array(samples, dtype=float)
        self._head = 0
        self._t0 = float(t_head)
        self._steps = 0

    @property
    def t_head(self) -> float:
        return self._t0 + self._steps * self.dt

    def at_lag(self, k: int) -> np.ndarray:
        """Sample at s = t_head − k·dt."""
        return self._data[(self._head + k) % (self.m + 1)]

    @property
    def samples(self) -> List[Field]:
        """Samples ordered newest first."""
        return [Field(self.at_lag(k), self.grid) for k in range(self.m + 1)]

    def push(self, w: np.ndarray):
        """Record the newest y_t sample, one dt after the current head."""
        self._head = (self._head - 1) % (self.m + 1)
        self._data[self._head] = w
        self._steps += 1

    def query(self, s: float) -> np.ndarray:
        """Linear interpolation of y_t(s) between bracketing samples."""
        lag = (self.t_head - s) / self.dt
        if lag < -1e-9 or lag > self.m + 1e-9:
            raise OutOfWindowError(
                f"history query at s={s:.12g} outside window "
                f"[{self.t_head - self.m * self.dt:.12g}, {self.t_head:.12g}]"
            )
        lag = min(max(lag, 0.0), float(self.m))
        k0 = min(int(math.floor(lag)), self.m - 1)
        frac = lag - k0
        if frac < 1e-9:
            return self.at_lag(k0).copy()
        if frac > 1.0 - 1e-9:
            return self.at_lag(k0 + 1).copy()
        return (1.0 - frac) * self.at_lag(k0) + frac * self.at_lag(k0 + 1)

    def window_integral(self, weight: np.ndarray) -> float:
        """∫_{t−τ}^{t} h·Σ weight·y_t(s)² ds by trapezoid over the samples."""
        h = self.grid.h
        ratio = self.tau / self.dt
        whole = int(math.floor(ratio + 1e-9))
        lags = [float(k) for k in range(whole + 1)]
        rows = [self.at_lag(k) for k in range(whole + 1)]
        if ratio - whole > 1e-9:
            lags.append(ratio)
            rows.append(self.query(self.t_head - self.tau))
        q = np.array([h * float(np.dot(weight, row * row)) for row in rows])
        return float(trapezoid(q, x=np.array(lags) * self.dt))

    def copy(self) -> "HistoryBuffer":
        clone = HistoryBuffer(self.tau, self.dt, self.grid, self._data, self._t0)
        clone._head = self._head
        clone._steps = self._steps
        return clone


def init_history(g_spec: Union[HistorySpec, HistoryFunction], tau: float, dt: float, grid: Grid1D,
                 initial_velocity: Optional[np.ndarray] = None) -> HistoryBuffer:
    """
    Pre-fill a history buffer with g sampled at s = 0, −dt, ..., −m·dt.

    Args:
        g_spec: History description or a callable g(x, s)
        tau: Delay (> 0)
        dt: Sample spacing, at most tau
        grid: Spatial grid
        initial_velocity: y_t(0), used by the initial_velocity history kind

    Returns:
        HistoryBuffer with t_head = 0
    """
    if tau <= 0:
        raise InvalidConfigError(f"delay tau must be positive, got {tau}")
    if dt <= 0 or dt > tau:
        raise InvalidConfigError(f"history spacing dt={dt} must lie in (0, tau={tau}]")
    g = g_spec if callable(g_spec) else history_function(g_spec, grid, initial_velocity)
    m = int(math.ceil(tau / dt - 1e-9)) + 1
    x = grid.nodes
    samples = np.stack([np.broadcast_to(np.asarray(g(x, -k * dt), dtype=float), x.shape) for k in range(m + 1)])
    if not np.all(np.isfinite(samples)):
        raise InvalidConfigError("history g produced non-finite values")
    return HistoryBuffer(tau, dt, grid, samples)


def sample_history(buf: HistoryBuffer, s: float) -> Field:
    """Evaluate the buffered history at time s."""
    return Field(buf.query(s), buf.grid)


# ---------------------------------------------------------------------------
# Right-hand side
# ---------------------------------------------------------------------------

class RightHandSide:
    """Vectorised (u′, v′, y′, w′) for one system mode."""

    def __init__(self, coeffs: CoefficientSet, nl1: Nonlinearity, nl2: Nonlinearity, mode: Mode):
        mode = Mode(mode)
        if mode == Mode.DEFINITE and not coeffs.is_nonnegative:
            j = int(np.flatnonzero(coeffs.a2_minus.values)[0])
            raise HypothesisViolationError(
                f"definite mode needs a2 >= 0; a2={coeffs.a2.values[j]} at node {j + 1}", node=j + 1
            )
        self.mode = mode
        self.grid = coeffs.grid
        self.n = self.grid.n_interior
        self.h = self.grid.h
        self.a1 = coeffs.a1.values
        self.a2 = coeffs.a2.values
        self.b = coeffs.b.values
        nonlinear = mode in (Mode.DELAYED, Mode.INDEFINITE)
        self.nl1 = nl1 if nonlinear and not nl1.is_zero else None
        self.nl2 = nl2 if nonlinear and not nl2.is_zero else None

    def __call__(self, U: np.ndarray, delayed_w: Optional[np.ndarray] = None) -> np.ndarray:
        if (delayed_w is not None) != (self.mode == Mode.DELAYED):
            raise InvalidInputError(f"delayed_w must be given exactly in delayed mode (mode={self.mode.value})")
        n, h = self.n, self.h
        u, v, y, w = U[:n], U[n:2 * n], U[2 * n:3 * n], U[3 * n:]
        out = np.empty_like(U)
        out[:n] = v
        acc_u = laplacian_values(u, h) - self.b * w - self.a1 * v
        if self.nl1 is not None:
            acc_u += self.nl1.f(u)
        out[n:2 * n] = acc_u
        out[2 * n:3 * n] = w
        acc_y = laplacian_values(y, h) + self.b * v
        if self.mode == Mode.DELAYED:
            acc_y -= self.a2 * delayed_w
        elif self.mode in (Mode.INDEFINITE, Mode.DEFINITE):
            acc_y -= self.a2 * w
        if self.nl2 is not None:
            acc_y += self.nl2.f(y)
        out[3 * n:] = acc_y
        return out


def rhs(st: State, coeffs: CoefficientSet, nl1: Nonlinearity, nl2: Nonlinearity,
        delayed_w: Optional[Field], mode: Mode) -> StateDerivative:
    """Time derivative of a state in the requested mode."""
    evaluate = RightHandSide(coeffs, nl1, nl2, mode)
    dvec = evaluate(st.to_vector(), None if delayed_w is None else delayed_w.values)
    return StateDerivative.from_vector(dvec, st.grid, st.t)


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

@dataclass
class RunSpec:
    """Everything integrate needs for one run."""

    coeffs: CoefficientSet
    initial: State
    T_final: float
    mode: Mode = Mode.LINEAR_REFERENCE
    nl1: Nonlinearity = ZERO
    nl2: Nonlinearity = ZERO
    dt: Optional[float] = None
    cfl: float = 0.5
    output_stride: int = 1
    tau: Optional[float] = None
    history: Optional[Union[HistorySpec, HistoryFunction]] = None
    max_norm: float = 1e100

    @property
    def grid(self) -> Grid1D:
        return self.coeffs.grid


@dataclass(frozen=True)
class HistorySnapshot:
    """Delay-window data recorded at an output time."""

    window_integral: float
    delayed_w: np.ndarray


@dataclass
class Trajectory:
    """Output states of a run, with delay-window snapshots in delayed mode."""

    times: List[float]
    states: List[State]
    mode: Mode
    dt: float
    tau: Optional[float] = None
    snapshots: List[Optional[HistorySnapshot]] = field(default_factory=list)
    initial_history: Optional[HistoryBuffer] = None
    blowup_time: Optional[float] = None

    @property
    def diverged(self) -> bool:
        return self.blowup_time is not None

    @property
    def grid(self) -> Grid1D:
        return self.states[0].grid

    def norms(self) -> np.ndarray:
        return np.sqrt([st.norm_sq() for st in self.states])


def resolve_dt(dt: Optional[float], cfl: float, h: float) -> float:
    """Time step from an explicit dt or the CFL number, enforcing dt ≤ cfl·h."""
    if cfl <= 0:
        raise InvalidConfigError(f"cfl must be positive, got {cfl}")
    limit = cfl * h
    if dt is None:
        return limit
    if dt <= 0:
        raise InvalidConfigError(f"dt must be positive, got {dt}")
    if dt > limit * (1.0 + 1e-12):
        raise InvalidConfigError(f"dt={dt} violates the CFL restriction dt <= {cfl}*h = {limit}")
    return float(dt)


def step_count(T_final: float, dt: float) -> int:
    ratio = T_final / dt
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9 * max(1.0, ratio):
        return int(nearest)
    return int(math.ceil(ratio))


def integrate(run: RunSpec) -> Trajectory:
    """
    Classical RK4 on the semi-discrete system, with interpolated memory in delayed mode.

    A non-finite state (or one whose norm exceeds max_norm) stops the run and
    records blowup_time; the states up to that point are kept.
    """
    grid = run.grid
    mode = Mode(run.mode)
    if run.T_final <= 0:
        raise InvalidConfigError(f"T_final must be positive, got {run.T_final}")
    if run.output_stride < 1:
        raise InvalidConfigError(f"output_stride must be >= 1, got {run.output_stride}")
    dt = resolve_dt(run.dt, run.cfl, grid.h)
    n_steps = step_count(run.T_final, dt)
    n = grid.n_interior
    evaluate = RightHandSide(run.coeffs, run.nl1, run.nl2, mode)

    delayed = mode == Mode.DELAYED
    buf = None
    initial_history = None
    tau = None
    if delayed:
        if run.tau is None or run.history is None:
            raise InvalidConfigError("delayed mode needs tau and a history")
        tau = float(run.tau)
        buf = init_history(run.history, tau, dt, grid, initial_velocity=run.initial.w.values)
        initial_history = buf.copy()
    elif run.tau is not None:
        raise InvalidConfigError(f"tau forbidden for mode={mode.value}")

    weight = run.coeffs.a2_abs

    def snapshot() -> Optional[HistorySnapshot]:
        if buf is None:
            return None
        return HistorySnapshot(buf.window_integral(weight), buf.query(buf.t_head - tau))

    U = run.initial.to_vector()
    times = [0.0]
    states = [State.from_vector(U, grid, 0.0)]
    snapshots = [snapshot()]
    blowup_time = None

    logger.info(f"Integrating mode={mode.value} n={n} dt={dt:.6g} steps={n_steps}")
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            t = k * dt
            if delayed:
                d0 = buf.query(t - tau)
                d_half = buf.query(t + 0.5 * dt - tau)
                d1 = buf.query(t + dt - tau)
            else:
                d0 = d_half = d1 = None
            k1 = evaluate(U, d0)
            k2 = evaluate(U + 0.5 * dt * k1, d_half)
            k3 = evaluate(U + 0.5 * dt * k2, d_half)
            k4 = evaluate(U + dt * k3, d1)
            U = U + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

            if not np.all(np.isfinite(U)) or vector_norm_sq(U, grid) > run.max_norm ** 2:
                blowup_time = (k + 1) * dt
                logger.warning(f"Blow-up detected at t={blowup_time:.6g}")
                break
            if delayed:
                buf.push(U[3 * n:])
            if (k + 1) % run.output_stride == 0:
                t_out = (k + 1) * dt
                times.append(t_out)
                states.append(State.from_vector(U, grid, t_out))
                snapshots.append(snapshot())

    return Trajectory(
        times=times,
        states=states,
        mode=mode,
        dt=dt,
        tau=tau,
        snapshots=snapshots,
        initial_history=initial_history,
        blowup_time=blowup_time,
    )


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def assemble_generator(coeffs: CoefficientSet, mode: GeneratorMode) -> sparse.csr_matrix:
    """
    Sparse matrix G of the linear part, so that rhs(U) = G·U.

    Args:
        coeffs: Coefficient set
        mode: linear_reference (a1 and b only), definite (damping a2 >= 0),
            indefinite_plus (damping a2⁺ only) or indefinite (full a2)

    Returns:
        (4n)x(4n) CSR matrix
    """
    mode = GeneratorMode(mode)
    grid = coeffs.grid
    n = grid.n_interior
    if mode == GeneratorMode.DEFINITE and not coeffs.is_nonnegative:
        j = int(np.flatnonzero(coeffs.a2_minus.values)[0])
        raise HypothesisViolationError(
            f"definite generator needs a2 >= 0; a2={coeffs.a2.values[j]} at node {j + 1}", node=j + 1
        )

    if mode == GeneratorMode.LINEAR_REFERENCE:
        damping_y = np.zeros(n)
    elif mode == GeneratorMode.INDEFINITE_PLUS:
        damping_y = coeffs.a2_plus.values
    else:
        damping_y = coeffs.a2.values

    lap = laplacian_matrix(grid)
    eye = sparse.identity(n, format="csr")
    A1 = sparse.diags(coeffs.a1.values)
    B = sparse.diags(coeffs.b.values)
    D = sparse.diags(damping_y)
    return sparse.bmat(
        [
            [None, eye, None, None],
            [lap, -A1, None, -B],
            [None, None, None, eye],
            [None, B, lap, -D],
        ],
        format="csr",
    )
