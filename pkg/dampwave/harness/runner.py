"""
Run orchestration: simulate, check, spectrum and fit
"""
import logging
import math
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from .. import __version__
from ..diagnostics.certificate import StabilityCertificate, smallness_certificate, verify_energy_bounds
from ..diagnostics.decay import fit_decay, late_window
from ..diagnostics.energy import energy_series
from ..diagnostics.semigroup import (
    ABSCISSA_TOL,
    DISAGREEMENT_LIMIT,
    SemigroupEstimate,
    compare_estimates,
    estimate_semigroup_constants,
    generator_spectrum,
)
from ..dynamics import (
    GeneratorMode,
    HistoryBuffer,
    Mode,
    RunSpec,
    State,
    Trajectory,
    assemble_generator,
    build_initial_state,
    init_history,
    integrate,
    resolve_dt,
)
from ..errors import EXIT_DIVERGED, EXIT_OK, InvalidInputError, NotExponentiallyStableError
from ..grid import Grid1D, build_grid, l2_sq
from ..model import CoefficientSet, Nonlinearity, make_coefficients, validate_hypothesis
from .config import CertificateOptions, RunConfig
from .io import SERIES_COLUMNS, read_series, write_csv, write_json, write_series

logger = logging.getLogger(__name__)

HYPOTHESIS_SAMPLES = 500

GENERATOR_FOR_MODE = {
    Mode.LINEAR_REFERENCE: GeneratorMode.LINEAR_REFERENCE,
    Mode.DEFINITE: GeneratorMode.DEFINITE,
    Mode.INDEFINITE: GeneratorMode.INDEFINITE,
    Mode.DELAYED: GeneratorMode.LINEAR_REFERENCE,
}

# semigroup whose constants enter the certificate
REFERENCE_FOR_MODE = {
    Mode.DELAYED: GeneratorMode.LINEAR_REFERENCE,
    Mode.INDEFINITE: GeneratorMode.INDEFINITE_PLUS,
}


@dataclass
class PreparedRun:
    """Everything built from a RunConfig before integration."""

    config: RunConfig
    grid: Grid1D
    coeffs: CoefficientSet
    nl1: Nonlinearity
    nl2: Nonlinearity
    initial: State
    dt: float
    initial_history: Optional[HistoryBuffer]

    def run_spec(self) -> RunSpec:
        cfg = self.config
        return RunSpec(
            coeffs=self.coeffs,
            initial=self.initial,
            T_final=cfg.time.T_final,
            mode=cfg.mode,
            nl1=self.nl1,
            nl2=self.nl2,
            dt=self.dt,
            cfl=cfg.time.cfl,
            output_stride=cfg.time.output_stride,
            tau=cfg.tau,
            history=cfg.history,
            max_norm=cfg.max_norm,
        )


def prepare_run(cfg: RunConfig) -> PreparedRun:
    """Build grid, coefficients, nonlinearities, initial state and history from a config."""
    grid = build_grid(cfg.grid.n_interior, cfg.grid.L)
    coeffs = make_coefficients(cfg.coefficients, grid)
    nl1 = cfg.nonlinearity.u.build(grid.L)
    nl2 = cfg.nonlinearity.y.build(grid.L)
    for nl in (nl1, nl2):
        nl.check_origin()
        nl.check_h()
    initial = build_initial_state(cfg.initial, grid, seed=cfg.seed)
    dt = resolve_dt(cfg.time.dt, cfg.time.cfl, grid.h)
    history = None
    if cfg.mode == Mode.DELAYED:
        history = init_history(cfg.history, cfg.tau, dt, grid, initial_velocity=initial.w.values)
    return PreparedRun(cfg, grid, coeffs, nl1, nl2, initial, dt, history)


def series_frame(traj: Trajectory, nl1: Nonlinearity, nl2: Nonlinearity) -> pd.DataFrame:
    """One row per output time with the energy split and norms."""
    h = traj.grid.h
    rows = []
    for st, rep in zip(traj.states, energy_series(traj, nl1, nl2)):
        rows.append([
            st.t, rep.total, rep.kinetic_u, rep.potential_u, rep.kinetic_y, rep.potential_y,
            rep.nonlinear_u, rep.nonlinear_y, rep.delay_window, math.sqrt(st.norm_sq()),
            math.sqrt(l2_sq(st.v.values, h)), math.sqrt(l2_sq(st.w.values, h)),
        ])
    return pd.DataFrame(rows, columns=SERIES_COLUMNS)


def semigroup_estimate(prepared: PreparedRun, options: CertificateOptions) -> SemigroupEstimate:
    mode = REFERENCE_FOR_MODE[prepared.config.mode]
    if options.method == "given":
        return SemigroupEstimate(M=options.M, alpha=options.alpha, method="given", mode=mode.value)
    return estimate_semigroup_constants(
        prepared.coeffs,
        prepared.grid,
        mode=mode,
        method=options.method,
        n_samples=options.n_samples,
        seed=prepared.config.seed,
        T_probe=options.T_probe,
        safety_margin=options.safety_margin,
    )


def build_certificate(prepared: PreparedRun,
                      options: Optional[CertificateOptions] = None) -> Tuple[Optional[StabilityCertificate], Optional[str]]:
    """
    Certificate for a prepared delayed or indefinite run.

    Returns:
        (certificate, None) on success, (None, reason) when no certificate exists
    """
    cfg = prepared.config
    options = options or cfg.certificate or CertificateOptions()
    if cfg.mode not in REFERENCE_FOR_MODE:
        return None, f"no certificate for mode={cfg.mode.value}"
    try:
        estimate = semigroup_estimate(prepared, options)
    except NotExponentiallyStableError as e:
        return None, str(e)
    cert = smallness_certificate(
        prepared.initial,
        prepared.initial_history,
        prepared.coeffs,
        prepared.nl1,
        prepared.nl2,
        estimate,
        cfg.mode,
        tau=cfg.tau,
        T_step=options.T_step,
        shrink_rho=options.shrink_rho,
        lipschitz_samples=options.lipschitz_samples,
        seed=cfg.seed,
    )
    return cert, None


def fit_rates(frame: pd.DataFrame, window: Optional[Tuple[float, float]]) -> Dict[str, Any]:
    """Fitted decay rates of E_total and norm_H; undefined rates are flagged, not raised."""
    times = frame["t"].to_numpy()
    if window is None:
        window = late_window(times)
    result: Dict[str, Any] = {"window": [float(window[0]), float(window[1])]}
    notes = []
    for key, column in (("energy_rate", "E_total"), ("norm_rate", "norm_H")):
        try:
            result[key] = fit_decay(times, frame[column].to_numpy(), window).rate
        except InvalidInputError as e:
            result[key] = None
            notes.append(f"{column}: {e}")
    if notes:
        logger.warning(f"Decay rate undefined: {'; '.join(notes)}")
    result["notes"] = notes
    return result


def package_versions() -> Dict[str, str]:
    versions = {"dampwave": __version__}
    for name in ("numpy", "scipy", "pandas", "pydantic"):
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class SimulationResult(BaseModel):
    """Outcome of run_simulate."""

    status: str
    exit_code: int
    files: List[str]
    manifest: Dict[str, Any]


def run_simulate(cfg: RunConfig, out_dir: Path) -> SimulationResult:
    """
    Integrate a configuration and write series.csv and manifest.json.

    Args:
        cfg: Validated run configuration
        out_dir: Output directory (created if missing)

    Returns:
        SimulationResult; a blow-up gives status "diverged" with the partial series
    """
    out_dir = Path(out_dir)
    try:
        prepared = prepare_run(cfg)
        logger.info(f"Simulating mode={cfg.mode.value} to T={cfg.time.T_final} (seed {cfg.seed})")
        traj = integrate(prepared.run_spec())
        frame = series_frame(traj, prepared.nl1, prepared.nl2)
    except Exception as e:
        logger.error(f"Simulation failed: {e}")
        raise

    status = "diverged" if traj.diverged else "ok"
    exit_code = EXIT_DIVERGED if traj.diverged else EXIT_OK
    if traj.diverged:
        fit = {"window": None, "energy_rate": None, "norm_rate": None,
               "notes": [f"diverged at t={traj.blowup_time}"]}
    else:
        fit = fit_rates(frame, cfg.fit_window)

    certificate = None
    certificate_note = None
    bounds = None
    if cfg.certificate is not None:
        certificate, certificate_note = build_certificate(prepared)
        if certificate is not None and certificate.passed and not traj.diverged:
            bounds = verify_energy_bounds(traj, prepared.coeffs, prepared.nl1, prepared.nl2, certificate)

    files = ["series.csv", "manifest.json"]
    manifest = {
        "config": cfg.model_dump(mode="json"),
        "status": status,
        "exit_code": exit_code,
        "seed": cfg.seed,
        "dt": prepared.dt,
        "n_outputs": len(traj.times),
        "blowup_time": traj.blowup_time,
        "fit": fit,
        "certificate": certificate.model_dump(mode="json") if certificate else None,
        "certificate_note": certificate_note,
        "energy_bounds": bounds.model_dump(mode="json") if bounds else None,
        "versions": package_versions(),
        "files": files,
    }
    write_series(frame, out_dir / "series.csv")
    write_json(manifest, out_dir / "manifest.json")
    logger.info(f"Simulation {status}: {len(traj.times)} outputs written to {out_dir}")
    return SimulationResult(status=status, exit_code=exit_code, files=files, manifest=manifest)


def estimate_spread(prepared: PreparedRun, cert: StabilityCertificate,
                    options: Optional[CertificateOptions] = None) -> Optional[Dict[str, Any]]:
    """Cross-check the certificate's (M, α) against the other estimator; None for given constants."""
    options = options or prepared.config.certificate or CertificateOptions()
    if options.method == "given":
        return None
    other = "ensemble" if options.method == "spectral" else "spectral"
    used = SemigroupEstimate(M=cert.M, alpha=cert.alpha, method=cert.estimate_method)
    try:
        second = semigroup_estimate(prepared, options.model_copy(update={"method": other}))
    except (InvalidInputError, NotExponentiallyStableError) as e:
        logger.warning(f"No {other} estimate to compare against: {e}")
        return {"method": other, "M": None, "alpha": None, "spread": None, "agree": None}
    spread = compare_estimates(used, second)
    return {
        "method": other,
        "M": second.M,
        "alpha": second.alpha,
        "spread": spread,
        "agree": bool(spread <= DISAGREEMENT_LIMIT),
    }


def run_check(cfg: RunConfig) -> Dict[str, Any]:
    """Hypothesis sampling for both nonlinearities and the stability certificate."""
    try:
        prepared = prepare_run(cfg)
        hypotheses = {
            name: validate_hypothesis(nl, prepared.grid, HYPOTHESIS_SAMPLES, cfg.seed).model_dump(mode="json")
            for name, nl in (("u", prepared.nl1), ("y", prepared.nl2))
        }
        certificate, note = build_certificate(prepared)
        spread = estimate_spread(prepared, certificate) if certificate is not None else None
    except Exception as e:
        logger.error(f"Check failed: {e}")
        raise
    return {
        "mode": cfg.mode.value,
        "hypotheses": hypotheses,
        "certificate": certificate.model_dump(mode="json") if certificate else None,
        "certificate_note": note,
        "estimate_spread": spread,
    }


def run_spectrum(cfg: RunConfig, out_dir: Path) -> Dict[str, Any]:
    """Dense spectrum of the linear generator matching the configured mode."""
    out_dir = Path(out_dir)
    prepared = prepare_run(cfg)
    generator_mode = GENERATOR_FOR_MODE[cfg.mode]
    eigenvalues = generator_spectrum(assemble_generator(prepared.coeffs, generator_mode))
    order = np.lexsort((eigenvalues.imag, -eigenvalues.real))
    eigenvalues = eigenvalues[order]
    abscissa = float(np.max(eigenvalues.real))

    summary: Dict[str, Any] = {
        "mode": cfg.mode.value,
        "generator_mode": generator_mode.value,
        "n_eigenvalues": int(eigenvalues.size),
        "abscissa": abscissa,
        "exponentially_stable": bool(abscissa < -ABSCISSA_TOL),
        "files": ["eigenvalues.csv", "spectrum.json"],
    }
    if cfg.mode == Mode.INDEFINITE:
        plus = generator_spectrum(assemble_generator(prepared.coeffs, GeneratorMode.INDEFINITE_PLUS))
        summary["indefinite_plus_abscissa"] = float(np.max(plus.real))

    frame = pd.DataFrame({"re": eigenvalues.real, "im": eigenvalues.imag})
    write_csv(frame, out_dir / "eigenvalues.csv")
    write_json(summary, out_dir / "spectrum.json")
    logger.info(f"Spectrum of {generator_mode.value}: abscissa {abscissa:.6e}")
    return summary


def run_fit(series_path: Path, window: Tuple[float, float], column: str = "norm_H") -> Dict[str, Any]:
    """Fit a decay rate to one column of a written series."""
    frame = read_series(series_path)
    if "t" not in frame.columns or column not in frame.columns:
        raise InvalidInputError(f"series {series_path} lacks columns t and {column}")
    fit = fit_decay(frame["t"].to_numpy(), frame[column].to_numpy(), window)
    return {"column": column, **fit.model_dump(mode="json")}
