"""
Spectral abscissa and semigroup constants (M, α) of the linear generators
"""
import logging
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import linalg, sparse

from ..dynamics import GeneratorMode, InitialDataSpec, assemble_generator, build_initial_state, energy_gram
from ..errors import InvalidInputError, NotExponentiallyStableError, NumericalError
from ..grid import Grid1D
from ..model import CoefficientSet
from .decay import fit_decay

logger = logging.getLogger(__name__)

ABSCISSA_TOL = 1e-9
DISAGREEMENT_LIMIT = 0.25


class SemigroupEstimate(BaseModel):
    """Constants of ‖S(t)‖ ≤ M e^{−αt}."""

    M: float
    alpha: float
    method: Literal["spectral", "ensemble", "given"]
    mode: str = "linear_reference"
    abscissa: Optional[float] = None
    n_samples: int = 0
    seed: int = 0
    T_probe: float = 0.0


def _dense(G) -> np.ndarray:
    return G.toarray() if sparse.issparse(G) else np.asarray(G, dtype=float)


def generator_spectrum(G) -> np.ndarray:
    """All eigenvalues of a generator matrix (dense eigensolve)."""
    dense = _dense(G)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise InvalidInputError(f"generator must be square, got shape {dense.shape}")
    try:
        return linalg.eigvals(dense)
    except (linalg.LinAlgError, ValueError) as exc:
        metadata = {
            "shape": list(dense.shape),
            "finite": bool(np.all(np.isfinite(dense))),
            "frobenius_norm": float(np.linalg.norm(dense)) if np.all(np.isfinite(dense)) else None,
        }
        logger.error(f"Eigensolve failed: {exc}")
        raise NumericalError(f"eigensolve failed: {exc}", metadata) from exc


def spectral_abscissa(G) -> float:
    """Largest real part of the spectrum of G."""
    return float(np.max(generator_spectrum(G).real))


def energy_similarity(G, grid: Grid1D) -> np.ndarray:
    """R G R⁻¹ with W = RᵀR, so that 𝓗-norms become Euclidean norms."""
    R = linalg.cholesky(energy_gram(grid).toarray(), lower=False)
    RG = R @ _dense(G)
    # (R G) R⁻¹ = (R⁻ᵀ (R G)ᵀ)ᵀ
    return linalg.solve_triangular(R, RG.T, trans="T", lower=False).T


def is_dissipative(G, grid: Grid1D, tol: float = 1e-9) -> bool:
    """⟨GU, U⟩_𝓗 ≤ 0 for all U."""
    Ghat = energy_similarity(G, grid)
    sym = 0.5 * (Ghat + Ghat.T)
    top = float(np.max(linalg.eigvalsh(sym)))
    return top <= tol * max(1.0, float(np.max(np.abs(sym))))


def state_operator_norm(G, grid: Grid1D, t: float) -> float:
    """‖e^{Gt}‖ in the 𝓗 norm."""
    Ghat = energy_similarity(G, grid)
    return float(linalg.norm(linalg.expm(Ghat * t), 2))


def propagate_norms(G, grid: Grid1D, T_probe: float, n_probe: int) -> Tuple[np.ndarray, np.ndarray]:
    """‖S(t_k)‖_𝓗 on t_k = k·T_probe/n_probe by repeated multiplication with e^{GΔt}."""
    Ghat = energy_similarity(G, grid)
    step = linalg.expm(Ghat * (T_probe / n_probe))
    times = np.linspace(0.0, T_probe, n_probe + 1)
    norms = np.empty(n_probe + 1)
    S = np.eye(Ghat.shape[0])
    norms[0] = 1.0
    for k in range(1, n_probe + 1):
        S = step @ S
        norms[k] = linalg.norm(S, 2)
    return times, norms


def _default_probe(abscissa: float) -> float:
    return float(np.clip(10.0 / abs(abscissa), 5.0, 2000.0))


def estimate_semigroup_constants(coeffs: CoefficientSet, grid: Grid1D,
                                 mode: GeneratorMode = GeneratorMode.LINEAR_REFERENCE,
                                 method: str = "spectral", n_samples: int = 16, seed: int = 0,
                                 T_probe: Optional[float] = None, safety_margin: float = 0.05,
                                 n_probe: int = 200) -> SemigroupEstimate:
    """
    Estimate (M, α) for the undelayed reference semigroup or its indefinite_plus analogue.

    Args:
        coeffs: Coefficient set
        grid: Spatial grid
        mode: linear_reference or indefinite_plus
        method: spectral (abscissa with a safety haircut) or ensemble (random initial states)
        n_samples: Ensemble size
        seed: Ensemble seed
        T_probe: Probe horizon; defaults to 10/|abscissa| clipped to [5, 2000]
        safety_margin: Fraction shaved off −abscissa by the spectral method
        n_probe: Number of probe intervals on [0, T_probe]

    Returns:
        SemigroupEstimate with M >= 1 and alpha > 0
    """
    mode = GeneratorMode(mode)
    if mode not in (GeneratorMode.LINEAR_REFERENCE, GeneratorMode.INDEFINITE_PLUS):
        raise InvalidInputError(f"semigroup constants are estimated for linear_reference or indefinite_plus, got {mode.value}")
    if method not in ("spectral", "ensemble"):
        raise InvalidInputError(f"unknown estimation method {method!r}")

    G = assemble_generator(coeffs, mode)
    if not is_dissipative(G, grid):
        raise InvalidInputError(f"generator for mode={mode.value} is not dissipative")
    abscissa = spectral_abscissa(G)
    if abscissa >= -ABSCISSA_TOL:
        logger.warning(f"Generator {mode.value} has abscissa {abscissa:.3e}; no exponential decay")
        raise NotExponentiallyStableError(abscissa, mode.value)
    T_probe = T_probe or _default_probe(abscissa)

    if method == "spectral":
        alpha = -abscissa * (1.0 - safety_margin)
        times, op_norms = propagate_norms(G, grid, T_probe, n_probe)
        M = max(1.0, float(np.max(op_norms * np.exp(alpha * times))))
        estimate = SemigroupEstimate(
            M=M, alpha=alpha, method="spectral", mode=mode.value, abscissa=abscissa, T_probe=T_probe
        )
    else:
        if n_samples < 1:
            raise InvalidInputError(f"n_samples must be >= 1, got {n_samples}")
        R = linalg.cholesky(energy_gram(grid).toarray(), lower=False)
        step = linalg.expm(energy_similarity(G, grid) * (T_probe / n_probe))
        times = np.linspace(0.0, T_probe, n_probe + 1)
        spec = InitialDataSpec(kind="random_fourier", norm=1.0, n_modes=grid.n_interior)
        # columns are unit-norm states in the Euclidean image of the energy norm
        Z = np.stack([
            R @ build_initial_state(spec.model_copy(update={"seed": seed + j}), grid).to_vector()
            for j in range(n_samples)
        ], axis=1)
        norms = np.empty((n_probe + 1, n_samples))
        norms[0] = np.linalg.norm(Z, axis=0)
        for k in range(1, n_probe + 1):
            Z = step @ Z
            norms[k] = np.linalg.norm(Z, axis=0)
        window = (0.5 * T_probe, T_probe)
        rates = [fit_decay(times, norms[:, j], window).rate for j in range(n_samples)]
        alpha = float(min(rates))
        if alpha <= 0:
            raise NotExponentiallyStableError(-alpha, mode.value)
        M = max(1.0, float(np.max(norms * np.exp(alpha * times)[:, None])))
        estimate = SemigroupEstimate(
            M=M, alpha=alpha, method="ensemble", mode=mode.value, abscissa=abscissa,
            n_samples=n_samples, seed=seed, T_probe=T_probe,
        )

    logger.info(f"Semigroup constants ({estimate.method}, {mode.value}): M={estimate.M:.4g}, alpha={estimate.alpha:.4g}")
    return estimate


def compare_estimates(first: SemigroupEstimate, second: SemigroupEstimate,
                      limit: float = DISAGREEMENT_LIMIT) -> float:
    """Relative α disagreement; logs a warning above the limit."""
    spread = abs(first.alpha - second.alpha) / max(first.alpha, second.alpha)
    if spread > limit:
        logger.warning(
            f"Semigroup estimates disagree: alpha {first.alpha:.4g} ({first.method}) "
            f"vs {second.alpha:.4g} ({second.method}), spread {spread:.1%}"
        )
    return spread
