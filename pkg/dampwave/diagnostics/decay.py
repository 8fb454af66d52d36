"""
Exponential decay-rate fitting
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import stats

from ..errors import InvalidInputError

logger = logging.getLogger(__name__)

MIN_POINTS = 8


class DecayFit(BaseModel):
    """Least-squares fit values ≈ amplitude·e^{−rate·t}."""

    rate: float
    amplitude: float
    r_squared: float
    n_points: int
    t_lo: float
    t_hi: float


def late_window(times: Sequence[float], fraction: float = 1.0 / 3.0) -> Tuple[float, float]:
    """The last `fraction` of the time span."""
    t0, t1 = float(times[0]), float(times[-1])
    return t1 - fraction * (t1 - t0), t1


def fit_decay(times: Sequence[float], values: Sequence[float],
              window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """
    Fit log(values) linearly in t on a window.

    Args:
        times: Sample times
        values: Positive samples
        window: (t_lo, t_hi); the whole series when omitted

    Returns:
        DecayFit with rate = −slope (positive means decay)
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise InvalidInputError(f"times and values must be 1D of equal length, got {t.shape} and {y.shape}")
    t_lo, t_hi = window if window is not None else (t[0] if t.size else 0.0, t[-1] if t.size else 0.0)
    if t_lo > t_hi:
        raise InvalidInputError(f"fit window ({t_lo}, {t_hi}) is reversed")
    eps = 1e-12 * max(1.0, abs(t_hi))
    inside = (t >= t_lo - eps) & (t <= t_hi + eps)
    t, y = t[inside], y[inside]
    if t.size < MIN_POINTS:
        raise InvalidInputError(f"fit needs >= {MIN_POINTS} points in window ({t_lo}, {t_hi}), got {t.size}")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise InvalidInputError(
            "values must be positive and finite on the fit window; fit before blow-up or above the round-off floor"
        )

    log_y = np.log(y)
    result = stats.linregress(t, log_y)
    ss_tot = float(np.sum((log_y - log_y.mean()) ** 2))
    r_squared = float(result.rvalue ** 2) if ss_tot > 0 else 1.0
    return DecayFit(
        rate=-float(result.slope),
        amplitude=math.exp(float(result.intercept)),
        r_squared=r_squared,
        n_points=int(t.size),
        t_lo=float(t_lo),
        t_hi=float(t_hi),
    )
