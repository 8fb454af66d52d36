"""
Uniform 1D grid on (0, L) with homogeneous Dirichlet boundary
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy import sparse

from .errors import InvalidConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid1D:
    """Interior nodes x_j = j*h, j = 1..n_interior, of the interval (0, L)."""

    n_interior: int
    L: float = 1.0

    @property
    def h(self) -> float:
        return self.L / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_interior + 1, dtype=float)


def build_grid(n_interior: int, L: float = 1.0) -> Grid1D:
    """
    Build a uniform grid.

    Args:
        n_interior: Number of interior nodes (>= 1)
        L: Domain length (> 0)

    Returns:
        Grid1D with spacing h = L/(n_interior+1)
    """
    if int(n_interior) != n_interior or n_interior < 1:
        raise InvalidConfigError(f"n_interior must be a positive integer, got {n_interior}")
    if not np.isfinite(L) or L <= 0:
        raise InvalidConfigError(f"domain length L must be positive, got {L}")
    grid = Grid1D(n_interior=int(n_interior), L=float(L))
    logger.debug(f"Built grid n={grid.n_interior} L={grid.L} h={grid.h}")
    return grid


@dataclass(frozen=True)
class Field:
    """Node samples of a scalar function on a grid."""

    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_interior,):
            raise InvalidConfigError(
                f"field has shape {values.shape}, expected ({self.grid.n_interior},)"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidConfigError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid1D) -> "Field":
        return cls(np.zeros(grid.n_interior), grid)

    @classmethod
    def constant(cls, grid: Grid1D, value: float) -> "Field":
        return cls(np.full(grid.n_interior, float(value)), grid)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def laplacian_values(values: np.ndarray, h: float) -> np.ndarray:
    """Second difference with zero ghost values; works on raw arrays."""
    out = -2.0 * values
    out[1:] += values[:-1]
    out[:-1] += values[1:]
    return out / (h * h)


def apply_laplacian(f: Field) -> Field:
    """Apply the Dirichlet second-difference Laplacian to a field."""
    return Field(laplacian_values(f.values, f.grid.h), f.grid)


def laplacian_matrix(grid: Grid1D) -> sparse.csr_matrix:
    """Sparse tridiagonal matrix of the Dirichlet Laplacian."""
    n = grid.n_interior
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    mat = sparse.diags([off, main, off], [-1, 0, 1], shape=(n, n), format="csr")
    return mat / grid.h ** 2


def laplacian_eigenvalues(grid: Grid1D) -> np.ndarray:
    """Eigenvalues of -Δ_h in increasing order: (4/h²)sin²(kπh/2L)."""
    k = np.arange(1, grid.n_interior + 1, dtype=float)
    return (4.0 / grid.h ** 2) * np.sin(k * np.pi * grid.h / (2.0 * grid.L)) ** 2


def l2_sq(values: np.ndarray, h: float) -> float:
    return float(h * np.dot(values, values))


def h1_sq(values: np.ndarray, h: float) -> float:
    # n_interior + 1 cells, boundary values are zero
    diffs = np.diff(values, prepend=0.0, append=0.0)
    return float(np.dot(diffs, diffs) / h)


def l2_norm_sq(f: Field) -> float:
    """Discrete ‖f‖²_{L²} = h·Σ f_j²."""
    return l2_sq(f.values, f.grid.h)


def h1_seminorm_sq(f: Field) -> float:
    """Discrete ‖∇f‖²_{L²} over the n_interior+1 cells."""
    return h1_sq(f.values, f.grid.h)


def h1_inner(f: np.ndarray, g: np.ndarray, h: float) -> float:
    """Discrete ⟨∇f, ∇g⟩ consistent with h1_sq."""
    df = np.diff(f, prepend=0.0, append=0.0)
    dg = np.diff(g, prepend=0.0, append=0.0)
    return float(np.dot(df, dg) / h)


def sine_mode(grid: Grid1D, k: int) -> np.ndarray:
    """Node samples of sin(kπx/L)."""
    return np.sin(k * np.pi * grid.nodes / grid.L)


@dataclass(frozen=True)
class RegionSpec:
    """Finite union of open intervals (left, right) inside the domain."""

    intervals: Tuple[Tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        cleaned = []
        for pair in self.intervals:
            left, right = float(pair[0]), float(pair[1])
            if not (np.isfinite(left) and np.isfinite(right)) or left >= right:
                raise InvalidConfigError(f"region interval ({left}, {right}) must satisfy left < right")
            if left < 0:
                raise InvalidConfigError(f"region interval ({left}, {right}) starts left of 0")
            cleaned.append((left, right))
        if not cleaned:
            raise InvalidConfigError("region must contain at least one interval")
        object.__setattr__(self, "intervals", _merge_intervals(cleaned))

    @classmethod
    def of(cls, intervals: Iterable[Iterable[float]]) -> "RegionSpec":
        return cls(tuple(tuple(pair) for pair in intervals))

    def clipped(self, L: float) -> Tuple[Tuple[float, float], ...]:
        out = []
        for left, right in self.intervals:
            left, right = max(left, 0.0), min(right, L)
            if left < right:
                out.append((left, right))
        return tuple(out)


def _merge_intervals(intervals) -> Tuple[Tuple[float, float], ...]:
    merged = []
    for left, right in sorted(intervals):
        if merged and left <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], right))
        else:
            merged.append((left, right))
    return tuple(merged)


def region_mask(r: RegionSpec, g: Grid1D) -> np.ndarray:
    """Boolean node mask: True strictly inside some interval of r."""
    clipped = r.clipped(g.L)
    if not clipped:
        raise InvalidConfigError(f"region {list(r.intervals)} is empty after clipping to (0, {g.L})")
    x = g.nodes
    mask = np.zeros(g.n_interior, dtype=bool)
    for left, right in clipped:
        mask |= (x > left) & (x < right)
    if not mask.any():
        raise InvalidConfigError(f"region {list(r.intervals)} contains no grid node")
    return mask


def region_indicator(r: RegionSpec, g: Grid1D) -> Field:
    """Indicator field of a region: 1 at nodes strictly inside, 0 elsewhere."""
    return Field(region_mask(r, g).astype(float), g)


def optional_mask(r: Optional[RegionSpec], g: Grid1D) -> Optional[np.ndarray]:
    return None if r is None else region_mask(r, g)
