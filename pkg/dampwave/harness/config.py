"""
Run configuration and sweep specification models
"""
import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..dynamics import HistorySpec, InitialDataSpec, Mode
from ..errors import ConfigParseError, InvalidConfigError
from ..model import CoefficientSpec, NonlinearitySpec

logger = logging.getLogger(__name__)


class GridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_interior: int = Field(ge=1)
    L: float = Field(default=1.0, gt=0)


class TimeConfig(BaseModel):
    """Time stepping: an explicit dt, or dt = cfl·h."""
    model_config = ConfigDict(extra="forbid")

    dt: Optional[float] = Field(default=None, gt=0)
    cfl: float = Field(default=0.5, gt=0)
    T_final: float = Field(gt=0)
    output_stride: int = Field(default=1, ge=1)


class NonlinearityConfig(BaseModel):
    """Nonlinearities of the u and y equations."""
    model_config = ConfigDict(extra="forbid")

    u: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    y: NonlinearitySpec = Field(default_factory=NonlinearitySpec)


class CertificateOptions(BaseModel):
    """How the semigroup constants are obtained and how the certificate is evaluated."""
    model_config = ConfigDict(extra="forbid")

    method: Literal["spectral", "ensemble", "given"] = "spectral"
    M: Optional[float] = Field(default=None, ge=1.0)
    alpha: Optional[float] = Field(default=None, gt=0)
    safety_margin: float = Field(default=0.05, ge=0, lt=1)
    n_samples: int = Field(default=16, ge=1)
    T_probe: Optional[float] = Field(default=None, gt=0)
    T_step: float = Field(default=0.01, gt=0)
    shrink_rho: bool = True
    lipschitz_samples: int = Field(default=200, ge=1)

    @model_validator(mode="after")
    def check_given_constants(self):
        if self.method == "given" and (self.M is None or self.alpha is None):
            raise ValueError("certificate method=given needs M and alpha")
        return self


class RunConfig(BaseModel):
    """Full description of one simulation run."""
    model_config = ConfigDict(extra="forbid")

    grid: GridConfig
    time: TimeConfig
    mode: Mode
    tau: Optional[float] = Field(default=None, gt=0)
    coefficients: CoefficientSpec = Field(default_factory=CoefficientSpec)
    nonlinearity: NonlinearityConfig = Field(default_factory=NonlinearityConfig)
    initial: InitialDataSpec = Field(default_factory=InitialDataSpec)
    history: Optional[HistorySpec] = None
    seed: int = 0
    certificate: Optional[CertificateOptions] = None
    fit_window: Optional[Tuple[float, float]] = None
    max_norm: float = Field(default=1e100, gt=0)

    @model_validator(mode="after")
    def check_mode_fields(self):
        if self.mode == Mode.DELAYED:
            if self.tau is None:
                raise ValueError("tau required for mode=delayed")
            if self.history is None:
                raise ValueError("history required for mode=delayed")
        else:
            if self.tau is not None:
                raise ValueError(f"tau forbidden for mode={self.mode.value}")
            if self.history is not None:
                raise ValueError(f"history forbidden for mode={self.mode.value}")
        if self.mode in (Mode.DEFINITE, Mode.LINEAR_REFERENCE):
            if self.nonlinearity.u.kind != "zero" or self.nonlinearity.y.kind != "zero":
                raise ValueError(f"nonlinearities forbidden for mode={self.mode.value}")
        if self.fit_window is not None and self.fit_window[0] >= self.fit_window[1]:
            raise ValueError(f"fit_window {self.fit_window} must satisfy t_lo < t_hi")
        return self


class SweepAxis(BaseModel):
    """A dotted path into RunConfig swept over linspace(min, max, steps)."""
    model_config = ConfigDict(extra="forbid")

    path: str
    min: float
    max: float
    steps: int = Field(ge=2)

    def values(self) -> List[float]:
        return np.linspace(self.min, self.max, self.steps).tolist()


class ClassifierSpec(BaseModel):
    """Decay/growth thresholds on the fitted rate of ‖U‖_𝓗 over the late part of a run."""
    model_config = ConfigDict(extra="forbid")

    fit_fraction: float = Field(default=1.0 / 3.0, gt=0, le=1)
    growth_threshold: float = Field(default=0.01, ge=0)


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base: RunConfig
    axes: List[SweepAxis] = Field(min_length=1, max_length=2)
    classifier: ClassifierSpec = Field(default_factory=ClassifierSpec)


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        loc = ".".join(str(item) for item in error["loc"]) or "<root>"
        message = error["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        parts.append(f"{loc}: {message}")
    return "; ".join(parts)


def _load_document(source: Union[str, Path]) -> Dict[str, Any]:
    if isinstance(source, Path) or not source.lstrip().startswith(("{", "[")):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    else:
        text = source
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(document, dict):
        raise InvalidConfigError("config document must be a JSON object")
    return document


def validate_config(document: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        raise InvalidConfigError(_format_validation_error(exc)) from exc


def parse_config(source: Union[str, Path]) -> RunConfig:
    """
    Parse and validate a run configuration.

    Args:
        source: Path to a JSON file, or the JSON text itself

    Returns:
        Validated RunConfig with defaults filled
    """
    config = validate_config(_load_document(source))
    logger.info(f"Loaded config: mode={config.mode.value}, n={config.grid.n_interior}")
    return config


def parse_sweep_spec(source: Union[str, Path]) -> SweepSpec:
    """Parse and validate a sweep specification, checking every axis path resolves to a number."""
    document = _load_document(source)
    try:
        spec = SweepSpec.model_validate(document)
    except ValidationError as exc:
        raise InvalidConfigError(_format_validation_error(exc)) from exc
    base = spec.base.model_dump(mode="json")
    for axis in spec.axes:
        current = get_path(base, axis.path)
        if isinstance(current, bool) or not isinstance(current, (int, float)):
            raise InvalidConfigError(f"sweep axis {axis.path} does not point at a numeric field")
    return spec


def _step(node: Any, key: str, path: str) -> Any:
    if isinstance(node, list):
        try:
            return node[int(key)]
        except (ValueError, IndexError) as exc:
            raise InvalidConfigError(f"path {path}: bad list index {key!r}") from exc
    if isinstance(node, dict) and key in node:
        return node[key]
    raise InvalidConfigError(f"path {path} does not resolve at {key!r}")


def get_path(document: Dict[str, Any], path: str) -> Any:
    node = document
    for key in path.split("."):
        node = _step(node, key, path)
    return node


def set_path(document: Dict[str, Any], path: str, value: Any) -> Dict[str, Any]:
    """Copy of document with the dotted path set to value."""
    updated = copy.deepcopy(document)
    keys = path.split(".")
    node = updated
    for key in keys[:-1]:
        node = _step(node, key, path)
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    elif isinstance(node, dict):
        if last not in node:
            raise InvalidConfigError(f"path {path} does not resolve at {last!r}")
        node[last] = value
    else:
        raise InvalidConfigError(f"path {path} does not resolve at {last!r}")
    return updated
