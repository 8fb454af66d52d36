"""
CSV and JSON serialization for runs, spectra and sweeps
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from ..errors import InvalidInputError

logger = logging.getLogger(__name__)

SERIES_COLUMNS = [
    "t", "E_total", "E_kin_u", "E_pot_u", "E_kin_y", "E_pot_y",
    "E_nl_u", "E_nl_y", "E_window", "norm_H", "l2_ut", "l2_yt",
]

FLOAT_FORMAT = "%.17g"


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write a frame with 17 significant digits and '\\n' line endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_series(frame: pd.DataFrame, path: Path) -> Path:
    if list(frame.columns) != SERIES_COLUMNS:
        raise InvalidInputError(f"series columns {list(frame.columns)} differ from {SERIES_COLUMNS}")
    return write_csv(frame, path)


def read_series(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"series file {path} does not exist")
    return pd.read_csv(path)


def jsonable(value: Any) -> Any:
    """Replace non-finite floats by None so the output stays strict JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    return value


def write_json(payload: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(jsonable(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return path


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
