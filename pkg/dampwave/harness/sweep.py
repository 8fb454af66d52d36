"""
Parameter sweeps producing empirical stability maps
"""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ValidationError

from ..diagnostics.decay import fit_decay, late_window
from ..dynamics import Trajectory, integrate
from ..errors import DampwaveError, InvalidInputError
from .config import ClassifierSpec, SweepSpec, set_path, validate_config
from .io import write_csv, write_json
from .runner import build_certificate, package_versions, prepare_run

logger = logging.getLogger(__name__)

DECAY = "decay"
GROWTH = "growth"
INCONCLUSIVE = "inconclusive"
ERROR = "error"


def classify(traj: Trajectory, classifier: ClassifierSpec) -> Dict[str, Any]:
    """Decay, growth or inconclusive from the fitted ‖U‖_𝓗 rate over the late part of the run."""
    if traj.diverged:
        return {"classification": GROWTH, "rate": None}
    norms = traj.norms()
    try:
        fit = fit_decay(traj.times, norms, late_window(traj.times, classifier.fit_fraction))
    except InvalidInputError as e:
        logger.debug(f"Unclassifiable run: {e}")
        return {"classification": INCONCLUSIVE, "rate": None}
    threshold = classifier.growth_threshold
    if fit.rate < -threshold:
        label = GROWTH
    elif fit.rate > threshold:
        label = DECAY
    else:
        label = INCONCLUSIVE
    return {"classification": label, "rate": fit.rate}


def evaluate_point(base: Dict[str, Any], paths: Sequence[str], values: Sequence[float],
                   classifier: ClassifierSpec) -> Dict[str, Any]:
    """Run one sweep point; failures are recorded in the row."""
    row: Dict[str, Any] = {path: value for path, value in zip(paths, values)}
    row.update({
        "classification": ERROR, "rate": None, "blowup_time": None,
        "certificate_passed": None, "margin": None, "error": "",
    })
    try:
        document = base
        for path, value in zip(paths, values):
            document = set_path(document, path, value)
        cfg = validate_config(document)
        prepared = prepare_run(cfg)
        traj = integrate(prepared.run_spec())
        row.update(classify(traj, classifier))
        row["blowup_time"] = traj.blowup_time
        cert, note = build_certificate(prepared)
        if cert is not None:
            row["certificate_passed"] = cert.passed
            row["margin"] = cert.primary_margin
        elif note:
            row["error"] = note
    except (DampwaveError, ValidationError, ArithmeticError) as e:
        logger.warning(f"Sweep point {dict(zip(paths, values))} failed: {e}")
        row["classification"] = ERROR
        row["error"] = f"{type(e).__name__}: {e}" if isinstance(e, ArithmeticError) else str(e)
    return row


class SweepResult(BaseModel):
    rows: List[Dict[str, Any]]
    violations: List[Dict[str, Any]]
    files: List[str]


def containment_violations(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Points that are certificate-pass yet empirically growing."""
    return [row for row in rows if row.get("certificate_passed") is True and row.get("classification") == GROWTH]


def run_sweep(spec: SweepSpec, out_dir: Path, parallelism: int = 1) -> SweepResult:
    """
    Evaluate every grid point of a sweep and write stability_map.csv.

    Args:
        spec: Validated sweep specification
        out_dir: Output directory
        parallelism: Worker processes (1 runs in-process)

    Returns:
        SweepResult with rows in axis-major order
    """
    out_dir = Path(out_dir)
    base = spec.base.model_dump(mode="json")
    paths = [axis.path for axis in spec.axes]
    points = list(itertools.product(*(axis.values() for axis in spec.axes)))
    logger.info(f"Sweeping {len(points)} points over {paths} with parallelism {parallelism}")

    args = ([base] * len(points), [paths] * len(points), points, [spec.classifier] * len(points))
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as executor:
            rows = list(executor.map(evaluate_point, *args))
    else:
        rows = [evaluate_point(*point_args) for point_args in zip(*args)]

    violations = containment_violations(rows)
    if violations:
        logger.error(f"{len(violations)} certificate-pass points show growth")

    columns = paths + ["classification", "rate", "blowup_time", "certificate_passed", "margin", "error"]
    write_csv(pd.DataFrame(rows, columns=columns), out_dir / "stability_map.csv")
    files = ["stability_map.csv", "sweep_manifest.json"]
    write_json(
        {
            "spec": spec.model_dump(mode="json"),
            "classifier": spec.classifier.model_dump(mode="json"),
            "n_points": len(rows),
            "counts": {label: sum(row["classification"] == label for row in rows)
                       for label in (DECAY, GROWTH, INCONCLUSIVE, ERROR)},
            "containment_violations": len(violations),
            "versions": package_versions(),
            "files": files,
        },
        out_dir / "sweep_manifest.json",
    )
    return SweepResult(rows=rows, violations=violations, files=files)
