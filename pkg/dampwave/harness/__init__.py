"""
Harness for dampwave: configuration, run orchestration, sweeps and serialization
"""
from .config import RunConfig, SweepSpec, parse_config, parse_sweep_spec
from .runner import run_check, run_fit, run_simulate, run_spectrum
from .sweep import containment_violations, run_sweep

__all__ = [
    "RunConfig",
    "SweepSpec",
    "containment_violations",
    "parse_config",
    "parse_sweep_spec",
    "run_check",
    "run_fit",
    "run_simulate",
    "run_spectrum",
    "run_sweep",
]
