"""
Shared fixtures for the dampwave test suite
"""
import copy
import json

import numpy as np
import pytest

from dampwave.dynamics import State
from dampwave.grid import Field, build_grid, sine_mode
from dampwave.model import CoefficientSet

BASE_CONFIG = {
    "grid": {"n_interior": 19},
    "time": {"T_final": 1.0},
    "mode": "linear_reference",
    "coefficients": {
        "a1": {"kind": "constant", "value": 1.0},
        "b": {"kind": "constant", "value": 0.5},
    },
    "initial": {"kind": "modes", "u0": [{"k": 1, "amplitude": 1.0}]},
}


@pytest.fixture
def grid3():
    return build_grid(3, 1.0)


@pytest.fixture
def grid19():
    return build_grid(19, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def coefficients():
    """Factory for validated coefficient sets from scalars or node arrays."""

    def make(grid, a1=0.0, a2=0.0, b=0.0):
        return CoefficientSet.from_arrays(grid, a1, a2, b)

    return make


@pytest.fixture
def sine_state():
    """Factory for states built from sine modes."""

    def make(grid, u=None, v=None, y=None, w=None, t=0.0):
        def field(modes):
            values = np.zeros(grid.n_interior)
            for k, amplitude in (modes or {}).items():
                values = values + amplitude * sine_mode(grid, k)
            return Field(values, grid)

        return State(field(u), field(v), field(y), field(w), t)

    return make


@pytest.fixture
def config_dict():
    """Factory for run-config dictionaries derived from a small linear_reference run."""

    def make(**overrides):
        document = copy.deepcopy(BASE_CONFIG)
        for key, value in overrides.items():
            document[key] = value
        return document

    return make


@pytest.fixture
def write_config(tmp_path):
    """Write a config dictionary to a JSON file and return its path."""

    def write(document, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write
