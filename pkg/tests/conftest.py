"""Shared fixtures for the test suite."""

import os

import numpy as np
import pytest

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")

ALL_SCENARIOS = [
    "free_fall",
    "resting_particle",
    "particle_stack",
    "box_slide",
    "anisotropic_slide",
    "lattice_invertible",
    "lattice_drag",
]


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, name + ".json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
