"""Shared fixtures: the four default-scenario runs, executed once per session."""

import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from motesim import PROTOCOLS, ScenarioConfig, simulate


@pytest.fixture(scope="session")
def default_runs():
    """One default-scenario SimRun per protocol plus its wall-clock seconds."""
    runs = {}
    walls = {}
    for protocol in PROTOCOLS:
        started = time.perf_counter()
        runs[protocol] = simulate(ScenarioConfig(protocol=protocol))
        walls[protocol] = time.perf_counter() - started
    return runs, walls
