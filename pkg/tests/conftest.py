"""
Pytest configuration and shared fixtures.

Provides:
- Marker registration
- Small deployments and grids
- Scenario configs and scenario files
- Seeded random generators
"""

from pathlib import Path

import numpy as np
import pytest

from src.models.deployment import Deployment, Grid
from src.models.scenario import ScenarioConfig
from src.services.geometry import perimeter_nodes
from src.services.scenario_io import parse_scenario


# =============================================================================
# Pytest Configuration
# =============================================================================

def pytest_configure(config):
    """Register custom markers."""
    config.addinivalue_line("markers", "unit: fast isolated tests")
    config.addinivalue_line("markers", "integration: several services working together")
    config.addinivalue_line("markers", "e2e: command line and full scenario runs")
    config.addinivalue_line("markers", "slow: Monte Carlo or long simulations")


# =============================================================================
# Random Fixtures
# =============================================================================

@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator; every test gets the same stream."""
    return np.random.default_rng(20240611)


# =============================================================================
# Geometry Fixtures
# =============================================================================

@pytest.fixture
def square_nodes() -> list[tuple[float, float]]:
    """Eight nodes on the perimeter of a 2 x 2 m square."""
    return perimeter_nodes(2.0, 2.0, 8)


@pytest.fixture
def small_deployment(square_nodes) -> Deployment:
    """Full mesh of the square nodes on two channels."""
    return Deployment.full_mesh(square_nodes, [11, 26])


@pytest.fixture
def small_grid() -> Grid:
    """16 x 16 grid of 12.5 cm pixels over the 2 x 2 m square."""
    return Grid.covering(2.0, 2.0, 0.125)


@pytest.fixture
def two_node_deployment() -> Deployment:
    """A single pair measured both ways on three channels."""
    return Deployment.full_mesh([(0.0, 1.0), (2.0, 1.0)], [11, 18, 26])


# =============================================================================
# Scenario Fixtures
# =============================================================================

SMALL_SCENARIO = """
[scenario]
name = small
seed = 7
frame_interval_s = 0.005
calibration_s = 0.2

[grid]
pixel_size_m = 0.125
width_m = 2.0
height_m = 2.0

[deployment]
layout = perimeter
node_count = 6
channels = 11, 26

[model]
gamma = 0.5
path_loss_exponent = 2.0

[noise]
snr_db = 30.0
samples = 512
quantization_step_db = 1.0

[object]
shape = circle
radius_m = 0.1575

[trajectory]
kind = waypoints
frames = 60
speed_mps = 0.5
waypoints = 0.6 0.6; 1.4 0.6; 1.4 1.4; 0.6 1.4
loop = true
"""


@pytest.fixture
def small_scenario_text() -> str:
    return SMALL_SCENARIO


@pytest.fixture
def small_config() -> ScenarioConfig:
    """Six nodes, two channels, a short waypoint loop."""
    return parse_scenario(SMALL_SCENARIO)


@pytest.fixture
def vacant_config() -> ScenarioConfig:
    """The small scenario with nobody in the area."""
    return parse_scenario(SMALL_SCENARIO, ["trajectory.kind=vacant", "trajectory.frames=40"])


@pytest.fixture
def scenario_file(tmp_path: Path) -> Path:
    """The small scenario written to disk."""
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_SCENARIO, encoding="utf-8")
    return path
