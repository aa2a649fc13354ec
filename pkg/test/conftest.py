from pathlib import Path

import pytest

from plox.lagrange.frames import FrameMap
from plox.lagrange.mechanics import LagrangianSystem

SCENARIO_TOML = """name = "oscillator_file"
description = "Unit oscillator read from disk."

[lagrangian]
dimension = 1
expression = "0.5*qd1^2 - 0.5*q1^2"

[solver]
method = "rk4"
step = 1e-2
interval = [0.0, 1.0]
initial_position = [0.0]
initial_velocity = [1.0]

[boundary]
start = [0.0]
end = [1.0]
interval = [0.0, 1.5707963267948966]
panels = 40
reference = ["sin(t)"]

[verify]
checks = ["reference_motion", "energy_conservation"]
reference = ["sin(t)"]
"""

BROKEN_TOML = """name = "broken"
[lagrangian]
dimension = 1
expression = "0.5*qd1^2"
[solver]
method = "euler"
"""

ROTATION = ["x1*cos(w*t) - x2*sin(w*t)", "x1*sin(w*t) + x2*cos(w*t)"]
ROTATION_INVERSE = ["q1*cos(w*t) + q2*sin(w*t)", "-q1*sin(w*t) + q2*cos(w*t)"]


@pytest.fixture(scope="function")
def scenario_file(tmp_path_factory: pytest.TempPathFactory) -> Path:
    tmp_path_factory._retention_policy = "none"
    tmpdir: Path = tmp_path_factory.mktemp("scenarios")
    path: Path = tmpdir / "oscillator_file.toml"
    with open(path, "w") as outfile:
        outfile.write(SCENARIO_TOML)
    return path


@pytest.fixture(scope="function")
def broken_scenario_file(tmp_path_factory: pytest.TempPathFactory) -> Path:
    tmp_path_factory._retention_policy = "none"
    tmpdir: Path = tmp_path_factory.mktemp("scenarios")
    path: Path = tmpdir / "broken.toml"
    with open(path, "w") as outfile:
        outfile.write(BROKEN_TOML)
    return path


@pytest.fixture
def oscillator() -> LagrangianSystem:
    return LagrangianSystem.from_expression("0.5*qd1^2 - 0.5*q1^2", 1)


@pytest.fixture
def free_particle_2d() -> LagrangianSystem:
    return LagrangianSystem.from_expression("0.5*(qd1^2 + qd2^2)", 2)


@pytest.fixture
def rotation() -> FrameMap:
    return FrameMap.from_strings(ROTATION, ROTATION_INVERSE, constants={"w": 1.0})


def pytest_configure(config):
    pytest.SCENARIO_TOML = SCENARIO_TOML
    pytest.ROTATION = ROTATION
    pytest.ROTATION_INVERSE = ROTATION_INVERSE
