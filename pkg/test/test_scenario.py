from pathlib import Path

from pytest import SCENARIO_TOML, approx, mark, raises  # type: ignore

from plox.lagrange.scenario import (
    Scenario,
    ScenarioError,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
)

BUNDLED = [
    "bead_rotating_hoop",
    "circle_geodesic",
    "degenerate_linear",
    "free_particle",
    "harmonic_oscillator",
    "pendulum",
    "pendulum_moving_pivot",
    "rotating_free_particle",
    "translating_frame",
    "two_frame_atlas",
]

FRAME_TOML = """
[parameters]
v = 3.0
[lagrangian]
dimension = 1
expression = "0.5*qd1^2"
[frame]
forward = ["x1 + v*t"]
inverse = ["q1 - v*t"]
[solver]
initial_position = [0.0]
initial_velocity = [1.0]
"""


def test_bundled_scenarios():
    assert bundled_scenarios() == BUNDLED


@mark.parametrize("name", BUNDLED)
def test_every_bundled_scenario_builds(name: str):
    scenario = load_scenario(name)
    assert scenario.name == name
    assert scenario.description
    assert scenario.verify.checks
    system = scenario.build_solve_system()
    assert system.n == scenario.solve_dimension
    assert system.chart == scenario.solve_chart


def test_load_from_file(scenario_file: Path):
    scenario = load_scenario(scenario_file)
    assert scenario.name == "oscillator_file"
    assert scenario.solver.step == 1e-2
    assert scenario.solver.method == "rk4"
    assert scenario.boundary is not None
    assert scenario.boundary.panels == 40
    assert scenario.output.directory == "."
    assert load_scenario(str(scenario_file)) == scenario


def test_unknown_source_lists_bundled_names():
    with raises(ScenarioError) as err:
        load_scenario("no_such_scenario")
    assert "harmonic_oscillator" in str(err.value)


def test_schema_errors_name_the_field(broken_scenario_file: Path):
    with raises(ScenarioError) as err:
        load_scenario(broken_scenario_file)
    assert "solver.method" in str(err.value)
    assert str(err.value).startswith("broken:")

    with raises(ScenarioError) as err:
        parse_scenario(SCENARIO_TOML + "\n[extra]\nkey = 1\n", "x")
    assert "extra" in str(err.value)

    with raises(ScenarioError) as err:
        parse_scenario(SCENARIO_TOML.replace("step = 1e-2", "step = -1.0"), "x")
    assert "solver.step" in str(err.value)


def test_malformed_toml():
    with raises(ScenarioError) as err:
        parse_scenario("name = \n", "bad")
    assert str(err.value).startswith("bad:")


def test_consistency_rules():
    wrong_length = FRAME_TOML.replace("initial_position = [0.0]", "initial_position = [0, 1]")
    with raises(ScenarioError) as err:
        parse_scenario(wrong_length, "x")
    assert "solver.initial_position" in str(err.value)

    both = FRAME_TOML + '\n[constraint]\ndimension = 1\nforward = ["x1"]\n'
    with raises(ScenarioError) as err:
        parse_scenario(both, "x")
    assert "cannot be combined" in str(err.value)

    square = FRAME_TOML.replace('forward = ["x1 + v*t"]', 'forward = ["x1", "x1"]')
    with raises(ScenarioError) as err:
        parse_scenario(square, "x")
    assert "frame.forward" in str(err.value)

    atlas = (
        '[lagrangian]\ndimension = 1\nexpression = "0.5*qd1^2"\n'
        '[atlas]\nstandard = "lab"\n'
        '[[atlas.frames]]\nid = "a"\nforward = ["x1"]\ninverse = ["q1"]\n'
        '[[atlas.frames]]\nid = "a"\nforward = ["x1"]\ninverse = ["q1"]\n'
    )
    with raises(ScenarioError) as err:
        parse_scenario(atlas, "x")
    assert "duplicate" in str(err.value)


def test_tolerances_scale():
    text = SCENARIO_TOML + "\n[verify.tolerances]\nenergy_conservation = 1e-3\n"
    scenario = parse_scenario(text, "x", tol_scale=10.0)
    assert scenario.tol_scale == 10.0
    assert scenario.tolerance("energy_conservation", 1e-6) == approx(1e-2)
    assert scenario.tolerance("reference_motion", 1e-6) == approx(1e-5)

    overridden = Scenario.model_validate(
        {"name": "t", "tol_scale": 2.0, "verify": {"tolerances": {"degeneracy": 0.5}}}
    )
    assert overridden.tolerance("degeneracy", 0.0) == 1.0
    assert overridden.tolerance("other", 1e-9) == approx(2e-9)
    with raises(ScenarioError):
        parse_scenario('tol_scale = 0.0\n', "x")


def test_require_names_the_missing_section():
    bare = Scenario(name="bare")
    assert bare.solve_dimension == 0
    with raises(ScenarioError) as err:
        bare.require("lagrangian")
    assert "[lagrangian]" in str(err.value)
    with raises(ScenarioError) as err:
        bare.build_lagrangian()
    assert "bare" in str(err.value)
    with raises(ScenarioError) as err:
        bare.require("solver.initial_position")
    assert "initial data" in str(err.value)
    with raises(ScenarioError):
        bare.build_worldline()


def test_builders_use_parameters():
    scenario = parse_scenario(FRAME_TOML, "moving")
    assert scenario.solve_chart == "x"
    frame = scenario.build_frame()
    assert frame is not None
    assert frame.position([1.0], 2.0) == approx([7.0])
    assert scenario.build_map() == frame
    assert scenario.build_embedding() is None
    system = scenario.build_solve_system()
    assert system.value([0.0], [1.0], 0.0) == approx(8.0)


def test_builder_errors_name_the_field():
    stray = parse_scenario(FRAME_TOML.replace("0.5*qd1^2", "0.5*qd2^2"), "x")
    with raises(ScenarioError) as err:
        stray.build_lagrangian()
    assert "lagrangian.expression" in str(err.value)

    syntax = parse_scenario(FRAME_TOML.replace("x1 + v*t", "x1 + * t"), "x")
    with raises(ScenarioError) as err:
        syntax.build_frame()
    assert "frame.forward" in str(err.value)

    unknown = parse_scenario(FRAME_TOML.replace("x1 + v*t", "x1 + speed*t"), "x")
    with raises(ScenarioError):
        unknown.build_frame()

    curve = Scenario.model_validate(
        {
            "name": "c",
            "lagrangian": {"dimension": 1, "expression": "0.5*qd1^2"},
            "verify": {"curve": ["q1 + t"]},
        }
    )
    with raises(ScenarioError) as err:
        curve.build_curve()
    assert "verify.curve" in str(err.value)


def test_constraint_scenario():
    scenario = load_scenario("bead_rotating_hoop")
    assert scenario.solve_dimension == 1
    assert scenario.solve_chart == "x"
    embedding = scenario.build_embedding()
    assert embedding is not None
    assert (embedding.m, embedding.n) == (1, 3)
    assert len(embedding.residuals) == 2
    assert embedding.compatibility([0.5], 0.7) <= 1e-14


def test_atlas_scenario():
    scenario = load_scenario("two_frame_atlas")
    atlas = scenario.build_atlas()
    assert atlas is not None
    assert atlas.ids == ["lab", "rotating", "drifting"]
    assert atlas["rotating"].c == 1.0
    assert atlas["drifting"].c == -0.5
    assert scenario.build_worldline().n == 2
    assert scenario.build_displacement().chart == "q"
    assert scenario.boundary is not None
    assert scenario.boundary.panels == 400

    assert scenario.atlas is not None
    clash = scenario.model_copy(
        update={"atlas": scenario.atlas.model_copy(update={"standard": "rotating"})}
    )
    with raises(ScenarioError) as err:
        clash.build_atlas()
    assert "standard frame" in str(err.value)
