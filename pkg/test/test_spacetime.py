import math

import numpy as np
import pytest
from pytest import ROTATION, ROTATION_INVERSE, approx, raises  # type: ignore

from plox.lagrange.exprlang import parse_all
from plox.lagrange.frames import FrameError, FrameMap
from plox.lagrange.mechanics import (
    DimensionMismatchError,
    DisplacementField,
    LagrangianSystem,
    curve_jet,
)
from plox.lagrange.spacetime import (
    FrameAtlas,
    InvarianceReport,
    ReferenceFrame,
    UnknownFrameError,
    WorldLine,
    action_report,
    frame_curve,
    frame_jet,
    frame_lagrangian,
    invariance_report,
    stationary_path_gap,
    transition,
    vertical_displacement,
)

SAMPLE_TIMES = [0.0, 0.4, 1.1, 2.3, 3.0]


@pytest.fixture
def atlas() -> FrameAtlas:
    rotating = FrameMap.from_strings(ROTATION, ROTATION_INVERSE, constants={"w": 1.0})
    drifting = FrameMap.from_strings(["x1 + u*t", "x2"], ["q1 - u*t", "q2"], constants={"u": 0.5})
    return FrameAtlas.of(
        [
            ReferenceFrame.standard("lab", 2),
            ReferenceFrame("rotating", rotating, 1.0),
            ReferenceFrame("drifting", drifting, -0.5),
        ],
        "lab",
    )


@pytest.fixture
def lab_lagrangian() -> LagrangianSystem:
    return LagrangianSystem.from_expression(
        "0.5*(qd1^2 + qd2^2) - 0.5*q1^2 + 0.1*t*q2", 2
    )


@pytest.fixture
def worldline() -> WorldLine:
    return WorldLine(parse_all(["cos(t) + 0.1*t", "0.5*sin(2*t)"]))


def test_reference_frame_needs_inverse():
    with raises(FrameError):
        ReferenceFrame("bad", FrameMap.from_strings(["x1 + t"]), 0.0)
    frame = ReferenceFrame("clock", FrameMap.identity(1), 2.0)
    assert frame.frame_time(5.0) == 3.0
    assert frame.is_identity()
    assert not ReferenceFrame("moving", FrameMap.from_strings(["x1 + t"], ["q1 - t"])).is_identity()


def test_atlas_validation(atlas: FrameAtlas):
    assert atlas.n == 2
    assert atlas.ids == ["lab", "rotating", "drifting"]
    with raises(UnknownFrameError) as err:
        atlas["nowhere"]
    assert "nowhere" in str(err.value)
    assert isinstance(err.value, KeyError)
    with raises(UnknownFrameError):
        FrameAtlas.of([ReferenceFrame.standard("lab", 2)], "other")
    with raises(DimensionMismatchError):
        FrameAtlas.of([ReferenceFrame.standard("lab", 2), ReferenceFrame.standard("one", 1)], "lab")
    with raises(FrameError):
        FrameAtlas.of([ReferenceFrame("lab", FrameMap.identity(1), 1.0)], "lab")


def test_shifted_atlas_moves_only_non_standard_clocks(atlas: FrameAtlas):
    moved = atlas.shifted(0.75)
    assert moved["lab"].c == 0.0
    assert moved["rotating"].c == 1.75
    assert moved["drifting"].c == 0.25


def test_transition_to_self_is_identity(atlas: FrameAtlas):
    spatial, offset = transition(atlas, "rotating", "rotating")
    assert offset == 0.0
    assert spatial.position([0.3, 0.2], 1.0) == approx([0.3, 0.2])


def test_transition_time_law_and_spatial_map(atlas: FrameAtlas):
    spatial, offset = transition(atlas, "rotating", "drifting")
    assert offset == approx(1.5)
    x, t_rot = np.array([0.4, -0.9]), 0.8
    tau = t_rot + 1.0
    q = atlas["rotating"].to_standard.position(x, tau)
    expected = atlas["drifting"].to_standard.invert(q, tau)
    assert spatial.position(x, t_rot) == approx(expected, abs=1e-12)
    assert spatial.invert(spatial.position(x, t_rot), t_rot) == approx(x, abs=1e-12)

    _, clock = transition(
        FrameAtlas.of(
            [ReferenceFrame.standard("lab", 1), ReferenceFrame("clock", FrameMap.identity(1), 5.0)],
            "lab",
        ),
        "lab",
        "clock",
    )
    assert clock == -5.0


def test_transitions_compose(atlas: FrameAtlas):
    to_drift, a = transition(atlas, "rotating", "drifting")
    to_lab, b = transition(atlas, "drifting", "lab")
    direct, c = transition(atlas, "rotating", "lab")
    assert a + b == approx(c)
    x, t = [0.7, 0.1], 0.25
    assert to_lab.position(to_drift.position(x, t), t + a) == approx(direct.position(x, t))


def test_worldline():
    with raises(DimensionMismatchError):
        WorldLine(parse_all(["q1 + t"]))
    line = WorldLine(parse_all(["t^2", "1"]))
    position, tau = line.event(3.0)
    assert position == approx([9.0, 1.0])
    assert tau == 3.0


def test_frame_lagrangian(atlas: FrameAtlas, lab_lagrangian: LagrangianSystem):
    assert frame_lagrangian(atlas, lab_lagrangian, "lab") is lab_lagrangian
    drifting = frame_lagrangian(atlas, lab_lagrangian, "drifting")
    # frame time 0 is absolute time -0.5; q = (x1 - 0.25, x2), qd = xd + (0.5, 0)
    expected = 0.5 * (1.5**2 + 0.0) - 0.5 * (1.0 - 0.25) ** 2 + 0.1 * (-0.5) * 2.0
    assert drifting.value([1.0, 2.0], [1.0, 0.0], 0.0) == approx(expected)
    with raises(DimensionMismatchError):
        frame_lagrangian(atlas, LagrangianSystem.from_expression("0.5*qd1^2", 1), "lab")


def test_frame_curve_and_jet(atlas: FrameAtlas, worldline: WorldLine):
    tau = 1.3
    standard = curve_jet(worldline.curve, tau)
    assert frame_jet(atlas, worldline, "lab", tau).pos == approx(standard.pos)

    jet = frame_jet(atlas, worldline, "drifting", tau)
    assert jet.t == approx(tau + 0.5)
    assert jet.pos == approx(standard.pos - [0.5 * tau, 0.0])
    assert jet.vel == approx(standard.vel - [0.5, 0.0])
    assert jet.acc == approx(standard.acc)

    curve = frame_curve(atlas, worldline, "rotating")
    q = atlas["rotating"].to_standard.position(curve_jet(curve, tau - 1.0).pos, tau)
    assert q == approx(standard.pos)
    with raises(DimensionMismatchError):
        frame_curve(atlas, WorldLine(parse_all(["t"])), "lab")


def test_vertical_displacement(atlas: FrameAtlas):
    tau = 0.6
    event = (np.array([1.0, 0.5]), tau)
    xi = [0.3, -0.2]
    assert vertical_displacement(atlas, "lab", event, xi) == approx(xi)
    assert vertical_displacement(atlas, "drifting", event, xi) == approx(xi)
    c, s = math.cos(tau), math.sin(tau)
    rotated_back = [c * 0.3 + s * (-0.2), -s * 0.3 + c * (-0.2)]
    assert vertical_displacement(atlas, "rotating", event, xi) == approx(rotated_back)


def test_invariance_report_discrepancy():
    report = InvarianceReport((0.0, 1.0), {"a": [1.0, 2.0], "b": [1.5, 2.0], "c": [1.2, 1.9]})
    assert report.discrepancy == approx(0.5)
    assert InvarianceReport(()).discrepancy == 0.0


def test_variational_derivative_is_frame_independent(
    atlas: FrameAtlas, lab_lagrangian: LagrangianSystem, worldline: WorldLine
):
    displacement = DisplacementField.from_strings(["1 + 0.2*q2", "0.5 - 0.1*t"])
    report = invariance_report(atlas, lab_lagrangian, worldline, displacement, SAMPLE_TIMES)
    assert report.times == tuple(SAMPLE_TIMES)
    assert set(report.values) == {"lab", "rotating", "drifting"}
    assert all(len(v) == len(SAMPLE_TIMES) for v in report.values.values())
    assert max(abs(v) for v in report.values["lab"]) > 1e-3
    assert report.discrepancy <= 1e-9

    shifted = invariance_report(
        atlas.shifted(0.75), lab_lagrangian, worldline, displacement, SAMPLE_TIMES
    )
    assert shifted.values["rotating"] == approx(report.values["rotating"], abs=1e-9)


def test_invariance_report_respects_validity(lab_lagrangian: LagrangianSystem):
    limited = FrameMap.from_strings(["x1", "x2"], ["q1", "q2"], valid_t=(0.0, 1.0))
    atlas = FrameAtlas.of(
        [ReferenceFrame.standard("lab", 2), ReferenceFrame("limited", limited, 0.0)], "lab"
    )
    line = WorldLine(parse_all(["t", "0"]))
    field = DisplacementField.from_strings(["1", "0"])
    with raises(FrameError):
        invariance_report(atlas, lab_lagrangian, line, field, [0.5, 2.0])
    with raises(DimensionMismatchError):
        invariance_report(atlas, lab_lagrangian, line, DisplacementField.from_strings(["1"]), [])


def test_action_is_frame_independent(
    atlas: FrameAtlas, lab_lagrangian: LagrangianSystem, worldline: WorldLine
):
    actions = action_report(atlas, lab_lagrangian, worldline, 0.0, 3.0, quad_n=1000)
    assert list(actions) == ["lab", "rotating", "drifting"]
    assert max(actions.values()) - min(actions.values()) <= 1e-9
    moved = action_report(atlas.shifted(0.75), lab_lagrangian, worldline, 0.0, 3.0, quad_n=1000)
    assert moved["drifting"] == approx(actions["drifting"], abs=1e-9)


def test_stationary_paths_map_onto_each_other(atlas: FrameAtlas, lab_lagrangian: LagrangianSystem):
    events = ([1.0, 0.0], [0.0, 1.0], 0.0, 1.5)
    coarse = stationary_path_gap(atlas, lab_lagrangian, *events, N=50)
    fine = stationary_path_gap(atlas, lab_lagrangian, *events, N=100)
    assert list(fine) == ["lab", "rotating", "drifting"]
    assert coarse["lab"] == fine["lab"] == 0.0
    # a drifting chart discretises to the very same midpoint action
    assert fine["drifting"] <= 1e-9
    # the rotating chart does not, and its gap shrinks at second order
    assert 1e-9 < fine["rotating"] <= 1e-3
    assert 3.5 <= coarse["rotating"] / fine["rotating"] <= 4.5


def test_stationary_paths_respect_validity(lab_lagrangian: LagrangianSystem):
    bounded = FrameMap.from_strings(["x1 + t", "x2"], ["q1 - t", "q2"], valid_t=(0.0, 1.0))
    atlas = FrameAtlas.of(
        [ReferenceFrame.standard("lab", 2), ReferenceFrame("bounded", bounded)], "lab"
    )
    with raises(FrameError):
        stationary_path_gap(atlas, lab_lagrangian, [1.0, 0.0], [0.0, 1.0], 0.0, 1.5, N=20)
