import math

import numpy as np
from pytest import ROTATION, ROTATION_INVERSE, approx, raises  # type: ignore

from plox.lagrange.exprlang import parse_all
from plox.lagrange.frames import (
    FrameMap,
    FrameValidityError,
    SingularJacobianError,
    VelocityState,
    angular_velocity_fixed,
    angular_velocity_moving,
    angular_velocity_residual,
    compose,
    map_trajectory,
    pull_trajectory,
    pull_velocity,
    pullback_lagrangian,
    push_velocity,
)
from plox.lagrange.mechanics import (
    CurveJet,
    DimensionMismatchError,
    LagrangianSystem,
    el_residual,
)
from plox.lagrange.solvers import integrate_el


def test_rotation_jacobian_and_time_derivative(rotation: FrameMap):
    t = 0.3
    c, s = math.cos(t), math.sin(t)
    assert rotation.jacobian([1.0, 2.0], t) == approx(np.array([[c, -s], [s, c]]))
    assert rotation.time_derivative([1.0, 0.0], t) == approx([-s, c])
    assert rotation.position([1.0, 0.0], t) == approx([c, s])


def test_angular_velocity_fields(rotation: FrameMap):
    x, t = [1.0, 2.0], 0.7
    # moving field of a unit rotation is (-x2, x1) whatever the time
    assert angular_velocity_moving(rotation, x, t) == approx([-2.0, 1.0])
    fixed = angular_velocity_fixed(rotation, x, t)
    assert fixed == approx(rotation.jacobian(x, t) @ np.array([-2.0, 1.0]))
    assert angular_velocity_residual(rotation, x, t) <= 1e-12


def test_push_velocity_adds_frame_motion(rotation: FrameMap):
    pushed = push_velocity(rotation, VelocityState("x", [1.0, 0.0], [0.0, 0.0], 0.0))
    assert pushed.chart == "q"
    assert pushed.position == approx([1.0, 0.0])
    assert pushed.velocity == approx([0.0, 1.0])

    shift = FrameMap.from_strings(["x1 + 2*t"])
    assert push_velocity(shift, VelocityState("x", [0.0], [1.0], 0.0)).velocity == approx([3.0])


def test_push_pull_roundtrip(rotation: FrameMap):
    state = VelocityState("x", [0.3, -1.2], [2.0, 0.5], 1.1)
    back = pull_velocity(rotation, push_velocity(rotation, state))
    assert back.chart == "x"
    assert back.position == approx(state.position, abs=1e-12)
    assert back.velocity == approx(state.velocity, abs=1e-12)
    assert back.time == state.time


def test_newton_inversion_without_explicit_inverse():
    frame = FrameMap.from_strings(["x1 + 0.1*sin(x1) + t"])
    x = frame.invert([2.0], 0.5)
    assert frame.position(x, 0.5) == approx([2.0], abs=1e-12)
    state = pull_velocity(frame, VelocityState("q", [2.0], [1.0], 0.5))
    assert push_velocity(frame, state).velocity == approx([1.0], abs=1e-12)


def test_validity_interval():
    frame = FrameMap.from_strings(["x1 + t"], ["q1 - t"], valid_t=(0.0, 1.0))
    frame.check_time(1.0)
    with raises(FrameValidityError) as err:
        frame.check_time(1.5)
    assert err.value.time == 1.5
    assert err.value.interval == (0.0, 1.0)
    with raises(FrameValidityError):
        push_velocity(frame, VelocityState("x", [0.0], [0.0], -0.1))
    with raises(ValueError):
        FrameMap.from_strings(["x1"], valid_t=(1.0, 0.0))


def test_singular_jacobian():
    frame = FrameMap.from_strings(["x1^3"])
    with raises(SingularJacobianError):
        frame.checked_jacobian([0.0], 0.0)
    with raises(SingularJacobianError):
        angular_velocity_moving(frame, [0.0], 0.0)


def test_frame_map_validation():
    with raises(DimensionMismatchError):
        FrameMap(parse_all(["x1", "2*x1"]), 1)
    with raises(DimensionMismatchError):
        FrameMap.from_strings(["x1 + x3"])
    with raises(DimensionMismatchError):
        FrameMap.from_strings(["x1", "x2"], ["q1"])
    with raises(DimensionMismatchError):
        FrameMap.from_strings(["x1"], ["x1"])
    with raises(ValueError):
        VelocityState("x", [math.inf], [0.0], 0.0)


def test_identity_frame():
    frame = FrameMap.identity(3)
    assert frame.position([1.0, 2.0, 3.0], 5.0) == approx([1.0, 2.0, 3.0])
    assert frame.jacobian([0.0, 0.0, 0.0], 0.0) == approx(np.eye(3))
    assert frame.invert([4.0, 5.0, 6.0], 0.0) == approx([4.0, 5.0, 6.0])


def test_pullback_lagrangian_values(rotation: FrameMap, free_particle_2d: LagrangianSystem):
    pulled = pullback_lagrangian(free_particle_2d, rotation)
    assert pulled.chart == "x"
    assert pulled.n == 2
    # |xd + (-x2, x1)|^2 / 2 for a unit rotation
    assert pulled.value([1.0, 0.0], [0.0, 0.0], 0.4) == approx(0.5)
    assert pulled.value([1.0, 2.0], [0.5, -1.0], 0.0) == approx(0.5 * (1.5**2 + 0.0**2))
    assert "pullback" in pulled.description

    L = LagrangianSystem.from_expression("0.5*qd1^2", 1)
    assert pullback_lagrangian(L, FrameMap.from_strings(["x1 + 3*t"])).value(
        [0.0], [1.0], 0.0
    ) == approx(8.0)
    with raises(DimensionMismatchError):
        pullback_lagrangian(L, rotation)


def test_pullback_with_clock_offset():
    L = LagrangianSystem.from_expression("0.5*qd1^2 + t", 1)
    pulled = pullback_lagrangian(L, FrameMap.identity(1), time_offset=2.0)
    assert pulled.value([0.0], [1.0], 0.0) == approx(2.5)
    assert "clock offset" in pulled.description


def test_euler_lagrange_is_frame_covariant(rotation: FrameMap):
    L = LagrangianSystem.from_expression("0.5*(qd1^2 + qd2^2) - 0.5*q1^2 + t*q2", 2)
    pulled = pullback_lagrangian(L, rotation)
    jet = CurveJet(0.9, [0.4, -0.7], [1.3, 0.2], [-0.5, 2.0])
    image = rotation.second_order_jet(jet)
    jac = rotation.jacobian(jet.pos, jet.t)
    assert el_residual(pulled, jet) == approx(jac.T @ el_residual(L, image), abs=1e-10)


def test_compose_rotations(rotation: FrameMap):
    twice = compose(rotation, rotation)
    t = 0.6
    assert twice.position([1.0, 0.0], t) == approx([math.cos(2 * t), math.sin(2 * t)])
    assert twice.inverse is not None
    assert twice.invert(twice.position([0.3, 0.4], t), t) == approx([0.3, 0.4])

    bounded = FrameMap.from_strings(["x1 + t", "x2"], valid_t=(0.0, 2.0))
    limited = compose(bounded, FrameMap.from_strings(["x1", "x2"], valid_t=(1.0, 5.0)))
    assert limited.valid_t == (1.0, 2.0)
    assert limited.inverse is None
    with raises(DimensionMismatchError):
        compose(rotation, FrameMap.identity(1))


def test_pullback_through_non_commuting_composites(
    rotation: FrameMap, free_particle_2d: LagrangianSystem
):
    drift = FrameMap.from_strings(
        ["x1 + 0.3*sin(t) + 0.1", "x2 + 0.3*sin(t) + 0.2"],
        ["q1 - 0.3*sin(t) - 0.1", "q2 - 0.3*sin(t) - 0.2"],
    )
    x, xd, t = [0.4, -0.7], [1.1, 0.2], 0.9
    first, second = compose(rotation, drift), compose(drift, rotation)
    assert np.max(np.abs(first.position(x, t) - second.position(x, t))) > 0.1

    for outer, inner, composite in ((rotation, drift, first), (drift, rotation, second)):
        twice = pullback_lagrangian(pullback_lagrangian(free_particle_2d, outer), inner)
        once = pullback_lagrangian(free_particle_2d, composite)
        assert once.value(x, xd, t) == approx(twice.value(x, xd, t), rel=1e-12)
    assert abs(
        pullback_lagrangian(free_particle_2d, first).value(x, xd, t)
        - pullback_lagrangian(free_particle_2d, second).value(x, xd, t)
    ) > 1e-3


def test_trajectory_to_fixed_chart_and_back(
    rotation: FrameMap, free_particle_2d: LagrangianSystem
):
    pulled = pullback_lagrangian(free_particle_2d, rotation)
    moving = integrate_el(pulled, [1.0, 0.0], [0.5, -0.5], 0.0, 2.0, step=1e-2)
    fixed = map_trajectory(rotation, moving)
    assert fixed.chart == "q"
    expected = np.column_stack([1.0 + 0.5 * fixed.times, 0.5 * fixed.times])
    assert fixed.positions == approx(expected, abs=1e-8)
    assert fixed.accelerations == approx(np.zeros_like(expected), abs=1e-8)

    back = pull_trajectory(rotation, fixed)
    assert back.chart == "x"
    assert back.positions == approx(moving.positions, abs=1e-12)
    assert back.accelerations == approx(moving.accelerations, abs=1e-10)
    with raises(DimensionMismatchError):
        map_trajectory(FrameMap.identity(1), moving)


def test_fixture_constants_match_rotation(rotation: FrameMap):
    frame = FrameMap.from_strings(ROTATION, ROTATION_INVERSE, constants={"w": 1.0})
    assert frame.position([1.0, 2.0], 0.2) == approx(rotation.position([1.0, 2.0], 0.2))
