import logging

import numpy as np
import pytest
from pytest import approx, raises

from plox.lagrange.constraints import (
    ConstraintEmbedding,
    RankDeficiencyError,
    constraint_drift,
    dalembert_check,
    implicit_velocity_residuals,
    intrinsic_lagrangian,
    map_trajectory,
    numerical_rank,
    velocity_spaces,
)
from plox.lagrange.mechanics import CurveJet, DimensionMismatchError, LagrangianSystem
from plox.lagrange.solvers import integrate_el


@pytest.fixture
def circle() -> ConstraintEmbedding:
    return ConstraintEmbedding.from_strings(
        ["R*cos(x1)", "R*sin(x1)"], 1, ["q1^2 + q2^2 - R^2"], {"R": 2.0}
    )


@pytest.fixture
def sliding_hoop() -> ConstraintEmbedding:
    """Unit hoop whose centre slides along the first axis with unit speed."""
    return ConstraintEmbedding.from_strings(
        ["t + cos(x1)", "sin(x1)"], 1, ["(q1 - t)^2 + q2^2 - 1"]
    )


def test_numerical_rank():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert numerical_rank(np.zeros((3, 2))) == 0
    assert numerical_rank(np.zeros((0, 0))) == 0
    assert numerical_rank(np.array([[1.0, 0.0], [0.0, 1e-14]])) == 1


def test_embedding_validation():
    with raises(DimensionMismatchError):
        ConstraintEmbedding.from_strings(["x1"], 2)
    with raises(DimensionMismatchError):
        ConstraintEmbedding.from_strings(["cos(x1)", "sin(x1)"], 1, ["x1 - q1"])
    emb = ConstraintEmbedding.from_strings(["x1", "x2", "0"], 2)
    assert (emb.m, emb.n) == (2, 3)
    assert emb.compatibility([1.0, 2.0], 0.0) == 0.0


def test_rank_deficiency_is_reported():
    emb = ConstraintEmbedding.from_strings(["x1^2", "0"], 1)
    with raises(RankDeficiencyError) as err:
        emb.checked_jacobian([0.0], 0.3)
    assert err.value.rank == 0
    assert err.value.expected == 1
    with raises(RankDeficiencyError):
        velocity_spaces(emb, [0.0], 0.3)
    assert emb.checked_jacobian([1.0], 0.3) == approx(np.array([[2.0], [0.0]]))


def test_intrinsic_lagrangian(circle: ConstraintEmbedding, free_particle_2d: LagrangianSystem):
    restricted = intrinsic_lagrangian(free_particle_2d, circle)
    assert restricted.n == 1
    assert restricted.chart == "x"
    assert restricted.value([0.3], [1.0], 0.0) == approx(2.0)
    assert "restriction" in restricted.description
    with raises(DimensionMismatchError):
        intrinsic_lagrangian(LagrangianSystem.from_expression("0.5*qd1^2", 1), circle)


def test_residuals_and_compatibility(sliding_hoop: ConstraintEmbedding):
    assert sliding_hoop.compatibility([0.4], 1.7) <= 1e-15
    f_q, f_t = sliding_hoop.residual_jacobians([1.5, 0.0], 1.0)
    assert f_q == approx(np.array([[1.0, 0.0]]))
    assert f_t == approx([-1.0])
    assert sliding_hoop.residual_values([1.0, 1.0], 1.0) == approx([0.0])


def test_velocity_spaces(sliding_hoop: ConstraintEmbedding):
    space = velocity_spaces(sliding_hoop, [0.0], 0.0)
    assert space.offset == approx([1.0, 0.0])
    assert space.basis == approx(np.array([[0.0], [1.0]]))
    assert space.admissible_residual([1.0, 5.0]) == approx(0.0)
    assert space.admissible_residual([0.0, 0.0]) == approx(1.0)
    assert space.virtual_residual([0.0, -3.0]) == approx(0.0)
    assert space.virtual_residual([1.0, 0.0]) == approx(1.0)


def test_implicit_velocity_residuals(sliding_hoop: ConstraintEmbedding):
    admissible, virtual = implicit_velocity_residuals(sliding_hoop, [0.4], [1.3], 0.2)
    assert admissible <= 1e-14
    assert virtual <= 1e-14
    bare = ConstraintEmbedding.from_strings(["cos(x1)", "sin(x1)"], 1)
    with raises(ValueError):
        implicit_velocity_residuals(bare, [0.4], [1.3], 0.2)


def test_dalembert_check(circle: ConstraintEmbedding, free_particle_2d: LagrangianSystem):
    # uniform motion along the circle is a geodesic
    assert dalembert_check(free_particle_2d, circle, CurveJet(0.0, [0.3], [0.7], [0.0])) <= 1e-13
    # E . eta = -R^2 xdd
    off = CurveJet(0.0, [0.3], [0.7], [1.0])
    assert dalembert_check(free_particle_2d, circle, off) == approx(4.0)


def test_trajectory_drift_and_reconstruction(
    circle: ConstraintEmbedding, free_particle_2d: LagrangianSystem
):
    restricted = intrinsic_lagrangian(free_particle_2d, circle)
    intrinsic = integrate_el(restricted, [0.0], [0.5], 0.0, 4.0, step=1e-2)
    ambient = map_trajectory(circle, intrinsic)
    assert ambient.chart == "q"
    assert ambient.n == 2
    times = ambient.times
    expected = np.column_stack([2.0 * np.cos(0.5 * times), 2.0 * np.sin(0.5 * times)])
    assert ambient.positions == approx(expected, abs=1e-9)
    assert constraint_drift(circle, ambient) <= 1e-12
    with raises(DimensionMismatchError):
        constraint_drift(circle, intrinsic)


def test_drift_without_residuals_warns(caplog: pytest.LogCaptureFixture):
    bare = ConstraintEmbedding.from_strings(["cos(x1)", "sin(x1)"], 1)
    L = intrinsic_lagrangian(LagrangianSystem.from_expression("0.5*(qd1^2 + qd2^2)", 2), bare)
    ambient = map_trajectory(bare, integrate_el(L, [0.0], [1.0], 0.0, 0.1, step=0.05))
    with caplog.at_level(logging.WARNING):
        assert constraint_drift(bare, ambient) == 0.0
    assert "no residuals" in caplog.text


def test_map_trajectory_checks_rank():
    emb = ConstraintEmbedding.from_strings(["x1", "x1", "x2^2"], 2)
    L = LagrangianSystem.from_expression("0.5*(xd1^2 + xd2^2)", 2, chart="x")
    along_fold = integrate_el(L, [0.0, 0.0], [1.0, 0.0], 0.0, 0.2, step=0.05)
    with raises(RankDeficiencyError):
        map_trajectory(emb, along_fold)
    clear = map_trajectory(emb, integrate_el(L, [0.0, 1.0], [1.0, 0.0], 0.0, 0.2, step=0.05))
    assert clear.positions[:, 2] == approx(np.ones(5))
