"""Time-dependent holonomic constraints given as immersions ``q = Q(x, t)`` of a smaller chart.

.. code-block:: python

    from plox.lagrange import constraints

Constraints are authored parametrically: the immersion of the intrinsic chart (``x1..xm``)
into the ambient one (``q1..qn``) is the source of truth, the implicit functions
``f_a(q, t) = 0`` are optional and only used for drift reporting and for the implicit
description of the velocity spaces. No Lagrange multipliers are involved anywhere.

Immersions are checked where they are used (at sampled points along trajectories);
self intersections of the image are not detected.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from logging import getLogger
from typing import Optional

import numpy as np
from scipy.linalg import qr

from plox.lagrange import frames
from plox.lagrange.dualnum import Scalar, value_of
from plox.lagrange.exprlang import Expr, parse_all
from plox.lagrange.frames import ParametrizedMap, pullback_lagrangian
from plox.lagrange.mechanics import (
    CurveJet,
    DimensionMismatchError,
    LagrangianSystem,
    Vector,
    chart_names,
    el_residual,
)
from plox.lagrange.solvers import Trajectory

logger = getLogger(__name__)

RANK_THRESHOLD = 1e-10


class RankDeficiencyError(ValueError):
    """The immersion Jacobian lost rank.

    Attributes:
        rank: Numerical rank found.
        expected: Intrinsic dimension ``m``.
    """

    def __init__(self, rank: int, expected: int, t: float) -> None:
        self.rank = rank
        self.expected = expected
        super().__init__(f"immersion Jacobian has rank {rank} < {expected} at t={t!r}")


def numerical_rank(matrix: np.ndarray, threshold: float = RANK_THRESHOLD) -> int:
    """Rank by column pivoted QR: pivots above ``threshold`` times the largest one count."""
    if matrix.size == 0:
        return 0
    r = qr(matrix, mode="r", pivoting=True)[0]
    pivots = np.abs(np.diag(r))
    if pivots[0] == 0.0:
        return 0
    return int(np.sum(pivots > threshold * pivots[0]))


@dataclass(frozen=True)
class ConstraintEmbedding(ParametrizedMap):
    """Immersion of an ``m`` dimensional chart into the ``n`` dimensional configuration chart.

    Attributes:
        residuals: Optional implicit constraint functions ``f_a(q, t)``.
    """

    residuals: tuple[Expr, ...] = ()
    _residual_q: tuple[tuple[Expr, ...], ...] = field(init=False, repr=False, compare=False)
    _residual_t: tuple[Expr, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.m > self.n:
            raise DimensionMismatchError(
                f"intrinsic dimension {self.m} exceeds ambient dimension {self.n}"
            )
        object.__setattr__(self, "residuals", tuple(self.residuals))
        names, _ = chart_names(self.target_chart, self.n)
        allowed = {*names, "t"}
        for f in self.residuals:
            stray = [v for v in f.free_vars if v not in allowed]
            if stray:
                raise DimensionMismatchError(f"constraint residual '{f}' uses {stray}")
        grads = tuple(tuple(f.derivative(q) for q in names) for f in self.residuals)
        object.__setattr__(self, "_residual_q", grads)
        object.__setattr__(self, "_residual_t", tuple(f.derivative("t") for f in self.residuals))

    @classmethod
    def from_strings(
        cls,
        forward: Sequence[str],
        m: int,
        residuals: Sequence[str] = (),
        constants: Optional[dict[str, float]] = None,
    ) -> ConstraintEmbedding:
        return cls(parse_all(forward, constants), m, residuals=parse_all(residuals, constants))

    def _ambient_binding(self, q: Vector, t: float) -> dict[str, Scalar]:
        names, _ = chart_names(self.target_chart, self.n)
        binding: dict[str, Scalar] = {k: float(v) for k, v in zip(names, q)}
        binding["t"] = float(t)
        return binding

    def residual_values(self, q: Vector, t: float) -> np.ndarray:
        binding = self._ambient_binding(q, t)
        return np.array([value_of(f.evaluate(binding)) for f in self.residuals])

    def residual_jacobians(self, q: Vector, t: float) -> tuple[np.ndarray, np.ndarray]:
        """``df/dq`` (``k x n``) and ``df/dt`` (``k``) of the residuals at ``(q, t)``."""
        binding = self._ambient_binding(q, t)
        f_q = np.array(
            [[value_of(d.evaluate(binding)) for d in row] for row in self._residual_q]
        ).reshape(len(self.residuals), self.n)
        f_t = np.array([value_of(d.evaluate(binding)) for d in self._residual_t])
        return f_q, f_t

    def compatibility(self, x: Vector, t: float) -> float:
        """``max |f_a(Q(x,t), t)|``; zero when the residuals describe the image."""
        if not self.residuals:
            return 0.0
        return float(np.max(np.abs(self.residual_values(self.position(x, t), t))))

    def checked_jacobian(self, x: Vector, t: float) -> np.ndarray:
        jac = self.jacobian(x, t)
        rank = numerical_rank(jac)
        if rank < self.m:
            raise RankDeficiencyError(rank, self.m, t)
        return jac


@dataclass(frozen=True)
class AffineVelocitySpace:
    """Admissible velocities ``offset + basis @ xd``.

    The basis alone spans the virtual displacements.
    """

    offset: np.ndarray
    basis: np.ndarray

    def _distance(self, vector: np.ndarray) -> float:
        coeffs = np.linalg.lstsq(self.basis, vector, rcond=None)[0]
        return float(np.max(np.abs(self.basis @ coeffs - vector))) if len(vector) else 0.0

    def admissible_residual(self, velocity: Vector) -> float:
        """Distance of ``velocity`` from the admissible space after least squares projection."""
        return self._distance(np.asarray(velocity, dtype=float) - self.offset)

    def virtual_residual(self, displacement: Vector) -> float:
        return self._distance(np.asarray(displacement, dtype=float))


def intrinsic_lagrangian(L: LagrangianSystem, emb: ConstraintEmbedding) -> LagrangianSystem:
    """Lagrangian of the constrained system on the intrinsic chart.

    ``l(x, xd, t) = L(Q(x,t), J xd + dQ/dt, t)``; for time independent immersions this is
    plainly ``L`` restricted to the tangent bundle of the image.

    Example:

        >>> L = LagrangianSystem.from_expression("0.5*(qd1^2 + qd2^2)", 2)
        >>> circle = ConstraintEmbedding.from_strings(["cos(x1)", "sin(x1)"], 1)
        >>> round(intrinsic_lagrangian(L, circle).value([0.3], [2.0], 0.0), 12)
        2.0
    """
    if L.n != emb.n:
        raise DimensionMismatchError(
            f"Lagrangian has dimension {L.n}, immersion targets dimension {emb.n}"
        )
    restricted = pullback_lagrangian(L, emb)
    how = f"restriction of [{L.description}]"
    return LagrangianSystem(restricted.n, restricted.chart, restricted.lagrangian, how)


def velocity_spaces(emb: ConstraintEmbedding, x: Vector, t: float) -> AffineVelocitySpace:
    """Admissible velocities and virtual displacements at ``Q(x, t)``.

    Raises:
        RankDeficiencyError: The immersion Jacobian has rank below ``m`` at ``(x, t)``.
    """
    return AffineVelocitySpace(emb.time_derivative(x, t), emb.checked_jacobian(x, t))


def implicit_velocity_residuals(
    emb: ConstraintEmbedding, x: Vector, xd: Vector, t: float
) -> tuple[float, float]:
    """Check the pushed velocity and the tangent basis against the implicit constraints.

    Admissible velocities satisfy ``df/dt + df/dq qd = 0`` and virtual displacements
    ``df/dq eta = 0``.

    Returns:
        tuple[float, float]: Max-norm residuals of the admissible equation (for
        ``qd = J xd + dQ/dt``) and of the virtual equation over the basis columns.
    """
    if not emb.residuals:
        raise ValueError("the immersion carries no constraint residuals")
    q, qd = emb.push([float(v) for v in x], [float(v) for v in xd], float(t))
    f_q, f_t = emb.residual_jacobians([value_of(v) for v in q], t)
    admissible = f_t + f_q @ np.array([value_of(v) for v in qd])
    virtual = f_q @ emb.jacobian(x, t)
    return float(np.max(np.abs(admissible))), float(np.max(np.abs(virtual)))


def dalembert_check(L: LagrangianSystem, emb: ConstraintEmbedding, jet: CurveJet) -> float:
    """Largest ``|E . eta|`` over the virtual displacement basis at an intrinsic jet.

    The ambient jet is rebuilt from ``jet`` by second-order AD through the immersion;
    the value vanishes exactly when the intrinsic curve is a motion of the constrained
    system.

    Raises:
        RankDeficiencyError: The immersion is degenerate at the jet.
    """
    basis = emb.checked_jacobian(jet.pos, jet.t)
    residual = el_residual(L, emb.second_order_jet(jet))
    return float(np.max(np.abs(residual @ basis)))


def constraint_drift(emb: ConstraintEmbedding, trajectory: Trajectory) -> float:
    """Largest ``|f_a(q(t), t)|`` along an ambient trajectory; ``0.0`` without residuals."""
    if not emb.residuals:
        logger.warning("constraint drift requested but the immersion has no residuals")
        return 0.0
    if trajectory.n != emb.n:
        raise DimensionMismatchError(
            f"trajectory has {trajectory.n} components, ambient dimension is {emb.n}"
        )
    return max(float(np.max(np.abs(emb.residual_values(s.pos, s.t)))) for s in trajectory.samples)


def map_trajectory(emb: ConstraintEmbedding, trajectory: Trajectory) -> Trajectory:
    """Ambient reconstruction of an intrinsic trajectory, rank checked at every sample."""
    for jet in trajectory.samples:
        emb.checked_jacobian(jet.pos, jet.t)
    return frames.map_trajectory(emb, trajectory)
