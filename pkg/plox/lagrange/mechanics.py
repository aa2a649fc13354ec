"""Lagrangian calculus: Euler-Lagrange residuals, variational derivatives, actions.

.. code-block:: python

    from plox.lagrange import mechanics

All partial derivatives of a Lagrangian are taken by seeding
:class:`~plox.lagrange.dualnum.Dual2` scalars in the ``(q, qd, t)`` slots, so any
:class:`LagrangianSystem` works here: expression backed ones, pullbacks through moving
frames and restrictions to constraint submanifolds alike.

The residual sign convention is ``E_i = dL/dq^i - d/dt dL/dqd^i``; a curve is a motion
exactly when ``E`` vanishes along it.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from logging import getLogger
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import simpson

from plox.lagrange.dualnum import Dual2, Scalar, lift, value_of
from plox.lagrange.exprlang import Expr, parse

logger = getLogger(__name__)

DEGENERACY_CONDITION = 1e12
"""Mass matrices with a condition estimate above this are treated as singular."""

SYMMETRY_TOLERANCE = 1e-8

LagrangianFn = Callable[[Sequence[Scalar], Sequence[Scalar], Scalar], Scalar]
Vector = Union[Sequence[float], np.ndarray]


class DimensionMismatchError(ValueError):
    """Objects of incompatible dimensions (or charts) were combined."""


class DegenerateLagrangianError(ArithmeticError):
    """The velocity Hessian is singular, so the motion is not determined.

    Attributes:
        time: Time at which the degeneracy was detected.
        condition: Condition estimate of the offending matrix (``inf`` if singular).
    """

    def __init__(self, time: float, condition: float, what: str = "mass matrix") -> None:
        self.time = time
        self.condition = condition
        super().__init__(
            f"degenerate Lagrangian at t={time!r}: {what} condition estimate {condition:.3g}"
        )


class AsymmetricHessianError(ArithmeticError):
    """The AD velocity Hessian is not symmetric, which signals a non-smooth Lagrangian."""


def condition_estimate(matrix: np.ndarray) -> float:
    """2-norm condition number; ``inf`` for singular (or zero) matrices."""
    if matrix.size == 0:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = float(np.linalg.cond(matrix))
    return cond if np.isfinite(cond) else float("inf")


def chart_names(chart: str, n: int) -> tuple[list[str], list[str]]:
    """Variable names of positions and velocities of a chart, e.g. ``q1..``, ``qd1..``."""
    return [f"{chart}{i}" for i in range(1, n + 1)], [f"{chart}d{i}" for i in range(1, n + 1)]


@dataclass(frozen=True)
class LagrangianSystem:
    """A Lagrangian ``L(q, qd, t)`` on an ``n`` dimensional chart.

    Attributes:
        n: Dimension of the configuration chart.
        chart: Chart identifier; also the variable prefix of expression backed systems.
        lagrangian: Callable evaluating ``L`` on plain or Dual2 scalars.
        description: Human readable origin (source text, or how it was derived).
    """

    n: int
    chart: str
    lagrangian: LagrangianFn = field(repr=False, compare=False)
    description: str = ""

    @classmethod
    def from_expression(
        cls,
        source: Union[str, Expr],
        n: int,
        chart: str = "q",
        constants: Optional[dict[str, float]] = None,
    ) -> LagrangianSystem:
        """Build an expression backed system.

        Raises:
            DimensionMismatchError: The expression uses variables outside of the chart's
                ``<chart>1..n``, ``<chart>d1..n`` and ``t``.
        """
        expr = parse(source, constants) if isinstance(source, str) else source
        pos_names, vel_names = chart_names(chart, n)
        allowed = {*pos_names, *vel_names, "t"}
        stray = [v for v in expr.free_vars if v not in allowed]
        if stray:
            raise DimensionMismatchError(
                f"Lagrangian uses variables {stray} outside of the {n}-dimensional "
                f"chart '{chart}'"
            )

        def evaluate(q: Sequence[Scalar], qd: Sequence[Scalar], t: Scalar) -> Scalar:
            binding: dict[str, Scalar] = dict(zip(pos_names, q))
            binding.update(zip(vel_names, qd))
            binding["t"] = t
            return expr.evaluate(binding)

        return cls(n, chart, evaluate, str(expr))

    def __call__(self, q: Sequence[Scalar], qd: Sequence[Scalar], t: Scalar) -> Scalar:
        return self.lagrangian(q, qd, t)

    def value(self, q: Vector, qd: Vector, t: float) -> float:
        return value_of(self.lagrangian([float(x) for x in q], [float(x) for x in qd], float(t)))

    def seeded(
        self,
        q: Vector,
        qd: Vector,
        t: float,
        u: Sequence[float],
        v: Sequence[float],
    ) -> Dual2:
        """Evaluate with Dual2 inputs seeded along ``u`` and ``v`` in ``(q, qd, t)`` space.

        ``u`` and ``v`` have length ``2n + 1`` (positions, velocities, time).
        """
        n = self.n
        qs = [Dual2(float(q[i]), float(u[i]), float(v[i])) for i in range(n)]
        qds = [Dual2(float(qd[i]), float(u[n + i]), float(v[n + i])) for i in range(n)]
        out = self.lagrangian(qs, qds, Dual2(float(t), float(u[2 * n]), float(v[2 * n])))
        return out if isinstance(out, Dual2) else Dual2(float(out))


@dataclass(frozen=True)
class CurveJet:
    """Position, velocity and acceleration of a curve at time ``t``."""

    t: float
    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray

    def __post_init__(self) -> None:
        for name in ("pos", "vel", "acc"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            object.__setattr__(self, name, arr)
        if not (len(self.pos) == len(self.vel) == len(self.acc)):
            raise DimensionMismatchError("jet components have different lengths")
        if not (
            np.isfinite(self.t)
            and np.all(np.isfinite(self.pos))
            and np.all(np.isfinite(self.vel))
            and np.all(np.isfinite(self.acc))
        ):
            raise ValueError(f"non-finite jet component at t={self.t!r}")

    @property
    def n(self) -> int:
        return len(self.pos)


@dataclass(frozen=True)
class DisplacementField:
    """Vector field ``xi(q, t)`` of displacements, one expression per component."""

    exprs: tuple[Expr, ...]
    chart: str = "q"

    @classmethod
    def from_strings(
        cls, sources: Sequence[str], chart: str = "q", constants: Optional[dict[str, float]] = None
    ) -> DisplacementField:
        exprs = tuple(parse(s, constants) for s in sources)
        pos_names, _ = chart_names(chart, len(exprs))
        allowed = {*pos_names, "t"}
        for e in exprs:
            stray = [v for v in e.free_vars if v not in allowed]
            if stray:
                raise DimensionMismatchError(
                    f"displacement component '{e}' uses {stray} outside of chart '{chart}'"
                )
        return cls(exprs, chart)

    @property
    def n(self) -> int:
        return len(self.exprs)

    def at(self, position: Vector, t: float) -> np.ndarray:
        pos_names, _ = chart_names(self.chart, self.n)
        binding: dict[str, Scalar] = {name: float(x) for name, x in zip(pos_names, position)}
        binding["t"] = float(t)
        return np.array([value_of(e.evaluate(binding)) for e in self.exprs])


def _check_dimension(L: LagrangianSystem, *vectors: Vector) -> None:
    for vec in vectors:
        if len(vec) != L.n:
            raise DimensionMismatchError(f"expected {L.n} components, got {len(vec)}")


def position_gradient(L: LagrangianSystem, q: Vector, qd: Vector, t: float) -> np.ndarray:
    """``dL/dq`` at ``(q, qd, t)``, two components per seeded evaluation."""
    n = L.n
    eye = np.eye(2 * n + 1)
    zero = np.zeros(2 * n + 1)
    grad = np.zeros(n)
    for i in range(0, n, 2):
        second = eye[i + 1] if i + 1 < n else zero
        out = L.seeded(q, qd, t, eye[i], second)
        grad[i] = out.d1
        if i + 1 < n:
            grad[i + 1] = out.d2
    return grad


def _momentum_rates(
    L: LagrangianSystem, q: Vector, qd: Vector, qdd: Vector, t: float
) -> np.ndarray:
    """``d/dt dL/dqd^i`` expanded by the chain rule with the given accelerations."""
    n = L.n
    eye = np.eye(2 * n + 1)
    flow = np.concatenate([np.asarray(qd, dtype=float), np.asarray(qdd, dtype=float), [1.0]])
    return np.array([L.seeded(q, qd, t, eye[n + i], flow).d12 for i in range(n)])


def el_residual(L: LagrangianSystem, jet: CurveJet) -> np.ndarray:
    """Euler-Lagrange covector ``E_i = dL/dq^i - d/dt dL/dqd^i`` at a curve jet.

    Example:

        >>> L = LagrangianSystem.from_expression("0.5*qd1^2 - 0.5*q1^2", 1)
        >>> el_residual(L, CurveJet(2.0, [2.0], [1.0], [0.0]))
        array([-2.])

    Args:
        L: The Lagrangian system.
        jet: Position, velocity and acceleration of the curve at ``jet.t``.

    Raises:
        DimensionMismatchError: Jet and system dimensions differ.
        plox.lagrange.dualnum.DomainError: The Lagrangian left its domain.

    Returns:
        numpy.ndarray: The ``n`` residual components.
    """
    _check_dimension(L, jet.pos)
    return position_gradient(L, jet.pos, jet.vel, jet.t) - _momentum_rates(
        L, jet.pos, jet.vel, jet.acc, jet.t
    )


def variational_derivative(L: LagrangianSystem, jet: CurveJet, xi: Vector) -> float:
    """Pairing of the Euler-Lagrange covector with the displacement ``xi``."""
    _check_dimension(L, xi)
    return float(np.dot(el_residual(L, jet), np.asarray(xi, dtype=float)))


def mass_matrix(L: LagrangianSystem, q: Vector, qd: Vector, t: float) -> np.ndarray:
    """Velocity Hessian ``d2L/dqd^i dqd^j``.

    Both orders of every mixed pair are evaluated; the result is their average.

    Raises:
        AsymmetricHessianError: The two orders disagree beyond ``1e-8`` (relative).
    """
    n = L.n
    _check_dimension(L, q, qd)
    eye = np.eye(2 * n + 1)
    hess = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            hess[i, j] = L.seeded(q, qd, t, eye[n + i], eye[n + j]).d12
    scale = max(1.0, float(np.max(np.abs(hess)))) if n else 1.0
    asym = float(np.max(np.abs(hess - hess.T))) if n else 0.0
    if asym > SYMMETRY_TOLERANCE * scale:
        raise AsymmetricHessianError(
            f"velocity Hessian asymmetric by {asym:.3g} at t={t!r}; is the Lagrangian smooth?"
        )
    return 0.5 * (hess + hess.T)


def el_accelerations(L: LagrangianSystem, q: Vector, qd: Vector, t: float) -> np.ndarray:
    """Solve the Euler-Lagrange equations for the accelerations.

    ``M qdd = dL/dq - d2L/dqd dq . qd - d2L/dqd dt``.

    Raises:
        DegenerateLagrangianError: The mass matrix condition estimate exceeds ``1e12``.
    """
    n = L.n
    mass = mass_matrix(L, q, qd, t)
    cond = condition_estimate(mass)
    if cond > DEGENERACY_CONDITION:
        raise DegenerateLagrangianError(float(t), cond)
    rhs = position_gradient(L, q, qd, t) - _momentum_rates(L, q, qd, np.zeros(n), t)
    return np.linalg.solve(mass, rhs)


def jacobi_energy(L: LagrangianSystem, q: Vector, qd: Vector, t: float) -> float:
    """Jacobi energy ``qd . dL/dqd - L``; conserved along motions of autonomous systems."""
    n = L.n
    u = np.concatenate([np.zeros(n), np.asarray(qd, dtype=float), [0.0]])
    out = L.seeded(q, qd, t, u, np.zeros(2 * n + 1))
    return out.d1 - out.val


def curve_jet(curve: Sequence[Expr], t: float) -> CurveJet:
    """Jet of an analytic curve ``t -> (c_1(t), ..., c_n(t))`` at ``t``."""
    binding = {"t": Dual2(float(t), 1.0, 1.0)}
    pos, vel, acc = [], [], []
    for comp in curve:
        out = comp.evaluate(binding)
        d = out if isinstance(out, Dual2) else Dual2(float(out))
        pos.append(d.val)
        vel.append(d.d1)
        acc.append(d.d12)
    return CurveJet(float(t), np.array(pos), np.array(vel), np.array(acc))


def action_integral(
    L: LagrangianSystem, curve: Sequence[Expr], a: float, b: float, quad_n: int = 1000
) -> float:
    """Action ``int_a^b L(c, c', t) dt`` of an analytic curve by composite Simpson.

    Args:
        L: The Lagrangian system.
        curve: ``n`` expressions of ``t``.
        a: Start time.
        b: End time, ``b >= a``.
        quad_n: Number of Simpson panels (each panel spans two sub-intervals).

    Returns:
        float: The action; ``0.0`` on an empty interval.
    """
    if len(curve) != L.n:
        raise DimensionMismatchError(f"curve has {len(curve)} components, system has {L.n}")
    if a == b:
        return 0.0
    if b < a:
        raise ValueError(f"action interval is reversed: [{a}, {b}]")
    if quad_n < 2:
        raise ValueError(f"quad_n must be at least 2, got {quad_n}")
    times = np.linspace(a, b, 2 * quad_n + 1)
    values = np.empty_like(times)
    for k, t in enumerate(times):
        lt = lift(t, 1.0)
        binding = {"t": lt}
        pos, vel = [], []
        for comp in curve:
            out = comp.evaluate(binding)
            pos.append(value_of(out))
            vel.append(out.d1 if isinstance(out, Dual2) else 0.0)
        values[k] = L.value(pos, vel, t)
    return float(simpson(values, dx=(b - a) / (2 * quad_n)))
