"""Moving reference frames: time-dependent maps ``q = Q(x, t)`` and what they do to mechanics.

.. code-block:: python

    from plox.lagrange import frames

A :class:`FrameMap` relates a moving chart (coordinates ``x1..xn``) to the fixed chart
(coordinates ``q1..qn``). Its Jacobian and time derivative are derived from the forward
expressions by :func:`plox.lagrange.exprlang.derivative`, never supplied by hand, and the
derived expressions evaluate on Dual2 scalars so that pulled back Lagrangians can be
differentiated twice like any other.

Example:

    >>> rot = FrameMap.from_strings(["x1*cos(t) - x2*sin(t)", "x1*sin(t) + x2*cos(t)"])
    >>> angular_velocity_fixed(rot, [1.0, 0.0], 0.0)
    array([0., 1.])
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from logging import getLogger
from typing import Optional

import numpy as np

from plox.lagrange.dualnum import Dual2, Scalar, value_of
from plox.lagrange.exprlang import Expr, parse_all, variable
from plox.lagrange.mechanics import (
    CurveJet,
    DimensionMismatchError,
    LagrangianSystem,
    Vector,
    chart_names,
    condition_estimate,
)
from plox.lagrange.solvers import Trajectory

logger = getLogger(__name__)

SINGULAR_CONDITION = 1e12
INVERSION_TOLERANCE = 1e-12
INVERSION_MAX_ITERATIONS = 50

Interval = tuple[float, float]
ALL_TIME: Interval = (-math.inf, math.inf)


class FrameError(ValueError):
    """Base class for frame map failures."""


class SingularJacobianError(FrameError):
    """The Jacobian of a frame map is (numerically) singular.

    Attributes:
        condition: Condition estimate of the Jacobian.
    """

    def __init__(self, condition: float, t: float) -> None:
        self.condition = condition
        super().__init__(f"singular frame Jacobian at t={t!r} (condition {condition:.3g})")


class InversionError(FrameError):
    """Newton inversion of a frame map failed to converge."""

    def __init__(self, iterations: int, residual: float) -> None:
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"frame inversion did not converge in {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class FrameValidityError(FrameError):
    """A frame was used outside of its validity interval."""

    def __init__(self, time: float, interval: Interval) -> None:
        self.time = time
        self.interval = interval
        super().__init__(f"t={time!r} lies outside of the frame validity interval {interval}")


@dataclass(frozen=True)
class VelocityState:
    """Position and velocity in a named chart at a time."""

    chart: str
    position: np.ndarray
    velocity: np.ndarray
    time: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(-1))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(-1))
        if len(self.position) != len(self.velocity):
            raise DimensionMismatchError("position and velocity have different lengths")
        if not (
            math.isfinite(self.time)
            and np.all(np.isfinite(self.position))
            and np.all(np.isfinite(self.velocity))
        ):
            raise ValueError(f"non-finite state in chart '{self.chart}' at t={self.time!r}")


@dataclass(frozen=True)
class ParametrizedMap:
    """Time-dependent map ``Q(x, t)`` from ``m`` source coordinates to ``n`` target ones.

    Shared by square frame maps and by constraint immersions. Source variables are named
    ``<source_chart>1..m``; the derivative expressions are built once, at construction.
    """

    forward: tuple[Expr, ...]
    m: int
    source_chart: str = "x"
    target_chart: str = "q"
    _jacobian: tuple[tuple[Expr, ...], ...] = field(init=False, repr=False, compare=False)
    _time_derivative: tuple[Expr, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "forward", tuple(self.forward))
        names, _ = chart_names(self.source_chart, self.m)
        allowed = {*names, "t"}
        for comp in self.forward:
            stray = [v for v in comp.free_vars if v not in allowed]
            if stray:
                raise DimensionMismatchError(
                    f"map component '{comp}' uses {stray}; only {sorted(allowed)} are allowed"
                )
        jac = tuple(tuple(comp.derivative(name) for name in names) for comp in self.forward)
        object.__setattr__(self, "_jacobian", jac)
        object.__setattr__(self, "_time_derivative", tuple(c.derivative("t") for c in self.forward))

    @property
    def n(self) -> int:
        return len(self.forward)

    def _binding(self, x: Sequence[Scalar], t: Scalar) -> dict[str, Scalar]:
        if len(x) != self.m:
            raise DimensionMismatchError(f"expected {self.m} source coordinates, got {len(x)}")
        names, _ = chart_names(self.source_chart, self.m)
        binding: dict[str, Scalar] = dict(zip(names, x))
        binding["t"] = t
        return binding

    def position(self, x: Vector, t: float) -> np.ndarray:
        binding = self._binding([float(v) for v in x], float(t))
        return np.array([value_of(c.evaluate(binding)) for c in self.forward])

    def jacobian(self, x: Vector, t: float) -> np.ndarray:
        """``dQ/dx`` as an ``n x m`` matrix."""
        binding = self._binding([float(v) for v in x], float(t))
        return np.array(
            [[value_of(d.evaluate(binding)) for d in row] for row in self._jacobian]
        ).reshape(self.n, self.m)

    def time_derivative(self, x: Vector, t: float) -> np.ndarray:
        binding = self._binding([float(v) for v in x], float(t))
        return np.array([value_of(d.evaluate(binding)) for d in self._time_derivative])

    def push(
        self, x: Sequence[Scalar], xd: Sequence[Scalar], t: Scalar
    ) -> tuple[list[Scalar], list[Scalar]]:
        """Velocity addition ``q = Q(x,t)``, ``qd = J xd + dQ/dt`` on plain or Dual2 scalars."""
        binding = self._binding(x, t)
        q = [c.evaluate(binding) for c in self.forward]
        qd: list[Scalar] = []
        for row, dt in zip(self._jacobian, self._time_derivative):
            acc: Scalar = dt.evaluate(binding)
            for d, v in zip(row, xd):
                acc = acc + d.evaluate(binding) * v
            qd.append(acc)
        return q, qd

    def curvature(
        self, x: Vector, xd: Vector, t: float
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Position, velocity and the acceleration of ``Q`` along ``(x + s xd, t + s)``.

        One Dual2 pass seeded with ``u = v = (xd, 1)`` gives
        ``xd^T Q_xx xd + 2 Q_xt xd + Q_tt`` in the mixed slot; adding ``J xdd`` to it
        gives the full second time derivative along a curve.
        """
        seeded = [Dual2(float(p), float(s), float(s)) for p, s in zip(x, xd)]
        binding = self._binding(seeded, Dual2(float(t), 1.0, 1.0))
        outs = [c.evaluate(binding) for c in self.forward]
        duals = [o if isinstance(o, Dual2) else Dual2(float(o)) for o in outs]
        return (
            np.array([d.val for d in duals]),
            np.array([d.d1 for d in duals]),
            np.array([d.d12 for d in duals]),
        )

    def second_order_jet(self, jet: CurveJet) -> CurveJet:
        """Jet of the image curve ``t -> Q(x(t), t)``."""
        q, qd, bend = self.curvature(jet.pos, jet.vel, jet.t)
        return CurveJet(jet.t, q, qd, bend + self.jacobian(jet.pos, jet.t) @ jet.acc)


@dataclass(frozen=True)
class FrameMap(ParametrizedMap):
    """Square time-dependent diffeomorphism between a moving and the fixed chart.

    Attributes:
        inverse: Optional explicit inverse ``X(q, t)``, one expression per component.
        valid_t: Closed interval of times on which the frame is defined.
    """

    inverse: Optional[tuple[Expr, ...]] = None
    valid_t: Interval = ALL_TIME

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.m != self.n:
            raise DimensionMismatchError(
                f"a frame map must be square, got {self.n} components over {self.m} variables"
            )
        if self.valid_t[0] > self.valid_t[1]:
            raise ValueError(f"empty frame validity interval {self.valid_t}")
        if self.inverse is not None:
            object.__setattr__(self, "inverse", tuple(self.inverse))
            if len(self.inverse) != self.n:
                raise DimensionMismatchError(
                    f"inverse has {len(self.inverse)} components, forward has {self.n}"
                )
            names, _ = chart_names(self.target_chart, self.n)
            allowed = {*names, "t"}
            for comp in self.inverse:
                stray = [v for v in comp.free_vars if v not in allowed]
                if stray:
                    raise DimensionMismatchError(f"inverse component '{comp}' uses {stray}")

    @classmethod
    def from_strings(
        cls,
        forward: Sequence[str],
        inverse: Optional[Sequence[str]] = None,
        valid_t: Optional[Interval] = None,
        constants: Optional[dict[str, float]] = None,
    ) -> FrameMap:
        return cls(
            parse_all(forward, constants),
            len(forward),
            inverse=parse_all(inverse, constants) if inverse is not None else None,
            valid_t=valid_t or ALL_TIME,
        )

    @classmethod
    def identity(cls, n: int) -> FrameMap:
        return cls(
            tuple(variable(f"x{i}") for i in range(1, n + 1)),
            n,
            inverse=tuple(variable(f"q{i}") for i in range(1, n + 1)),
        )

    def check_time(self, t: float) -> None:
        lo, hi = self.valid_t
        if not lo <= t <= hi:
            raise FrameValidityError(float(t), self.valid_t)

    def checked_jacobian(self, x: Vector, t: float) -> np.ndarray:
        """Jacobian with the singularity check every moving frame operation relies on."""
        jac = self.jacobian(x, t)
        cond = condition_estimate(jac)
        if cond > SINGULAR_CONDITION:
            raise SingularJacobianError(cond, t)
        return jac

    def invert(self, q: Vector, t: float, seed: Optional[Vector] = None) -> np.ndarray:
        """Moving coordinates of the fixed point ``q`` at time ``t``.

        Uses the explicit inverse when present; otherwise Newton iteration started from
        ``seed`` (the caller's previous solution, or ``q`` itself), tolerance ``1e-12``,
        at most 50 iterations.

        Raises:
            InversionError: Newton iteration failed.
            SingularJacobianError: The Jacobian became singular during iteration.
        """
        self.check_time(t)
        target = np.asarray(q, dtype=float)
        if self.inverse is not None:
            names, _ = chart_names(self.target_chart, self.n)
            binding: dict[str, Scalar] = {k: float(v) for k, v in zip(names, target)}
            binding["t"] = float(t)
            return np.array([value_of(c.evaluate(binding)) for c in self.inverse])

        x = np.array(seed if seed is not None else target, dtype=float)
        residual = self.position(x, t) - target
        norm = float(np.max(np.abs(residual)))
        for iteration in range(INVERSION_MAX_ITERATIONS):
            if norm <= INVERSION_TOLERANCE * (1.0 + float(np.max(np.abs(target)))):
                logger.debug(f"frame inversion converged in {iteration} iterations")
                return x
            x = x - np.linalg.solve(self.checked_jacobian(x, t), residual)
            residual = self.position(x, t) - target
            norm = float(np.max(np.abs(residual)))
        if norm <= INVERSION_TOLERANCE * (1.0 + float(np.max(np.abs(target)))):
            return x
        raise InversionError(INVERSION_MAX_ITERATIONS, norm)


def angular_velocity_fixed(frame: FrameMap, x: Vector, t: float) -> np.ndarray:
    """Angular velocity field of the frame in the fixed chart, ``dQ/dt`` at ``(x, t)``."""
    frame.check_time(t)
    return frame.time_derivative(x, t)


def angular_velocity_moving(frame: FrameMap, x: Vector, t: float) -> np.ndarray:
    """Angular velocity field in the moving chart, ``J^-1 dQ/dt``.

    Raises:
        SingularJacobianError: ``J`` has condition estimate above ``1e12``.
    """
    frame.check_time(t)
    return np.linalg.solve(frame.checked_jacobian(x, t), frame.time_derivative(x, t))


def angular_velocity_residual(frame: FrameMap, x: Vector, t: float) -> float:
    """``|J Omega - omega|`` (max-norm): how far the two angular velocity fields disagree."""
    moving = angular_velocity_moving(frame, x, t)
    return float(np.max(np.abs(frame.jacobian(x, t) @ moving - frame.time_derivative(x, t))))


def push_velocity(frame: FrameMap, state: VelocityState) -> VelocityState:
    """Addition of velocities: ``q = Q(x,t)``, ``qd = J xd + dQ/dt``.

    Example:

        >>> shift = FrameMap.from_strings(["x1 + 2*t"])
        >>> push_velocity(shift, VelocityState("x", [0.0], [1.0], 0.0)).velocity
        array([3.])
    """
    frame.check_time(state.time)
    if len(state.position) != frame.n:
        raise DimensionMismatchError(f"state has {len(state.position)} components, frame {frame.n}")
    q, qd = frame.push(
        [float(v) for v in state.position], [float(v) for v in state.velocity], state.time
    )
    return VelocityState(
        frame.target_chart, [value_of(v) for v in q], [value_of(v) for v in qd], state.time
    )


def pull_velocity(
    frame: FrameMap, state: VelocityState, seed: Optional[Vector] = None
) -> VelocityState:
    """Converse of :func:`push_velocity`: ``x = X(q,t)``, ``xd = J^-1 (qd - dQ/dt)``."""
    if len(state.position) != frame.n:
        raise DimensionMismatchError(f"state has {len(state.position)} components, frame {frame.n}")
    x = frame.invert(state.position, state.time, seed)
    jac = frame.checked_jacobian(x, state.time)
    xd = np.linalg.solve(jac, state.velocity - frame.time_derivative(x, state.time))
    return VelocityState(frame.source_chart, x, xd, state.time)


def pullback_lagrangian(
    L: LagrangianSystem, frame: ParametrizedMap, time_offset: float = 0.0
) -> LagrangianSystem:
    """Lagrangian of the moving chart: ``l(x, xd, t) = L(Q(x,s), J xd + dQ/dt(x,s), s)``.

    ``s = t + time_offset``; the offset is the clock reset of a frame whose time is
    measured from a different origin (zero for ordinary moving frames).

    Example:

        >>> L = LagrangianSystem.from_expression("0.5*qd1^2", 1)
        >>> l = pullback_lagrangian(L, FrameMap.from_strings(["x1 + 3*t"]))
        >>> l.value([0.0], [1.0], 0.0)
        8.0

    Raises:
        DimensionMismatchError: ``L`` does not live on the frame's target chart dimension.

    Returns:
        LagrangianSystem: System on the frame's source chart, derivatives flowing through
        the composition by AD.
    """
    if L.n != frame.n:
        raise DimensionMismatchError(f"Lagrangian has dimension {L.n}, map targets {frame.n}")
    inner = L.lagrangian

    def pulled(x: Sequence[Scalar], xd: Sequence[Scalar], t: Scalar) -> Scalar:
        s = t + time_offset if time_offset else t
        q, qd = frame.push(x, xd, s)
        return inner(q, qd, s)

    how = f"pullback of [{L.description}]"
    if time_offset:
        how += f" with clock offset {time_offset!r}"
    return LagrangianSystem(frame.m, frame.source_chart, pulled, how)


def compose(outer: FrameMap, inner: FrameMap) -> FrameMap:
    """Composite frame ``x -> Q_outer(Q_inner(x, t), t)``.

    The composite inverse exists when both factors carry one. The validity interval is
    the intersection of both.
    """
    if outer.n != inner.n:
        raise DimensionMismatchError(f"cannot compose frames of dimension {outer.n} and {inner.n}")
    names, _ = chart_names(outer.source_chart, outer.n)
    forward = tuple(c.substitute(dict(zip(names, inner.forward))) for c in outer.forward)
    inverse = None
    if outer.inverse is not None and inner.inverse is not None:
        q_names, _ = chart_names(inner.target_chart, inner.n)
        inverse = tuple(c.substitute(dict(zip(q_names, outer.inverse))) for c in inner.inverse)
    valid = (max(outer.valid_t[0], inner.valid_t[0]), min(outer.valid_t[1], inner.valid_t[1]))
    return FrameMap(forward, inner.m, inverse=inverse, valid_t=valid)


def map_trajectory(frame: ParametrizedMap, trajectory: Trajectory) -> Trajectory:
    """Image of a moving-chart trajectory in the fixed chart, jets included.

    ``qdd = J xdd + (dJ/dx xd) xd + 2 d2Q/dxdt xd + d2Q/dt2`` by second-order AD through
    the map.
    """
    if trajectory.n != frame.m:
        raise DimensionMismatchError(
            f"trajectory has {trajectory.n} components, map expects {frame.m}"
        )
    if isinstance(frame, FrameMap):
        for jet in (trajectory.samples[0], trajectory.samples[-1]):
            frame.check_time(jet.t)
    samples = tuple(frame.second_order_jet(jet) for jet in trajectory.samples)
    return Trajectory(frame.target_chart, samples, trajectory.step, trajectory.method)


def pull_trajectory(frame: FrameMap, trajectory: Trajectory) -> Trajectory:
    """Preimage of a fixed-chart trajectory in the moving chart.

    Newton inversion (when there is no explicit inverse) is seeded from the previous
    sample's solution.
    """
    if trajectory.n != frame.n:
        raise DimensionMismatchError(f"trajectory has {trajectory.n} components, frame {frame.n}")
    seed: Optional[np.ndarray] = None
    samples: list[CurveJet] = []
    for jet in trajectory.samples:
        fixed = VelocityState(frame.target_chart, jet.pos, jet.vel, jet.t)
        state = pull_velocity(frame, fixed, seed)
        seed = state.position
        _, _, bend = frame.curvature(state.position, state.velocity, jet.t)
        jac = frame.jacobian(state.position, jet.t)
        acc = np.linalg.solve(jac, jet.acc - bend)
        samples.append(CurveJet(jet.t, state.position, state.velocity, acc))
    return Trajectory(frame.source_chart, tuple(samples), trajectory.step, trajectory.method)

