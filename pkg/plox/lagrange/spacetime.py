"""Space-time picture: events fibred over absolute time, reference frames with clock offsets.

.. code-block:: python

    from plox.lagrange import spacetime

The event manifold is represented by the standard frame's trivialisation: an event is a
pair (standard coordinates, absolute time ``tau``). Every other :class:`ReferenceFrame`
carries

* a spatial map ``S(x, tau)`` to standard coordinates (a :class:`~plox.lagrange.frames.FrameMap`
  written in absolute time, explicit inverse required), and
* a clock offset ``c``: the frame's own time is ``t = tau - c``.

Transitions compose through the standard frame, so frame time laws read
``t_to = t_from + (c_from - c_to)``. Displacements are vertical (no time component) and
are stored per frame as plain spatial vectors.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from logging import getLogger
from typing import Optional

import numpy as np

from plox.lagrange.exprlang import Expr, shift_time, variable
from plox.lagrange.frames import FrameError, FrameMap, pullback_lagrangian
from plox.lagrange.mechanics import (
    CurveJet,
    DimensionMismatchError,
    DisplacementField,
    LagrangianSystem,
    Vector,
    action_integral,
    chart_names,
    curve_jet,
    variational_derivative,
)
from plox.lagrange.solvers import stationary_action_solve
from plox.lagrange.utilities import max_pairwise_gap

logger = getLogger(__name__)


class UnknownFrameError(KeyError):
    """A frame id is not part of the atlas."""

    def __init__(self, frame_id: str, known: Iterable[str]) -> None:
        self.frame_id = frame_id
        super().__init__(f"unknown frame '{frame_id}', atlas has {sorted(known)}")

    def __str__(self) -> str:
        return str(self.args[0])


@dataclass(frozen=True)
class ReferenceFrame:
    """A trivialisation of space-time: spatial chart plus clock offset.

    Attributes:
        id: Frame identifier.
        to_standard: Spatial map into standard coordinates, ``t`` meaning absolute time.
        c: Clock offset; frame time is absolute time minus ``c``.
    """

    id: str
    to_standard: FrameMap
    c: float = 0.0

    def __post_init__(self) -> None:
        if self.to_standard.inverse is None:
            raise FrameError(f"frame '{self.id}' needs an explicit inverse of its spatial map")

    @property
    def n(self) -> int:
        return self.to_standard.n

    @property
    def from_standard(self) -> tuple[Expr, ...]:
        """Inverse spatial map ``x(q, tau)``."""
        return self.to_standard.inverse or ()

    @classmethod
    def standard(cls, frame_id: str, n: int) -> ReferenceFrame:
        return cls(frame_id, FrameMap.identity(n), 0.0)

    def frame_time(self, tau: float) -> float:
        return tau - self.c

    def is_identity(self) -> bool:
        names, _ = chart_names(self.to_standard.source_chart, self.n)
        return [str(c) for c in self.to_standard.forward] == names


@dataclass(frozen=True)
class FrameAtlas:
    """Reference frames sharing a spatial dimension, with a designated standard frame."""

    frames: Mapping[str, ReferenceFrame]
    standard_id: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", dict(self.frames))
        if self.standard_id not in self.frames:
            raise UnknownFrameError(self.standard_id, self.frames)
        dims = {f.n for f in self.frames.values()}
        if len(dims) != 1:
            raise DimensionMismatchError(f"atlas frames have different dimensions {sorted(dims)}")
        std = self.frames[self.standard_id]
        if std.c != 0.0 or not std.is_identity():
            raise FrameError(
                f"standard frame '{self.standard_id}' must have offset 0 and identity spatial map"
            )

    @classmethod
    def of(cls, frames: Sequence[ReferenceFrame], standard_id: str) -> FrameAtlas:
        return cls({f.id: f for f in frames}, standard_id)

    @property
    def n(self) -> int:
        return self.frames[self.standard_id].n

    @property
    def ids(self) -> list[str]:
        return list(self.frames)

    def __getitem__(self, frame_id: str) -> ReferenceFrame:
        try:
            return self.frames[frame_id]
        except KeyError:
            raise UnknownFrameError(frame_id, self.frames) from None

    def shifted(self, delta: float) -> FrameAtlas:
        """The same atlas with every non-standard clock offset moved by ``delta``."""
        moved = {
            k: f if k == self.standard_id else ReferenceFrame(f.id, f.to_standard, f.c + delta)
            for k, f in self.frames.items()
        }
        return FrameAtlas(moved, self.standard_id)


@dataclass(frozen=True)
class WorldLine:
    """A time line: standard-frame positions as expressions of absolute time ``t``.

    Being a section of the fibration, it meets every instant once, so ``d tau/dt = 1``
    holds by construction.
    """

    curve: tuple[Expr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "curve", tuple(self.curve))
        for comp in self.curve:
            if any(v != "t" for v in comp.free_vars):
                raise DimensionMismatchError(
                    f"world line component '{comp}' depends on {comp.free_vars}"
                )

    @property
    def n(self) -> int:
        return len(self.curve)

    def event(self, tau: float) -> tuple[np.ndarray, float]:
        return curve_jet(self.curve, tau).pos, float(tau)


def transition(atlas: FrameAtlas, source: str, target: str) -> tuple[FrameMap, float]:
    """Transition from frame ``source`` to frame ``target``.

    Example:

        >>> atlas = FrameAtlas.of([ReferenceFrame.standard("lab", 1),
        ...     ReferenceFrame("clock", FrameMap.identity(1), 5.0)], "lab")
        >>> spatial, offset = transition(atlas, "lab", "clock")
        >>> offset
        -5.0

    Returns:
        tuple[FrameMap, float]: The spatial map ``x_target(x_source, t_source)`` and the
        offset of the time law ``t_target = t_source + offset``.
    """
    src, dst = atlas[source], atlas[target]
    if source == target:
        return FrameMap.identity(atlas.n), 0.0
    n = atlas.n
    q_names, _ = chart_names("q", n)
    x_names, _ = chart_names("x", n)

    # x_dst = S_dst^-1(S_src(x, tau), tau) with tau = t_src + c_src
    forward = tuple(
        shift_time(c.substitute(dict(zip(q_names, src.to_standard.forward))), src.c)
        for c in dst.from_standard
    )
    # x_src = S_src^-1(S_dst(y, tau), tau) where y is named q on the target side
    dst_on_q = tuple(
        c.substitute({x: variable(q) for x, q in zip(x_names, q_names)})
        for c in dst.to_standard.forward
    )
    inverse = tuple(
        shift_time(c.substitute(dict(zip(q_names, dst_on_q))), src.c)
        for c in src.from_standard
    )
    lo = max(src.to_standard.valid_t[0], dst.to_standard.valid_t[0]) - src.c
    hi = min(src.to_standard.valid_t[1], dst.to_standard.valid_t[1]) - src.c
    return FrameMap(forward, n, inverse=inverse, valid_t=(lo, hi)), src.c - dst.c


def frame_lagrangian(
    atlas: FrameAtlas, L_std: LagrangianSystem, target: str
) -> LagrangianSystem:
    """Lagrangian of frame ``target``: the standard one pulled back, evaluated at ``t + c``."""
    frame = atlas[target]
    if L_std.n != atlas.n:
        raise DimensionMismatchError(f"Lagrangian has dimension {L_std.n}, atlas {atlas.n}")
    if target == atlas.standard_id:
        return L_std
    return pullback_lagrangian(L_std, frame.to_standard, time_offset=frame.c)


def frame_curve(atlas: FrameAtlas, worldline: WorldLine, frame_id: str) -> tuple[Expr, ...]:
    """The world line in a frame's chart, as expressions of that frame's time."""
    frame = atlas[frame_id]
    if worldline.n != atlas.n:
        raise DimensionMismatchError(f"world line has {worldline.n} components, atlas {atlas.n}")
    if frame_id == atlas.standard_id:
        return worldline.curve
    q_names, _ = chart_names("q", atlas.n)
    along = dict(zip(q_names, worldline.curve))
    return tuple(shift_time(c.substitute(along), frame.c) for c in frame.from_standard)


def frame_jet(atlas: FrameAtlas, worldline: WorldLine, frame_id: str, tau: float) -> CurveJet:
    """Jet of the world line in a frame's chart at absolute time ``tau``."""
    frame = atlas[frame_id]
    frame.to_standard.check_time(tau)
    return curve_jet(frame_curve(atlas, worldline, frame_id), frame.frame_time(tau))


def vertical_displacement(
    atlas: FrameAtlas, frame_id: str, event: tuple[Vector, float], xi_std: Vector
) -> np.ndarray:
    """Components of a standard-frame vertical vector at ``event`` in frame ``frame_id``."""
    frame = atlas[frame_id]
    q, tau = event
    xi = np.asarray(xi_std, dtype=float)
    if frame_id == atlas.standard_id:
        return xi
    x = frame.to_standard.invert(q, tau)
    return np.linalg.solve(frame.to_standard.checked_jacobian(x, tau), xi)


@dataclass(frozen=True)
class InvarianceReport:
    """Variational derivatives of one world line and displacement, frame by frame.

    Attributes:
        times: Absolute sample times.
        values: Per frame id, the variational derivative at every sample time.
        discrepancy: Largest pairwise difference between frames at a common time.
    """

    times: tuple[float, ...]
    values: dict[str, list[float]] = field(default_factory=dict)

    @property
    def discrepancy(self) -> float:
        per_time = zip(*self.values.values())
        return max((max_pairwise_gap(list(column)) for column in per_time), default=0.0)


def invariance_report(
    atlas: FrameAtlas,
    L_std: LagrangianSystem,
    worldline: WorldLine,
    displacement: DisplacementField,
    sample_times: Sequence[float],
    lagrangians: Optional[Mapping[str, LagrangianSystem]] = None,
) -> InvarianceReport:
    """Evaluate the variational derivative along a world line in every frame of the atlas.

    At each absolute time the world line and the (standard-frame) displacement are
    expressed in each frame's chart and paired with that frame's Euler-Lagrange residual.
    Frame independence predicts a discrepancy of zero up to roundoff.

    Args:
        atlas: The frames to compare.
        L_std: Lagrangian of the standard frame.
        worldline: The time line to evaluate along.
        displacement: Vertical displacement field in standard coordinates.
        sample_times: Absolute times.
        lagrangians: Precomputed frame Lagrangians, by frame id.

    Raises:
        plox.lagrange.frames.FrameValidityError: A sample time lies outside of a frame's
            validity interval.

    Returns:
        InvarianceReport: Values per frame and their discrepancy.
    """
    if displacement.n != atlas.n:
        raise DimensionMismatchError(f"displacement has {displacement.n} components")
    systems = dict(lagrangians or {})
    for frame_id in atlas.ids:
        if frame_id not in systems:
            systems[frame_id] = frame_lagrangian(atlas, L_std, frame_id)
    curves = {frame_id: frame_curve(atlas, worldline, frame_id) for frame_id in atlas.ids}

    values: dict[str, list[float]] = {frame_id: [] for frame_id in atlas.ids}
    for tau in sample_times:
        q, _ = worldline.event(tau)
        xi = displacement.at(q, tau)
        for frame_id in atlas.ids:
            frame = atlas[frame_id]
            frame.to_standard.check_time(tau)
            jet = curve_jet(curves[frame_id], frame.frame_time(tau))
            eta = vertical_displacement(atlas, frame_id, (q, tau), xi)
            values[frame_id].append(variational_derivative(systems[frame_id], jet, eta))
    report = InvarianceReport(tuple(float(t) for t in sample_times), values)
    logger.debug(f"invariance over {len(values)} frames: discrepancy {report.discrepancy:.3e}")
    return report


def action_report(
    atlas: FrameAtlas,
    L_std: LagrangianSystem,
    worldline: WorldLine,
    a: float,
    b: float,
    quad_n: int = 1000,
) -> dict[str, float]:
    """Action of the world line between the events at absolute times ``a`` and ``b``, per frame.

    Each frame integrates its own Lagrangian over its own clock, ``[a - c, b - c]``.
    """
    actions: dict[str, float] = {}
    for frame_id in atlas.ids:
        frame = atlas[frame_id]
        L_frame = frame_lagrangian(atlas, L_std, frame_id)
        curve = frame_curve(atlas, worldline, frame_id)
        actions[frame_id] = action_integral(
            L_frame, curve, frame.frame_time(a), frame.frame_time(b), quad_n
        )
    return actions


def stationary_path_gap(
    atlas: FrameAtlas,
    L_std: LagrangianSystem,
    start: Vector,
    end: Vector,
    a: float,
    b: float,
    N: int = 200,  # noqa: N803
) -> dict[str, float]:
    """Solve the boundary problem between two events in every frame and compare the paths.

    The events are ``(start, a)`` and ``(end, b)`` in standard coordinates and absolute
    time. Each frame solves :func:`~plox.lagrange.solvers.stationary_action_solve` on its
    own chart and clock; its nodes are mapped back to standard coordinates, where the
    grids of all frames meet at the same absolute times.

    Example:

        >>> gaps = stationary_path_gap(atlas, L, [1.0, 0.0], [0.0, 1.0], 0.0, 1.5, N=100)
        >>> gaps["lab"]
        0.0

    Raises:
        plox.lagrange.frames.FrameValidityError: An event lies outside of a frame's
            validity interval.

    Returns:
        dict[str, float]: Per frame id, the sup distance of its mapped path to the path of
        the standard frame; ``O(h^2)`` as the discretisations differ by frame.
    """
    q_a = np.asarray(start, dtype=float)
    q_b = np.asarray(end, dtype=float)
    mapped: dict[str, np.ndarray] = {}
    for frame_id in atlas.ids:
        frame = atlas[frame_id]
        spatial = frame.to_standard
        path = stationary_action_solve(
            frame_lagrangian(atlas, L_std, frame_id),
            spatial.invert(q_a, a),
            spatial.invert(q_b, b),
            frame.frame_time(a),
            frame.frame_time(b),
            N=N,
        )
        mapped[frame_id] = np.array(
            [spatial.position(x, t + frame.c) for x, t in zip(path.nodes, path.times)]
        )
    reference = mapped[atlas.standard_id]
    gaps = {k: float(np.max(np.abs(nodes - reference))) for k, nodes in mapped.items()}
    logger.debug(f"stationary paths over {len(gaps)} frames: largest gap {max(gaps.values()):.3e}")
    return gaps
