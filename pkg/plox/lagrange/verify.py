"""Verification checks and reports.

.. code-block:: python

    from plox.lagrange.verify import run_checks

Every check measures one quantity that mechanics predicts to be (numerically) zero and
compares it with a tolerance. A scenario selects checks by name under ``[verify]``;
tolerances default to the values registered here, may be overridden per scenario and are
all multiplied by the scenario's ``tol_scale``.

Example:

    >>> report = run_checks(load_scenario("rotating_free_particle"))
    >>> report.passed
    True
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field

from plox.lagrange import constraints, frames
from plox.lagrange.constraints import ConstraintEmbedding
from plox.lagrange.dualnum import value_of
from plox.lagrange.exprlang import Expr, parse_all
from plox.lagrange.frames import FrameMap, ParametrizedMap, VelocityState
from plox.lagrange.interaction import status
from plox.lagrange.mechanics import (
    DegenerateLagrangianError,
    DisplacementField,
    LagrangianSystem,
    action_integral,
    chart_names,
    curve_jet,
    el_residual,
    variational_derivative,
)
from plox.lagrange.scenario import BoundarySection, Scenario, ScenarioError
from plox.lagrange.solvers import (
    DiscretePath,
    NonConvergenceError,
    Trajectory,
    action_gradient,
    energy_drift,
    integrate_el,
    shoot,
    stationary_action_solve,
)
from plox.lagrange.spacetime import (
    FrameAtlas,
    InvarianceReport,
    WorldLine,
    action_report,
    frame_lagrangian,
    invariance_report,
    stationary_path_gap,
    transition,
)
from plox.lagrange.utilities import max_pairwise_gap

logger = getLogger(__name__)

DALEMBERT_FIELDS = 50
ACTION_CURVES = 3
CLOCK_SHIFT = 0.75
EVENT_TIMES = 3


class CheckRecord(BaseModel):
    """Outcome of one check.

    ``anchor`` names the mechanical result the check certifies; ``principle`` states
    what is measured in one line.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    anchor: str
    principle: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


class VerificationReport(BaseModel):
    """All check records of one scenario; passes iff every record passes."""

    scenario: str
    records: list[CheckRecord] = []

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def render(self, colour: bool = False) -> str:
        """Aligned, human readable report."""
        width = max((len(r.name) for r in self.records), default=0)
        lines = [f"scenario: {self.scenario}"]
        for r in self.records:
            lines.append(
                f"  {status(r.passed, colour)}  {r.name:<{width}}  "
                f"measured {r.measured:.3e}  tolerance {r.tolerance:.3e}  "
                f"[{r.anchor}] {r.principle}"
            )
            if r.detail:
                lines.append(f"        {r.detail}")
        lines.append(f"overall: {status(self.passed, colour)}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


class CheckContext:
    """Engine objects of one scenario, built lazily and shared between checks."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.rng = np.random.default_rng(scenario.verify.seed)

    @property
    def samples(self) -> int:
        return self.scenario.verify.samples

    @cached_property
    def lagrangian(self) -> LagrangianSystem:
        return self.scenario.build_lagrangian()

    @cached_property
    def solve_system(self) -> LagrangianSystem:
        return self.scenario.build_solve_system()

    @cached_property
    def frame(self) -> FrameMap:
        self.scenario.require("frame")
        frame = self.scenario.build_frame()
        assert frame is not None
        return frame

    @cached_property
    def embedding(self) -> ConstraintEmbedding:
        self.scenario.require("constraint")
        embedding = self.scenario.build_embedding()
        assert embedding is not None
        return embedding

    @cached_property
    def atlas(self) -> FrameAtlas:
        self.scenario.require("atlas")
        atlas = self.scenario.build_atlas()
        assert atlas is not None
        return atlas

    @cached_property
    def mapping(self) -> Optional[ParametrizedMap]:
        return self.scenario.build_map()

    @cached_property
    def window(self) -> tuple[float, float]:
        """Solver interval, clipped to the validity interval of a frame map."""
        a, b = self.scenario.solver.interval
        if isinstance(self.mapping, FrameMap):
            a, b = max(a, self.mapping.valid_t[0]), min(b, self.mapping.valid_t[1])
        if not b > a:
            raise ScenarioError(f"scenario '{self.scenario.name}': solver.interval is empty")
        return a, b

    def random_time(self) -> float:
        return float(self.rng.uniform(*self.window))

    def random_vector(self, n: int) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, n)

    @cached_property
    def displacement(self) -> Optional[DisplacementField]:
        if not self.scenario.verify.displacement:
            return None
        return self.scenario.build_displacement()

    def displacement_at(self, position: np.ndarray, t: float) -> np.ndarray:
        if self.displacement is None:
            return self.random_vector(len(position))
        return self.displacement.at(position, t)

    @cached_property
    def trajectory(self) -> Trajectory:
        """The scenario's initial value problem, solved in its solve chart."""
        self.scenario.require("solver.initial_position")
        solver = self.scenario.solver
        a, b = solver.interval
        return integrate_el(
            self.solve_system,
            solver.initial_position,
            solver.initial_velocity,
            a,
            b,
            solver.step,
            solver.method,
        )

    @cached_property
    def ambient_trajectory(self) -> Trajectory:
        if self.scenario.constraint is not None:
            return constraints.map_trajectory(self.embedding, self.trajectory)
        if self.scenario.frame is not None:
            return frames.map_trajectory(self.frame, self.trajectory)
        return self.trajectory

    def subsample(self, trajectory: Trajectory) -> list[int]:
        count = min(len(trajectory), self.samples)
        return sorted({int(k) for k in np.linspace(0, len(trajectory) - 1, count)})

    @cached_property
    def boundary(self) -> BoundarySection:
        self.scenario.require("boundary")
        bnd = self.scenario.boundary
        assert bnd is not None
        return bnd

    @cached_property
    def stationary_path(self) -> DiscretePath:
        bnd = self.boundary
        return stationary_action_solve(
            self.solve_system, bnd.start, bnd.end, *bnd.interval, N=bnd.panels
        )

    @cached_property
    def refined_path(self) -> DiscretePath:
        """The boundary problem again, on twice as many panels."""
        bnd = self.boundary
        return stationary_action_solve(
            self.solve_system, bnd.start, bnd.end, *bnd.interval, N=2 * bnd.panels
        )

    @cached_property
    def shooting(self) -> Trajectory:
        bnd, solver = self.boundary, self.scenario.solver
        _, traj = shoot(
            self.solve_system, bnd.start, bnd.end, *bnd.interval, solver.step, solver.method
        )
        return traj

    @cached_property
    def worldline(self) -> WorldLine:
        return self.scenario.build_worldline()

    @cached_property
    def spacetime_samples(self) -> list[tuple[WorldLine, DisplacementField, list[float]]]:
        """Random world lines and displacement fields, each with sorted random times.

        The scenario's own ``verify.curve`` (and ``verify.displacement``) leads the list
        when given.
        """
        n = self.atlas.n
        samples = []
        if self.scenario.verify.curve:
            field = self.displacement
            if field is None:
                field = _random_displacement(self.rng, n)
            samples.append((self.worldline, field, self._event_times()))
        for _ in range(self.samples):
            line = WorldLine(_random_curve(self.rng, n))
            samples.append((line, _random_displacement(self.rng, n), self._event_times()))
        return samples

    def _event_times(self) -> list[float]:
        return sorted(self.random_time() for _ in range(EVENT_TIMES))

    def invariance_reports(self, atlas: FrameAtlas) -> list[InvarianceReport]:
        """One report per space-time sample, all frames of ``atlas`` side by side."""
        systems = {k: frame_lagrangian(atlas, self.lagrangian, k) for k in atlas.ids}
        return [
            invariance_report(atlas, self.lagrangian, line, field, times, systems)
            for line, field, times in self.spacetime_samples
        ]

    @cached_property
    def spacetime_reports(self) -> list[InvarianceReport]:
        return self.invariance_reports(self.atlas)


CheckFn = Callable[[CheckContext], tuple[float, str]]


@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    principle: str
    tolerance: float
    measure: CheckFn


CHECKS: dict[str, Check] = {}
"""Registered checks by name, in registration order."""


def check(
    name: str, anchor: str, principle: str, tolerance: float
) -> Callable[[CheckFn], CheckFn]:
    """Register ``fn`` as the check ``name`` of the result ``anchor``.

    ``tolerance`` is the default a scenario may override.
    """

    def register(fn: CheckFn) -> CheckFn:
        if name in CHECKS:
            raise ValueError(f"check '{name}' registered twice")
        CHECKS[name] = Check(name, anchor, principle, tolerance, fn)
        return fn

    return register


def _literal(value: float) -> str:
    return repr(float(value))


def _random_curve(rng: np.random.Generator, m: int) -> tuple[Expr, ...]:
    """Smooth random curves ``c0 + c1 t + c2 t^2 + c3 sin(w t)``, one per component."""
    sources = []
    for _ in range(m):
        c0, c1, c2, c3 = rng.uniform(-1.0, 1.0, 4)
        w = rng.uniform(0.5, 2.0)
        sources.append(
            f"{_literal(c0)} + {_literal(c1)}*t + {_literal(c2)}*t^2"
            f" + {_literal(c3)}*sin({_literal(w)}*t)"
        )
    return parse_all(sources)


def _random_displacement(rng: np.random.Generator, n: int) -> DisplacementField:
    """Affine random fields ``c0 + c1 q_i + c2 t``, one per component."""
    sources = []
    for i in range(1, n + 1):
        c0, c1, c2 = rng.uniform(-1.0, 1.0, 3)
        sources.append(f"{_literal(c0)} + {_literal(c1)}*q{i} + {_literal(c2)}*t")
    return DisplacementField.from_strings(sources)


def _drift(n: int) -> FrameMap:
    """Translation ``x_i + 0.3 sin(t) + 0.1 i``; it does not commute with rotations."""
    shifts = [f"0.3*sin(t) + {0.1 * i!r}" for i in range(1, n + 1)]
    return FrameMap.from_strings(
        [f"x{i} + {s}" for i, s in enumerate(shifts, 1)],
        inverse=[f"q{i} - ({s})" for i, s in enumerate(shifts, 1)],
    )


def _reference_error(reference: Sequence[Expr], times: np.ndarray, positions: np.ndarray) -> float:
    worst = 0.0
    for t, pos in zip(times, positions):
        exact = np.array([value_of(e.evaluate({"t": float(t)})) for e in reference])
        worst = max(worst, float(np.max(np.abs(pos - exact))))
    return worst


def _invariance(ctx: CheckContext, mapping: ParametrizedMap) -> float:
    worst = 0.0
    for _ in range(ctx.samples):
        t = ctx.random_time()
        jet = curve_jet(_random_curve(ctx.rng, mapping.m), t)
        xi = ctx.displacement_at(jet.pos, t)
        reduced = variational_derivative(ctx.solve_system, jet, xi)
        ambient = variational_derivative(
            ctx.lagrangian, mapping.second_order_jet(jet), mapping.jacobian(jet.pos, t) @ xi
        )
        worst = max(worst, abs(ambient - reduced) / (1.0 + abs(reduced)))
    return worst


def _action_gap(ctx: CheckContext, mapping: ParametrizedMap) -> float:
    a, b = ctx.window
    quad_n = ctx.scenario.solver.quad_n
    names, _ = chart_names(mapping.source_chart, mapping.m)
    worst = 0.0
    for _ in range(ACTION_CURVES):
        curve = _random_curve(ctx.rng, mapping.m)
        image = tuple(c.substitute(dict(zip(names, curve))) for c in mapping.forward)
        reduced = action_integral(ctx.solve_system, curve, a, b, quad_n)
        ambient = action_integral(ctx.lagrangian, image, a, b, quad_n)
        worst = max(worst, abs(ambient - reduced))
    return worst


# -- moving frames ---------------------------------------------------------------------


@check(
    "frame_invariance",
    "moving-frame invariance",
    "variational derivative does not depend on the moving frame",
    1e-8,
)
def _frame_invariance(ctx: CheckContext) -> tuple[float, str]:
    return _invariance(ctx, ctx.frame), f"max relative gap over {ctx.samples} random curves"


@check(
    "angular_velocity_relation",
    "angular velocity relation",
    "fixed and moving angular velocities agree",
    1e-10,
)
def _angular_velocity_relation(ctx: CheckContext) -> tuple[float, str]:
    frame = ctx.frame
    worst = max(
        frames.angular_velocity_residual(frame, ctx.random_vector(frame.n), ctx.random_time())
        for _ in range(ctx.samples)
    )
    return worst, f"max |J Omega - omega| over {ctx.samples} random points"


@check(
    "push_pull_roundtrip",
    "addition of velocities",
    "addition of velocities is invertible",
    1e-9,
)
def _push_pull_roundtrip(ctx: CheckContext) -> tuple[float, str]:
    frame = ctx.frame
    worst = 0.0
    for _ in range(ctx.samples):
        state = VelocityState(
            frame.source_chart,
            ctx.random_vector(frame.n),
            ctx.random_vector(frame.n),
            ctx.random_time(),
        )
        back = frames.pull_velocity(frame, frames.push_velocity(frame, state))
        gap = max(
            float(np.max(np.abs(back.position - state.position))),
            float(np.max(np.abs(back.velocity - state.velocity))),
        )
        worst = max(worst, gap)
    return worst, f"max state gap over {ctx.samples} random states"


@check(
    "pullback_composition",
    "pullback Lagrangian",
    "pulling back twice equals pulling back by the composite",
    1e-10,
)
def _pullback_composition(ctx: CheckContext) -> tuple[float, str]:
    frame = ctx.frame
    drift = _drift(frame.n)
    twice = frames.pullback_lagrangian(ctx.solve_system, drift)
    composite = frames.pullback_lagrangian(ctx.lagrangian, frames.compose(frame, drift))
    worst = 0.0
    for _ in range(ctx.samples):
        x, xd, t = ctx.random_vector(frame.n), ctx.random_vector(frame.n), ctx.random_time()
        expected = twice.value(x, xd, t)
        worst = max(worst, abs(composite.value(x, xd, t) - expected) / (1.0 + abs(expected)))
    return worst, "frame composed with a time-dependent translation"


@check(
    "action_equivalence",
    "moving-frame action equivalence",
    "action is the same in the fixed and the moving frame",
    1e-8,
)
def _action_equivalence(ctx: CheckContext) -> tuple[float, str]:
    quad_n = ctx.scenario.solver.quad_n
    return _action_gap(ctx, ctx.frame), f"{ACTION_CURVES} random curves, quad_n={quad_n}"


@check(
    "motion_consistency",
    "moving-frame action equivalence",
    "mapped motions satisfy the fixed-frame equations",
    1e-9,
)
def _motion_consistency(ctx: CheckContext) -> tuple[float, str]:
    _ = ctx.frame
    ambient = ctx.ambient_trajectory
    picks = ctx.subsample(ambient)
    worst = max(
        float(np.max(np.abs(el_residual(ctx.lagrangian, ambient.samples[k])))) for k in picks
    )
    return worst, f"max |E| at {len(picks)} mapped samples"


# -- trajectories ----------------------------------------------------------------------


@check(
    "reference_motion",
    "Euler-Lagrange equations",
    "computed motion matches the closed form",
    1e-6,
)
def _reference_motion(ctx: CheckContext) -> tuple[float, str]:
    if not ctx.scenario.verify.reference:
        raise ScenarioError(f"scenario '{ctx.scenario.name}' lacks verify.reference")
    ambient = ctx.ambient_trajectory
    error = _reference_error(ctx.scenario.build_reference(), ambient.times, ambient.positions)
    return error, f"sup error over {len(ambient)} samples ({ambient.method})"


@check(
    "energy_conservation",
    "Euler-Lagrange equations",
    "Jacobi energy is conserved by autonomous systems",
    1e-6,
)
def _energy_conservation(ctx: CheckContext) -> tuple[float, str]:
    traj = ctx.trajectory
    return energy_drift(ctx.solve_system, traj), f"{len(traj)} samples, {traj.method}"


@check(
    "degeneracy",
    "regular Lagrangian",
    "degenerate Lagrangian is reported at the first sample",
    0.0,
)
def _degeneracy(ctx: CheckContext) -> tuple[float, str]:
    a = ctx.scenario.solver.interval[0]
    try:
        _ = ctx.trajectory
    except DegenerateLagrangianError as err:
        return (0.0 if err.time == a else 1.0), f"reported: {err}"
    return 1.0, "a trajectory was produced for a degenerate Lagrangian"


# -- constraints -----------------------------------------------------------------------


@check(
    "constrained_invariance",
    "constrained invariance",
    "intrinsic and ambient variational derivatives agree",
    1e-9,
)
def _constrained_invariance(ctx: CheckContext) -> tuple[float, str]:
    gap = _invariance(ctx, ctx.embedding)
    return gap, f"max relative gap over {ctx.samples} random curves and virtual displacements"


@check(
    "constrained_action",
    "constrained action equivalence",
    "restricted action equals the ambient action",
    1e-9,
)
def _constrained_action(ctx: CheckContext) -> tuple[float, str]:
    return _action_gap(ctx, ctx.embedding), f"{ACTION_CURVES} random intrinsic curves"


@check(
    "constrained_reduction",
    "constrained motion",
    "d'Alembert principle holds along intrinsic motions",
    1e-6,
)
def _constrained_reduction(ctx: CheckContext) -> tuple[float, str]:
    emb = ctx.embedding
    traj = ctx.trajectory
    worst = max(constraints.dalembert_check(ctx.lagrangian, emb, jet) for jet in traj.samples)
    return worst, f"max |E . eta| over {len(traj)} samples"


@check(
    "constraint_drift",
    "constrained motion",
    "reconstructed motion stays on the constraint",
    1e-9,
)
def _constraint_drift(ctx: CheckContext) -> tuple[float, str]:
    emb = ctx.embedding
    if not emb.residuals:
        raise ScenarioError(f"scenario '{ctx.scenario.name}' lacks constraint.residuals")
    return constraints.constraint_drift(emb, ctx.ambient_trajectory), "max |f| over samples"


@check(
    "velocity_spaces",
    "admissible and virtual velocities",
    "admissible velocities are the virtual space shifted by omega",
    1e-10,
)
def _velocity_spaces(ctx: CheckContext) -> tuple[float, str]:
    emb = ctx.embedding
    traj = ctx.trajectory
    picks = ctx.subsample(traj)
    worst = 0.0
    for k in picks:
        jet = traj.samples[k]
        space = constraints.velocity_spaces(emb, jet.pos, jet.t)
        _, qd = emb.push([float(v) for v in jet.pos], [float(v) for v in jet.vel], jet.t)
        worst = max(worst, space.admissible_residual([value_of(v) for v in qd]))
        if emb.residuals:
            worst = max(
                worst, *constraints.implicit_velocity_residuals(emb, jet.pos, jet.vel, jet.t)
            )
    return worst, f"{len(picks)} trajectory samples"


# -- boundary value problems -----------------------------------------------------------


def _shooting_error(ctx: CheckContext, path: DiscretePath) -> float:
    return float(np.max(np.abs(path.nodes - ctx.shooting.positions_at(path.times))))


def _path_error(ctx: CheckContext, path: DiscretePath) -> tuple[float, str]:
    bnd = ctx.boundary
    if bnd.reference:
        reference = parse_all(bnd.reference, ctx.scenario.parameters)
        return _reference_error(reference, path.times, path.nodes), "closed form"
    return _shooting_error(ctx, path), "shooting"


def _ratio(coarse: float, fine: float) -> float:
    return coarse / fine if fine > 0.0 else float("inf")


@check("least_action", "Hamilton's principle", "stationary action path is the motion", 2e-4)
def _least_action(ctx: CheckContext) -> tuple[float, str]:
    path = ctx.stationary_path
    error, against = _path_error(ctx, path)
    return error, f"sup error against {against}, N={path.N}"


@check(
    "convergence_order",
    "Hamilton's principle",
    "discrete stationary paths converge at second order",
    0.5,
)
def _convergence_order(ctx: CheckContext) -> tuple[float, str]:
    if not ctx.boundary.reference:
        raise ScenarioError(f"scenario '{ctx.scenario.name}' lacks boundary.reference")
    coarse, _ = _path_error(ctx, ctx.stationary_path)
    fine, _ = _path_error(ctx, ctx.refined_path)
    ratio = _ratio(coarse, fine)
    return abs(ratio - 4.0), f"errors {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3f}"


@check(
    "shooting_agreement",
    "Hamilton's principle",
    "stationary paths approach the shooting solution at second order",
    0.5,
)
def _shooting_agreement(ctx: CheckContext) -> tuple[float, str]:
    coarse = _shooting_error(ctx, ctx.stationary_path)
    fine = _shooting_error(ctx, ctx.refined_path)
    ratio = _ratio(coarse, fine)
    solver = ctx.scenario.solver
    return abs(ratio - 4.0), (
        f"errors against {solver.method} shooting (step {solver.step:g}) "
        f"{coarse:.3e} -> {fine:.3e}, ratio {ratio:.3f}"
    )


@check(
    "discrete_dalembert",
    "d'Alembert principle",
    "stationary path annihilates every interior variation",
    1e-9,
)
def _discrete_dalembert(ctx: CheckContext) -> tuple[float, str]:
    grad = action_gradient(ctx.solve_system, ctx.stationary_path)
    worst = max(
        abs(float(np.sum(grad * ctx.rng.uniform(-1.0, 1.0, grad.shape))))
        for _ in range(DALEMBERT_FIELDS)
    )
    return worst, f"{DALEMBERT_FIELDS} random interior displacement fields"


@check(
    "conjugate_point",
    "Hamilton's principle",
    "conjugate boundary problem is reported, not solved",
    0.0,
)
def _conjugate_point(ctx: CheckContext) -> tuple[float, str]:
    bnd = ctx.scenario.boundary
    if bnd is None or bnd.conjugate is None:
        raise ScenarioError(f"scenario '{ctx.scenario.name}' lacks boundary.conjugate")
    c = bnd.conjugate
    try:
        stationary_action_solve(ctx.solve_system, c.start, c.end, *c.interval, N=c.panels)
    except (DegenerateLagrangianError, NonConvergenceError) as err:
        return 0.0, f"reported: {err}"
    return 1.0, "a stationary path was returned at a conjugate point"


# -- space-time ------------------------------------------------------------------------


@check(
    "spacetime_invariance",
    "space-time frame independence",
    "variational derivative does not depend on the frame",
    1e-9,
)
def _spacetime_invariance(ctx: CheckContext) -> tuple[float, str]:
    reports = ctx.spacetime_reports
    worst = max(report.discrepancy for report in reports)
    events = sum(len(report.times) for report in reports)
    return worst, (
        f"{len(ctx.atlas.ids)} frames, {len(reports)} world line and displacement samples, "
        f"{events} events"
    )


@check(
    "clock_offset_coherence",
    "space-time frame independence",
    "a common clock shift changes no frame value",
    1e-9,
)
def _clock_offset_coherence(ctx: CheckContext) -> tuple[float, str]:
    shifted = ctx.invariance_reports(ctx.atlas.shifted(CLOCK_SHIFT))
    worst = max(
        abs(u - v)
        for report, moved in zip(ctx.spacetime_reports, shifted)
        for frame_id, values in report.values.items()
        for u, v in zip(values, moved.values[frame_id])
    )
    return worst, f"offsets shifted by {CLOCK_SHIFT} over {len(shifted)} samples"


@check(
    "spacetime_action",
    "least action on time lines",
    "action between two events does not depend on the frame",
    1e-9,
)
def _spacetime_action(ctx: CheckContext) -> tuple[float, str]:
    a, b = ctx.window
    actions = action_report(
        ctx.atlas, ctx.lagrangian, ctx.worldline, a, b, ctx.scenario.solver.quad_n
    )
    listing = ", ".join(f"{k}={v:.12g}" for k, v in actions.items())
    return max_pairwise_gap(list(actions.values())), listing


@check(
    "spacetime_least_action",
    "least action on time lines",
    "stationary paths between two events agree across frames",
    1e-3,
)
def _spacetime_least_action(ctx: CheckContext) -> tuple[float, str]:
    bnd = ctx.boundary
    gaps = stationary_path_gap(
        ctx.atlas, ctx.lagrangian, bnd.start, bnd.end, *bnd.interval, N=bnd.panels
    )
    listing = ", ".join(f"{k}={v:.3e}" for k, v in gaps.items())
    detail = f"sup gap to the {ctx.atlas.standard_id} path, N={bnd.panels}: {listing}"
    return max(gaps.values()), detail


@check(
    "transition_roundtrip",
    "frame transitions",
    "frame transitions compose to the identity",
    1e-10,
)
def _transition_roundtrip(ctx: CheckContext) -> tuple[float, str]:
    atlas = ctx.atlas
    worst = 0.0
    pairs = list(itertools.permutations(atlas.ids, 2))
    for source, target in pairs:
        there, offset = transition(atlas, source, target)
        back, offset_back = transition(atlas, target, source)
        worst = max(worst, abs(offset + offset_back))
        for _ in range(ctx.samples):
            x, t = ctx.random_vector(atlas.n), ctx.random_time() - atlas[source].c
            y = there.position(x, t)
            worst = max(worst, float(np.max(np.abs(back.position(y, t + offset) - x))))
    return worst, f"{len(pairs)} ordered frame pairs"


def _selected(names: Sequence[str]) -> list[Check]:
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ScenarioError(f"verify.checks: unknown checks {unknown}, known: {sorted(CHECKS)}")
    return [CHECKS[n] for n in names]


def run_checks(scenario: Scenario, names: Optional[Sequence[str]] = None) -> VerificationReport:
    """Run the scenario's checks (or ``names``) in order and collect their records.

    Raises:
        ScenarioError: An unknown check is requested, or a check needs a section the
            scenario lacks.

    Returns:
        VerificationReport: One record per check.
    """
    selected = _selected(scenario.verify.checks if names is None else names)
    ctx = CheckContext(scenario)
    records = []
    for chk in selected:
        measured, detail = chk.measure(ctx)
        tolerance = scenario.tolerance(chk.name, chk.tolerance)
        passed = bool(measured <= tolerance)
        logger.info(
            f"{scenario.name}: {chk.name} measured {measured:.3e} "
            f"(tolerance {tolerance:.3e}) {'passed' if passed else 'FAILED'}"
        )
        records.append(
            CheckRecord(
                name=chk.name,
                anchor=chk.anchor,
                principle=chk.principle,
                measured=measured,
                tolerance=tolerance,
                passed=passed,
                detail=detail,
            )
        )
    return VerificationReport(scenario=scenario.name, records=records)
