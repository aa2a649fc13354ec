"""Scenario files: the configuration surface of the engine.

.. code-block:: python

    from plox.lagrange import scenario

A scenario is a TOML document. It is read with :mod:`tomllib` and validated into the
pydantic models below; unknown keys are rejected so misspellings surface with their
location. Expression values are strings in the :mod:`plox.lagrange.exprlang` grammar
and may use the names declared under ``[parameters]``.

Example:

    >>> sc = load_scenario("harmonic_oscillator")
    >>> sc.lagrangian.expression
    '0.5*qd1^2 - 0.5*q1^2'
    >>> sc.build_lagrangian().n
    1

See the README for the complete schema.
"""

from __future__ import annotations

import tomllib
from importlib import resources
from logging import getLogger
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from plox.lagrange.constraints import ConstraintEmbedding, intrinsic_lagrangian
from plox.lagrange.exprlang import Expr, ExprSyntaxError, parse_all
from plox.lagrange.files import FilePath, file_contents
from plox.lagrange.frames import (
    ALL_TIME,
    FrameError,
    FrameMap,
    ParametrizedMap,
    pullback_lagrangian,
)
from plox.lagrange.mechanics import DimensionMismatchError, DisplacementField, LagrangianSystem
from plox.lagrange.spacetime import FrameAtlas, ReferenceFrame, WorldLine

logger = getLogger(__name__)

BUNDLED_PACKAGE = "plox.lagrange.scenarios"
SUFFIX = ".toml"


class ScenarioError(ValueError):
    """A scenario is malformed, inconsistent, or lacks a section a pipeline needs.

    The message always names the offending section or field.
    """


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LagrangianSection(_Section):
    dimension: int = Field(ge=1)
    expression: str


class FrameSection(_Section):
    forward: list[str] = Field(min_length=1)
    inverse: Optional[list[str]] = None
    valid_t: Optional[tuple[float, float]] = None


class ConstraintSection(_Section):
    dimension: int = Field(ge=1)
    forward: list[str] = Field(min_length=1)
    residuals: list[str] = []


class AtlasFrameSection(_Section):
    id: str
    offset: float = 0.0
    forward: list[str] = Field(min_length=1)
    inverse: list[str] = Field(min_length=1)
    valid_t: Optional[tuple[float, float]] = None


class AtlasSection(_Section):
    standard: str
    frames: list[AtlasFrameSection] = []


class SolverSection(_Section):
    method: Literal["rk4", "implicit_midpoint"] = "rk4"
    step: float = Field(default=1e-3, gt=0.0)
    interval: tuple[float, float] = (0.0, 1.0)
    initial_position: list[float] = []
    initial_velocity: list[float] = []
    quad_n: int = Field(default=1000, ge=2)


class ConjugateSection(_Section):
    start: list[float]
    end: list[float]
    interval: tuple[float, float]
    panels: int = Field(default=200, ge=2)


class BoundarySection(_Section):
    start: list[float]
    end: list[float]
    interval: tuple[float, float]
    panels: int = Field(default=200, ge=2)
    reference: list[str] = []
    conjugate: Optional[ConjugateSection] = None


class VerifySection(_Section):
    checks: list[str] = []
    samples: int = Field(default=20, ge=1)
    seed: int = 0
    tolerances: dict[str, float] = {}
    curve: list[str] = []
    displacement: list[str] = []
    reference: list[str] = []


class OutputSection(_Section):
    directory: str = "."


class Scenario(BaseModel):
    """A validated scenario, plus builders for the engine objects it describes."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    description: str = ""
    tol_scale: float = Field(default=1.0, gt=0.0)
    parameters: dict[str, float] = {}
    lagrangian: Optional[LagrangianSection] = None
    frame: Optional[FrameSection] = None
    constraint: Optional[ConstraintSection] = None
    atlas: Optional[AtlasSection] = None
    solver: SolverSection = SolverSection()
    boundary: Optional[BoundarySection] = None
    verify: VerifySection = VerifySection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _consistent(self) -> Scenario:
        if self.frame is not None and self.constraint is not None:
            raise ValueError("[frame] and [constraint] cannot be combined")
        if self.lagrangian is None:
            return self
        n = self.lagrangian.dimension
        if self.frame is not None:
            _expect_len("frame.forward", self.frame.forward, n)
            if self.frame.inverse is not None:
                _expect_len("frame.inverse", self.frame.inverse, n)
        if self.constraint is not None:
            _expect_len("constraint.forward", self.constraint.forward, n)
            if self.constraint.dimension > n:
                raise ValueError(
                    f"constraint.dimension {self.constraint.dimension} exceeds "
                    f"lagrangian.dimension {n}"
                )
        if self.atlas is not None:
            ids = [f.id for f in self.atlas.frames]
            if len(set(ids)) != len(ids):
                raise ValueError(f"atlas.frames: duplicate frame ids in {ids}")
            for k, f in enumerate(self.atlas.frames):
                _expect_len(f"atlas.frames[{k}].forward", f.forward, n)
                _expect_len(f"atlas.frames[{k}].inverse", f.inverse, n)
        m = self.solve_dimension
        if self.solver.initial_position:
            _expect_len("solver.initial_position", self.solver.initial_position, m)
            _expect_len("solver.initial_velocity", self.solver.initial_velocity, m)
        if self.boundary is not None:
            _expect_len("boundary.start", self.boundary.start, m)
            _expect_len("boundary.end", self.boundary.end, m)
            if self.boundary.reference:
                _expect_len("boundary.reference", self.boundary.reference, m)
            if self.boundary.conjugate is not None:
                _expect_len("boundary.conjugate.start", self.boundary.conjugate.start, m)
                _expect_len("boundary.conjugate.end", self.boundary.conjugate.end, m)
        if self.verify.curve:
            _expect_len("verify.curve", self.verify.curve, m)
        if self.verify.displacement:
            _expect_len("verify.displacement", self.verify.displacement, m)
        if self.verify.reference:
            _expect_len("verify.reference", self.verify.reference, n)
        return self

    @property
    def solve_dimension(self) -> int:
        """Dimension of the chart trajectories are computed in."""
        if self.constraint is not None:
            return self.constraint.dimension
        return self.lagrangian.dimension if self.lagrangian is not None else 0

    @property
    def solve_chart(self) -> str:
        return "x" if self.frame is not None or self.constraint is not None else "q"

    def require(self, *sections: str) -> None:
        """Raise :class:`ScenarioError` naming the first missing section."""
        for section in sections:
            if section == "solver.initial_position":
                if not self.solver.initial_position:
                    raise ScenarioError(f"scenario '{self.name}' lacks [solver] initial data")
            elif getattr(self, section) is None:
                raise ScenarioError(f"scenario '{self.name}' lacks the [{section}] section")

    def tolerance(self, check: str, default: float) -> float:
        return self.verify.tolerances.get(check, default) * self.tol_scale

    # -- builders ---------------------------------------------------------------------

    def _exprs(self, where: str, sources: list[str]) -> tuple[Expr, ...]:
        try:
            return parse_all(sources, self.parameters)
        except ExprSyntaxError as err:
            raise ScenarioError(f"{where}: {err}") from err

    def build_lagrangian(self) -> LagrangianSystem:
        self.require("lagrangian")
        assert self.lagrangian is not None
        (expr,) = self._exprs("lagrangian.expression", [self.lagrangian.expression])
        try:
            return LagrangianSystem.from_expression(expr, self.lagrangian.dimension)
        except DimensionMismatchError as err:
            raise ScenarioError(f"lagrangian.expression: {err}") from err

    def build_frame(self) -> Optional[FrameMap]:
        if self.frame is None:
            return None
        forward = self._exprs("frame.forward", self.frame.forward)
        inverse = self._exprs("frame.inverse", self.frame.inverse) if self.frame.inverse else None
        try:
            return FrameMap(
                forward, len(forward), inverse=inverse, valid_t=self.frame.valid_t or ALL_TIME
            )
        except (DimensionMismatchError, FrameError) as err:
            raise ScenarioError(f"frame: {err}") from err

    def build_embedding(self) -> Optional[ConstraintEmbedding]:
        if self.constraint is None:
            return None
        forward = self._exprs("constraint.forward", self.constraint.forward)
        residuals = self._exprs("constraint.residuals", self.constraint.residuals)
        try:
            return ConstraintEmbedding(forward, self.constraint.dimension, residuals=residuals)
        except DimensionMismatchError as err:
            raise ScenarioError(f"constraint: {err}") from err

    def build_map(self) -> Optional[ParametrizedMap]:
        """The frame map or the constraint immersion, whichever the scenario declares."""
        return self.build_frame() or self.build_embedding()

    def build_atlas(self) -> Optional[FrameAtlas]:
        if self.atlas is None:
            return None
        n = self.lagrangian.dimension if self.lagrangian is not None else 0
        frames = [ReferenceFrame.standard(self.atlas.standard, n)]
        for k, f in enumerate(self.atlas.frames):
            where = f"atlas.frames[{k}]"
            if f.id == self.atlas.standard:
                raise ScenarioError(f"{where}: id '{f.id}' is the standard frame's id")
            try:
                spatial = FrameMap(
                    self._exprs(f"{where}.forward", f.forward),
                    len(f.forward),
                    inverse=self._exprs(f"{where}.inverse", f.inverse),
                    valid_t=f.valid_t or ALL_TIME,
                )
                frames.append(ReferenceFrame(f.id, spatial, f.offset))
            except (DimensionMismatchError, FrameError) as err:
                raise ScenarioError(f"{where}: {err}") from err
        return FrameAtlas.of(frames, self.atlas.standard)

    def build_solve_system(self) -> LagrangianSystem:
        """The Lagrangian of the chart trajectories are computed in.

        Intrinsic Lagrangian with a constraint, moving-frame Lagrangian with a frame,
        the scenario's own Lagrangian otherwise.
        """
        L = self.build_lagrangian()
        embedding = self.build_embedding()
        if embedding is not None:
            return intrinsic_lagrangian(L, embedding)
        frame = self.build_frame()
        if frame is not None:
            return pullback_lagrangian(L, frame)
        return L

    def build_curve(self) -> tuple[Expr, ...]:
        exprs = self._exprs("verify.curve", self.verify.curve)
        for e in exprs:
            if any(v != "t" for v in e.free_vars):
                raise ScenarioError(f"verify.curve: '{e}' may only depend on t")
        return exprs

    def build_worldline(self) -> WorldLine:
        self.require("atlas")
        return WorldLine(self.build_curve())

    def build_displacement(self) -> DisplacementField:
        try:
            return DisplacementField(
                self._exprs("verify.displacement", self.verify.displacement), self.solve_chart
            )
        except DimensionMismatchError as err:
            raise ScenarioError(f"verify.displacement: {err}") from err

    def build_reference(self) -> tuple[Expr, ...]:
        return self._exprs("verify.reference", self.verify.reference)


def _expect_len(where: str, values: list[Any], expected: int) -> None:
    if len(values) != expected:
        raise ValueError(f"{where} has {len(values)} entries, expected {expected}")


def bundled_scenarios() -> list[str]:
    """Names of the scenarios shipped with the package, sorted."""
    root = resources.files(BUNDLED_PACKAGE)
    return sorted(p.name[: -len(SUFFIX)] for p in root.iterdir() if p.name.endswith(SUFFIX))


def _format_validation(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        where = ".".join(str(x) for x in e["loc"]) or "scenario"
        parts.append(f"{where}: {e['msg']}")
    return "; ".join(parts)


def parse_scenario(text: str, name: str, tol_scale: float = 1.0) -> Scenario:
    """Validate scenario TOML text.

    Raises:
        ScenarioError: The TOML is malformed (with line and column) or does not match
            the schema (with the path of each offending field).
    """
    try:
        data: dict[str, Any] = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ScenarioError(f"{name}: {err}") from err
    data.setdefault("name", name)
    if tol_scale != 1.0:
        data["tol_scale"] = data.get("tol_scale", 1.0) * tol_scale
    try:
        return Scenario.model_validate(data)
    except ValidationError as err:
        raise ScenarioError(f"{name}: {_format_validation(err)}") from err


def load_scenario(source: Union[FilePath, str], tol_scale: float = 1.0) -> Scenario:
    """Load a scenario from a file path or by bundled name.

    Args:
        source: Path to a ``.toml`` file, or the name of a bundled scenario.
        tol_scale: Multiplier applied to every verification tolerance.

    Raises:
        ScenarioError: Unknown name, unreadable or invalid scenario.

    Returns:
        Scenario: The validated scenario.
    """
    path = Path(source)
    if path.is_file():
        text = file_contents(path)
        name = path.stem
    elif str(source) in bundled_scenarios():
        name = str(source)
        text = resources.files(BUNDLED_PACKAGE).joinpath(f"{name}{SUFFIX}").read_text("utf-8")
    else:
        raise ScenarioError(
            f"no scenario file or bundled scenario named '{source}' "
            f"(bundled: {', '.join(bundled_scenarios())})"
        )
    scenario = parse_scenario(text, name, tol_scale)
    logger.info(f"Loaded scenario '{scenario.name}' from {source}")
    return scenario
