"""Command line entry point: run scenarios through the solve, verify and action pipelines.

.. code-block:: bash

    plox-lagrange verify --scenario rotating_free_particle
    plox-lagrange report --scenario scenarios/ --out results --jobs 4

Exit status is ``0`` when every requested check passes, ``1`` when an error was raised
and ``2`` when a check failed.
"""

from __future__ import annotations

import logging
import sys
from argparse import ArgumentParser, ArgumentTypeError, Namespace
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from logging import getLogger
from os.path import isdir
from os.path import join as path_join
from typing import Optional

from plox.lagrange import constraints, frames
from plox.lagrange.files import list_files, write_csv, write_text
from plox.lagrange.interaction import single_choice_menu
from plox.lagrange.mechanics import action_integral, chart_names
from plox.lagrange.scenario import Scenario, ScenarioError, bundled_scenarios, load_scenario
from plox.lagrange.solvers import (
    Trajectory,
    discrete_action,
    integrate_el,
    stationary_action_solve,
)
from plox.lagrange.spacetime import action_report
from plox.lagrange.utilities import partition
from plox.lagrange.verify import run_checks

logger = getLogger(__name__)

COMMANDS = ("solve", "verify", "action", "report")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2


@dataclass(frozen=True)
class RunResult:
    """What one scenario run prints and how it ended."""

    source: str
    status: int
    output: str


def _positive_real(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ArgumentTypeError(f"{text!r} is not a number") from None
    if not value > 0.0:
        raise ArgumentTypeError(f"{text} must be positive")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise ArgumentTypeError(f"{text} must be at least 1")
    return value


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="plox-lagrange",
        description="Lagrangian mechanics in moving frames, with constraints, checked.",
    )
    parser.add_argument("command", choices=COMMANDS, help="Pipeline to run.")
    parser.add_argument(
        "--scenario",
        help=(
            "Scenario file, directory of scenario files or bundled scenario name. "
            "Prompts with a menu of bundled scenarios when omitted on a terminal."
        ),
    )
    parser.add_argument(
        "--out", help="Output directory; overrides the scenario's [output] directory."
    )
    parser.add_argument(
        "--tol-scale",
        type=_positive_real,
        default=1.0,
        help="Multiplier applied to every verification tolerance (default 1).",
    )
    parser.add_argument(
        "--jobs",
        type=_positive_int,
        default=1,
        help="Worker processes for a directory of scenarios (default 1).",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    verbosity.add_argument("--verbose", action="store_true", help="Log solver detail.")
    return parser


def _sources(parser: ArgumentParser, scenario: Optional[str]) -> list[str]:
    if scenario is None:
        if not (sys.stdin.isatty() and sys.stdout.isatty()):
            parser.error("--scenario is required when not running on a terminal")
        return [single_choice_menu(bundled_scenarios(), "Pick a bundled scenario")]
    if isdir(scenario):
        found = list_files(scenario, ".toml")
        if not found:
            parser.error(f"no .toml scenario files in {scenario}")
        return found
    return [scenario]


def _output_dir(scenario: Scenario, out: Optional[str]) -> str:
    return out if out is not None else scenario.output.directory


def solve(scenario: Scenario, out: Optional[str] = None) -> tuple[Trajectory, str]:
    """Integrate the scenario's initial value problem and write the trajectory CSV.

    Columns are ``t``, the solve chart positions and velocities, then the fixed chart
    positions and velocities when the scenario has a frame or a constraint.

    Returns:
        tuple[Trajectory, str]: The solve chart trajectory and the CSV path.
    """
    scenario.require("lagrangian", "solver.initial_position")
    solver = scenario.solver
    a, b = solver.interval
    system = scenario.build_solve_system()
    trajectory = integrate_el(
        system, solver.initial_position, solver.initial_velocity, a, b, solver.step, solver.method
    )
    pos, vel = chart_names(trajectory.chart, trajectory.n)
    header = ["t", *pos, *vel]
    columns = [trajectory.times.reshape(-1, 1), trajectory.positions, trajectory.velocities]

    ambient: Optional[Trajectory] = None
    embedding = scenario.build_embedding()
    frame = scenario.build_frame()
    if embedding is not None:
        ambient = constraints.map_trajectory(embedding, trajectory)
    elif frame is not None:
        ambient = frames.map_trajectory(frame, trajectory)
    if ambient is not None:
        pos, vel = chart_names(ambient.chart, ambient.n)
        header += [*pos, *vel]
        columns += [ambient.positions, ambient.velocities]

    rows = [
        [float(v) for block in columns for v in block[k]] for k in range(len(trajectory))
    ]
    path = write_csv(path_join(_output_dir(scenario, out), f"{scenario.name}.csv"), header, rows)
    logger.info(f"{scenario.name}: wrote {len(rows)} samples to {path}")
    return trajectory, path


def actions(scenario: Scenario) -> list[str]:
    """Continuous and discrete action values the scenario defines, as printable lines.

    Raises:
        ScenarioError: The scenario declares neither ``verify.curve`` nor ``[boundary]``.
    """
    lines = []
    quad_n = scenario.solver.quad_n
    a, b = scenario.solver.interval
    if scenario.verify.curve:
        if scenario.atlas is not None:
            atlas = scenario.build_atlas()
            assert atlas is not None
            per_frame = action_report(
                atlas, scenario.build_lagrangian(), scenario.build_worldline(), a, b, quad_n
            )
            lines += [f"action in frame {k}: {v:.17g}" for k, v in per_frame.items()]
        else:
            system = scenario.build_solve_system()
            value = action_integral(system, scenario.build_curve(), a, b, quad_n)
            lines.append(f"continuous action ({system.chart} chart) on [{a}, {b}]: {value:.17g}")
    if scenario.boundary is not None:
        bnd = scenario.boundary
        system = scenario.build_solve_system()
        path = stationary_action_solve(system, bnd.start, bnd.end, *bnd.interval, N=bnd.panels)
        value = discrete_action(system, path)
        lines.append(f"discrete action of the stationary path (N={path.N}): {value:.17g}")
    if not lines:
        raise ScenarioError(
            f"scenario '{scenario.name}' has neither verify.curve nor a [boundary] section"
        )
    return lines


def _verify(scenario: Scenario, out: Optional[str], colour: bool) -> tuple[bool, str]:
    report = run_checks(scenario)
    directory = _output_dir(scenario, out)
    write_text(path_join(directory, f"{scenario.name}.report.txt"), report.render(colour=False))
    write_text(path_join(directory, f"{scenario.name}.report.json"), report.to_json())
    return report.passed, report.render(colour=colour)


def run(
    source: str, command: str, out: Optional[str], tol_scale: float = 1.0, colour: bool = False
) -> RunResult:
    """Run one scenario through ``command``; every library error becomes exit status 1."""
    try:
        scenario = load_scenario(source, tol_scale)
        output: list[str] = []
        passed = True
        if command in ("solve", "report"):
            _, path = solve(scenario, out)
            output.append(f"{scenario.name}: trajectory written to {path}")
        if command in ("verify", "report"):
            passed, text = _verify(scenario, out, colour)
            output.append(text)
        if command == "action":
            output += [f"{scenario.name}: {line}" for line in actions(scenario)]
    except Exception as err:  # noqa: BLE001
        logger.error(f"{source}: {type(err).__name__}: {err}")
        return RunResult(source, EXIT_ERROR, "")
    return RunResult(source, EXIT_OK if passed else EXIT_FAILED, "\n".join(output))


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args: Namespace = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    sources = _sources(parser, args.scenario)
    colour = sys.stdout.isatty()
    jobs = min(args.jobs, len(sources))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    run,
                    sources,
                    [args.command] * len(sources),
                    [args.out] * len(sources),
                    [args.tol_scale] * len(sources),
                    [colour] * len(sources),
                )
            )
    else:
        results = [run(s, args.command, args.out, args.tol_scale, colour) for s in sources]

    for result in results:
        if result.output:
            print(result.output)
    errored, finished = partition(results, lambda r: r.status == EXIT_ERROR)
    failed = [r for r in finished if r.status == EXIT_FAILED]
    if len(results) > 1:
        logger.info(
            f"{len(results)} scenarios: {len(errored)} raised errors, {len(failed)} failed checks"
        )
    if errored:
        return EXIT_ERROR
    return EXIT_FAILED if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
