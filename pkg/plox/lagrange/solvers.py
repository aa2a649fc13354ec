"""Trajectory producers: initial value integration and direct stationarisation of the action.

.. code-block:: python

    from plox.lagrange import solvers

Two independent routes to a motion are provided so they can be checked against each
other:

* :func:`integrate_el` advances the explicit Euler-Lagrange equations from initial data
  (``rk4`` or ``implicit_midpoint``).
* :func:`stationary_action_solve` discretises the action with the midpoint rule and
  drives its gradient with respect to the interior nodes to zero by Newton's method.

Solvers target stationarity only; a converged discrete path is a critical point of the
discrete action, nothing is claimed about minimality.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from logging import getLogger
from typing import Literal, Optional, Union

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import root
from scipy.sparse.linalg import LinearOperator, SuperLU, onenormest, splu

from plox.lagrange.mechanics import (
    DEGENERACY_CONDITION,
    CurveJet,
    DimensionMismatchError,
    DegenerateLagrangianError,
    LagrangianSystem,
    Vector,
    condition_estimate,
    el_accelerations,
    jacobi_energy,
)
from plox.lagrange.utilities import is_uniform, window_iterator

logger = getLogger(__name__)

Method = Literal["rk4", "implicit_midpoint"]
METHODS: tuple[str, ...] = ("rk4", "implicit_midpoint")

NEWTON_TOLERANCE = 1e-12
NEWTON_MAX_ITERATIONS = 50
GRADIENT_TOLERANCE = 1e-10
MAX_HALVINGS = 30
MAX_ACTION_ITERATIONS = 200
ROUNDOFF_FACTOR = 64.0


class NonConvergenceError(RuntimeError):
    """An iterative solve stopped without meeting its tolerance.

    Attributes:
        gradient_norm: Best max-norm residual reached.
        iterate: The best iterate (a :class:`DiscretePath` or a velocity vector).
    """

    def __init__(self, message: str, gradient_norm: float, iterate: object = None) -> None:
        self.gradient_norm = gradient_norm
        self.iterate = iterate
        super().__init__(f"{message} (best residual {gradient_norm:.3e})")


class NewtonDivergenceError(RuntimeError):
    """The implicit midpoint inner Newton iteration failed to converge.

    Attributes:
        time: Start time of the failed step.
        residual: Max-norm residual after the last iteration.
    """

    def __init__(self, time: float, residual: float) -> None:
        self.time = time
        self.residual = residual
        super().__init__(
            f"implicit midpoint Newton iteration diverged at t={time!r} "
            f"(residual {residual:.3e})"
        )


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled curve with jets in a named chart.

    Attributes:
        chart: Chart identifier of the samples.
        samples: Jets at strictly increasing, uniformly spaced times.
        step: Uniform time step.
        method: Tag of the producing procedure (``rk4``, ``mapped`` ...).
    """

    chart: str
    samples: tuple[CurveJet, ...]
    step: float
    method: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise ValueError("a trajectory needs at least one sample")
        if len({s.n for s in self.samples}) != 1:
            raise DimensionMismatchError("trajectory samples have different dimensions")
        if not is_uniform([s.t for s in self.samples]):
            raise ValueError("trajectory times must be strictly increasing and uniform")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n(self) -> int:
        return self.samples[0].n

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.pos for s in self.samples])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([s.vel for s in self.samples])

    @property
    def accelerations(self) -> np.ndarray:
        return np.array([s.acc for s in self.samples])

    @property
    def final(self) -> CurveJet:
        return self.samples[-1]

    def positions_at(self, times: Vector) -> np.ndarray:
        """Cubic Hermite interpolation of the positions at arbitrary times in range."""
        if len(self.samples) < 2:
            return np.tile(self.samples[0].pos, (len(times), 1))
        spline = CubicHermiteSpline(self.times, self.positions, self.velocities, axis=0)
        return spline(np.asarray(times, dtype=float))


@dataclass(frozen=True)
class DiscretePath:
    """Nodes ``q_0..q_N`` on the uniform grid of ``[a, b]``."""

    nodes: np.ndarray
    a: float
    b: float

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, 1)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 2:
            raise ValueError("a discrete path needs at least one panel")
        if not self.b > self.a:
            raise ValueError(f"discrete path interval is empty or reversed: [{self.a}, {self.b}]")

    @property
    def N(self) -> int:  # noqa: N802
        return len(self.nodes) - 1

    @property
    def n(self) -> int:
        return self.nodes.shape[1]

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.N

    @property
    def times(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.N + 1)

    @classmethod
    def sample(cls, positions: Sequence[Vector], a: float, b: float) -> DiscretePath:
        return cls(np.asarray(positions, dtype=float), a, b)


def _grid(a: float, b: float, step: float) -> tuple[int, float]:
    if not step > 0.0:
        raise ValueError(f"step must be positive, got {step}")
    if not b > a:
        raise ValueError(f"integration interval is empty or reversed: [{a}, {b}]")
    count = max(1, math.ceil((b - a) / step * (1.0 - 1e-12)))
    return count, (b - a) / count


def _rk4_step(
    L: LagrangianSystem, t: float, h: float, q: np.ndarray, v: np.ndarray, acc: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    k1q, k1v = v, acc
    k2q = v + 0.5 * h * k1v
    k2v = el_accelerations(L, q + 0.5 * h * k1q, k2q, t + 0.5 * h)
    k3q = v + 0.5 * h * k2v
    k3v = el_accelerations(L, q + 0.5 * h * k2q, k3q, t + 0.5 * h)
    k4q = v + h * k3v
    k4v = el_accelerations(L, q + h * k3q, k4q, t + h)
    q_next = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    v_next = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q_next, v_next


def _acceleration_jacobian(
    L: LagrangianSystem, q: np.ndarray, v: np.ndarray, t: float
) -> np.ndarray:
    """Central difference Jacobian of the accelerations with respect to ``(q, v)``.

    Only the Newton direction depends on it; the step is accepted on the residual of the
    midpoint equations, which uses the exact accelerations.
    """
    n = L.n
    y = np.concatenate([q, v])
    jac = np.empty((n, 2 * n))
    for j in range(2 * n):
        eps = 1e-6 * max(1.0, abs(y[j]))
        up, down = y.copy(), y.copy()
        up[j] += eps
        down[j] -= eps
        jac[:, j] = (
            el_accelerations(L, up[:n], up[n:], t) - el_accelerations(L, down[:n], down[n:], t)
        ) / (2.0 * eps)
    return jac


def _midpoint_step(
    L: LagrangianSystem, t: float, h: float, q: np.ndarray, v: np.ndarray, acc: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n = L.n
    tm = t + 0.5 * h
    y = np.concatenate([q, v])
    z = np.concatenate([q + h * v, v + h * acc])

    def residual(z: np.ndarray) -> np.ndarray:
        mid = 0.5 * (y + z)
        flow = np.concatenate([mid[n:], el_accelerations(L, mid[:n], mid[n:], tm)])
        return z - y - h * flow

    res = residual(z)
    norm = float(np.max(np.abs(res)))
    for iteration in range(NEWTON_MAX_ITERATIONS):
        if norm <= NEWTON_TOLERANCE:
            break
        mid = 0.5 * (y + z)
        jac = np.eye(2 * n)
        jac[:n, n:] -= 0.5 * h * np.eye(n)
        jac[n:, :] -= 0.5 * h * _acceleration_jacobian(L, mid[:n], mid[n:], tm)
        delta = np.linalg.solve(jac, -res)
        z = z + delta
        res = residual(z)
        norm = float(np.max(np.abs(res)))
        logger.debug(f"midpoint newton t={t:.6g} iteration {iteration}: residual {norm:.3e}")
        if float(np.max(np.abs(delta))) <= NEWTON_TOLERANCE * (1.0 + float(np.max(np.abs(z)))):
            break
    else:
        if norm > NEWTON_TOLERANCE:
            raise NewtonDivergenceError(t, norm)
    if not np.all(np.isfinite(z)):
        raise NewtonDivergenceError(t, float("inf"))
    return z[:n], z[n:]


def integrate_el(
    L: LagrangianSystem,
    q0: Vector,
    v0: Vector,
    a: float,
    b: float,
    step: float = 1e-3,
    method: Method = "rk4",
) -> Trajectory:
    """Integrate the Euler-Lagrange equations from ``(q0, v0)`` at ``a`` up to ``b``.

    The step is shrunk so that a whole number of steps spans ``[a, b]``; every stored
    jet carries the accelerations of the equations of motion at its sample.

    Example:

        >>> L = LagrangianSystem.from_expression("0.5*qd1^2 - 0.5*q1^2", 1)
        >>> traj = integrate_el(L, [1.0], [0.0], 0.0, 2 * math.pi)
        >>> abs(traj.final.pos[0] - 1.0) < 1e-9
        True

    Args:
        L: The (regular) Lagrangian system.
        q0: Initial positions.
        v0: Initial velocities.
        a: Start time.
        b: End time, ``b > a``.
        step: Requested time step.
        method: ``rk4`` (fourth order) or ``implicit_midpoint`` (second order, symmetric).

    Raises:
        DegenerateLagrangianError: The mass matrix became singular; carries the time.
        NewtonDivergenceError: The implicit midpoint iteration failed.

    Returns:
        Trajectory: Samples at ``a + k h``, ``k = 0..N``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown integration method '{method}', expected one of {METHODS}")
    q = np.asarray(q0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    if len(q) != L.n or len(v) != L.n:
        raise DimensionMismatchError(f"initial data must have {L.n} components")
    count, h = _grid(a, b, step)
    advance = _rk4_step if method == "rk4" else _midpoint_step
    logger.debug(f"integrating {L.chart}-chart system with {method}: {count} steps of {h:.6g}")

    samples: list[CurveJet] = []
    for k in range(count + 1):
        t = a + k * h
        acc = el_accelerations(L, q, v, t)
        samples.append(CurveJet(t, q, v, acc))
        if k < count:
            q, v = advance(L, t, h, q, v, acc)
    return Trajectory(L.chart, tuple(samples), h, method)


def energy_drift(L: LagrangianSystem, trajectory: Trajectory) -> float:
    """Largest deviation of the Jacobi energy from its initial value along a trajectory."""
    energies = [jacobi_energy(L, s.pos, s.vel, s.t) for s in trajectory.samples]
    return max(abs(e - energies[0]) for e in energies)


def shoot(
    L: LagrangianSystem,
    q_a: Vector,
    q_b: Vector,
    a: float,
    b: float,
    step: float = 1e-3,
    method: Method = "rk4",
    v_guess: Optional[Vector] = None,
) -> tuple[np.ndarray, Trajectory]:
    """Solve the two-point boundary problem by single shooting on the initial velocity.

    Raises:
        NonConvergenceError: The root finder did not hit ``q_b``.

    Returns:
        tuple[numpy.ndarray, Trajectory]: The initial velocity and the trajectory.
    """
    start = np.asarray(q_a, dtype=float)
    target = np.asarray(q_b, dtype=float)
    guess = (target - start) / (b - a) if v_guess is None else np.asarray(v_guess, dtype=float)

    def miss(v0: np.ndarray) -> np.ndarray:
        return integrate_el(L, start, v0, a, b, step, method).final.pos - target

    sol = root(miss, guess, method="hybr", tol=1e-13)
    trajectory = integrate_el(L, start, sol.x, a, b, step, method)
    err = float(np.max(np.abs(trajectory.final.pos - target)))
    if err > 1e-9 * (1.0 + float(np.max(np.abs(target)))):
        raise NonConvergenceError(f"shooting failed: {sol.message}", err, np.asarray(sol.x))
    logger.debug(f"shooting converged after {sol.nfev} integrations, endpoint miss {err:.3e}")
    return np.asarray(sol.x), trajectory


def _panels(path: DiscretePath) -> list[tuple[int, np.ndarray, np.ndarray, float]]:
    h = path.h
    return [
        (k, 0.5 * (left + right), (right - left) / h, path.a + (k + 0.5) * h)
        for k, (left, right) in enumerate(window_iterator(path.nodes))
    ]


def discrete_action(L: LagrangianSystem, path: DiscretePath) -> float:
    """Midpoint rule action ``sum_k h L((q_k + q_k+1)/2, (q_k+1 - q_k)/h, t_k + h/2)``."""
    if path.n != L.n:
        raise DimensionMismatchError(f"path has {path.n} components, system has {L.n}")
    return float(sum(path.h * L.value(m, v, t) for _, m, v, t in _panels(path)))


def _panel_gradient(L: LagrangianSystem, m: np.ndarray, v: np.ndarray, t: float) -> np.ndarray:
    """``(dL/dq, dL/dqd)`` at a panel midpoint, two partials per evaluation."""
    dim = 2 * L.n
    eye = np.eye(dim + 1)
    zero = np.zeros(dim + 1)
    grad = np.empty(dim)
    for i in range(0, dim, 2):
        out = L.seeded(m, v, t, eye[i], eye[i + 1] if i + 1 < dim else zero)
        grad[i] = out.d1
        if i + 1 < dim:
            grad[i + 1] = out.d2
    return grad


def _panel_hessian(
    L: LagrangianSystem, m: np.ndarray, v: np.ndarray, t: float
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of ``L`` over ``(q, qd)`` from upper triangle seeds."""
    dim = 2 * L.n
    eye = np.eye(dim + 1)
    grad = np.empty(dim)
    hess = np.empty((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            out = L.seeded(m, v, t, eye[i], eye[j])
            hess[i, j] = hess[j, i] = out.d12
            if i == j:
                grad[i] = out.d1
    return grad, hess


def _assemble_gradient(path: DiscretePath, partials: list[np.ndarray], n: int) -> np.ndarray:
    h = path.h
    grad = np.zeros((path.N + 1, n))
    for k, g in enumerate(partials):
        lq, lv = g[:n], g[n:]
        grad[k] += 0.5 * h * lq - lv
        grad[k + 1] += 0.5 * h * lq + lv
    return grad[1:-1]


def action_gradient(L: LagrangianSystem, path: DiscretePath) -> np.ndarray:
    """Gradient of the discrete action with respect to the interior nodes.

    Returns:
        numpy.ndarray: Shape ``(N - 1, n)``; row ``k - 1`` is ``dS_d/dq_k``.
    """
    if path.n != L.n:
        raise DimensionMismatchError(f"path has {path.n} components, system has {L.n}")
    partials = [_panel_gradient(L, m, v, t) for _, m, v, t in _panels(path)]
    return _assemble_gradient(path, partials, L.n)


@dataclass(frozen=True)
class _NewtonSystem:
    """Interior gradient and sparse block tridiagonal Hessian of the discrete action.

    ``mass_condition`` and ``mass_norm`` are the worst condition and the largest
    max-norm of the panel velocity Hessians along the path.
    """

    gradient: np.ndarray
    hessian: sparse.csc_matrix
    mass_condition: float
    mass_norm: float

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.gradient)))


def _newton_system(L: LagrangianSystem, path: DiscretePath) -> _NewtonSystem:
    n, N, h = L.n, path.N, path.h
    eye = np.eye(n)
    # (m, v) = B (q_k, q_k+1)
    B = np.block([[0.5 * eye, 0.5 * eye], [-eye / h, eye / h]])
    local = np.arange(2 * n)
    block_rows, block_cols = np.repeat(local, 2 * n), np.tile(local, 2 * n)
    data: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    partials: list[np.ndarray] = []
    mass_condition, mass_norm = 1.0, 0.0
    for k, m, v, t in _panels(path):
        grad, hess = _panel_hessian(L, m, v, t)
        partials.append(grad)
        mass = hess[n:, n:]
        mass_condition = max(mass_condition, condition_estimate(mass))
        mass_norm = max(mass_norm, float(np.linalg.norm(mass, np.inf)))
        data.append((h * (B.T @ hess @ B)).reshape(-1))
        rows.append(block_rows + k * n)
        cols.append(block_cols + k * n)
    size = (N + 1) * n
    # duplicate entries of neighbouring panels are summed on conversion
    full = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsc()
    interior = slice(n, N * n)
    return _NewtonSystem(
        _assemble_gradient(path, partials, n),
        full[interior, interior].tocsc(),
        mass_condition,
        mass_norm,
    )


def _factorize(hessian: sparse.csc_matrix, t: float) -> tuple[SuperLU, float]:
    """Sparse LU factors of the Newton matrix and its estimated 1-norm condition.

    Raises:
        DegenerateLagrangianError: The matrix is exactly singular.
    """
    try:
        lu = splu(hessian)
    except RuntimeError as err:
        raise DegenerateLagrangianError(t, math.inf, "discrete second variation") from err
    inverse = LinearOperator(
        hessian.shape,
        matvec=lu.solve,
        rmatvec=lambda x: lu.solve(x, trans="T"),
        dtype=float,
    )
    cond = float(abs(hessian).sum(axis=0).max()) * float(onenormest(inverse))
    return lu, cond if math.isfinite(cond) else math.inf


def _gradient_floor(system: _NewtonSystem, path: DiscretePath) -> float:
    """Gradient tolerance, raised to the roundoff level of the momentum differences."""
    scale = system.mass_norm * (1.0 + float(np.max(np.abs(path.nodes)))) / path.h
    return max(GRADIENT_TOLERANCE, ROUNDOFF_FACTOR * float(np.finfo(float).eps) * scale)


def _with_interior(path: DiscretePath, interior: np.ndarray) -> DiscretePath:
    nodes = path.nodes.copy()
    nodes[1:-1] = interior
    return DiscretePath(nodes, path.a, path.b)


def stationary_action_solve(
    L: LagrangianSystem,
    q_a: Vector,
    q_b: Vector,
    a: float,
    b: float,
    N: int = 200,  # noqa: N803
    init: Union[Literal["linear"], DiscretePath, np.ndarray] = "linear",
) -> DiscretePath:
    """Find a critical point of the discrete action with fixed endpoints.

    Newton's method on the interior nodes with backtracking on the max-norm of the
    gradient: a step is halved until the gradient norm decreases (at most 30 times).
    The Hessian is assembled as a sparse block tridiagonal matrix and factored once
    per iteration; the same factors give the condition estimate.

    The gradient tolerance is ``1e-10``, raised to ``64 eps |M| (1 + max|q|) / h`` when
    that is larger: the momentum differences of heavy or finely discretised systems
    cannot be resolved below it.

    Example:

        >>> L = LagrangianSystem.from_expression("0.5*qd1^2", 1)
        >>> path = stationary_action_solve(L, [0.0], [1.0], 0.0, 1.0, N=10)
        >>> float(abs(path.nodes[:, 0] - path.times).max()) <= 1e-12
        True

    Args:
        L: The Lagrangian system.
        q_a: Position at ``a``.
        q_b: Position at ``b``.
        a: Start time.
        b: End time.
        N: Number of panels, at least 2.
        init: ``"linear"`` interpolation of the endpoints or an initial path (array of
            nodes or :class:`DiscretePath`); its endpoints are replaced by ``q_a``, ``q_b``.

    Raises:
        NonConvergenceError: Gradient tolerance not met in 200 iterations, or
            no decrease after 30 halvings. Carries the best path.
        DegenerateLagrangianError: The Newton system is singular, or the converged
            path sits at a conjugate point (estimated 1-norm condition of the discrete
            second variation worse than ``min(1e12, N^3 kappa_M)`` with ``kappa_M`` the
            worst mass-matrix condition along the path).

    Returns:
        DiscretePath: The stationary path.
    """
    if N < 2:
        raise ValueError(f"the boundary problem needs N >= 2 panels, got {N}")
    start = np.asarray(q_a, dtype=float).reshape(-1)
    end = np.asarray(q_b, dtype=float).reshape(-1)
    if len(start) != L.n or len(end) != L.n:
        raise DimensionMismatchError(f"boundary data must have {L.n} components")

    if isinstance(init, str):
        if init != "linear":
            raise ValueError(f"unknown initialisation '{init}'")
        weights = np.linspace(0.0, 1.0, N + 1).reshape(-1, 1)
        nodes = (1.0 - weights) * start + weights * end
    else:
        nodes = np.array(init.nodes if isinstance(init, DiscretePath) else init, dtype=float)
        nodes = nodes.reshape(N + 1, L.n) if nodes.ndim == 1 else nodes
        if nodes.shape != (N + 1, L.n):
            raise DimensionMismatchError(
                f"initial path has shape {nodes.shape}, expected {(N + 1, L.n)}"
            )
    nodes[0], nodes[-1] = start, end
    path = DiscretePath(nodes, a, b)

    system = _newton_system(L, path)
    for iteration in range(MAX_ACTION_ITERATIONS):
        lu, cond = _factorize(system.hessian, a)
        limit = min(DEGENERACY_CONDITION, N**3 * system.mass_condition)
        if cond > limit:
            raise DegenerateLagrangianError(a, cond, "discrete second variation")
        floor = _gradient_floor(system, path)
        if system.norm <= floor:
            logger.debug(
                f"stationary action: converged after {iteration} iterations "
                f"(gradient {system.norm:.3e}, floor {floor:.3e})"
            )
            return path
        shape = system.gradient.shape
        direction = lu.solve(-system.gradient.reshape(-1)).reshape(shape)
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = _with_interior(path, path.nodes[1:-1] + alpha * direction)
            trial_system = _newton_system(L, trial)
            if trial_system.norm < system.norm:
                break
            alpha *= 0.5
        else:
            raise NonConvergenceError(
                f"no gradient decrease after {MAX_HALVINGS} step halvings", system.norm, path
            )
        logger.debug(
            f"stationary action iteration {iteration}: step {alpha:.3g}, "
            f"gradient {system.norm:.3e} -> {trial_system.norm:.3e}"
        )
        path, system = trial, trial_system
    raise NonConvergenceError(
        f"gradient tolerance not met in {MAX_ACTION_ITERATIONS} iterations", system.norm, path
    )
