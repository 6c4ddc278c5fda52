"""L1 / central-difference time stepping for nonlinear subdiffusion problems.

The fully discrete problem at level ``n`` is

.. math::

    D_\\tau^\\alpha U^n = \\Delta_h U^n + f(U^n) + g(\\cdot, t_n),

which, with :math:`c = \\tau^{-\\alpha} / \\Gamma(2 - \\alpha)`, is solved as

.. math::

    c a_0 U^n - \\Delta_h U^n - f(U^n) - g^n
        = c \\Big[a_{n-1} U^0 + \\sum_{j=1}^{n-1} (a_{n-j-1} - a_{n-j}) U^j\\Big].

The whole history is kept since the right-hand side is nonlocal in time.
"""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from subdiff_l1.errors import ConvergenceError, ParameterError, SolverError
from subdiff_l1.kernel import L1Weights, check_alpha, l1_weights
from subdiff_l1.spatial import SpatialGrid, apply_laplacian, solve_shifted_system

logger = logging.getLogger(__name__)

__all__ = [
    "ProblemSpec",
    "SchemeConfig",
    "SolutionTrajectory",
    "Variant",
    "history_rhs",
    "solve",
    "step_implicit",
    "step_linearized",
]

ScalarFn = Callable[[np.ndarray], np.ndarray]


class Variant(str, enum.Enum):
    IMPLICIT = "implicit"
    LINEARIZED = "linearized"


@dataclass(frozen=True)
class ProblemSpec:
    """Continuous problem ``D^alpha u - Delta u = f(u) + g`` on ``(0, L)^d``.

    Callables take grid coordinates as positional arguments: ``u0(x)`` or
    ``u0(x, y)``, and ``source(x, t)`` / ``exact(x, t)`` (``(x, y, t)`` in 2d).
    """

    alpha: float
    grid: SpatialGrid
    T: float
    f: ScalarFn
    df: ScalarFn
    u0: Callable[..., np.ndarray]
    source: Callable[..., np.ndarray] | None = None
    exact: Callable[..., np.ndarray] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        check_alpha(self.alpha)
        if not self.T > 0:
            raise ParameterError(f"final time must be positive: T = {self.T}")

    def initial_field(self) -> np.ndarray:
        return self.grid.sample(self.u0)

    def source_field(self, t: float) -> np.ndarray | None:
        if self.source is None:
            return None
        return self.grid.sample(lambda *x: self.source(*x, t))

    def exact_field(self, t: float) -> np.ndarray:
        if self.exact is None:
            raise ParameterError(f"problem {self.name!r} has no exact solution")
        return self.grid.sample(lambda *x: self.exact(*x, t))


@dataclass(frozen=True)
class SchemeConfig:
    N: int
    variant: Variant = Variant.IMPLICIT
    newton_tol: float = 1.0e-12
    newton_max_iter: int = 50

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"number of steps must be positive: N = {self.N}")
        object.__setattr__(self, "variant", Variant(self.variant))

    def tau(self, T: float) -> float:
        return T / self.N


@dataclass(frozen=True)
class SolutionTrajectory:
    """Discrete fields ``U^0, ..., U^N`` (one per row of :attr:`fields`)."""

    fields: np.ndarray
    tau: float
    grid: SpatialGrid
    alpha: float
    variant: Variant = Variant.IMPLICIT
    newton_iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, int))

    @property
    def N(self) -> int:
        return self.fields.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.N + 1)

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]


def history_rhs(history: np.ndarray, n: int, weights: L1Weights) -> np.ndarray:
    """Return ``a_{n-1} U^0 + sum_{j=1}^{n-1} (a_{n-j-1} - a_{n-j}) U^j``.

    *history* holds at least the rows ``U^0, ..., U^{n-1}``.
    """
    a = weights.a
    rhs = a[n - 1] * history[0]
    if n > 1:
        # (a_{n-j-1} - a_{n-j}) for j = 1..n-1
        b = a[n - 2 :: -1] - a[n - 1 : 0 : -1]
        rhs = rhs + b @ history[1:n]
    return rhs


class _Context:
    # per-run constants shared by the step functions
    def __init__(self, problem: ProblemSpec, config: SchemeConfig, n_max: int) -> None:
        self.tau = config.tau(problem.T)
        self.weights = l1_weights(problem.alpha, max(n_max, 1))
        self.c = self.tau ** (-problem.alpha) / self.weights.gamma_2ma


def _check_history(history: np.ndarray, n: int, problem: ProblemSpec) -> np.ndarray:
    history = np.asarray(history, dtype=np.float64)
    if n < 1:
        raise ParameterError(f"step index must be positive: n = {n}")
    if history.ndim != 2 or history.shape[0] < n:
        raise ParameterError(f"history does not reach level {n - 1}")
    if history.shape[1] != problem.grid.size:
        raise ParameterError("history does not match the problem grid")
    return history


def _forcing(problem: ProblemSpec, ctx: _Context, history: np.ndarray, n: int):
    rhs = ctx.c * history_rhs(history, n, ctx.weights)
    g = problem.source_field(n * ctx.tau)
    if g is not None:
        rhs = rhs + g
    return rhs


def _implicit(problem, config, ctx, history, n) -> tuple[np.ndarray, int]:
    grid = problem.grid
    rhs = _forcing(problem, ctx, history, n)
    c = ctx.c * ctx.weights.a[0]

    u = history[n - 1].copy()
    for it in range(1, config.newton_max_iter + 1):
        residual = c * u - apply_laplacian(grid, u) - problem.f(u) - rhs
        jac = c - problem.df(u)
        if not (np.all(np.isfinite(residual)) and np.all(np.isfinite(jac))):
            raise SolverError("nonlinearity is not finite at the Newton iterate", step=n)
        du = solve_shifted_system(grid, jac, -residual)
        u += du
        if not np.all(np.isfinite(u)):
            raise SolverError("Newton iterate is not finite", step=n)
        if np.max(np.abs(du)) <= config.newton_tol:
            return u, it

    raise ConvergenceError(
        f"step {n}: Newton did not converge in {config.newton_max_iter} iterations"
    )


def _linearized(problem, config, ctx, history, n) -> tuple[np.ndarray, int]:
    prev = history[n - 1]
    fp = problem.f(prev)
    dfp = problem.df(prev)
    if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(dfp))):
        raise SolverError("nonlinearity is not finite at the previous level", step=n)

    rhs = _forcing(problem, ctx, history, n) + fp - dfp * prev
    u = solve_shifted_system(problem.grid, ctx.c * ctx.weights.a[0] - dfp, rhs)
    return u, 1


_STEPS = {Variant.IMPLICIT: _implicit, Variant.LINEARIZED: _linearized}


def step_implicit(
    history: np.ndarray, n: int, problem: ProblemSpec, config: SchemeConfig
) -> np.ndarray:
    """Compute ``U^n`` of the fully implicit scheme by Newton's method.

    The iteration starts from ``U^{n-1}`` and stops once the max-norm of the
    update is at most ``config.newton_tol``.
    """
    history = _check_history(history, n, problem)
    u, _ = _implicit(problem, config, _Context(problem, config, n), history, n)
    return u


def step_linearized(
    history: np.ndarray, n: int, problem: ProblemSpec, config: SchemeConfig
) -> np.ndarray:
    """Compute ``U^n`` with ``f`` linearized about ``U^{n-1}``.

    One linear solve of ``(c - Delta_h - f'(U^{n-1})) U^n
    = c H + f(U^{n-1}) - f'(U^{n-1}) U^{n-1} + g^n``.
    """
    history = _check_history(history, n, problem)
    u, _ = _linearized(problem, config, _Context(problem, config, n), history, n)
    return u


def solve(problem: ProblemSpec, config: SchemeConfig) -> SolutionTrajectory:
    """Advance from ``U^0 = u_0`` to ``t_N = T``."""
    grid = problem.grid
    ctx = _Context(problem, config, config.N)
    step = _STEPS[config.variant]

    fields = np.empty((config.N + 1, grid.size))
    fields[0] = problem.initial_field()
    iterations = np.zeros(config.N + 1, dtype=int)

    for n in range(1, config.N + 1):
        try:
            fields[n], iterations[n] = step(problem, config, ctx, fields, n)
        except SolverError as exc:
            if exc.step is None:
                raise SolverError(str(exc), step=n) from exc
            raise

    logger.debug(
        "solved %s: N = %d, mean Newton iterations %.2f",
        problem.name or "problem", config.N, iterations[1:].mean(),
    )

    return SolutionTrajectory(
        fields=fields,
        tau=ctx.tau,
        grid=grid,
        alpha=problem.alpha,
        variant=config.variant,
        newton_iterations=iterations,
    )
