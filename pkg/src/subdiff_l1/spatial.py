"""Central-difference Laplacian on uniform grids with homogeneous Dirichlet data.

Grid functions are flat arrays over the interior nodes ``(i_1 h, ..., i_d h)``,
``1 <= i_k <= M - 1``, in lexicographic order with the x index running
fastest. In 2d the flat index of node ``(i, j)`` is ``(i - 1) + (j - 1)(M - 1)``,
so ``values.reshape(M - 1, M - 1)`` is indexed ``[j, i]``.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from subdiff_l1.errors import ParameterError, SolverError

__all__ = [
    "SpatialGrid",
    "apply_laplacian",
    "check_field",
    "solve_shifted_system",
]

#: relative (normwise backward) residual required from every linear solve
RESIDUAL_RTOL = 1.0e-12
#: largest M for which the 2d system is factored as a banded matrix
BANDED_MAX_M = 64


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid on :math:`(0, L)^d` with ``M`` intervals per axis."""

    dim: int
    L: float
    M: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ParameterError(f"only 1d and 2d grids are supported: dim = {self.dim}")
        if not self.L > 0:
            raise ParameterError(f"domain length must be positive: L = {self.L}")
        if int(self.M) != self.M or self.M < 2:
            raise ParameterError(f"need at least one interior node: M = {self.M}")

    @property
    def h(self) -> float:
        return self.L / self.M

    @property
    def n(self) -> int:
        """Number of interior nodes per axis."""
        return self.M - 1

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        # C-ordered shape for which the last axis is x
        return (self.n,) * self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return self.h * np.arange(1, self.M, dtype=np.float64)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Flat coordinate arrays ``(x,)`` or ``(x, y)`` of the interior nodes."""
        if self.dim == 1:
            return (self.axis.copy(),)

        y, x = np.meshgrid(self.axis, self.axis, indexing="ij")
        return (x.ravel(), y.ravel())

    def sample(self, func: Callable[..., np.ndarray]) -> np.ndarray:
        """Evaluate ``func(x)`` or ``func(x, y)`` at the interior nodes."""
        values = np.asarray(func(*self.coordinates()), dtype=np.float64)
        values = np.broadcast_to(values, (self.size,)).copy()
        return check_field(self, values)

    def laplacian_matrix(self) -> sp.csr_matrix:
        n = self.n
        d2 = sp.diags(
            [np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]
        ) / self.h**2
        if self.dim == 1:
            return d2.tocsr()

        eye = sp.identity(n)
        return (sp.kron(eye, d2) + sp.kron(d2, eye)).tocsr()

    def discrete_eigenvalue(self, k: tuple[int, ...] | int = 1) -> float:
        """Eigenvalue of ``-Delta_h`` for the sine mode with wave numbers *k*
        (in units of ``pi / L``)."""
        ks = (k,) * self.dim if isinstance(k, int) else tuple(k)
        return sum(
            4.0 / self.h**2 * np.sin(ki * np.pi * self.h / (2.0 * self.L)) ** 2
            for ki in ks
        )


def check_field(grid: SpatialGrid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.size,):
        raise ParameterError(
            f"field has shape {values.shape}, expected ({grid.size},)"
        )
    if not np.all(np.isfinite(values)):
        raise ParameterError("field contains non-finite values")
    return values


def apply_laplacian(grid: SpatialGrid, values: np.ndarray) -> np.ndarray:
    """Apply :math:`\\sum_j \\delta_{x_j}^2` with zero ghost values."""
    u = check_field(grid, values).reshape(grid.shape)
    padded = np.pad(u, 1)

    inner = (slice(1, -1),) * grid.dim
    result = -2.0 * grid.dim * u
    for ax in range(grid.dim):
        lo = list(inner)
        hi = list(inner)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        result = result + padded[tuple(lo)] + padded[tuple(hi)]

    return (result / grid.h**2).ravel()


def _banded_operator(grid: SpatialGrid, diag: np.ndarray) -> tuple[int, np.ndarray]:
    # (diag I - Delta_h) in LAPACK banded storage, bandwidth 1 (1d) or n (2d)
    n = grid.n
    inv_h2 = 1.0 / grid.h**2
    bw = 1 if grid.dim == 1 else n
    ab = np.zeros((2 * bw + 1, grid.size))
    ab[bw] = diag + 2.0 * grid.dim * inv_h2

    # x neighbours, except across the end of a grid line
    off = np.full(grid.size - 1, -inv_h2)
    off[n - 1 :: n] = 0.0
    ab[bw - 1, 1:] = off
    ab[bw + 1, :-1] = off
    if grid.dim == 2:
        ab[0, n:] = -inv_h2
        ab[-1, :-n] = -inv_h2

    return bw, ab


def solve_shifted_system(
    grid: SpatialGrid,
    c: float | np.ndarray,
    rhs: np.ndarray,
) -> np.ndarray:
    """Solve :math:`(c I - \\Delta_h) x = b`.

    :arg c: scalar shift or a per-node diagonal (a Newton Jacobian passes
        ``c - f'(U)``).

    1d systems are tridiagonal and 2d systems with ``M <= 64`` banded, both
    factored directly; larger 2d systems use conjugate gradients. The
    normwise backward error :math:`\\|Ax - b\\|_\\infty / (\\|A\\|_\\infty
    \\|x\\|_\\infty + \\|b\\|_\\infty)` must not exceed ``1e-12``.
    """
    b = check_field(grid, rhs)
    diag = np.broadcast_to(np.asarray(c, dtype=np.float64), (grid.size,))
    if not np.all(np.isfinite(diag)):
        raise SolverError("non-finite diagonal shift")

    if grid.dim == 1 or grid.M <= BANDED_MAX_M:
        bw, ab = _banded_operator(grid, diag)
        try:
            x = sla.solve_banded((bw, bw), ab, b, check_finite=False)
        except (sla.LinAlgError, ValueError) as exc:
            raise SolverError(f"banded solve failed: {exc}") from exc
    else:
        A = sp.diags(diag) - grid.laplacian_matrix()
        x, info = spla.cg(A, b, rtol=1.0e-14, atol=0.0, maxiter=10 * grid.size)
        if info != 0:
            raise SolverError(f"conjugate gradients did not converge (info = {info})")

    residual = diag * x - apply_laplacian(grid, x) - b
    norm_a = np.max(np.abs(diag)) + 4.0 * grid.dim / grid.h**2
    scale = norm_a * np.max(np.abs(x)) + np.max(np.abs(b))
    if scale > 0 and np.max(np.abs(residual)) > RESIDUAL_RTOL * scale:
        raise SolverError(
            "linear solve missed the residual target: "
            f"{np.max(np.abs(residual)) / scale:.3e}"
        )

    return x
