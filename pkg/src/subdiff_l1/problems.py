"""Benchmark problems: a manufactured solution and four reference-solution cases."""

from __future__ import annotations

import logging

import numpy as np

from subdiff_l1.errors import ParameterError
from subdiff_l1.spatial import SpatialGrid
from subdiff_l1.special import caputo_of_power
from subdiff_l1.stepper import ProblemSpec

logger = logging.getLogger(__name__)

__all__ = ["example1", "example2", "EXAMPLE2_CASES"]


def _sqrt1p(u):
    return np.sqrt(1.0 + u * u)


def _dsqrt1p(u):
    return u / np.sqrt(1.0 + u * u)


def _cubic(u):
    return u - u**3


def _dcubic(u):
    return 1.0 - 3.0 * u**2


def example1(alpha: float, sigma: float, M: int, T: float = 1.0) -> ProblemSpec:
    """``D^alpha u = u_xx + sqrt(1 + u^2) + g`` on ``(0, pi)`` with
    exact solution ``u = t^sigma sin(x)``.

    The forcing is ``g = d^alpha(t^sigma) sin x + t^sigma sin x
    - sqrt(1 + t^{2 sigma} sin^2 x)``.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive: {sigma}")

    def source(x, t):
        s = np.sin(x)
        u = t**sigma * s
        return caputo_of_power(alpha, sigma, t) * s + u - _sqrt1p(u)

    return ProblemSpec(
        alpha=alpha,
        grid=SpatialGrid(dim=1, L=np.pi, M=M),
        T=T,
        f=_sqrt1p,
        df=_dsqrt1p,
        u0=lambda x: np.zeros_like(x),
        source=source,
        exact=lambda x, t: t**sigma * np.sin(x),
        name=f"example1(alpha={alpha}, sigma={sigma})",
    )


# case -> (dim, L, f, df, u0)
EXAMPLE2_CASES = {
    "a": (1, 1.0, _sqrt1p, _dsqrt1p, lambda x: x * (1.0 - x)),
    "b": (1, 1.0, _cubic, _dcubic, lambda x: np.sin(np.pi * x)),
    "c": (
        2, 1.0, _sqrt1p, _dsqrt1p,
        lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y),
    ),
    # u0 vanishes on the boundary of the unit square only
    "d": (
        2, 1.0, _cubic, _dcubic,
        lambda x, y: x * (1.0 - x) * y * (1.0 - y),
    ),
}


def example2(
    case: str, alpha: float, M: int | None = None, T: float = 1.0, L: float | None = None
) -> ProblemSpec:
    """Unforced problems with nonsmooth-in-time solutions (``sigma = alpha``).

    ``M`` defaults to 1000 in 1d and 10 in 2d; ``L`` overrides the side length
    of the case's domain.
    """
    try:
        dim, L_case, f, df, u0 = EXAMPLE2_CASES[case]
    except KeyError:
        raise ParameterError(f"unknown case {case!r}, expected one of a-d") from None

    if M is None:
        M = 1000 if dim == 1 else 10
    if L is None:
        L = L_case
    else:
        L = float(L)
        if not L > 0:
            raise ParameterError(f"domain length must be positive: L = {L}")

    return ProblemSpec(
        alpha=alpha,
        grid=SpatialGrid(dim=dim, L=L, M=M),
        T=T,
        f=f,
        df=df,
        u0=u0,
        name=f"example2{case}(alpha={alpha})",
    )
