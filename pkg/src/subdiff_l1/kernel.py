"""L1 convolution weights, the discrete Caputo operator and complementary weights.

The L1 approximation of the Caputo derivative at ``t_n = n * tau`` reads

.. math::

    D_\\tau^\\alpha u^n = \\frac{\\tau^{-\\alpha}}{\\Gamma(2 - \\alpha)}
        \\sum_{j=1}^n a_{n-j} (u^j - u^{j-1}),
    \\qquad a_i = (i + 1)^{1-\\alpha} - i^{1-\\alpha}.

The complementary sequence ``p_n`` inverts that convolution, i.e.
``sum_{j=k}^n p_{n-j} a_{j-k} = 1``; it drives every discrete Gronwall bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from subdiff_l1.errors import ParameterError

__all__ = [
    "ComplementaryWeights",
    "L1Weights",
    "check_alpha",
    "complementary_weights",
    "discrete_caputo",
    "discrete_caputo_all",
    "l1_weights",
]


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"fractional order must lie in (0, 1): alpha = {alpha}")
    return alpha


def _check_nmax(n_max: int) -> int:
    if int(n_max) != n_max or n_max < 1:
        raise ParameterError(f"n_max must be a positive integer: {n_max!r}")
    return int(n_max)


@dataclass(frozen=True)
class L1Weights:
    """L1 weights ``a[0..n_max]`` for a fixed fractional order."""

    alpha: float
    a: np.ndarray

    def __post_init__(self) -> None:
        self.a.flags.writeable = False

    @property
    def n_max(self) -> int:
        return self.a.size - 1

    @property
    def gamma_2ma(self) -> float:
        """Value of ``Gamma(2 - alpha)``."""
        return float(gamma(2.0 - self.alpha))

    def differences(self) -> np.ndarray:
        """Return ``b[k] = a[k] - a[k + 1]`` for ``k = 0..n_max-1`` (all positive)."""
        return self.a[:-1] - self.a[1:]


@dataclass(frozen=True)
class ComplementaryWeights:
    """Complementary convolution weights ``p[0..n_max]``."""

    alpha: float
    p: np.ndarray

    def __post_init__(self) -> None:
        self.p.flags.writeable = False

    @property
    def n_max(self) -> int:
        return self.p.size - 1


def l1_weights(alpha: float, n_max: int) -> L1Weights:
    # NOTE: direct formula only; (i+1)^{1-a} - i^{1-a} loses ~log10(i) digits
    # to cancellation, which is harmless for i <= 1e6.
    alpha = check_alpha(alpha)
    n_max = _check_nmax(n_max)

    i = np.arange(n_max + 1, dtype=np.float64)
    a = (i + 1.0) ** (1.0 - alpha) - i ** (1.0 - alpha)
    a[0] = 1.0

    return L1Weights(alpha=alpha, a=a)


def discrete_caputo(history, weights: L1Weights, tau: float) -> float | np.ndarray:
    """Evaluate the L1 operator at the last level of *history*.

    :arg history: values ``u[0..n]``; a 2d array is treated as one field per row
        and the operator is applied pointwise.
    :returns: :math:`D_\\tau^\\alpha u^n`.
    """
    u = np.asarray(history, dtype=np.float64)
    n = u.shape[0] - 1
    if n < 1:
        raise ParameterError("history must contain at least u[0] and u[1]")
    if weights.n_max < n - 1:
        raise ParameterError(
            f"weights cover indices up to {weights.n_max}, need {n - 1}"
        )
    if tau <= 0:
        raise ParameterError(f"time step must be positive: tau = {tau}")

    # a[n-j] for j = 1..n is a[n-1], ..., a[0]
    coeffs = weights.a[n - 1 :: -1]
    du = np.diff(u, axis=0)
    result = np.tensordot(coeffs, du, axes=(0, 0))

    scale = tau ** (-weights.alpha) / weights.gamma_2ma
    return scale * result


def discrete_caputo_all(values, alpha: float, tau: float) -> np.ndarray:
    """Evaluate the L1 operator at every level ``n = 1..N`` of a scalar sequence.

    One direct (not FFT) convolution, so round-off matches the pointwise sums.
    """
    u = np.asarray(values, dtype=np.float64)
    N = u.size - 1
    w = l1_weights(alpha, max(N, 1))
    du = np.diff(u)

    conv = np.convolve(w.a[:N], du)[:N]
    return tau ** (-w.alpha) / w.gamma_2ma * conv


def complementary_weights(alpha: float, n_max: int) -> ComplementaryWeights:
    """Compute ``p_0 = 1``, ``p_n = sum_{j=1}^n (a_{j-1} - a_j) p_{n-j}``.

    Direct O(n_max^2) evaluation; every term of the recursion is positive so
    there is no cancellation.
    """
    w = l1_weights(alpha, n_max)
    b = w.differences()

    p = np.empty(w.n_max + 1)
    p[0] = 1.0
    for n in range(1, w.n_max + 1):
        # sum_{j=1}^n b[j-1] p[n-j]
        p[n] = np.dot(b[:n], p[n - 1 :: -1])

    return ComplementaryWeights(alpha=w.alpha, p=p)
