"""Truncation error of the L1 operator for power-law regularity profiles.

For ``u(t) = t^sigma`` the defect ``r_n = D_tau^alpha u^n - d^alpha u(t_n)``
obeys the pointwise bound ``|r_n| <~ tau^(sigma - alpha) n^(-kappa)`` with

* ``kappa = min(1 + alpha, 2 - sigma)`` for ``0 < sigma < 1``,
* ``kappa = 2 - sigma`` for ``1 < sigma <= 2``.

Since ``D_tau^alpha`` applied to ``(j tau)^sigma`` is ``tau^(sigma - alpha)``
times an ``N``-independent sequence, the scaled ratio ``|r_n| / (tau^(sigma -
alpha) n^(-kappa))`` does not depend on ``N`` except through the range of ``n``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from subdiff_l1.errors import ParameterError
from subdiff_l1.kernel import check_alpha, discrete_caputo_all
from subdiff_l1.special import caputo_of_power

__all__ = [
    "RegularityProfile",
    "TruncationReport",
    "bound_exponent",
    "empirical_order",
    "sup_ratio_stability",
    "truncation_errors",
]


@dataclass(frozen=True)
class RegularityProfile:
    """The scalar profile ``u(t) = t^sigma``."""

    sigma: float

    def __post_init__(self) -> None:
        if not (0.0 < self.sigma <= 2.0) or self.sigma == 1.0:
            raise ParameterError(
                f"sigma must lie in (0, 1) or (1, 2]: sigma = {self.sigma}"
            )

    def __call__(self, t):
        return np.asarray(t, dtype=np.float64) ** self.sigma


def bound_exponent(alpha: float, sigma: float) -> float:
    """Decay exponent ``kappa`` of the pointwise truncation bound."""
    if sigma < 1.0:
        return min(1.0 + alpha, 2.0 - sigma)
    # sigma = 2 is outside the stated range but follows the sigma > 1 branch
    return 2.0 - sigma


@dataclass(frozen=True)
class TruncationReport:
    alpha: float
    sigma: float
    N: int
    T: float
    #: ``|r_n|`` for ``n = 1..N``
    r: np.ndarray
    #: ``|r_n| / (tau^(sigma - alpha) n^(-kappa))``
    bound_ratio: np.ndarray

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def kappa(self) -> float:
        return bound_exponent(self.alpha, self.sigma)

    @property
    def sup_ratio(self) -> float:
        return float(np.max(self.bound_ratio))

    def rows(self):
        """Yield ``(n, r_n, bound_ratio_n)`` records."""
        for n, (r, q) in enumerate(zip(self.r, self.bound_ratio), start=1):
            yield n, float(r), float(q)


def truncation_errors(
    alpha: float, profile: RegularityProfile | float, N: int, T: float = 1.0
) -> TruncationReport:
    alpha = check_alpha(alpha)
    if not isinstance(profile, RegularityProfile):
        profile = RegularityProfile(float(profile))
    if int(N) != N or N < 2:
        raise ParameterError(f"need at least two steps: N = {N}")
    if not T > 0:
        raise ParameterError(f"final time must be positive: T = {T}")

    sigma = profile.sigma
    tau = T / N
    t = tau * np.arange(N + 1)

    discrete = discrete_caputo_all(profile(t), alpha, tau)
    exact = caputo_of_power(alpha, sigma, t[1:])
    r = np.abs(discrete - exact)

    n = np.arange(1, N + 1, dtype=np.float64)
    bound = tau ** (sigma - alpha) * n ** (-bound_exponent(alpha, sigma))

    return TruncationReport(
        alpha=alpha, sigma=sigma, N=int(N), T=float(T), r=r, bound_ratio=r / bound
    )


def sup_ratio_stability(sups: Sequence[float]) -> float:
    """Largest factor between successive sup-ratios of an ``N``-doubling sweep."""
    sups = np.asarray(sups, dtype=np.float64)
    if sups.size < 2:
        return 1.0
    ratio = sups[1:] / sups[:-1]
    return float(np.max(np.maximum(ratio, 1.0 / ratio)))


def empirical_order(errors_by_N: Mapping[int, float]) -> float:
    """Return ``log2(e_N / e_2N)`` for the finest pair of a doubling sweep."""
    if len(errors_by_N) < 2:
        raise ParameterError("need errors for at least two step counts")

    Ns = sorted(errors_by_N)
    for coarse, fine in zip(Ns[:-1], Ns[1:]):
        if fine != 2 * coarse:
            raise ParameterError(f"step counts must double: {Ns}")

    coarse, fine = Ns[-2], Ns[-1]
    return float(np.log2(errors_by_N[coarse] / errors_by_N[fine]))
