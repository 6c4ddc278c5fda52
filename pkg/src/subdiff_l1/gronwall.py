"""Discrete fractional Gronwall bound with Mittag-Leffler envelopes.

A non-negative sequence with

.. math::

    D_\\tau^\\alpha y_n \\le \\lambda y_n + \\mu_1 n^{-\\sigma_1}
        + \\mu_2 n^{-\\sigma_2} + \\eta

is bounded, for :math:`\\tau^\\alpha < 1 / (2 \\Gamma(2 - \\alpha) \\lambda)`, by

.. math::

    C \\big[y_0 E_{\\alpha,1}(z_n)
        + \\mu_1 \\tau^\\alpha n^{\\alpha-1} E_{\\alpha,\\alpha}(z_n)
        + \\mu_2 \\tau^\\alpha n^{\\alpha-\\sigma_2} E_{\\alpha,1-\\sigma_2}(z_n)
        + \\eta \\tau^\\alpha n^\\alpha E_{\\alpha,1}(z_n)\\big],
    \\qquad z_n = 2 \\Gamma(2 - \\alpha) \\lambda t_n^\\alpha.

The sequence attaining equality in every step dominates every other admissible
sequence (the recursion has positive coefficients), so it serves as the
worst-case oracle for the envelope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma

from subdiff_l1.errors import ParameterError, ThresholdError
from subdiff_l1.kernel import check_alpha, complementary_weights, l1_weights
from subdiff_l1.special import mittag_leffler

__all__ = [
    "DEFAULT_ENVELOPE_CONSTANT",
    "GronwallParams",
    "MatrixCheckReport",
    "envelope_grid",
    "gronwall_envelope",
    "propagation_matrix",
    "propagation_matrix_checks",
    "tau_threshold",
    "worst_case_sequence",
]

#: absorbs the factor 2 of the step-size condition and the implied constants
DEFAULT_ENVELOPE_CONSTANT = 4.0
#: largest matrix order for the dense checks
MAX_MATRIX_ORDER = 512


def tau_threshold(alpha: float, lam: float) -> float:
    """``tau_* = (2 Gamma(2 - alpha) lambda)^(-1/alpha)``."""
    return (2.0 * float(gamma(2.0 - alpha)) * lam) ** (-1.0 / alpha)


@dataclass(frozen=True)
class GronwallParams:
    alpha: float
    lam: float
    tau: float
    mu1: float = 0.0
    mu2: float = 0.0
    eta: float = 0.0
    sigma1: float = 1.5
    sigma2: float = 0.5
    y0: float = 0.0

    def __post_init__(self) -> None:
        check_alpha(self.alpha)
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive: {self.lam}")
        if min(self.mu1, self.mu2, self.eta, self.y0) < 0:
            raise ParameterError("mu1, mu2, eta and y0 must be non-negative")
        if not (self.sigma1 > 1.0 and self.sigma2 < 1.0):
            raise ParameterError(
                f"need sigma1 > 1 and sigma2 < 1: ({self.sigma1}, {self.sigma2})"
            )
        if not self.tau > 0:
            raise ParameterError(f"tau must be positive: {self.tau}")
        threshold = tau_threshold(self.alpha, self.lam)
        if self.tau >= threshold:
            raise ThresholdError(
                f"tau = {self.tau:.6g} is not below tau_* = {threshold:.6g} "
                f"(alpha = {self.alpha}, lambda = {self.lam})"
            )

    @property
    def growth(self) -> float:
        """``2 Gamma(2 - alpha) lambda tau^alpha`` (below 1 by assumption)."""
        return 2.0 * float(gamma(2.0 - self.alpha)) * self.lam * self.tau**self.alpha

    def forcing(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=np.float64)
        return self.mu1 * n ** (-self.sigma1) + self.mu2 * n ** (-self.sigma2) + self.eta


@lru_cache(maxsize=65536)
def _ml(alpha: float, beta: float, z: float) -> float:
    return mittag_leffler(alpha, beta, z)


def gronwall_envelope(
    params: GronwallParams,
    n,
    constant: float = DEFAULT_ENVELOPE_CONSTANT,
):
    """Evaluate the Mittag-Leffler envelope at step(s) *n* (``n >= 1``)."""
    p = params
    ns = np.atleast_1d(np.asarray(n))
    if np.any(ns < 1):
        raise ParameterError("envelope is defined for n >= 1")

    a = p.alpha
    g2 = 2.0 * float(gamma(2.0 - a)) * p.lam
    ta = p.tau**a

    out = np.empty(ns.shape)
    for i, k in enumerate(ns.astype(np.float64)):
        z = g2 * (k * p.tau) ** a
        value = 0.0
        if p.y0 or p.eta:
            e1 = _ml(a, 1.0, z)
            value += p.y0 * e1 + p.eta * ta * k**a * e1
        if p.mu1:
            value += p.mu1 * ta * k ** (a - 1.0) * _ml(a, a, z)
        if p.mu2:
            value += p.mu2 * ta * k ** (a - p.sigma2) * _ml(a, 1.0 - p.sigma2, z)
        out[i] = constant * value

    return float(out[0]) if np.ndim(n) == 0 else out


def worst_case_sequence(params: GronwallParams, N: int) -> np.ndarray:
    """Return ``y_0, ..., y_N`` satisfying the Gronwall hypothesis with equality.

    Each step solves ``(c - lambda) y_n = F_n + c H_n`` where
    ``c = tau^(-alpha) / Gamma(2 - alpha)`` and ``H_n`` is the L1 history.
    """
    p = params
    if int(N) != N or N < 1:
        raise ParameterError(f"N must be a positive integer: {N}")

    w = l1_weights(p.alpha, N)
    a = w.a
    c = p.tau ** (-p.alpha) / w.gamma_2ma
    diag = c - p.lam
    if diag <= p.lam:
        # only reachable when tau sits right at the threshold
        raise ThresholdError(f"diagonal coefficient {c:.6g} does not exceed 2 lambda")

    forcing = p.forcing(np.arange(1, N + 1))
    y = np.empty(N + 1)
    y[0] = p.y0
    for n in range(1, N + 1):
        history = a[n - 1] * y[0]
        if n > 1:
            history += (a[n - 2 :: -1] - a[n - 1 : 0 : -1]) @ y[1:n]
        y[n] = (forcing[n - 1] + c * history) / diag

    return y


def propagation_matrix(alpha: float, lam: float, tau: float, n: int) -> np.ndarray:
    """Strictly upper triangular Toeplitz matrix acting on ``(y_n, ..., y_1)``.

    Row ``r`` holds ``p_1, p_2, ...`` starting at column ``r + 1``, scaled by
    ``2 Gamma(2 - alpha) lambda tau^alpha``.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"matrix order must be positive: {n}")
    if n > MAX_MATRIX_ORDER:
        raise ParameterError(f"dense checks are limited to n <= {MAX_MATRIX_ORDER}")

    p = complementary_weights(alpha, max(n, 2)).p
    offset = np.subtract.outer(np.arange(n), np.arange(n))  # row - col
    J = np.where(offset < 0, p[np.clip(-offset, 0, n)], 0.0)
    return 2.0 * float(gamma(2.0 - alpha)) * lam * tau**alpha * J


@dataclass
class MatrixCheckReport:
    alpha: float
    lam: float
    tau: float
    n: int
    sigma1: float
    sigma2: float
    #: max |entry| of J^n
    nilpotency_residual: float
    #: max_k (J^m Z_2)_k / bound_k for m = 1, 2, 3
    power_ratios: list[float] = field(default_factory=list)
    #: allowed ratio for property (ii), ``Gamma(2 - alpha)^-m``
    power_slack: list[float] = field(default_factory=list)
    #: empirical constants of the remaining properties
    constants: dict[str, float] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def propagation_matrix_checks(
    alpha: float,
    lam: float,
    tau: float,
    n: int,
    *,
    sigma1: float = 1.5,
    sigma2: float = 0.5,
    powers: int = 3,
) -> MatrixCheckReport:
    """Check the structural and componentwise properties of the propagation matrix.

    * ``J^n = 0`` exactly;
    * ``J^m Z_2 <= s_m Gamma(1 - sigma2) g^m / Gamma(1 - sigma2 + m alpha)
      (k^(m alpha - sigma2))_k`` with ``g = 2 Gamma(2 - alpha) lambda tau^alpha``
      and slack ``s_m = Gamma(2 - alpha)^-m``;
    * empirical constants for ``J Z_1 <~ g (k^(alpha - 1))_k`` and for the
      Mittag-Leffler envelopes of ``sum_j J^j Z`` with ``Z`` in ``Z_1, Z_2, Z_3``.

    The vectors are ordered ``k = n, n - 1, ..., 1``.
    """
    alpha = check_alpha(alpha)
    J = propagation_matrix(alpha, lam, tau, n)
    g = 2.0 * float(gamma(2.0 - alpha)) * lam * tau**alpha
    k = np.arange(n, 0, -1, dtype=np.float64)

    report = MatrixCheckReport(
        alpha=alpha, lam=lam, tau=tau, n=int(n), sigma1=sigma1, sigma2=sigma2,
        nilpotency_residual=float(np.max(np.abs(np.linalg.matrix_power(J, n)))),
    )
    if report.nilpotency_residual != 0.0:
        report.violations.append(
            f"J^{n} has nonzero entries (max {report.nilpotency_residual:.3e})"
        )

    # (ii)
    z2 = k ** (-sigma2)
    v = z2
    for m in range(1, powers + 1):
        v = J @ v
        bound = (
            math.gamma(1.0 - sigma2) * g**m / math.gamma(1.0 - sigma2 + m * alpha)
            * k ** (m * alpha - sigma2)
        )
        ratio = float(np.max(v / bound))
        slack = float(gamma(2.0 - alpha)) ** (-m)
        report.power_ratios.append(ratio)
        report.power_slack.append(slack)
        if ratio > slack:
            idx = int(np.argmax(v / bound))
            report.violations.append(
                f"(ii) m = {m}: ratio {ratio:.4f} exceeds {slack:.4f} at k = {int(k[idx])}"
            )

    # (iv)
    z1 = k ** (-sigma1)
    report.constants["iv"] = float(np.max((J @ z1) / (g * k ** (alpha - 1.0))))

    # (iii), (v), (vi): partial sums sum_{j=1}^{n-1} J^j Z
    t = tau * k
    zk = 2.0 * float(gamma(2.0 - alpha)) * lam * t**alpha
    env_iii = tau**alpha * k ** (alpha - sigma2) * np.array(
        [_ml(alpha, 1.0 - sigma2, z) for z in zk]
    )
    env_v = g * k ** (alpha - 1.0) * np.array([_ml(alpha, alpha, z) for z in zk])
    env_vi = tau**alpha * k**alpha * np.array([_ml(alpha, 1.0, z) for z in zk])

    for name, z, env in (("iii", z2, env_iii), ("v", z1, env_v), ("vi", np.ones(n), env_vi)):
        total = np.zeros(n)
        v = z
        for _ in range(1, n):
            v = J @ v
            if not np.any(v):
                break
            total += v
        report.constants[name] = float(np.max(total / env))

    return report


def envelope_grid(
    alphas=(0.3, 0.5, 0.7),
    lams=(0.5, 1.0, 2.0),
    taus=(1.0 / 2048, 1.0 / 1024, 1.0 / 512),
    N: int = 512,
    sigma1: float = 1.5,
    sigma2: float = 0.5,
    constant: float = DEFAULT_ENVELOPE_CONSTANT,
) -> list[dict]:
    """Compare the worst-case sequence with the envelope over a parameter grid.

    Every ``(alpha, lambda, tau)`` cell is combined with each non-zero choice of
    ``(mu1, mu2, eta, y0)`` in ``{0, 1}^4``. Returns one record per combination
    with the smallest envelope constant that would still dominate.
    """
    records = []
    for alpha, lam, tau in itertools.product(alphas, lams, taus):
        for mu1, mu2, eta, y0 in itertools.product((0.0, 1.0), repeat=4):
            if not (mu1 or mu2 or eta or y0):
                continue
            params = GronwallParams(
                alpha=alpha, lam=lam, tau=tau, mu1=mu1, mu2=mu2, eta=eta,
                sigma1=sigma1, sigma2=sigma2, y0=y0,
            )
            y = worst_case_sequence(params, N)
            env = gronwall_envelope(params, np.arange(1, N + 1), constant=1.0)
            ratio = y[1:] / env
            worst = int(np.argmax(ratio))
            records.append({
                "alpha": alpha, "lambda": lam, "tau": tau,
                "mu1": mu1, "mu2": mu2, "eta": eta, "y0": y0,
                "sigma1": sigma1, "sigma2": sigma2, "N": N,
                "min_constant": float(ratio[worst]),
                "worst_n": worst + 1,
                "constant": constant,
                "passed": bool(ratio[worst] <= constant),
            })

    return records
