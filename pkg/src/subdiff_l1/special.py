"""Mittag-Leffler function and exact Caputo derivatives of power functions."""

from __future__ import annotations

import math
from collections.abc import Callable

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import gamma, gammaln, gammasgn, rgamma

from subdiff_l1.errors import ConvergenceError, ParameterError
from subdiff_l1.kernel import check_alpha

__all__ = [
    "caputo_of_power",
    "caputo_quadrature",
    "mittag_leffler",
]

ML_MAX_ARGUMENT = 50.0
ML_MAX_TERMS = 100_000
ML_MIN_TERMS = 10
ML_RTOL = 1.0e-16

# log of the largest |term| / |sum| tolerated in double precision
_MAX_LOST_LOG = 2.5 * math.log(10.0)
_LOG_OVERFLOW = 700.0

_ONE_MINUS = math.nextafter(1.0, 0.0)


def _is_pole(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def _series_terms(alpha: float, beta: float, z: float) -> list[tuple[float, float]]:
    """Return ``(sign, log|term|)`` pairs of the truncated series."""
    logz = math.log(abs(z)) if z != 0.0 else -math.inf
    terms = []
    log_partial = -math.inf
    previous = math.inf
    # alternating sums can end up far below their largest term; keep summing
    # until the tail is negligible against a pessimistic result estimate
    log_floor = 0.0 if z >= 0.0 else -2.0 * math.log1p(abs(z)) - 10.0

    for k in range(ML_MAX_TERMS):
        arg = k * alpha + beta
        if _is_pole(arg) or (k > 0 and z == 0.0):
            sign, logmag = 0.0, -math.inf
        else:
            sign = (-1.0 if (z < 0 and k % 2) else 1.0) * float(gammasgn(arg))
            logmag = (k * logz if k > 0 else 0.0) - float(gammaln(arg))
        terms.append((sign, logmag))
        log_partial = max(log_partial, logmag)
        if z > 0.0 and logmag >= _LOG_OVERFLOW:
            # every term is positive, so the sum overflows as well
            raise ParameterError(
                f"E_{{{alpha}, {beta}}}({z}) overflows double precision"
            )

        if z == 0.0 and k + 1 >= ML_MIN_TERMS:
            return terms

        # log|term| is concave in k once k alpha + beta > 0, so a decrease
        # means the peak has passed and the tail decays monotonically
        past_peak = arg > 1.0 and logmag < previous
        if (
            k + 1 >= ML_MIN_TERMS
            and past_peak
            and logmag <= math.log(ML_RTOL) + min(log_partial, log_floor)
        ):
            return terms
        previous = logmag

    raise ConvergenceError(
        f"Mittag-Leffler series did not converge in {ML_MAX_TERMS} terms "
        f"(alpha = {alpha}, beta = {beta}, z = {z})"
    )


def _series_mp(alpha: float, beta: float, z: float, dps: int, nterms: int) -> float:
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        x = mpmath.mpf(z)
        total = mpmath.fsum(x**k * mpmath.rgamma(k * a + b) for k in range(nterms))
        return float(total)


def mittag_leffler(alpha: float, beta: float, z: float) -> float:
    r"""Evaluate :math:`E_{\alpha, \beta}(z) = \sum_k z^k / \Gamma(k \alpha + \beta)`.

    Real arguments with :math:`|z| \le 50` only. The series is summed exactly
    (:func:`math.fsum`) in double precision when that is safe. For negative
    *z* the alternating series cancels catastrophically, so the same partial
    sum is evaluated with :mod:`mpmath` at a working precision that covers the
    largest term, and repeated with more digits until two passes agree.

    Terms with :math:`k \alpha + \beta` a non-positive integer vanish (the
    reciprocal Gamma function is zero there).
    """
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive: {alpha}")
    z = float(z)
    beta = float(beta)
    if not abs(z) <= ML_MAX_ARGUMENT:
        raise ParameterError(
            f"|z| must not exceed {ML_MAX_ARGUMENT} for the series: z = {z}"
        )

    if z == 0.0:
        # only the k = 0 term survives
        return float(rgamma(beta))

    terms = _series_terms(alpha, beta, z)
    log_largest = max(logmag for _, logmag in terms)
    if log_largest == -math.inf:
        return 0.0

    if z >= 0.0 and log_largest >= _LOG_OVERFLOW:
        raise ParameterError(f"E_{{{alpha}, {beta}}}({z}) overflows double precision")
    if z >= 0.0:
        result = math.fsum(sign * math.exp(logmag) for sign, logmag in terms)
        if result != 0.0 and log_largest - math.log(abs(result)) < _MAX_LOST_LOG:
            return result

    nterms = len(terms) + 20
    dps = 30 + int(math.ceil(max(log_largest, 0.0) / math.log(10.0)))
    result = _series_mp(alpha, beta, z, dps, nterms)
    if not math.isfinite(result):
        raise ParameterError(f"E_{{{alpha}, {beta}}}({z}) overflows double precision")
    for _ in range(8):
        dps += 20
        refined = _series_mp(alpha, beta, z, dps, nterms)
        if abs(refined - result) <= 4.0e-16 * abs(refined):
            return refined
        result = refined

    raise ConvergenceError(
        f"Mittag-Leffler series is numerically unstable at z = {z}"
    )


def caputo_of_power(alpha: float, sigma: float, t):
    r"""Exact Caputo derivative of :math:`u(t) = t^\sigma`.

    .. math::

        \partial_t^\alpha t^\sigma
            = \frac{\Gamma(\sigma + 1)}{\Gamma(\sigma + 1 - \alpha)} t^{\sigma - \alpha}.
    """
    alpha = check_alpha(alpha)
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive: {sigma}")

    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise ParameterError("time must be positive")

    coeff = np.exp(gammaln(sigma + 1.0) - gammaln(sigma + 1.0 - alpha))
    result = coeff * t ** (sigma - alpha)

    return float(result) if result.ndim == 0 else result


def caputo_quadrature(
    du: Callable[[float], float],
    alpha: float,
    t: float,
    *,
    singularity: float = 0.0,
) -> float:
    r"""Caputo derivative at *t* by adaptive quadrature of its defining integral.

    The substitution :math:`s = t (1 - v^{1/(1 - \alpha)})` removes the
    :math:`(t - s)^{-\alpha}` kernel singularity exactly, leaving

    .. math::

        \frac{t^{1 - \alpha}}{\Gamma(2 - \alpha)}
        \int_0^1 u'\big(t (1 - v^{1/(1-\alpha)})\big) \,\mathrm{d}v.

    :arg du: derivative :math:`u'(s)` of the function.
    :arg singularity: exponent :math:`e` with :math:`u'(s) \sim s^e` as
        :math:`s \to 0`; a negative value is handled by an algebraic weight
        at :math:`v = 1`.
    """
    alpha = check_alpha(alpha)
    if t <= 0:
        raise ParameterError("time must be positive")

    q = 1.0 / (1.0 - alpha)

    def s_of(v: float) -> float:
        # 1 - v^q computed without cancellation near v = 1
        return -t * math.expm1(q * math.log(v)) if v > 0 else t

    if singularity < 0:

        def integrand(v: float) -> float:
            v = min(v, _ONE_MINUS)
            return float(du(s_of(v))) / (1.0 - v) ** singularity

        value, _ = integrate.quad(
            integrand, 0.0, 1.0, weight="alg", wvar=(0.0, singularity),
            epsabs=0.0, epsrel=1.0e-12, limit=200,
        )
    else:
        value, _ = integrate.quad(
            lambda v: float(du(s_of(v))), 0.0, 1.0,
            epsabs=0.0, epsrel=1.0e-12, limit=200,
        )

    return t ** (1.0 - alpha) / float(gamma(2.0 - alpha)) * value
