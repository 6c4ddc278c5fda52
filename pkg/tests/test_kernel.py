"""L1 weights, the discrete Caputo operator and the complementary weights."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma

from subdiff_l1.errors import ParameterError
from subdiff_l1.kernel import (
    complementary_weights,
    discrete_caputo,
    discrete_caputo_all,
    l1_weights,
)
from subdiff_l1.special import caputo_of_power
from subdiff_l1.truncation import bound_exponent

alphas = st.floats(0.05, 0.95)

# 30-digit evaluations (mpmath) of the closed form and of the p recursion
A3_ALPHA04 = 0.364214665062307238512
P2_ALPHA05 = 0.439522067684932608869
P3_ALPHA05 = 0.363810058563126365331


class TestL1Weights:
    def test_first_weight(self):
        assert l1_weights(0.5, 4).a[0] == 1.0

    def test_closed_form_values(self):
        assert l1_weights(0.5, 4).a[1] == pytest.approx(math.sqrt(2) - 1, rel=1e-15)
        assert l1_weights(0.4, 4).a[3] == pytest.approx(A3_ALPHA04, rel=1e-14)

    def test_read_only(self):
        w = l1_weights(0.5, 4)
        with pytest.raises(ValueError):
            w.a[0] = 2.0

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, float("nan")])
    def test_rejects_alpha(self, alpha):
        with pytest.raises(ParameterError):
            l1_weights(alpha, 4)

    def test_rejects_n_max(self):
        with pytest.raises(ParameterError):
            l1_weights(0.5, 0)

    @given(alphas)
    def test_positive_decreasing(self, alpha):
        a = l1_weights(alpha, 200).a
        assert np.all(a > 0)
        assert np.all(np.diff(a) < 0)

    @given(alphas, st.integers(1, 500))
    def test_telescoping_sum(self, alpha, n):
        a = l1_weights(alpha, n).a
        assert math.fsum(a[:n]) == pytest.approx(n ** (1 - alpha), rel=1e-12)


class TestDiscreteCaputo:
    def test_constant_history_is_exactly_zero(self):
        w = l1_weights(0.3, 50)
        for n in range(1, 51):
            assert discrete_caputo(np.full(n + 1, 7.25), w, 0.01) == 0.0

    @given(alphas, st.integers(1, 200), st.floats(1e-3, 1.0))
    def test_linear_history_is_exact(self, alpha, n, tau):
        u = tau * np.arange(n + 1)
        value = discrete_caputo(u, l1_weights(alpha, n), tau)
        exact = (n * tau) ** (1 - alpha) / gamma(2 - alpha)
        assert value == pytest.approx(exact, rel=1e-12)

    def test_power_within_truncation_bound(self):
        alpha = sigma = 0.4
        tau, n = 0.1, 10
        u = (tau * np.arange(n + 1)) ** sigma
        value = discrete_caputo(u, l1_weights(alpha, n), tau)
        exact = caputo_of_power(alpha, sigma, n * tau)
        assert exact == pytest.approx(gamma(1.4), rel=1e-14)
        assert exact == pytest.approx(0.887264, abs=1e-6)
        bound = tau ** (sigma - alpha) * n ** (-bound_exponent(alpha, sigma))
        assert abs(value - exact) <= bound

    def test_field_history(self):
        w = l1_weights(0.6, 5)
        rng = np.random.default_rng(1)
        u = rng.standard_normal((6, 3))
        rows = discrete_caputo(u, w, 0.2)
        cols = [discrete_caputo(u[:, k], w, 0.2) for k in range(3)]
        np.testing.assert_allclose(rows, cols, rtol=1e-14)

    def test_all_levels_match_pointwise(self):
        alpha, tau = 0.35, 0.05
        u = np.sin(np.arange(41) * tau)
        w = l1_weights(alpha, 40)
        pointwise = [discrete_caputo(u[: n + 1], w, tau) for n in range(1, 41)]
        np.testing.assert_allclose(discrete_caputo_all(u, alpha, tau), pointwise, rtol=1e-13)

    def test_short_history_rejected(self):
        with pytest.raises(ParameterError):
            discrete_caputo([1.0], l1_weights(0.5, 3), 0.1)

    def test_short_weights_rejected(self):
        with pytest.raises(ParameterError):
            discrete_caputo(np.ones(10), l1_weights(0.5, 3), 0.1)


def _recursion_oracle(alpha, n_max):
    # straight transcription of the defining recursion, no vectorization
    a = [(i + 1) ** (1 - alpha) - i ** (1 - alpha) for i in range(n_max + 1)]
    p = [1.0]
    for n in range(1, n_max + 1):
        p.append(sum((a[j - 1] - a[j]) * p[n - j] for j in range(1, n + 1)))
    return np.array(p), np.array(a)


class TestComplementaryWeights:
    def test_known_values(self):
        p = complementary_weights(0.5, 3).p
        assert p[0] == 1.0
        assert p[1] == pytest.approx(2 - math.sqrt(2), rel=1e-15)
        assert p[2] == pytest.approx(P2_ALPHA05, rel=1e-14)
        assert p[3] == pytest.approx(P3_ALPHA05, rel=1e-14)

    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    def test_matches_recursion_oracle(self, alpha):
        p_ref, _ = _recursion_oracle(alpha, 60)
        np.testing.assert_allclose(complementary_weights(alpha, 60).p, p_ref, rtol=1e-12)

    @pytest.mark.parametrize("alpha", [round(0.1 * i, 1) for i in range(1, 10)])
    def test_lemma_properties(self, alpha):
        n_max = 2048
        a = l1_weights(alpha, n_max).a
        p = complementary_weights(alpha, n_max).p
        n = np.arange(1, n_max + 1)

        assert np.all(p > 0)
        assert np.all(p[1:] < (n + 1.0) ** (alpha - 1.0))

        conv = np.convolve(p, a)[: n_max + 1]
        for k_of in (lambda m: 1, lambda m: math.ceil(m / 2), lambda m: m):
            ks = np.array([k_of(m) for m in n])
            assert np.max(np.abs(conv[n - ks] - 1.0)) <= 1e-10

        lhs = gamma(2 - alpha) * np.cumsum(p[:-1])
        assert np.all(lhs <= n**alpha / gamma(1 + alpha) + 1e-10)

    @given(alphas, st.integers(1, 120))
    @settings(max_examples=50)
    def test_identity_every_k(self, alpha, n):
        a = l1_weights(alpha, n).a
        p = complementary_weights(alpha, n).p
        for k in range(1, n + 1):
            s = math.fsum(p[n - j] * a[j - k] for j in range(k, n + 1))
            assert s == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", [0.3, 0.7])
    def test_weighted_sums_bounded(self, alpha):
        # sum_j p_{n-j} j^(-gamma) against n^(alpha - 1) (gamma > 1) and
        # Gamma(1 - gamma)/Gamma(1 - gamma + alpha) n^(alpha - gamma) (gamma < 1)
        n_max = 2048
        p = complementary_weights(alpha, n_max).p
        j = np.arange(1, n_max + 1, dtype=float)
        n = j
        for g in (1.2, 1.5, 0.2, 0.5):
            sums = np.convolve(p, np.concatenate(([0.0], j**-g)))[1 : n_max + 1]
            if g > 1:
                scale = n ** (alpha - 1)
            else:
                scale = gamma(1 - g) / gamma(1 - g + alpha) * n ** (alpha - g)
            ratio = sums / scale
            tail = ratio[15:]
            # bounded, and settled: the sup over n >= 1024 is close to the sup over n >= 16
            assert np.all(np.isfinite(ratio))
            assert tail.max() < 50
            assert ratio[1023:].max() <= tail.max() <= 1.5 * ratio[1023:].max()
