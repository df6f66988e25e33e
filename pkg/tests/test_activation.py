import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lazygap.activation import (ActivationError, activation_profile,
                                gaussian_quadrature, hermite_eval, profile_for)

SQRT_2PI = math.sqrt(2.0 * math.pi)


class TestHermiteEval:
    def test_first_polynomials(self):
        assert hermite_eval(0, 3.7) == 1.0
        assert hermite_eval(2, 2.0) == 3.0
        assert hermite_eval(3, 1.0) == -2.0

    def test_degree_cap(self):
        with pytest.raises(ActivationError):
            hermite_eval(65, 0.0)
        with pytest.raises(ActivationError):
            hermite_eval(-1, 0.0)

    @given(st.integers(min_value=0, max_value=8),
           st.floats(min_value=-4, max_value=4))
    @settings(max_examples=60, deadline=None)
    def test_recurrence_consistency(self, k, x):
        """He_{k+1} = x He_k - k He_{k-1} holds pointwise."""
        lhs = hermite_eval(k + 1, x)
        rhs = x * hermite_eval(k, x) - (k * hermite_eval(k - 1, x) if k else 0.0)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("order", [20, 64, 200])
    def test_orthogonality(self, order):
        """E[He_j He_k] = k! delta_jk under the quadrature measure."""
        x, w = gaussian_quadrature(order)
        for j in range(7):
            for k in range(7):
                val = float(np.sum(w * hermite_eval(j, x) * hermite_eval(k, x)))
                expect = math.factorial(k) if j == k else 0.0
                assert val == pytest.approx(expect, abs=1e-8)


class TestQuadratureRule:
    @pytest.mark.parametrize("order", [10, 20, 50, 100, 200, 400])
    def test_gaussian_moments(self, order):
        """E[G^{2m}] = (2m-1)!! reproduced at every supported order."""
        x, w = gaussian_quadrature(order)
        assert float(np.sum(w)) == pytest.approx(1.0, abs=1e-12)
        for m, expect in ((1, 1.0), (2, 3.0), (3, 15.0)):
            assert float(np.sum(w * x ** (2 * m))) == pytest.approx(expect, abs=1e-10)


class TestActivationProfile:
    def test_quadratic_analytic(self):
        p = profile_for("quadratic")
        assert p.lambda0 == pytest.approx(0.0, abs=1e-10)
        assert p.lambda1 == pytest.approx(0.0, abs=1e-10)
        assert p.lambda2 == pytest.approx(2.0, abs=1e-10)
        assert p.lambda_tilde == pytest.approx(2.0, abs=1e-10)

    def test_relu_analytic(self):
        p = profile_for("relu")
        assert p.lambda0 == pytest.approx(1.0 / SQRT_2PI, abs=1e-8)
        assert p.lambda1 == pytest.approx(0.5, abs=1e-8)
        assert p.lambda2 == pytest.approx(1.0 / SQRT_2PI, abs=1e-8)
        # E[relu^2] - lambda0^2 - lambda1^2 for the centered activation
        assert p.lambda_tilde == pytest.approx(0.25 - 1.0 / (2 * math.pi), abs=1e-8)

    def test_linear_flagged_degenerate(self):
        p = activation_profile(lambda x: x, name="linear")
        assert p.lambda_tilde == pytest.approx(0.0, abs=1e-10)
        assert p.degenerate
        with pytest.raises(ActivationError):
            p.require_usable()

    def test_polynomial_low_order_exact(self):
        """Degree <= 6 polynomials match analytic coefficients from order 10 up."""
        # sigma = He_2 + 0.25 He_6 has lambda2 = 2, E[sigma^2] = 2 + 6!/16
        sigma = lambda x: hermite_eval(2, x) + 0.25 * hermite_eval(6, x)
        x, w = gaussian_quadrature(10)
        assert float(np.sum(w * sigma(x))) == pytest.approx(0.0, abs=1e-10)
        assert float(np.sum(w * sigma(x) * (x * x - 1)))  == pytest.approx(2.0, abs=1e-10)
        for order in (20, 64, 200):
            p = activation_profile(sigma, quad_order=order)
            assert p.lambda0 == pytest.approx(0.0, abs=1e-10)
            assert p.lambda1 == pytest.approx(0.0, abs=1e-10)
            assert p.lambda2 == pytest.approx(2.0, abs=1e-10)
            assert p.lambda_tilde == pytest.approx(2.0 + math.factorial(6) / 16,
                                                   abs=1e-9)

    def test_doubling_order_stable(self):
        """Doubling quad_order moves each stored field by less than 1e-8."""
        for name in ("quadratic", "relu", "tanh"):
            a = profile_for(name, quad_order=200)
            b = profile_for(name, quad_order=400)
            for f in ("lambda0", "lambda1", "lambda2", "lambda_tilde"):
                assert abs(getattr(a, f) - getattr(b, f)) < 1e-8, (name, f)

    def test_parseval_at_truncation(self):
        for name in ("quadratic", "relu", "tanh"):
            p = profile_for(name)
            second_moment = p.lambda_tilde + p.lambda1**2
            assert p.lambda1**2 + p.lambda2**2 / 2 <= second_moment + 1e-8

    def test_residual_bound(self):
        """lambda_tilde >= lambda2^2 / 2 since higher coefficients add energy."""
        for name in ("quadratic", "relu", "tanh"):
            p = profile_for(name)
            assert p.lambda_tilde >= 0.5 * p.lambda2**2 - 1e-8

    def test_rejects_low_order(self):
        with pytest.raises(ActivationError):
            activation_profile(np.tanh, quad_order=10)

    def test_rejects_non_finite(self):
        with pytest.raises(ActivationError):
            activation_profile(lambda x: np.exp(x * x), name="blowup")

    def test_unknown_name(self):
        with pytest.raises(ActivationError):
            profile_for("swish9000")
