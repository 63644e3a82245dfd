import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from viscowave.kernel import KernelError, RelaxationKernel


class TestExponential:
    def test_mu_at_zero(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        assert k.mu(0.0) == 1.0

    def test_mu_at_one(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        assert k.mu(1.0) == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_mu_prime_at_zero(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        assert k.mu_prime(0.0) == -1.0

    def test_tail_mass_and_k0(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        assert k.tail_mass(0.0) == 1.0
        assert k.k0 == 2.0

    def test_tail_mass_at_ln100(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        assert k.tail_mass(math.log(100.0)) == pytest.approx(0.01, rel=1e-14)

    def test_k_at_infinity_limit(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        assert abs(k.k_at(1e9) - 1.0) < 1e-6

    def test_report(self):
        report = RelaxationKernel.exponential(1.0, 2.0).validate_assumptions()
        assert report.ok
        assert report.decay_class == "exponential"
        assert report.C == 2.0
        assert report.k0 == 1.5


class TestPolynomial:
    def test_mu_at_one(self):
        k = RelaxationKernel.polynomial(1.0, 1.5)
        assert k.mu(1.0) == pytest.approx(0.25, rel=1e-15)

    def test_mu_prime_at_zero(self):
        k = RelaxationKernel.polynomial(1.0, 1.5)
        assert k.mu_prime(0.0) == -2.0

    def test_mu_prime_vanishes_at_large_s(self):
        k = RelaxationKernel.polynomial(1.0, 1.5)
        assert abs(k.mu_prime(1e9)) < 1e-20

    def test_tail_mass_and_k0(self):
        k = RelaxationKernel.polynomial(1.0, 1.5)
        assert k.tail_mass(0.0) == pytest.approx(1.0, rel=1e-15)
        assert k.k0 == pytest.approx(2.0, rel=1e-15)

    def test_k_at_one(self):
        k = RelaxationKernel.polynomial(1.0, 1.5)
        assert k.k_at(1.0) == pytest.approx(1.5, rel=1e-14)

    def test_decay_constant(self):
        # -mu'/mu^r is the constant 2 for this kernel, so the grid infimum
        # must land on 2 up to round-off
        report = RelaxationKernel.polynomial(1.0, 1.5).validate_assumptions()
        assert report.ok
        assert report.decay_class == "polynomial"
        assert report.r == 1.5
        assert report.C == pytest.approx(2.0, rel=1e-9)

    def test_r_out_of_range_rejected(self):
        with pytest.raises(KernelError):
            RelaxationKernel.polynomial(1.0, 2.5)
        with pytest.raises(KernelError):
            RelaxationKernel.polynomial(1.0, 1.0)


class TestValidation:
    def test_bad_parameters(self):
        with pytest.raises(KernelError):
            RelaxationKernel.exponential(0.0, 1.0)
        with pytest.raises(KernelError):
            RelaxationKernel.exponential(1.0, -1.0)
        with pytest.raises(KernelError):
            RelaxationKernel(family="gaussian", mu0=1.0)

    def test_negative_s_rejected(self):
        k = RelaxationKernel.exponential(1.0, 1.0)
        with pytest.raises(KernelError):
            k.mu(-0.1)
        with pytest.raises(KernelError):
            k.mu_prime(-0.1)
        with pytest.raises(KernelError):
            k.tail_mass(-0.1)


@pytest.mark.parametrize("kernel", [
    RelaxationKernel.exponential(1.0, 1.0),
    RelaxationKernel.exponential(0.5, 3.0),
    RelaxationKernel.polynomial(1.0, 1.5),
    RelaxationKernel.polynomial(2.0, 1.8),
], ids=["exp11", "exp053", "poly115", "poly218"])
class TestSharedInvariants:
    def test_sampled_signs_and_decay_inequality(self, kernel):
        s = np.concatenate([[0.0], np.logspace(-6, 2, 500)])
        mu = kernel.mu(s)
        mup = kernel.mu_prime(s)
        C = kernel.decay_constant()
        assert np.all(mu > 0)
        assert np.all(mup <= 0)
        if kernel.family == "exponential":
            assert np.all(mup + C * mu <= 1e-12 * np.maximum(1.0, mu))
        else:
            assert np.all(mup + C * mu ** kernel.r
                          <= 1e-12 * np.maximum(1.0, mu))

    def test_k_at_consistency(self, kernel):
        assert kernel.k_at(0.0) - 1.0 == pytest.approx(kernel.tail_mass(0.0),
                                                       rel=1e-12)
        s = np.linspace(0.0, 20.0, 50)
        k = kernel.k_at(s)
        # strictly decreasing until the tail falls below double-precision
        # resolution of 1 + tail
        assert np.all(np.diff(k) <= 0)
        assert k[1] < k[0]

    def test_tail_mass_against_dense_quadrature(self, kernel):
        from scipy.integrate import simpson

        s1, s2 = 0.3, 7.0
        s = np.linspace(s1, s2, 10_001)
        quad = float(simpson(kernel.mu(s), x=s))
        exact = kernel.tail_mass(s1) - kernel.tail_mass(s2)
        assert quad == pytest.approx(exact, rel=1e-8)

    def test_mu_prime_tail_is_minus_mu(self, kernel):
        for s in (0.0, 1.0, 12.5):
            assert kernel.mu_prime_tail(s) == -kernel.mu(s)


@settings(max_examples=60, deadline=None)
@given(mu0=st.floats(0.01, 10.0), c=st.floats(0.01, 10.0),
       s=st.floats(0.0, 100.0))
def test_exponential_pointwise_properties(mu0, c, s):
    k = RelaxationKernel.exponential(mu0, c)
    if c * s < 700.0:  # beyond this exp(-c s) underflows to exactly 0
        assert k.mu(s) > 0
    assert k.mu_prime(s) <= 0
    assert k.mu_prime(s) + c * k.mu(s) <= 1e-12 * max(1.0, k.mu(s))


@settings(max_examples=60, deadline=None)
@given(c=st.floats(0.01, 10.0), r=st.floats(1.05, 1.95),
       s=st.floats(0.0, 100.0))
def test_polynomial_pointwise_properties(c, r, s):
    k = RelaxationKernel.polynomial(c, r)
    assert k.mu(s) > 0
    assert k.mu_prime(s) <= 0
    assert math.isfinite(k.tail_mass(0.0))
