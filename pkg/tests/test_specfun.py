import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from fracapprox.specfun import (ConvergenceError, MLParams, SeriesControl, SingularDerivative,
                                beta_value, binom_general, gamma, mittag_leffler,
                                ml_solution_derivative)


def test_gamma_values():
    assert gamma(1) == pytest.approx(1.0, rel=1e-15)
    assert gamma(5) == pytest.approx(24.0, rel=1e-15)
    assert gamma(0.5) == pytest.approx(1.7724538509055160, rel=1e-14)


def test_gamma_matches_mpmath_on_range():
    for x in np.linspace(-49.7, 169.5, 101):
        assert gamma(x) == pytest.approx(float(mpmath.gamma(x)), rel=1e-12)


def test_gamma_errors():
    with pytest.raises(ValueError):
        gamma(0)
    with pytest.raises(ValueError):
        gamma(-3)
    with pytest.raises(OverflowError):
        gamma(172)


def test_beta_values():
    assert beta_value(1, 1) == pytest.approx(1.0, rel=1e-14)
    assert beta_value(0.5, 0.5) == pytest.approx(math.pi, rel=1e-14)
    assert beta_value(2, 3) == pytest.approx(1 / 12, rel=1e-14)
    with pytest.raises(ValueError):
        beta_value(0, 1)


def test_beta_against_quadrature():
    for z in (0.25, 0.7, 1.9, 4.0):
        for w in (0.3, 1.0, 3.5):
            ref, _ = integrate.quad(lambda s: 1.0, 0, 1, weight="alg", wvar=(z - 1, w - 1),
                                    epsabs=0, epsrel=1e-13)
            assert beta_value(z, w) == pytest.approx(ref, rel=1e-10)


def test_binom_general():
    assert binom_general(-0.5, 0) == 1.0
    for k in range(8):
        assert binom_general(-1, k) == (-1) ** k
    assert binom_general(-1.5, 2) == pytest.approx(1.875, rel=1e-15)
    with pytest.raises(ValueError):
        binom_general(1.0, -1)


def test_binom_root_test_bound():
    for n in range(1, 5):
        for k in range(61):
            assert abs(binom_general(-n / 2, k)) <= (n + k + 1) ** (n + 1)


def test_mittag_leffler_closed_forms():
    z = np.linspace(-5, 5, 41)
    assert np.allclose(mittag_leffler(1, 1, z), np.exp(z), rtol=1e-12, atol=0)
    assert mittag_leffler(2, 1, 4.0) == pytest.approx(math.cosh(2), rel=1e-13)
    for beta in (0.5, 1.0, 2.5):
        assert mittag_leffler(0.7, beta, 0.0) == pytest.approx(1 / math.gamma(beta), rel=1e-15)


def test_mittag_leffler_against_mpmath_series():
    for alpha in (0.3, 0.7, 1.5, 2.5):
        for z in (-2.0, -0.5, 0.3, 2.0):
            ref = mpmath.nsum(lambda j: mpmath.mpf(z) ** j / mpmath.gamma(alpha * j + 1),
                              [0, mpmath.inf])
            # the plain series loses digits to cancellation: bound by sum of |terms|
            bound = 1e-14 * mittag_leffler(alpha, 1, abs(z)) + 1e-13 * abs(float(ref))
            assert abs(mittag_leffler(alpha, 1, z) - float(ref)) <= bound


def test_mittag_leffler_tolerance_stability():
    loose = SeriesControl(rel_tol=1e-12)
    z = np.linspace(-5, 5, 21)
    for alpha in (0.3, 0.7, 1.5, 2.5):
        a = mittag_leffler(alpha, 1, z)
        b = mittag_leffler(alpha, 1, z, loose)
        assert np.all(np.abs(a - b) <= 1e-10 * np.abs(a))


def test_mittag_leffler_guards():
    with pytest.raises(ValueError):
        mittag_leffler(0.5, 1, 60.0)
    with pytest.raises(ConvergenceError):
        mittag_leffler(0.5, 1, 10.0, SeriesControl(max_terms=5))
    with pytest.raises(ValueError):
        mittag_leffler(0, 1, 1.0)


def test_solution_derivative_trivial_and_exponential():
    t = np.linspace(0, 3, 7)
    assert np.all(ml_solution_derivative(MLParams(0.6, lam=0.0), t) == 1.0)
    assert ml_solution_derivative(MLParams(1.0, lam=1.0), 1.0, 2) == pytest.approx(math.e, rel=1e-12)


def test_solution_near_initial_point():
    p = MLParams(0.4, lam=1.3, a=0.5)
    tau = np.array([1e-8, 1e-6])
    lead = 1 + p.lam * tau ** p.alpha / math.gamma(p.alpha + 1)
    err = np.abs(ml_solution_derivative(p, p.a + tau) - lead)
    assert np.all(err <= 2 * p.lam ** 2 * tau ** (2 * p.alpha))


def test_solution_derivative_matches_finite_differences():
    p = MLParams(1.3, lam=-0.8, a=0.0)
    t, h = 0.9, 1e-4
    fd = (ml_solution_derivative(p, t + h) - ml_solution_derivative(p, t - h)) / (2 * h)
    assert ml_solution_derivative(p, t, 1) == pytest.approx(fd, rel=1e-7)


def test_solution_derivative_singular_at_initial_point():
    with pytest.raises(SingularDerivative):
        ml_solution_derivative(MLParams(0.5), 0.0, 1)
    with pytest.raises(ValueError):
        ml_solution_derivative(MLParams(0.5, a=1.0), 0.5)
    assert ml_solution_derivative(MLParams(0.5, lam=2.0), 0.0, 0) == 1.0
