import math
import warnings

import numpy as np
import pytest

from fracapprox.caputo import (CaputoParams, PrecisionWarning, SmoothFn, caputo_derivative,
                               caputo_from_minus_infinity, extend, ml_eigen_residual)
from fracapprox.specfun import MLParams


def test_params_k():
    assert CaputoParams(0.5).k == 1
    assert CaputoParams(1.5).k == 2
    assert CaputoParams(2.0).k == 2
    with pytest.raises(ValueError):
        CaputoParams(0.0)


def test_constant_is_annihilated():
    u = SmoothFn.polynomial([3.0])
    assert caputo_derivative(u, CaputoParams(0.7), 1.2) == 0.0


def test_power_rule_examples():
    d = caputo_derivative(SmoothFn.polynomial([0.0, 1.0]), CaputoParams(0.5), 1.0)
    assert d == pytest.approx(1.1283791670955126, rel=1e-12)
    d = caputo_derivative(SmoothFn.polynomial([0, 0, 0, 1.0]), CaputoParams(1.5), 1.0)
    assert d == pytest.approx(6 / math.gamma(2.5), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.3, 2.6])
def test_power_rule_family(alpha):
    a = -0.4
    p = CaputoParams(alpha, a)
    t = np.array([0.1, 0.8, 1.6])
    for beta in (p.k, p.k + 1, p.k + 2):
        got = caputo_derivative(SmoothFn.power(beta, a), p, t)
        want = math.gamma(beta + 1) / math.gamma(beta + 1 - alpha) * (t - a) ** (beta - alpha)
        assert np.allclose(got, want, rtol=1e-8, atol=0)


def test_polynomials_below_k_are_annihilated():
    p = CaputoParams(2.4)
    u = SmoothFn.polynomial([1.0, -2.0, 0.5])
    assert abs(caputo_derivative(u, p, 1.3)) < 1e-12


def test_linearity():
    p = CaputoParams(0.7)
    u1, u2 = SmoothFn.power(2.5), SmoothFn.polynomial([0, 1.0, 1.0])
    w = SmoothFn(lambda t: 2 * u1(t) - 3 * u2(t), lambda t, j: 2 * u1.deriv(t, j) - 3 * u2.deriv(t, j))
    t = np.array([0.5, 1.5])
    lhs = caputo_derivative(w, p, t)
    rhs = 2 * caputo_derivative(u1, p, t) - 3 * caputo_derivative(u2, p, t)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=0)


def test_integer_order_is_classical():
    u = SmoothFn(np.sin, lambda t, j: np.sin(np.asarray(t) + j * np.pi / 2))
    t = np.linspace(0.2, 2, 5)
    assert np.allclose(caputo_derivative(u, CaputoParams(1.0), t), np.cos(t), atol=1e-10)


def test_domain_error():
    with pytest.raises(ValueError):
        caputo_derivative(SmoothFn.polynomial([1.0]), CaputoParams(0.5, 1.0), 1.0)


def test_precision_warning_on_rough_integrand():
    # |t - 0.5|^0.3 has an interior kink the rule does not know about
    u = SmoothFn(lambda t: t, lambda t, j: np.abs(np.asarray(t) - 0.5) ** 0.3 if j else t)
    with pytest.warns(PrecisionWarning):
        caputo_derivative(u, CaputoParams(0.6), 1.0, nodes=4, levels=2)


def test_sampled_function_derivatives():
    t = np.linspace(0, 2, 201)
    u = SmoothFn.from_samples(t, t ** 2)
    d = caputo_derivative(u, CaputoParams(0.5), 1.0)
    assert d == pytest.approx(2 / math.gamma(2.5), rel=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.5, 2.5])
@pytest.mark.parametrize("lam", [-1.0, 1.0])
def test_mittag_leffler_eigen_residual(alpha, lam):
    res, scale, jet = ml_eigen_residual(MLParams(alpha, lam=lam), np.linspace(0.05, 2, 12))
    assert res <= 1e-6 * scale
    assert jet <= 1e-10


def test_eigen_residual_trivial_cases():
    res, _, _ = ml_eigen_residual(MLParams(1.0, lam=1.0), np.linspace(0.1, 2, 5))
    assert res < 1e-10
    res, _, _ = ml_eigen_residual(MLParams(0.5, lam=0.0), np.linspace(0.1, 2, 5))
    assert res == 0.0


def test_constant_extension():
    p = MLParams(0.6, lam=1.0)
    ext = extend(SmoothFn.mittag_leffler(p), CaputoParams(0.6), "constant")
    t = np.array([-3.0, -0.5, -1e-9])
    assert np.all(ext(t) == 1.0)
    assert ext(0.5) == pytest.approx(SmoothFn.mittag_leffler(p)(0.5))


def test_polynomial_extension_and_jet_mismatch():
    a = 0.3
    u = SmoothFn.polynomial([0, 0, 1.0], a)
    cp = CaputoParams(1.5, a)
    ext = extend(u, cp, "polynomial")
    assert np.allclose(ext(np.array([-1.0, 0.0])), 0.0)
    v = SmoothFn.polynomial([1.0, 2.0], a)
    with pytest.raises(ValueError):
        extend(v, cp, "constant")
    assert np.allclose(extend(v, cp)(np.array([-1.0])), 1 + 2 * (-1.0 - a))


def test_extension_matches_finite_start():
    p = MLParams(1.5, lam=-1.0, a=0.2)
    cp = CaputoParams(p.alpha, p.a)
    u = SmoothFn.mittag_leffler(p)
    ext = extend(u, cp, "constant")
    t = np.array([0.3, 1.0, 2.2])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PrecisionWarning)
        inf = caputo_from_minus_infinity(ext, t, lower=p.a - 1.0)
    fin = caputo_derivative(u, cp, t)
    assert np.allclose(inf, fin, rtol=1e-10, atol=1e-12)
    with pytest.raises(ValueError):
        caputo_from_minus_infinity(ext, t, lower=p.a)
