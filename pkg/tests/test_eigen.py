import math
import warnings

import numpy as np
import pytest

from fracapprox.eigen import (CapWarning, EnergyForm, ExactEnergy, IllConditioned, RadialBasis,
                              angular_sweep, eigen_boundary_probe, energy, first_eigenpair,
                              mass_gram, profile_taylor, random_modal_function, rayleigh_quotient,
                              spherical_mean, spherical_mean_energies)

# the Fourier form adds the tail beyond xi_max analytically; the warning is informational
pytestmark = pytest.mark.filterwarnings("ignore::fracapprox.eigen.CapWarning")


def exact_pair(n, s, size=12):
    return first_eigenpair(ExactEnergy(n, s), RadialBasis(n, s, size, family="operator"))


def test_basis_validation():
    with pytest.raises(ValueError):
        RadialBasis(3, 0.5)
    with pytest.raises(ValueError):
        RadialBasis(1, 0.5, family="other")
    with pytest.warns(UserWarning):
        RadialBasis(1, 1 + 1e-8)


def test_energy_of_parabola():
    # u = (1-x^2)_+ is the first l2 basis function for s = 1; E(u,u) = int |u'|^2 = 8/3
    basis = RadialBasis(1, 1.0, 4)
    c = np.zeros(4)
    c[0] = 1.0 / float(basis.poly(0.0, 0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CapWarning)
        val = energy(c, c, EnergyForm(1, 1.0, xi_max=400.0), basis)
    assert val == pytest.approx(8 / 3, rel=1e-2)
    assert energy(c, c, ExactEnergy(1, 1.0), RadialBasis(1, 1.0, 4, family="operator")) > 0


def test_energy_bilinear_and_zero():
    ef, basis = EnergyForm(1, 0.5), RadialBasis(1, 0.5, 6)
    rng = np.random.default_rng(0)
    u, v, w = rng.normal(size=(3, 6))
    assert energy(np.zeros(6), np.zeros(6), ef, basis) == 0.0
    assert energy(u + v, w, ef, basis) == pytest.approx(energy(u, w, ef, basis) + energy(v, w, ef, basis),
                                                        rel=1e-10)
    assert energy(u, v, ef, basis) == pytest.approx(energy(v, u, ef, basis), rel=1e-12)


def test_classical_eigenvalue():
    ep = exact_pair(1, 1.0)
    assert ep.lambda1 == pytest.approx(math.pi ** 2 / 4, rel=5e-3)
    x = np.linspace(-0.95, 0.95, 11)
    phi = ep.radial(np.abs(x))
    ref = np.cos(math.pi * x / 2)
    assert np.allclose(phi / phi[5], ref, atol=1e-6)


@pytest.mark.parametrize("n,s", [(1, 0.5), (1, 1.5), (2, 0.5), (2, 1.0)])
def test_monotone_and_positive(n, s):
    lams = [exact_pair(n, s, size).lambda1 for size in range(4, 14)]
    assert lams[-1] > 0
    assert np.all(np.diff(lams) <= 1e-12 * lams[-1])


def test_cross_discretization():
    a = exact_pair(1, 0.5).lambda1
    b = first_eigenpair(EnergyForm(1, 0.5), RadialBasis(1, 0.5, 12)).lambda1
    assert a == pytest.approx(b, rel=0.01)


def test_rayleigh_identity_and_normalization():
    ef = EnergyForm(1, 0.5)
    ep = first_eigenpair(ef, RadialBasis(1, 0.5, 10))
    assert rayleigh_quotient(ep, ef) == pytest.approx(ep.lambda1, rel=1e-10)
    M = mass_gram(ep.basis)
    assert ep.coeffs @ M @ ep.coeffs == pytest.approx(1.0, rel=1e-12)


def test_sign_invariant():
    for n, s in ((1, 0.5), (2, 1.5)):
        ep = exact_pair(n, s)
        r = np.linspace(0, 1, 201)
        v = ep.radial(r)
        assert v.min() >= -1e-8 * v.max()


def test_guards():
    with pytest.raises(ValueError):
        first_eigenpair(ExactEnergy(1, 0.5), RadialBasis(1, 0.5, 3, family="operator"))
    with pytest.raises(IllConditioned):
        first_eigenpair(EnergyForm(1, 0.5), RadialBasis(1, 0.5, 12), cond_max=10.0)


def test_spherical_mean():
    radial = lambda x: np.sum(x * x, -1)
    x = np.array([[0.3, 0.4], [0.1, -0.5]])
    assert np.allclose(spherical_mean(radial, x), radial(x))
    assert abs(spherical_mean(lambda z: z[..., 0], np.array([0.6, 0.0]))) < 1e-15
    v = lambda z: z[..., 0] ** 3 + z[..., 1] + np.sum(z * z, -1)
    once = lambda z: spherical_mean(v, z)
    assert np.allclose(spherical_mean(once, x), once(x), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_spherical_mean_energy_inequality(n):
    rng = np.random.default_rng(42 + n)
    ef = EnergyForm(n, 0.5)
    for _ in range(25):
        v = random_modal_function(n, 0.5, rng)
        e_mean, e_v = spherical_mean_energies(v, ef)
        assert e_mean <= e_v * (1 + 1e-10)


def test_boundary_probe():
    ep = exact_pair(1, 0.5)
    assert eigen_boundary_probe(ep, [1.0], [1.0]).exact_zero
    fit = eigen_boundary_probe(ep, [1.0], [-1.0])
    assert fit.exponent == pytest.approx(0.5, rel=0.02)
    fit = eigen_boundary_probe(exact_pair(1, 1.0), [1.0], [-1.0])
    assert fit.exponent == pytest.approx(1.0, rel=0.02)


def test_angular_law():
    ep = exact_pair(2, 0.5)
    e = np.array([1.0, 0.0])
    ws = [np.array([-1.0, 0.0]), np.array([-0.8, 0.6]), np.array([-0.6, -0.8])]
    assert angular_sweep(ep, e, ws)["spread"] < 0.05


def test_taylor_coefficients():
    ep = exact_pair(2, 0.5)
    y0 = np.array([0.2, -0.1])
    T = ep.taylor(y0, 3)
    h = 1e-3
    phi = ep.phi
    fd = (phi(y0 + [h, 0]) - phi(y0 - [h, 0])) / (2 * h)
    assert T[1, 0] == pytest.approx(float(fd), rel=1e-5)
    assert T[0, 0] == pytest.approx(float(phi(y0)), rel=1e-13)
    assert ep.derivative(y0, (0, 2)) == pytest.approx(2 * T[0, 2], rel=1e-14)
    with pytest.raises(ValueError):
        profile_taylor(np.array([1.0, 0.0]), 0.5, np.ones(4), 3)


def test_to_dict():
    d = exact_pair(1, 1.0, 5).to_dict()
    assert list(d)[:4] == ["lambda1", "n", "s", "basis_size"]
    assert len(d["coefficients"]) == 5
