import math
import warnings

import numpy as np
import pytest

from fracapprox.fractional_laplacian import (DeltaHStencil, FracOrder, PrecisionWarning, delta_h,
                                             frac_laplacian_point, normalizing_constant,
                                             operator_constant)


def semicircle(x):
    return np.sqrt(np.clip(1 - np.sum(x * x, -1), 0, None))


def bump(x):
    r2 = np.sum(x * x, -1)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r2 < 1, np.exp(-1 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)


def test_frac_order_decomposition():
    o = FracOrder(1.5)
    assert (o.m, o.sigma, o.h) == (1, 0.5, 2)
    o = FracOrder(1.0)
    assert (o.m, o.sigma) == (0, 1.0)
    with pytest.raises(ValueError):
        FracOrder(1.5, h=1)
    with pytest.raises(ValueError):
        FracOrder(0.0)


def test_stencil_coefficients():
    assert np.allclose(DeltaHStencil(1).coefficients, [-1, 2, -1])
    assert np.allclose(DeltaHStencil(2).coefficients, [1, -4, 6, -4, 1])
    for h in (1, 2, 3):
        assert abs(DeltaHStencil(h).coefficients.sum()) < 1e-12


def test_delta_h_examples():
    st = DeltaHStencil(2)
    assert delta_h(lambda z: z[..., 0] ** 4, np.zeros(1), np.ones(1), st) == pytest.approx(24.0)
    assert delta_h(lambda z: np.full(z.shape[:-1], 3.0), np.zeros(1), np.ones(1), st) == 0.0
    assert abs(delta_h(lambda z: z[..., 0], np.array([0.3]), np.array([0.7]), DeltaHStencil(1))) < 1e-15


@pytest.mark.parametrize("h", [1, 2, 3])
def test_delta_h_annihilates_low_degree(h):
    rng = np.random.default_rng(h)
    st = DeltaHStencil(h)
    for _ in range(10):
        c = rng.normal(size=(2 * h, 2 * h))
        x, Y = rng.normal(size=2), rng.normal(size=2)

        def poly(z):
            return sum(c[i, j] * z[..., 0] ** i * z[..., 1] ** j
                       for i in range(2 * h) for j in range(2 * h - i))

        assert abs(delta_h(poly, x, Y, st)) < 1e-12 * max(1.0, np.abs(c).sum() * 50 ** (2 * h))


def test_normalizing_constant():
    assert normalizing_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)
    with pytest.raises(ValueError):
        normalizing_constant(1, 1.0)
    with pytest.raises(ValueError):
        normalizing_constant(1, 0.0)
    # the symmetric second difference carries half the one-sided constant
    for m, s in ((1, 0.3), (2, 0.5), (2, 0.8)):
        assert operator_constant(m, s, 1) == pytest.approx(normalizing_constant(m, s) / 2, rel=1e-12)


def test_constant_function_vanishes():
    val = frac_laplacian_point(lambda z: np.ones(z.shape[:-1]), [0.2], FracOrder(0.5), support=np.inf)
    assert abs(val) < 1e-12


def test_semicircle_is_constant_inside():
    vals = [frac_laplacian_point(semicircle, [x], FracOrder(0.5), radii=(1.0,))
            for x in (0.0, 0.3, -0.3, 0.6, -0.6)]
    assert np.allclose(vals, 1.0, rtol=1e-8)


def test_windowed_symbol():
    xi = 2.0
    window = 6.0

    def u(z):
        x = z[..., 0]
        return np.cos(xi * x) * bump(z / window)

    val = frac_laplacian_point(u, [0.0], FracOrder(0.5), support=window, cutoff=0.5)
    assert val / (xi * u(np.zeros((1, 1)))[0]) == pytest.approx(1.0, rel=0.02)


def test_classical_laplacian_recovered():
    # s = 1 with h = 2 reproduces -u''; u = x^2 near the centre of a wide window
    def u(z):
        return z[..., 0] ** 2 * bump(z / 8.0)

    val = frac_laplacian_point(u, [0.0], FracOrder(1.0), support=8.0, radii=(8.0,))
    # -u''(0) = -2 bump(0) exactly, since the window is flat to second order at 0
    assert val == pytest.approx(-2 * math.exp(-1), rel=1e-8)


def test_linearity_and_translation():
    o = FracOrder(0.7)
    f = lambda z: bump(z)
    g = lambda z: bump((z - 0.2) / 0.6)
    x = np.array([0.1, -0.2])
    a = frac_laplacian_point(lambda z: 2 * f(z) - 3 * g(z), x, o)
    b = 2 * frac_laplacian_point(f, x, o) - 3 * frac_laplacian_point(g, x, o)
    assert a == pytest.approx(b, rel=1e-10)
    shift = np.array([0.3, 0.1])
    c = frac_laplacian_point(lambda z: f(z + x - shift), shift, o, support=2.0)
    d = frac_laplacian_point(f, x, o, support=2.0)
    assert c == pytest.approx(d, rel=1e-6)


def test_stencil_orders_agree():
    o1, o2 = FracOrder(0.5, h=1), FracOrder(0.5, h=2)
    for x in ([0.0], [0.4]):
        a = frac_laplacian_point(bump, x, o1)
        b = frac_laplacian_point(bump, x, o2)
        assert a == pytest.approx(b, rel=0.01)


def test_higher_order_matches_iterated_laplacian():
    # (-Delta)^{1.5} of the semicircle power (1-x^2)_+^{1.5} is constant in (-1, 1)
    vals = [frac_laplacian_point(lambda z: semicircle(z) ** 3, [x], FracOrder(1.5), radii=(1.0,))
            for x in (0.0, 0.4)]
    assert vals[0] == pytest.approx(vals[1], rel=1e-4)


def test_precision_warning_and_cutoff_guard():
    rough = lambda z: np.where(np.abs(z[..., 0] - 0.37) < 0.3, 1.0, 0.0)
    with pytest.warns(PrecisionWarning):
        frac_laplacian_point(rough, [0.0], FracOrder(0.5), n_inner=4, level=1, check=True)
    with pytest.raises(ValueError):
        frac_laplacian_point(bump, [0.0], FracOrder(0.5), cutoff=0.0)
