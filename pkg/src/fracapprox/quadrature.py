"""Fixed-node quadrature rules shared by the solvers.

Every rule returns ``(nodes, weights)`` as numpy arrays so that integrands can
be evaluated in one vectorized call.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=256)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return x, w


@lru_cache(maxsize=256)
def _jacobi(n: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi(a: float, b: float, n: int, left: float = 0.0, right: float = 0.0):
    """Rule for ``int_a^b f(t) (t-a)^left (b-t)^right dt``.

    The weight is absorbed; only ``f`` is evaluated at the nodes.
    """
    # scipy's weight is (1-x)^alpha (1+x)^beta on [-1, 1]
    x, w = _jacobi(n, float(right), float(left))
    half = 0.5 * (b - a)
    t = a + half * (x + 1.0)
    return t, w * half ** (1.0 + left + right)


def graded_gauss(a: float, b: float, n: int, levels: int = 12, ratio: float = 0.15,
                 toward: str = "a", max_cell: float = 1.0):
    """Composite Gauss-Legendre on a mesh graded geometrically toward one end.

    Handles integrable algebraic or logarithmic endpoint singularities whose
    exponent is not known in advance.
    """
    length = b - a
    edges = [0.0] + [ratio ** (levels - i) for i in range(levels)] + [1.0]
    if max_cell < 1.0:
        # split coarse outer cells so none exceeds max_cell of the length
        fine = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            k = max(1, int(np.ceil((hi - lo) / max_cell - 1e-12)))
            fine.extend(np.linspace(lo, hi, k + 1)[:-1])
        edges = fine + [1.0]
    edges = np.unique(np.asarray(edges))
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(lo, hi, n)
        xs.append(x)
        ws.append(w)
    u = np.concatenate(xs)
    w = np.concatenate(ws) * length
    if toward == "a":
        return a + u * length, w
    return b - u * length, w


@lru_cache(maxsize=64)
def _tanh_sinh(level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = 2.0 ** -level
    k = np.arange(-int(3.2 / h), int(3.2 / h) + 1)
    u = 0.5 * np.pi * np.sinh(k * h)
    x = np.tanh(u)
    # distance to the nearer endpoint, computed without cancellation
    gap = 1.0 / (np.exp(np.abs(u)) * np.cosh(u))
    w = 0.5 * np.pi * h * np.cosh(k * h) / np.cosh(u) ** 2
    keep = w > 1e-300
    return x[keep], gap[keep], w[keep]


def tanh_sinh(a: float, b: float, level: int = 4):
    """Double-exponential rule on ``[a, b]``; robust to endpoint singularities."""
    x, gap, w = _tanh_sinh(level)
    half = 0.5 * (b - a)
    t = np.where(x < 0, a + half * gap, b - half * gap)
    keep = (t > a) & (t < b)
    return t[keep], (w * half)[keep]
