"""Green function of (-Delta)^s on the unit ball for any s > 0, Dirichlet
solves by kernel quadrature, the exterior Poisson kernel and an s-harmonic
bump built from it.

    G_s(x, y) = k(n,s) |x-y|^(2s-n) int_0^r0 eta^(s-1) (1+eta)^(-n/2) d eta,
    r0 = (1-|x|^2)_+ (1-|y|^2)_+ / |x-y|^2,
    k(n,s) = Gamma(n/2) / (pi^(n/2) 4^s Gamma(s)^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from .fractional_laplacian import FracOrder, frac_laplacian_point
from .quadrature import gauss_jacobi, gauss_legendre, graded_gauss
from .specfun import binom_general


@dataclass(frozen=True)
class GreenParams:
    n: int
    s: float
    k_max: int = 80

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("desk scale supports n in {1, 2}")
        if not self.s > 0:
            raise ValueError("s must be positive")

    @property
    def ord(self) -> FracOrder:
        return FracOrder(self.s)

    @property
    def knorm(self) -> float:
        n, s = self.n, self.s
        return math.gamma(n / 2) / (math.pi ** (n / 2) * 4.0 ** s * math.gamma(s) ** 2)

    @cached_property
    def coefficients(self) -> np.ndarray:
        """c_k = binom(-n/2, k) / (k + s)."""
        return np.array([binom_general(-self.n / 2, k) / (k + self.s)
                         for k in range(self.k_max + 1)])


def _pts(x, n):
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return x


def r0(x, y, n: int | None = None):
    """(1-|x|^2)_+ (1-|y|^2)_+ / |x-y|^2."""
    x = np.asarray(x, dtype=float)
    if n is None:
        n = 1 if x.ndim == 0 else x.shape[-1]
    x, y = _pts(x, n), _pts(y, n)
    d2 = np.sum((x - y) ** 2, axis=-1)
    if np.any(d2 == 0):
        raise ValueError("r0 is undefined for coincident points")
    ax = np.clip(1 - np.sum(x * x, -1), 0, None)
    ay = np.clip(1 - np.sum(y * y, -1), 0, None)
    return ax * ay / d2


def _log_panels(lo, hi, s, n, nodes=12):
    """int_{e^lo}^{e^hi} eta^(s-1)(1+eta)^(-n/2) d eta in tau = log eta, unit panels."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.zeros(np.broadcast(lo, hi).shape)
    span = np.where(hi > lo, hi - lo, 0.0)
    npan = int(np.ceil(np.max(span, initial=0.0)))
    x, w = gauss_legendre(0.0, 1.0, nodes)
    for j in range(npan):
        a = lo + j
        b = np.minimum(lo + j + 1.0, hi)
        L = np.where(b > a, b - a, 0.0)
        tau = a[..., None] + L[..., None] * x
        g = np.exp(s * tau) * (1.0 + np.exp(tau)) ** (-n / 2)
        out = out + L * (g @ w)
    return out


def _eta_quadrature(r, s, n, nodes=24):
    """int_0^r eta^(s-1)(1+eta)^(-n/2): Gauss-Jacobi on [0, min(r,1)], log panels above."""
    r = np.asarray(r, dtype=float)
    m = np.minimum(r, 1.0)
    sig, w = gauss_jacobi(0.0, 1.0, nodes, left=s - 1.0)
    head = m ** s * ((1.0 + m[..., None] * sig) ** (-n / 2) @ w)
    tail = _log_panels(np.zeros_like(r), np.log(np.maximum(r, 1.0)), s, n)
    return head + tail


def _eta_series(r, gp: GreenParams):
    """Series sum_k c_k r1^(k+s) with r1 = min(1/2, r), plus the residual over [r1, r]."""
    r = np.asarray(r, dtype=float)
    r1 = np.minimum(0.5, r)
    if np.any(r1 >= 1):
        raise ValueError("series diverges for r1 >= 1")
    k = np.arange(gp.k_max + 1)
    head = (r1[..., None] ** (k + gp.s)) @ gp.coefficients
    gate = r > 0.5
    tail = np.zeros_like(r)
    if np.any(gate):
        tail[gate] = _log_panels(np.full(np.count_nonzero(gate), math.log(0.5)),
                                 np.log(r[gate]), gp.s, gp.n)
    return head + tail


def eta_integral(r, gp: GreenParams, path: str = "quadrature"):
    if path == "quadrature":
        return _eta_quadrature(r, gp.s, gp.n)
    if path == "series":
        return _eta_series(r, gp)
    raise ValueError(f"unknown path {path!r}")


def green_kernel(x, y, gp: GreenParams, path: str = "quadrature"):
    """G_s(x, y); zero when either point lies outside the open ball."""
    x, y = _pts(x, gp.n), _pts(y, gp.n)
    d2 = np.sum((x - y) ** 2, axis=-1)
    if np.any(d2 == 0):
        raise ValueError("Green kernel is singular on the diagonal")
    ax = np.clip(1 - np.sum(x * x, -1), 0, None)
    ay = np.clip(1 - np.sum(y * y, -1), 0, None)
    r = ax * ay / d2
    val = gp.knorm * d2 ** (gp.s - gp.n / 2) * eta_integral(r, gp, path)
    return np.where(r > 0, val, 0.0)


def series_tail_bound(x, y, gp: GreenParams):
    """Explicit version of the three-case bound on the residual integral over [1/2, r0]."""
    x, y = _pts(x, gp.n), _pts(y, gp.n)
    d = np.sqrt(np.sum((x - y) ** 2, -1))
    r = r0(x, y, gp.n)
    p = gp.s - gp.n / 2
    if p < 0:
        b = 0.5 ** p / (-p)
    elif p == 0:
        b = np.log(np.maximum(2 * r, 1.0))
    else:
        b = r ** p / p
    return np.where(r > 0.5, d ** (2 * gp.s - gp.n) * b, 0.0)


# ---------------------------------------------------------------------------
# quadrature on the ball


@dataclass
class BallQuadrature:
    """Quadrature on B_support in dimension n with target-adapted refinement.

    ``nodes``/``weights`` hold a plain product rule. ``rule_for(x)`` returns a
    rule adapted to a kernel singular at x, graded toward x and, when
    ``boundary_graded``, toward the edge of the support as well.
    """

    n: int
    support: float = 1.0
    order: int = 12
    levels: int = 16
    n_angles: int = 48
    boundary_graded: bool = True
    max_cell: float = 0.125

    def _radial(self, length):
        # graded toward 0, optionally toward the far end too
        if self.boundary_graded:
            u1, w1 = graded_gauss(0.0, 0.5, self.order, self.levels, toward="a",
                                  max_cell=2 * self.max_cell)
            u2, w2 = graded_gauss(0.5, 1.0, self.order, self.levels, toward="b",
                                  max_cell=2 * self.max_cell)
            u, w = np.concatenate([u1, u2]), np.concatenate([w1, w2])
        else:
            u, w = graded_gauss(0.0, 1.0, self.order, self.levels, toward="a",
                                max_cell=self.max_cell)
        return np.multiply.outer(length, u), np.multiply.outer(length, w)

    @cached_property
    def _base(self):
        R = self.support
        if self.n == 1:
            r, w = self._radial(np.array(R))
            return np.concatenate([-r[::-1], r])[:, None], np.concatenate([w[::-1], w])
        r, w = self._radial(np.array(R))
        phi = 2 * math.pi * np.arange(self.n_angles) / self.n_angles
        pts = np.stack([np.multiply.outer(r, np.cos(phi)), np.multiply.outer(r, np.sin(phi))], -1)
        wts = np.multiply.outer(w * r, np.full(self.n_angles, 2 * math.pi / self.n_angles))
        return pts.reshape(-1, 2), wts.ravel()

    @property
    def nodes(self) -> np.ndarray:
        return self._base[0]

    @property
    def weights(self) -> np.ndarray:
        return self._base[1]

    def rule_for(self, x):
        """Targets x of shape (T, n): returns points (T, N, n) and weights (T, N)."""
        x = _pts(x, self.n).reshape(-1, self.n)
        R = self.support
        if self.n == 1:
            xs = x[:, 0]
            inside = np.abs(xs) < R
            left = np.where(inside, xs + R, 0.0)
            right = np.where(inside, R - xs, 0.0)
            rl, wl = self._radial(left)
            rr, wr = self._radial(right)
            pts = np.concatenate([xs[:, None] - rl, xs[:, None] + rr], 1)
            wts = np.concatenate([wl, wr], 1)
            base_p, base_w = self.nodes[:, 0], self.weights
            pts = np.where(inside[:, None], pts, np.nan)
            out_p = np.broadcast_to(base_p, (len(xs), base_p.size))
            out_w = np.broadcast_to(base_w, (len(xs), base_w.size))
            if pts.shape[1] == out_p.shape[1]:
                pts = np.where(inside[:, None], pts, out_p)
                wts = np.where(inside[:, None], wts, out_w)
            else:
                raise AssertionError("rule size mismatch")
            return pts[..., None], wts
        # n = 2: polar coordinates centred at x for targets inside the support
        phi = 2 * math.pi * (np.arange(self.n_angles) + 0.5) / self.n_angles
        th = np.stack([np.cos(phi), np.sin(phi)], -1)
        xt = x @ th.T
        xx = np.sum(x * x, -1)[:, None]
        inside = xx[:, 0] < R * R
        rmax = -xt + np.sqrt(np.clip(xt ** 2 + R * R - xx, 0, None))
        r, w = self._radial(rmax)  # (T, A, N)
        pts = x[:, None, None, :] + r[..., None] * th[None, :, None, :]
        wts = w * r * (2 * math.pi / self.n_angles)
        T = len(x)
        pts = pts.reshape(T, -1, 2)
        wts = wts.reshape(T, -1)
        if not inside.all():
            bp, bw = self.nodes, self.weights
            if bp.shape[0] != pts.shape[1]:
                raise AssertionError("rule size mismatch")
            pts = np.where(inside[:, None, None], pts, bp[None])
            wts = np.where(inside[:, None], wts, bw[None])
        return pts, wts


@dataclass
class Field:
    """A function on R^n that vanishes outside the ball of radius ``support``."""

    evaluate: Callable
    n: int
    support: float = 1.0
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        x = _pts(x, self.n)
        out = np.asarray(self.evaluate(x), dtype=float)
        return np.where(np.sum(x * x, -1) < self.support ** 2, out, 0.0)


def solve_dirichlet(f, gp: GreenParams, q: BallQuadrature | None = None,
                    chunk: int = 256) -> Field:
    """u(x) = int_B1 G_s(x, y) f(y) dy, zero outside the unit ball.

    ``q.support`` may shrink the integration ball when f vanishes outside it.
    """
    if q is None:
        q = BallQuadrature(gp.n)
    if q.n != gp.n:
        raise ValueError("quadrature dimension mismatch")

    def evaluate(x):
        x = _pts(x, gp.n)
        shape = x.shape[:-1]
        flat = x.reshape(-1, gp.n)
        out = np.zeros(len(flat))
        inside = np.sum(flat * flat, -1) < 1.0
        idx = np.flatnonzero(inside)
        for start in range(0, len(idx), chunk):
            sel = idx[start:start + chunk]
            pts, wts = q.rule_for(flat[sel])
            xs = np.broadcast_to(flat[sel][:, None, :], pts.shape)
            ok = np.sum((pts - xs) ** 2, -1) > 0
            safe = np.where(ok[..., None], pts, 0.5 * (pts + 1e-3))
            g = np.where(ok, green_kernel(xs, safe, gp), 0.0)
            out[sel] = np.sum(wts * g * f(pts), -1)
        return out.reshape(shape)

    return Field(evaluate, gp.n, 1.0, {"construction": "green", "n": gp.n, "s": gp.s,
                                       "support_f": q.support})


def boundary_bound_check(u: Field, s: float, R: float,
                         ladder=(0.9, 0.99, 0.999), n_dirs: int = 8) -> float:
    """sup of d(x)^(-s) |u(x)| over samples with |x| in [R, 1), d = 1 - |x|."""
    radii = sorted({R, *ladder})
    if u.n == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = 2 * math.pi * np.arange(n_dirs) / n_dirs
        dirs = np.stack([np.cos(ang), np.sin(ang)], -1)
    pts = np.concatenate([rho * dirs for rho in radii])
    d = 1.0 - np.linalg.norm(pts, axis=-1)
    return float(np.max(np.abs(u(pts)) / d ** s))


def l1_norm(f, n: int, support: float = 1.0) -> float:
    q = BallQuadrature(n, support)
    return float(np.sum(q.weights * np.abs(f(q.nodes))))


# ---------------------------------------------------------------------------
# Poisson kernel and the s-harmonic bump


def classical_poisson_constant(n: int, sigma: float) -> float:
    """Gamma(n/2) sin(pi sigma) / pi^(n/2+1); literature value used as a cross-check."""
    return math.gamma(n / 2) * math.sin(math.pi * sigma) / math.pi ** (n / 2 + 1)


def bump_profile(rho):
    """C^infinity profile supported in (2, 3)."""
    rho = np.asarray(rho, dtype=float)
    inside = (rho > 2) & (rho < 3)
    z = np.where(inside, (rho - 2) * (3 - rho), 1.0)
    return np.where(inside, np.exp(-1.0 / z), 0.0)


def exterior_datum(y, n: int, ordr: FracOrder):
    y = _pts(y, n)
    return (-1.0) ** ordr.m * bump_profile(np.linalg.norm(y, axis=-1))


def _poisson_integral(rho, n: int, s: float, nodes: int = 64):
    """J(rho) = int_{2<|y|<3} bump(|y|) / ((|y|^2-1)^s |rho e1 - y|^n) dy, rho < 1."""
    rho = np.asarray(rho, dtype=float)
    t, w = gauss_legendre(2.0, 3.0, nodes)
    prof = bump_profile(t) / (t * t - 1.0) ** s
    if n == 1:
        k = 1.0 / np.abs(rho[..., None] - t) + 1.0 / (rho[..., None] + t)
        return (k * prof) @ w
    # angular mean of |rho e1 - t theta|^-2 over the circle is 2 pi / (t^2 - rho^2)
    k = 2 * math.pi * t / (t * t - rho[..., None] ** 2)
    return (k * prof) @ w


def poisson_kernel(x, y, n: int, ordr: FracOrder, gamma_const: float | None = None):
    """(-1)^m gamma |x-y|^(-n) (1-|x|^2)_+^s / (|y|^2-1)^s for |x| < 1 < |y|."""
    x, y = _pts(x, n), _pts(y, n)
    ax = 1 - np.sum(x * x, -1)
    ay = np.sum(y * y, -1) - 1
    if np.any(ax <= 0) or np.any(ay <= 0):
        raise ValueError("poisson_kernel needs |x| < 1 < |y|")
    g = poisson_constant(n, ordr) if gamma_const is None else gamma_const
    d = np.sqrt(np.sum((x - y) ** 2, -1))
    return (-1.0) ** ordr.m * g * d ** (-n) * ax ** ordr.s / ay ** ordr.s


def _bump_parts(n: int, ordr: FracOrder):
    """The two pieces of psi: the Poisson part without its constant, and psi_0."""
    s = ordr.s

    def inner(x):
        x = _pts(x, n)
        r2 = np.sum(x * x, -1)
        rho = np.sqrt(np.minimum(r2, 1.0))
        val = np.clip(1 - r2, 0, None) ** s * _poisson_integral(np.where(r2 < 1, rho, 0.0), n, s)
        return np.where(r2 < 1, val, 0.0)

    def outer(x):
        return exterior_datum(x, n, ordr)

    return inner, outer


@lru_cache(maxsize=32)
def poisson_constant(n: int, ordr: FracOrder, probes: tuple = (0.0, 0.3, 0.6)) -> float:
    """gamma fitted so that psi is s-harmonic at the interior probe radii.

    (-Delta)^s is applied to both pieces with the same normalization, so the
    fit does not depend on it. The probes must agree; their spread is kept in
    ``poisson_constant_spread``.
    """
    inner, outer = _bump_parts(n, ordr)
    vals = []
    for r in probes:
        x = np.zeros(n)
        x[0] = r
        li = frac_laplacian_point(inner, x, ordr, support=1.0, radii=(1.0,))
        lo = frac_laplacian_point(outer, x, ordr, support=3.0, radii=(2.0, 3.0))
        vals.append(-lo / li)
    _SPREAD[(n, ordr)] = (max(vals) - min(vals)) / abs(np.mean(vals))
    return float(np.mean(vals))


_SPREAD: dict = {}


def poisson_constant_spread(n: int, ordr: FracOrder) -> float:
    poisson_constant(n, ordr)
    return _SPREAD[(n, ordr)]


def harmonic_bump(x, n: int, ordr: FracOrder, gamma_const: float | None = None):
    """psi = int_{|y|>1} Gamma_s(x,y) psi_0(y) dy + psi_0(x)."""
    g = poisson_constant(n, ordr) if gamma_const is None else gamma_const
    inner, outer = _bump_parts(n, ordr)
    # the signs (-1)^m of the kernel and of psi_0 cancel in the integral
    return g * inner(x) + outer(x)


def bump_boundary_constant(n: int, ordr: FracOrder, gamma_const: float | None = None) -> float:
    """kappa with j^s psi(x/j - e) -> kappa (x.e)_+^s, i.e. 2^s gamma J(1)."""
    g = poisson_constant(n, ordr) if gamma_const is None else gamma_const
    return 2.0 ** ordr.s * g * float(_poisson_integral(np.array(1.0), n, ordr.s))


# ---------------------------------------------------------------------------
# auxiliary kernel and the order-lowering recursion


def bracket(x, y, n: int):
    """[x, y] = sqrt(|x|^2 |y|^2 - 2 x.y + 1)."""
    x, y = _pts(x, n), _pts(y, n)
    xx = np.sum(x * x, -1)
    yy = np.sum(y * y, -1)
    return np.sqrt(xx * yy - 2 * np.sum(x * y, -1) + 1)


def aux_kernel(x, y, gp: GreenParams):
    """P_{s-1}(x,y) = (1-|x|^2)^(s-2) (1-|y|^2)^(s-1) (1-|x|^2|y|^2) / [x,y]^n."""
    x, y = _pts(x, gp.n), _pts(y, gp.n)
    xx = np.sum(x * x, -1)
    yy = np.sum(y * y, -1)
    if np.any(xx >= 1) or np.any(yy >= 1):
        raise ValueError("aux_kernel needs points inside the ball")
    s = gp.s
    return (1 - xx) ** (s - 2) * (1 - yy) ** (s - 1) * (1 - xx * yy) / bracket(x, y, gp.n) ** gp.n


def _laplacian_x(x, y, gp: GreenParams, h: float):
    x, y = _pts(x, gp.n), _pts(y, gp.n)
    center = green_kernel(x, y, gp)
    lap = np.zeros_like(center)
    for i in range(gp.n):
        e = np.zeros(gp.n)
        e[i] = h
        # fourth-order central second difference
        lap += (-green_kernel(x + 2 * e, y, gp) + 16 * green_kernel(x + e, y, gp) - 30 * center
                + 16 * green_kernel(x - e, y, gp) - green_kernel(x - 2 * e, y, gp)) / (12 * h * h)
    return lap


def recursion_residual(gp: GreenParams, xs, ys, h: float = 1e-3):
    """Fit C in -Delta_x G_s = G_{s-1} - C P_{s-1} and return (C, relative residual).

    The residual is the max misfit divided by the max magnitude of the terms.
    """
    if not gp.s > 1:
        raise ValueError("the recursion needs s > 1")
    lower = GreenParams(gp.n, gp.s - 1.0, gp.k_max)
    lhs = -_laplacian_x(xs, ys, gp, h)
    g1 = green_kernel(xs, ys, lower)
    P = aux_kernel(xs, ys, gp)
    C = float(np.dot(g1 - lhs, P) / np.dot(P, P))
    res = lhs - (g1 - C * P)
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(g1)), np.max(np.abs(C * P)))
    return C, float(np.max(np.abs(res)) / scale)
