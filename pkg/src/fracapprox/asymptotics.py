"""Boundary and initial-point asymptotics: power fits in eps, the Green
boundary-limit identity, Mittag-Leffler time scaling and weak-form jet limits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .fractional_laplacian import FracOrder
from .green_ball import (BallQuadrature, Field, GreenParams, bump_boundary_constant,
                         harmonic_bump, solve_dirichlet)
from .quadrature import gauss_jacobi, gauss_legendre
from .specfun import MLParams, SeriesControl, mittag_leffler, ml_solution_derivative

DEFAULT_LADDER = tuple(np.geomspace(1e-1, 1e-4, 8))


class FitError(ValueError):
    pass


class NoiseError(FitError):
    pass


class FinitenessError(ValueError):
    pass


@dataclass
class FitResult:
    """v(eps) ~ constant * eps**exponent.

    ``constant`` is the regression intercept unless a probe replaces it by the
    extrapolated limit at the nominal exponent (recorded in ``meta``).
    """

    exponent: float
    constant: float
    r_squared: float
    ladder: list
    exact_zero: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"exponent": None if self.exact_zero else self.exponent,
                "constant": self.constant, "r_squared": self.r_squared,
                "exact_zero": self.exact_zero,
                "ladder": [[float(e), float(v)] for e, v in self.ladder],
                "meta": self.meta}


def _ladder(samples):
    pts = sorted(((float(e), float(v)) for e, v in samples), key=lambda p: -p[0])
    if len(pts) < 4:
        raise FitError("need at least 4 samples")
    eps = np.array([p[0] for p in pts])
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise FitError("degenerate ladder: eps must be positive and distinct")
    return pts, eps, np.array([p[1] for p in pts])


def power_fit(samples, corrections=(1.0,)) -> FitResult:
    """Least-squares fit of log|v| = p log eps + c + sum_j d_j eps^q_j.

    The correction columns (powers q_j of eps) absorb the leading deviation
    from a pure power law; pass ``corrections=()`` for a plain log-log fit.
    """
    pts, eps, v = _ladder(samples)
    if np.all(v == 0):
        return FitResult(math.nan, 0.0, 1.0, pts, exact_zero=True)
    if np.any(v == 0) or not (np.all(v > 0) or np.all(v < 0)):
        raise FitError("samples change sign or contain isolated zeros")
    if len(pts) < 3 + len(corrections):
        corrections = ()
    x, y = np.log(eps), np.log(np.abs(v))
    A = np.column_stack([x, np.ones_like(x)] + [eps ** q for q in corrections])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if ss == 0 else max(0.0, 1 - np.sum(res ** 2) / ss)
    return FitResult(float(coef[0]), float(np.sign(v[0]) * math.exp(coef[1])), float(r2), pts,
                     meta={"corrections": list(corrections)})


def shrinking_fit(evaluate, ladder=DEFAULT_LADDER, corrections=(1.0,), tol: float = 5e-3,
                  max_shifts: int = 3) -> FitResult:
    """power_fit of evaluate(eps), moving the ladder down a decade at a time while
    fits on its upper and lower halves disagree by more than ``tol`` (relative)."""
    lad = np.asarray(ladder, dtype=float)
    h = len(lad) // 2
    for shift in range(max_shifts + 1):
        vals = np.asarray(evaluate(lad), dtype=float)
        fit = power_fit(list(zip(lad, vals)), corrections)
        if fit.exact_zero:
            return fit
        hi = power_fit(list(zip(lad[:h + 1], vals[:h + 1])), corrections)
        lo = power_fit(list(zip(lad[h - 1:], vals[h - 1:])), corrections)
        gap = abs(hi.exponent - lo.exponent) / max(abs(lo.exponent), 1e-3)
        if gap <= tol:
            break
        if shift < max_shifts:
            lad = lad / 10
    fit.meta.update({"ladder_shifts": shift, "half_ladder_gap": float(gap)})
    return fit


def limit_extrapolate(samples, exponent: float, powers=(1.0, 2.0)) -> float:
    """C0 from eps^-exponent v = C0 + sum_j C_j eps^powers_j (least squares)."""
    _, eps, v = _ladder(samples)
    y = v * eps ** (-exponent)
    A = np.column_stack([np.ones_like(eps)] + [eps ** p for p in powers])
    scale = np.max(np.abs(A), axis=0)
    c, *_ = np.linalg.lstsq(A / scale, y, rcond=None)
    return float(c[0] / scale[0])


def _with_limit(fit: FitResult, exponent: float, powers) -> FitResult:
    if fit.exact_zero:
        return fit
    fit.meta["regression_constant"] = fit.constant
    fit.meta["nominal_exponent"] = exponent
    fit.constant = limit_extrapolate(fit.ladder, exponent, powers)
    return fit


# ---------------------------------------------------------------------------
# Green boundary limit


def _orth(e):
    return np.array([-e[1], e[0]])


def boundary_integral(f, e, s: float, n: int, nodes: int = 24, angles: int = 16,
                      split: float = 0.1, levels: int = 12, panels: int = 32) -> float:
    """int_{B_1} f(z) (1-|z|^2)^s / (s |z-e|^n) dz for |e| = 1.

    Polar coordinates about e: z = e + rho theta, 1-|z|^2 = rho (L - rho) with
    L = -2 e.theta, so the integrand is f rho^(s-1) (L-rho)^s / s. The ray is
    split at rho = split; the near part is graded geometrically toward e.
    """
    e = np.asarray(e, dtype=float).reshape(n)
    _finiteness_guard(f, e, s, n)

    def ray(theta):
        L = -2 * float(e @ theta)
        r1 = min(split, 0.5 * L)
        rs, ws = [], []
        # innermost cell carries the rho^(s-1) weight exactly
        lo = r1 * 0.15 ** levels
        x, w = gauss_jacobi(0.0, lo, nodes, left=s - 1)
        rs.append(x)
        ws.append(w * (L - x) ** s)
        edges = r1 * 0.15 ** np.arange(levels, -1, -1)
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(a, b, nodes)
            rs.append(x)
            ws.append(w * x ** (s - 1) * (L - x) ** s)
        edges = np.linspace(r1, L, panels + 1)
        for a, b in zip(edges[:-2], edges[1:-1]):
            x, w = gauss_legendre(a, b, nodes)
            rs.append(x)
            ws.append(w * x ** (s - 1) * (L - x) ** s)
        x, w = gauss_jacobi(edges[-2], L, nodes, right=s)
        rs.append(x)
        ws.append(w * x ** (s - 1))
        r = np.concatenate(rs)
        pts = e + np.multiply.outer(r, theta)
        return float(np.sum(np.concatenate(ws) * f(pts))) / s

    if n == 1:
        return ray(-e)
    # theta = -e rotated by phi in (-pi/2, pi/2); the ray integral ~ (cos phi)^(2s)
    # composite panels; the end panels carry the weight exactly
    edges = np.linspace(-math.pi / 2, math.pi / 2, angles + 1)
    phis, wts = [], []
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        left = 2 * s if i == 0 else 0.0
        right = 2 * s if i == angles - 1 else 0.0
        x, w = gauss_jacobi(a, b, nodes, left=left, right=right)
        phis.append(x)
        wts.append(w / ((x - a) ** left * (b - x) ** right) if left or right else w)
    t = _orth(e)
    tot = 0.0
    for p, wp in zip(np.concatenate(phis), np.concatenate(wts)):
        theta = -math.cos(p) * e + math.sin(p) * t
        tot += wp * ray(theta)
    return tot


def _finiteness_guard(f, e, s, n):
    """Reject data that blow up at e (the integral needs f Hoelder there)."""
    theta = -e
    rho = np.geomspace(1e-3, 1e-9, 7)
    vals = np.asarray(f(e + np.multiply.outer(rho, theta)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FinitenessError("f is not finite near e")
    a = np.abs(vals)
    if np.all(a == 0):
        return
    if np.any(a == 0):
        return
    slope = np.polyfit(np.log(rho), np.log(a), 1)[0]
    if slope < -0.05:
        raise FinitenessError(f"f grows like rho^{slope:.3g} at e; boundary integral "
                              "hypotheses fail")


def predicted_boundary_limit(f, e, omega, gp: GreenParams, **kw) -> float:
    e = np.asarray(e, dtype=float).reshape(gp.n)
    omega = np.asarray(omega, dtype=float).reshape(gp.n)
    eo = float(e @ omega)
    if eo >= 0:
        raise ValueError("omega must point into the ball (e.omega < 0)")
    return gp.knorm * (-2 * eo) ** gp.s * boundary_integral(f, e, gp.s, gp.n, **kw)


def green_boundary_limit(f, e, omega, gp: GreenParams, ladder=DEFAULT_LADDER,
                         q: BallQuadrature | None = None, u: Field | None = None):
    """Fit eps^-s u(e + eps omega) for u = G_s f and compare with the predicted limit.

    Returns (FitResult, predicted); the fit's ``constant`` is the limit of
    eps^-s u extrapolated with integer-power corrections.
    """
    e = np.asarray(e, dtype=float).reshape(gp.n)
    omega = np.asarray(omega, dtype=float).reshape(gp.n)
    if float(e @ omega) >= 0:
        raise ValueError("omega must point into the ball (e.omega < 0)")
    if u is None:
        u = solve_dirichlet(f, gp, q)
    pts = e + np.multiply.outer(np.asarray(ladder), omega)
    vals = u(pts)
    fit = power_fit(list(zip(ladder, vals)))
    if fit.exact_zero:
        return fit, predicted_boundary_limit(f, e, omega, gp)
    fit = _with_limit(fit, gp.s, (1.0, 2.0, 3.0))
    return fit, predicted_boundary_limit(f, e, omega, gp)


# ---------------------------------------------------------------------------
# Mittag-Leffler scaling at the initial point


def ml_scaling_constant(alpha: float, t_bar_star: float, ell: int) -> float:
    """t_bar^ell alpha (alpha-1) ... (alpha-ell+1) / Gamma(alpha+1)."""
    tb = t_bar_star ** (1 / alpha)
    ff = math.prod(alpha - i for i in range(ell))
    return tb ** ell * ff / math.gamma(alpha + 1)


def ml_time_scaling(alpha: float, t_bar_star: float, ell: int,
                    ladder=tuple(np.geomspace(1e-6, 1e-13, 8)), max_ell: int = 4,
                    ctl: SeriesControl = SeriesControl()) -> FitResult:
    """Fit d^ell psi(0) (psi(0) - 1 when ell = 0) for psi = E_alpha(t_bar_*(t-a)^alpha),
    a = -eps/t_bar; exponent alpha - ell, constant per the closed form."""
    if float(alpha).is_integer():
        raise ValueError("alpha must be non-integer")
    if not 0 <= ell <= max_ell:
        raise ValueError(f"ell must be in [0, {max_ell}]")
    tb = t_bar_star ** (1 / alpha)
    vals = []
    for eps in ladder:
        if ell == 0:
            # psi(0) - 1 = z E_{alpha, alpha+1}(z) without cancellation
            z = t_bar_star * (eps / tb) ** alpha
            vals.append(z * mittag_leffler(alpha, alpha + 1, z, ctl))
        else:
            p = MLParams(alpha, 1.0, t_bar_star, -eps / tb)
            vals.append(ml_solution_derivative(p, 0.0, ell, ctl))
    fit = power_fit(list(zip(ladder, vals)), corrections=(alpha, 2 * alpha))
    if fit.r_squared < 0.99:
        raise NoiseError("fit quality below R^2 = 0.99")
    # eps^(ell-alpha) d^ell psi(0) is a power series in eps^alpha
    fit = _with_limit(fit, alpha - ell, tuple(alpha * j for j in range(1, 5)))
    fit.meta["expected_constant"] = ml_scaling_constant(alpha, t_bar_star, ell)
    fit.meta["expected_exponent"] = alpha - ell
    return fit


# ---------------------------------------------------------------------------
# weak-form jets at the boundary


@dataclass(frozen=True)
class BoxBump:
    """chi(X) = prod_i (1 - ((X_i - c_i)/w)^2)_+^p with exact derivatives."""

    center: tuple
    width: float = 1.0
    power: int = 8

    def _factor(self, k: int) -> Polynomial:
        return (Polynomial([1.0, 0.0, -1.0]) ** self.power).deriv(k) if k else \
            Polynomial([1.0, 0.0, -1.0]) ** self.power

    def deriv(self, X, beta):
        X = np.asarray(X, dtype=float)
        out = np.ones(X.shape[:-1])
        for i, k in enumerate(beta):
            u = (X[..., i] - self.center[i]) / self.width
            out = out * np.where(np.abs(u) < 1, self._factor(k)(u), 0.0) / self.width ** k
        return out


def _pair(func, e, chi: BoxBump, beta, inside, nodes: int):
    """int func(X) d^beta chi(X) dX over {inside}, split along the main axis of e.

    ``inside(t)`` gives, for fixed transverse coordinate t, the interval of the
    main coordinate where func may be nonzero, with flags telling whether each
    end is a (-e.X)^s-type boundary.
    """
    n = len(e)
    ax = int(np.argmax(np.abs(e)))
    c, w = chi.center, chi.width

    def line(t):
        (lo, hi), (sl, sh) = inside(t)
        a, b = max(lo, c[ax] - w), min(hi, c[ax] + w)
        if b <= a:
            return 0.0
        left = inside.s if sl and lo >= c[ax] - w else 0.0
        right = inside.s if sh and hi <= c[ax] + w else 0.0
        x, wt = gauss_jacobi(a, b, nodes, left=left, right=right)
        wt = wt / (np.maximum(x - a, 1e-300) ** left * np.maximum(b - x, 1e-300) ** right)
        X = np.zeros((len(x), n))
        X[:, ax] = x
        if n == 2:
            X[:, 1 - ax] = t
        return float(np.sum(wt * func(X) * chi.deriv(X, beta)))

    if n == 1:
        return line(None)
    o = 1 - ax
    ts, wts = gauss_legendre(c[o] - w, c[o] + w, nodes)
    return sum(wt * line(t) for t, wt in zip(ts, wts))


class _BallChord:
    """Chord of {X : |e + eps X| < 1} along axis ax."""

    def __init__(self, e, eps, s):
        self.e, self.eps, self.s = e, eps, s
        self.ax = int(np.argmax(np.abs(e)))

    def __call__(self, t):
        e, eps, ax = self.e, self.eps, self.ax
        other = 0.0 if len(e) == 1 else (e[1 - ax] + eps * t)
        disc = 1 - other * other
        if disc <= 0:
            return (0.0, 0.0), (False, False)
        r = math.sqrt(disc)
        return ((-r - e[ax]) / eps, (r - e[ax]) / eps), (True, True)


class _HalfSpace:
    """{X : -e.X > 0} along axis ax."""

    def __init__(self, e, s):
        self.e, self.s = e, s
        self.ax = int(np.argmax(np.abs(e)))

    def __call__(self, t):
        e, ax = self.e, self.ax
        rest = 0.0 if len(e) == 1 else e[1 - ax] * t
        x0 = -rest / e[ax]
        if e[ax] > 0:
            return (-math.inf, x0), (False, True)
        return (x0, math.inf), (True, False)


def distributional_jet_probe(phi, e, beta, ladder=DEFAULT_LADDER, s: float | None = None,
                             chi: BoxBump | None = None, nodes: int = 40) -> FitResult:
    """Weak-form fit of d^beta phi(e + eps X) paired with a test function chi.

    P(eps) = (-1)^|beta| eps^-|beta| int phi(e + eps X) d^beta chi(X) dX, so no
    derivative of phi is taken. Expected: P ~ eps^(s-|beta|) L with
    L = k_* (-1)^|beta| int (-e.X)_+^s d^beta chi(X) dX; ``meta['shape_ratio']``
    is L / (that integral without k_*), to be compared with k_*.
    """
    e = np.asarray(e, dtype=float).ravel()
    n = len(e)
    beta = tuple(int(b) for b in np.atleast_1d(beta))
    if len(beta) != n:
        raise ValueError("multi-index dimension mismatch")
    if s is None:
        s = float(getattr(phi, "meta", {}).get("s"))
    if chi is None:
        chi = BoxBump(tuple(-0.5 * e), 1.0)
    nb = sum(beta)
    sign = (-1) ** nb

    def paired(lad):
        return [sign * eps ** (-nb)
                * _pair(lambda X: phi(e + eps * X), e, chi, beta, _BallChord(e, eps, s), nodes)
                for eps in lad]

    fit = shrinking_fit(paired, ladder)
    fit = _with_limit(fit, s - nb, (1.0, 2.0, 3.0))
    prof = _pair(lambda X: np.clip(-X @ e, 0, None) ** s, e, chi, beta, _HalfSpace(e, s), nodes)
    fit.meta["profile_pairing"] = sign * prof
    fit.meta["shape_ratio"] = fit.constant / (sign * prof) if prof else math.nan
    fit.meta["beta"] = list(beta)
    return fit


# ---------------------------------------------------------------------------
# spherical bump


def bump_boundary_fit(n: int, ordr: FracOrder, e=None, ladder=DEFAULT_LADDER):
    """Fit psi((1-eps) e) against eps; exponent s, limit kappa."""
    e = np.eye(n)[0] if e is None else np.asarray(e, dtype=float).reshape(n)
    pts = np.multiply.outer(1 - np.asarray(ladder), e)
    fit = power_fit(list(zip(ladder, harmonic_bump(pts, n, ordr))))
    fit = _with_limit(fit, ordr.s, (1.0, 2.0, 3.0))
    fit.meta["kappa"] = bump_boundary_constant(n, ordr)
    return fit


def bump_blowup_l1(n: int, ordr: FracOrder, js=(4, 8, 16), e=None, nodes: int = 48) -> list:
    """L1(B_1(e)) distance between j^s psi(x/j - e) and kappa (x.e)_+^s."""
    e = np.eye(n)[0] if e is None else np.asarray(e, dtype=float).reshape(n)
    s = ordr.s
    kappa = bump_boundary_constant(n, ordr)
    if n == 1:
        # B_1(e) = (e-1, e+1); x.e > 0 on the part nearest the origin-free side
        x, w = gauss_jacobi(0.0, 2.0, nodes, left=s)
        w = w / x ** s
        X = (x * e[0])[:, None]
        dots = x
        weights = w
    else:
        # polar coordinates about e; split the radius where x.e = 0 is crossed
        r, wr = gauss_legendre(0.0, 1.0, nodes)
        th, wt = gauss_legendre(0.0, 2 * math.pi, 2 * nodes)
        R, T = np.meshgrid(r, th, indexing="ij")
        t = _orth(e)
        X = e + R[..., None] * (np.cos(T)[..., None] * e + np.sin(T)[..., None] * t)
        X = X.reshape(-1, 2)
        weights = (np.outer(wr * r, wt)).ravel()
        dots = X @ e
    target = kappa * np.clip(dots, 0, None) ** s
    out = []
    for j in js:
        v = j ** s * harmonic_bump(X / j - e, n, ordr)
        out.append(float(np.sum(weights * np.abs(v - target))))
    return out
