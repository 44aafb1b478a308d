"""First Dirichlet eigenpair of (-Delta)^s on the unit ball by Rayleigh-Ritz
over the Fourier energy form, and the spherical mean.

Fourier convention: F u(xi) = int u(x) exp(-i x.xi) dx and

    E(u, v) = (2 pi)^(-n) int |xi|^(2s) F u(xi) conj(F v(xi)) d xi,

so that E(u, u) = int |grad u|^2 when s = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.special import eval_jacobi, gammaln, jv, sici

from .asymptotics import DEFAULT_LADDER, FitResult, NoiseError, _with_limit, shrinking_fit
from .green_ball import Field
from .quadrature import gauss_jacobi, gauss_legendre


class CapWarning(UserWarning):
    pass


class IllConditioned(np.linalg.LinAlgError):
    pass


def _check_order(s: float):
    k = round(s)
    if s != k and abs(s - k) < 1e-6:
        warnings.warn(f"s={s} is within 1e-6 of an integer; results may mix regimes",
                      UserWarning, stacklevel=3)


@dataclass(frozen=True)
class RadialBasis:
    """b_i(x) = (1-|x|^2)_+^s |x|^mode p_i(|x|^2) [x e^{i mode phi} in 2D].

    p_i(q) = P_i^(a, mode + n/2 - 1)(2q - 1) with a = 2s for the "l2" family
    (orthogonal in L^2) and a = s for the "operator" family, on which
    (-Delta)^s acts diagonally. In 1D ``mode`` is the parity (0 even, 1 odd).
    """

    n: int
    s: float
    size: int = 12
    mode: int = 0
    family: str = "l2"

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("n must be 1 or 2")
        if self.size < 1:
            raise ValueError("basis needs at least one function")
        if self.n == 1 and self.mode not in (0, 1):
            raise ValueError("1D modes are parities 0 or 1")
        if self.family not in ("l2", "operator"):
            raise ValueError("family must be 'l2' or 'operator'")
        _check_order(self.s)

    @property
    def jacobi_a(self) -> float:
        return 2 * self.s if self.family == "l2" else self.s

    @property
    def jacobi_b(self) -> float:
        return self.mode + self.n / 2 - 1

    def poly(self, q, i: int, deriv: int = 0):
        """d^deriv/dq^deriv p_i(q)."""
        a, b = self.jacobi_a, self.jacobi_b
        if deriv > i:
            return np.zeros_like(np.asarray(q, dtype=float))
        c = math.exp(gammaln(i + a + b + 1 + deriv) - gammaln(i + a + b + 1)) / 2 ** deriv
        return c * 2 ** deriv * eval_jacobi(i - deriv, a + deriv, b + deriv, 2 * np.asarray(q) - 1)

    def radial(self, r):
        """Matrix of radial profiles b_i(r), shape (..., size)."""
        r = np.asarray(r, dtype=float)
        q = r * r
        w = np.clip(1 - q, 0, None) ** self.s * r ** self.mode
        return np.stack([w * self.poly(q, i) for i in range(self.size)], -1)

    def symbol(self, i: int) -> float:
        """mu_i with (-Delta)^s b_i = mu_i p_i(|x|^2) in B_1 (operator family, mode 0)."""
        if self.family != "operator" or self.mode != 0:
            raise ValueError("closed-form action needs the radial operator family")
        s, h = self.s, self.n / 2
        return math.exp(s * math.log(4) + gammaln(s + i + 1) + gammaln(s + i + h)
                        - gammaln(i + 1) - gammaln(i + h))

    def apply_operator(self, coeffs, r):
        """(-Delta)^s of sum c_i b_i at radii r < 1, exact."""
        q = np.asarray(r, dtype=float) ** 2
        return sum(c * self.symbol(i) * self.poly(q, i) for i, c in enumerate(coeffs))

    def edge_values(self) -> np.ndarray:
        """g_i with b_i(r) ~ g_i (1-r)^s as r -> 1."""
        return np.array([2 ** self.s * float(self.poly(1.0, i)) for i in range(self.size)])


@dataclass
class EnergyForm:
    n: int
    s: float
    xi_max: float = 200.0
    panel: float = 1.0
    panel_nodes: int = 12
    _grams: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @cached_property
    def rule(self):
        """Nodes/weights on [0, xi_max] for int xi^(2s+n-1) g(xi) d xi."""
        p = 2 * self.s + self.n - 1
        x0, w0 = gauss_jacobi(0.0, self.panel, 2 * self.panel_nodes, left=p)
        xs, ws = [x0], [w0]
        edges = np.arange(self.panel, self.xi_max + 0.5 * self.panel, self.panel)
        for lo, hi in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(lo, hi, self.panel_nodes)
            xs.append(x)
            ws.append(w * x ** p)
        return np.concatenate(xs), np.concatenate(ws)

    @property
    def xi_end(self) -> float:
        return float(np.arange(self.panel, self.xi_max + 0.5 * self.panel, self.panel)[-1])

    def transforms(self, basis: RadialBasis, xi):
        """Radial Fourier profiles of the basis at |xi|, shape (len(xi), size).

        1D even: 2 int_0^1 b cos; 1D odd: 2 int_0^1 b sin (the factor -i drops
        out of the energy). 2D mode m: 2 pi int_0^1 b J_m(xi r) r dr.
        """
        nx = int(0.75 * max(np.max(xi), 1.0)) + 60
        # Jacobi weight (1-r)^s absorbs the edge behaviour; (1+r)^s stays in the integrand
        r, w = gauss_jacobi(0.0, 1.0, nx, right=self.s)
        prof = basis.radial(r) / np.clip(1 - r, 1e-300, None)[:, None] ** self.s
        arg = np.multiply.outer(xi, r)
        if self.n == 1:
            kern = 2 * (np.cos(arg) if basis.mode == 0 else np.sin(arg))
        else:
            kern = 2 * math.pi * jv(basis.mode, arg) * r
        return (kern * w) @ prof

    def _tail(self, basis: RadialBasis) -> np.ndarray:
        """Leading-order energy beyond xi_end from the (1-r)^s edge singularity."""
        X = self.xi_end
        s = self.s
        g = basis.edge_values()
        if self.n == 1:
            phase = math.pi * (s + 1) / 2 + (math.pi / 2 if basis.mode == 1 else 0.0)
            amp = 4.0 / math.pi
        else:
            phase = math.pi * (s + 1) / 2 + math.pi / 4 + basis.mode * math.pi / 2
            amp = 4.0
        si, ci = sici(2 * X)
        ic = math.cos(2 * X) / X - 2 * (math.pi / 2 - si)
        is_ = math.sin(2 * X) / X - 2 * ci
        T = 1 / (2 * X) + 0.5 * (math.cos(2 * phase) * ic + math.sin(2 * phase) * is_)
        return amp * math.gamma(s + 1) ** 2 * T * np.outer(g, g)

    def gram(self, basis: RadialBasis, tail: bool = True) -> np.ndarray:
        """Energy Gram matrix A_ij = E(b_i, b_j), cached per basis."""
        if basis.n != self.n or basis.s != self.s:
            raise ValueError("basis does not match the energy form")
        key = (basis, tail)
        if key not in self._grams:
            self._grams[key] = self._gram(basis, tail)
        return self._grams[key].copy()

    def _gram(self, basis: RadialBasis, tail: bool) -> np.ndarray:
        xi, w = self.rule
        F = self.transforms(basis, xi)
        c = 1 / math.pi if self.n == 1 else 1 / (2 * math.pi)
        A = c * (F.T * w) @ F
        if tail:
            T = self._tail(basis)
            if np.any(np.abs(np.diag(T)) > 0.01 * np.abs(np.diag(A))):
                warnings.warn("energy tail beyond xi_max exceeds 1% of the value", CapWarning,
                              stacklevel=2)
            A = A + T
        if self.n == 2 and basis.mode:
            # angular factor cos(m phi) halves the energy
            A = 0.5 * A
        return 0.5 * (A + A.T)


def mass_gram(basis: RadialBasis, nodes: int = 80) -> np.ndarray:
    """L^2(B_1) Gram matrix M_ij = int b_i b_j."""
    r, w = gauss_jacobi(0.0, 1.0, max(nodes, 2 * basis.size + 40), right=2 * basis.s)
    prof = basis.radial(r)
    prof2 = prof / np.clip(1 - r, 1e-300, None)[:, None] ** (2 * basis.s)
    if basis.n == 1:
        jac = 2.0
        weight = w
    else:
        jac = 2 * math.pi if basis.mode == 0 else math.pi
        weight = w * r
    M = jac * (prof.T * weight) @ prof2
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class ExactEnergy:
    """Energy Gram from the closed-form action on the operator family."""

    n: int
    s: float
    nodes: int = 80

    def gram(self, basis: RadialBasis) -> np.ndarray:
        if basis.n != self.n or basis.s != self.s:
            raise ValueError("basis does not match the energy form")
        r, w = gauss_jacobi(0.0, 1.0, max(self.nodes, 2 * basis.size + 40), right=basis.s)
        q = r * r
        prof = basis.radial(r) / np.clip(1 - r, 1e-300, None)[:, None] ** basis.s
        act = np.stack([basis.symbol(i) * basis.poly(q, i) for i in range(basis.size)], -1)
        jac = 2.0 if self.n == 1 else 2 * math.pi
        weight = w if self.n == 1 else w * r
        A = jac * (prof.T * weight) @ act
        return 0.5 * (A + A.T)


def energy(u, v, ef, basis: RadialBasis) -> float:
    """E(u, v) for coefficient vectors against ``basis``."""
    A = ef.gram(basis)
    return float(np.asarray(u) @ A @ np.asarray(v))


@dataclass
class EigenPair:
    lambda1: float
    coeffs: np.ndarray
    basis: RadialBasis
    settings: dict = field(default_factory=dict)

    def radial(self, r):
        return self.basis.radial(r) @ self.coeffs

    @property
    def phi(self) -> Field:
        n = self.basis.n

        def ev(x):
            x = np.asarray(x, dtype=float)
            return self.radial(np.linalg.norm(x, axis=-1))

        return Field(ev, n, 1.0, {"construction": "eigen", "n": n, "s": self.basis.s,
                                  "lambda1": self.lambda1})

    def taylor(self, y0, K: int) -> np.ndarray:
        """Taylor coefficients of phi at y0 up to total order K, shape (K+1,)*n.

        phi(y) = F(|y|^2) with F(q) = (1-q)^s P(q); derivatives are exact.
        """
        return _radial_taylor(self.basis, self.coeffs, np.atleast_1d(y0), K)

    def derivative(self, y0, index) -> float:
        index = tuple(np.atleast_1d(index))
        K = sum(index)
        T = self.taylor(y0, K)
        return float(T[index] * np.prod([math.factorial(i) for i in index]))

    def to_dict(self) -> dict:
        return {"lambda1": self.lambda1, "n": self.basis.n, "s": self.basis.s,
                "basis_size": self.basis.size, "coefficients": [float(c) for c in self.coeffs],
                "settings": self.settings}


def first_eigenpair(ef, basis: RadialBasis, cond_max: float = 1e12) -> EigenPair:
    """Smallest eigenvalue of A c = lambda M c and its L^2-normalized vector."""
    if basis.size < 4:
        raise ValueError("need at least 4 basis functions")
    if basis.mode != 0:
        raise ValueError("the first eigenfunction is radial; use mode 0")
    A = ef.gram(basis)
    M = mass_gram(basis)
    if np.linalg.cond(M) > cond_max:
        raise IllConditioned("mass matrix condition number exceeds the guard")
    # Cholesky-reduced symmetric solve
    L = linalg.cholesky(M, lower=True)
    C = linalg.solve_triangular(L, linalg.solve_triangular(L, A, lower=True).T, lower=True)
    vals, vecs = linalg.eigh(0.5 * (C + C.T))
    c = linalg.solve_triangular(L.T, vecs[:, 0], lower=False)
    c = c / math.sqrt(c @ M @ c)
    settings = {k: getattr(ef, k) for k in ("xi_max", "panel", "panel_nodes", "nodes")
                if hasattr(ef, k)}
    settings["energy"] = type(ef).__name__
    settings["family"] = basis.family
    ep = EigenPair(float(vals[0]), c, basis, settings)
    if ep.radial(np.array(0.0)) < 0:
        ep.coeffs = -c
    return ep


def rayleigh_quotient(ep: EigenPair, ef: EnergyForm) -> float:
    A = ef.gram(ep.basis)
    M = mass_gram(ep.basis)
    return float(ep.coeffs @ A @ ep.coeffs / (ep.coeffs @ M @ ep.coeffs))


def eigen_boundary_probe(ep: EigenPair, e, omega, ladder=DEFAULT_LADDER) -> FitResult:
    """Fit phi(e + eps omega) ~ k_* (-e.omega)^s eps^s; exact zero for e.omega >= 0."""
    n = ep.basis.n
    e = np.asarray(e, dtype=float).reshape(n)
    omega = np.asarray(omega, dtype=float).reshape(n)
    eo = float(e @ omega)
    fit = shrinking_fit(lambda lad: ep.phi(e + np.multiply.outer(lad, omega)), ladder)
    if fit.exact_zero:
        return fit
    if eo >= 0:
        raise ValueError("outward ray returned nonzero values")
    if fit.r_squared < 0.99:
        raise NoiseError("fit quality below R^2 = 0.99")
    fit = _with_limit(fit, ep.basis.s, (1.0, 2.0, 3.0))
    fit.meta["k_star"] = fit.constant / (-eo) ** ep.basis.s
    return fit


def angular_sweep(ep: EigenPair, e, omegas, ladder=DEFAULT_LADDER) -> dict:
    """k_* estimates over inward directions; their spread checks the (-e.omega)^s law."""
    ks = [eigen_boundary_probe(ep, e, w, ladder).meta["k_star"] for w in omegas]
    return {"k_star": ks, "spread": float((max(ks) - min(ks)) / abs(np.mean(ks)))}


# ---------------------------------------------------------------------------
# Taylor jets of radial profiles


def _tmul(a, b, K):
    n = a.ndim
    if n == 1:
        out = np.convolve(a, b)[:K + 1]
    else:
        from scipy.signal import convolve

        out = convolve(a, b)[tuple(slice(0, K + 1) for _ in range(n))]
    return _truncate(out, K)


def _truncate(a, K):
    idx = np.indices(a.shape).sum(0)
    return np.where(idx <= K, a, 0.0)


def _radial_taylor(basis: RadialBasis, coeffs, y0, K):
    if basis.mode != 0:
        raise NotImplementedError("jets are implemented for radial profiles")
    q0 = float(y0 @ y0)
    P = np.array([sum(c * float(basis.poly(q0, i, k)) for i, c in enumerate(coeffs))
                  / math.factorial(k) for k in range(K + 1)])
    return profile_taylor(y0, basis.s, P, K, basis.n)


def profile_taylor(y0, s: float, P, K: int, n: int | None = None) -> np.ndarray:
    """Taylor coefficients at y0 of y -> (1-|y|^2)^s G(|y|^2), shape (K+1,)*n.

    ``P[k]`` is G^(k)(|y0|^2)/k! for k <= K.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    n = y0.size if n is None else n
    if y0.size != n:
        raise ValueError("point dimension mismatch")
    q0 = float(y0 @ y0)
    if q0 >= 1:
        raise ValueError("jets are taken strictly inside the ball")
    # F(q0 + d) = (1-q0)^s sum_k binom(s,k) (-d/(1-q0))^k * sum_k P_k d^k
    w = np.array([math.gamma(s + 1) / (math.gamma(s - k + 1) * math.factorial(k))
                  if not (s - k + 1 <= 0 and float(s - k + 1).is_integer()) else 0.0
                  for k in range(K + 1)])
    w = w * (-1.0 / (1 - q0)) ** np.arange(K + 1) * (1 - q0) ** s
    F = np.convolve(w, np.asarray(P, dtype=float)[:K + 1])[:K + 1]
    shape = (K + 1,) * n
    # d(Y) = 2 y0.Y + |Y|^2
    d = np.zeros(shape)
    for i in range(n):
        e = [0] * n
        if K >= 1:
            e[i] = 1
            d[tuple(e)] += 2 * y0[i]
        if K >= 2:
            e[i] = 2
            d[tuple(e)] += 1.0
    out = np.zeros(shape)
    power = np.zeros(shape)
    power[(0,) * n] = 1.0
    for k in range(K + 1):
        out += F[k] * power
        power = _tmul(power, d, K)
    return out


# ---------------------------------------------------------------------------
# spherical mean

@dataclass
class ModalFunction:
    """Sum over modes m of b^(m)(|x|) [cos(m phi) in 2D, parity m in 1D]."""

    n: int
    s: float
    terms: dict

    def basis(self, m: int) -> RadialBasis:
        return RadialBasis(self.n, self.s, len(self.terms[m]), mode=m)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        out = np.zeros(r.shape)
        for m, c in self.terms.items():
            prof = self.basis(m).radial(r) @ np.asarray(c)
            if self.n == 1:
                out += prof * (np.sign(x[..., 0]) if m else 1.0)
            else:
                out += prof * np.cos(m * np.arctan2(x[..., 1], x[..., 0]))
        return out

    def energy(self, ef: EnergyForm) -> float:
        return sum(float(np.asarray(c) @ ef.gram(self.basis(m)) @ np.asarray(c))
                   for m, c in self.terms.items())


def random_modal_function(n: int, s: float, rng, size: int = 6, modes: int = 3) -> ModalFunction:
    mm = (0, 1) if n == 1 else tuple(range(modes + 1))
    return ModalFunction(n, s, {m: rng.standard_normal(size) for m in mm})


def spherical_mean_energies(v: ModalFunction, ef: EnergyForm, size: int = 6, n_angles: int = 64):
    """(E(v#, v#), E(v, v)) with v# computed by rotation averaging and projected
    back onto the radial basis by least squares."""
    base = RadialBasis(v.n, v.s, size)
    r, _ = gauss_jacobi(0.0, 1.0, 3 * size)
    pts = r[:, None] if v.n == 1 else np.stack([r, np.zeros_like(r)], -1)
    vals = spherical_mean(v, pts, n_angles)
    c, *_ = np.linalg.lstsq(base.radial(r), vals, rcond=None)
    return float(c @ ef.gram(base) @ c), v.energy(ef)



def spherical_mean(v, x, n_angles: int = 64):
    """Average of v over the rotation orbit of x (reflection pair in 1D)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] == 1:
        xx = x if x.ndim and x.shape[-1] == 1 else x[..., None]
        return 0.5 * (np.asarray(v(xx)) + np.asarray(v(-xx)))
    r = np.linalg.norm(x, axis=-1)
    ang = 2 * math.pi * np.arange(n_angles) / n_angles
    pts = np.stack([np.multiply.outer(r, np.cos(ang)), np.multiply.outer(r, np.sin(ang))], -1)
    return np.mean(np.asarray(v(pts)), axis=-1)
