"""Gamma, Beta, generalized binomials and the Mittag-Leffler function."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class MLParams:
    alpha: float
    beta: float = 1.0
    lam: float = 1.0
    a: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("Mittag-Leffler parameters need alpha > 0 and beta > 0")
        if not math.isfinite(self.a):
            raise ValueError("initial point must be finite")


@dataclass(frozen=True)
class SeriesControl:
    rel_tol: float = 1e-15
    max_terms: int = 10_000
    radius: float = 50.0

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")


DEFAULT_CONTROL = SeriesControl()


def gamma(x: float) -> float:
    """Euler Gamma; raises at the poles and on overflow."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise ValueError(f"Gamma has a pole at {x}")
    val = float(special.gamma(x))
    if not math.isfinite(val):
        raise OverflowError(f"Gamma({x}) overflows double precision")
    return val


def beta_value(z: float, w: float) -> float:
    if not (z > 0 and w > 0):
        raise ValueError("Beta requires positive arguments")
    # log form avoids overflow of the individual Gammas
    return math.exp(special.gammaln(z) + special.gammaln(w) - special.gammaln(z + w))


def binom_general(p: float, k: int) -> float:
    """p (p-1) ... (p-k+1) / k!"""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = 1.0
    for i in range(k):
        out *= (p - i) / (i + 1)
    return out


def _check_radius(z, ctl: SeriesControl):
    if np.max(np.abs(z), initial=0.0) > ctl.radius:
        raise ValueError(f"|z| exceeds the series radius guard {ctl.radius}")


def _series(coef, z, ctl: SeriesControl, start: int = 0):
    """Sum ``sum_j c_j z^j`` over an array of z with the 3-small-terms rule.

    ``coef(j)`` returns ``(c_j, log|c_j|)``; the log is used only when the direct
    product would overflow.
    """
    z = np.asarray(z, dtype=float)
    absz = np.abs(z)
    logz = np.log(np.where(z == 0, 1.0, absz))
    total = np.zeros_like(z)
    small = np.zeros(z.shape, dtype=int)
    done = np.zeros(z.shape, dtype=bool)
    for j in range(ctl.max_terms):
        c, logc = coef(j)
        if c == 0 and logc == -np.inf:
            term = np.zeros_like(z)
        elif j == 0:
            term = np.full(z.shape, c)
        elif c != 0 and math.isfinite(c) and j * float(np.max(logz, initial=0.0)) < 600:
            term = c * z ** j
        else:
            sgn = 1.0 if c >= 0 else -1.0
            with np.errstate(over="ignore", under="ignore"):
                term = sgn * np.exp(j * logz + logc)
            term = np.where(z == 0, 0.0, np.where((z < 0) & (j % 2 == 1), -term, term))
        total = np.where(done, total, total + term)
        tiny = (np.abs(term) <= ctl.rel_tol * np.abs(total)) & (j >= start)
        small = np.where(tiny, small + 1, 0)
        done |= (small >= 3) | ((z == 0) & (j >= start + 2))
        if done.all():
            return total
    raise ConvergenceError(f"series did not converge in {ctl.max_terms} terms")


def mittag_leffler(alpha: float, beta: float, z, ctl: SeriesControl = DEFAULT_CONTROL):
    """E_{alpha,beta}(z) by the power series; accepts scalars or arrays."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    _check_radius(z, ctl)

    def coef(j):
        return float(special.rgamma(alpha * j + beta)), -special.gammaln(alpha * j + beta)

    out = _series(coef, z, ctl)
    return float(out) if np.ndim(out) == 0 else out


def _falling(x: float, n: int) -> float:
    out = 1.0
    for i in range(n):
        out *= x - i
    return out


class SingularDerivative(ArithmeticError):
    """Derivative of the Mittag-Leffler solution blows up at the initial point."""


def ml_solution_derivative(p: MLParams, t, order: int = 0,
                           ctl: SeriesControl = DEFAULT_CONTROL):
    """d^order/dt^order of E_{alpha,1}(lam (t-a)^alpha), term by term.

    Term j contributes lam^j (alpha j)_order (t-a)^(alpha j - order) / Gamma(alpha j + 1),
    where (x)_n is the falling factorial.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    t = np.asarray(t, dtype=float)
    tau = t - p.a
    if np.any(tau < 0):
        raise ValueError("t must satisfy t >= a")
    alpha, lam = p.alpha, p.lam
    if lam == 0:
        val = np.full(tau.shape, 1.0 if order == 0 else 0.0)
        return float(val) if val.ndim == 0 else val
    if np.any(tau == 0):
        # at t = a only terms with alpha j - order = 0 survive; negative powers blow up
        for j in range(1, order + 1):
            e = alpha * j - order
            if e < 0 and _falling(alpha * j, order) != 0:
                raise SingularDerivative(
                    f"order {order} derivative is singular at t = a (term {j})")
    z = lam * np.power(tau, alpha)
    _check_radius(z, ctl)

    def coef(j):
        f = _falling(alpha * j, order)
        if f == 0:
            return 0.0, -np.inf
        logc = math.log(abs(f)) - special.gammaln(alpha * j + 1)
        return f * float(special.rgamma(alpha * j + 1)), logc

    if order == 0:
        out = _series(coef, z, ctl)
    else:
        with np.errstate(divide="ignore"):
            scale = np.where(tau > 0, np.power(np.where(tau > 0, tau, 1.0), -order), 0.0)
        at_a = tau == 0
        safe = np.where(at_a, 1.0, z)
        out = _series(coef, safe, ctl, start=int(order / alpha) + 1) * scale
        if np.any(at_a):
            # exact value at t = a: only j with alpha j == order contributes
            exact = 0.0
            j = order / alpha
            if abs(j - round(j)) < 1e-12 and round(j) >= 1:
                j = int(round(j))
                exact = lam ** j * math.factorial(order) / math.gamma(alpha * j + 1)
            out = np.where(at_a, exact, out)
    return float(out) if np.ndim(out) == 0 else out
