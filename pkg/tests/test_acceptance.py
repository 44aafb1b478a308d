"""Acceptance gate: one PASS/FAIL line per criterion, each at its stated tolerance and runtime."""

import json
import math
import time

import numpy as np
import pytest
from scipy import integrate

from fracapprox import cli
from fracapprox.asymptotics import bump_boundary_fit, green_boundary_limit
from fracapprox.caputo import CaputoParams, SmoothFn, caputo_derivative, ml_eigen_residual
from fracapprox.eigen import (EnergyForm, ExactEnergy, RadialBasis, eigen_boundary_probe,
                              first_eigenpair, random_modal_function, spherical_mean_energies)
from fracapprox.fractional_laplacian import FracOrder, frac_laplacian_point
from fracapprox.green_ball import BallQuadrature, GreenParams, solve_dirichlet
from fracapprox.specfun import MLParams, beta_value, mittag_leffler

pytestmark = pytest.mark.filterwarnings("ignore::fracapprox.eigen.CapWarning")


def interior_bump(x, width=0.5):
    r2 = np.sum(np.asarray(x) ** 2, -1) / width ** 2
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(r2 < 1, np.exp(-1 / np.where(r2 < 1, 1 - r2, 1.0)), 0.0)


@pytest.fixture
def report(capsys):
    """Print the criterion line outside capture, then assert it."""
    def emit(number, title, checks, start, limit_s):
        elapsed = time.perf_counter() - start
        checks = dict(checks)
        checks[f"runtime {elapsed:.1f}s < {limit_s}s"] = elapsed < limit_s
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:2d}  {title}"
        line += f"  ({elapsed:.1f}s)" if ok else f"  failed: {'; '.join(failed)}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def _manifest(out, command):
    return json.loads((out / command / "manifest.json").read_text())


def test_criterion_01_ml_eigenproblem(report):
    start = time.perf_counter()
    checks = {}
    grid = np.linspace(0.05, 2.0, 12)
    for alpha in (0.3, 0.7, 1.5, 2.5):
        for lam in (-1.0, 1.0):
            res, scale, jet = ml_eigen_residual(MLParams(alpha, lam=lam), grid)
            checks[f"residual alpha={alpha} lam={lam:+g}: {res / scale:.2e}"] = res <= 1e-6 * scale
            checks[f"initial jet alpha={alpha} lam={lam:+g}: {jet:.2e}"] = jet <= 1e-10
    report(1, "Mittag-Leffler eigenproblem", checks, start, 10)


def test_criterion_02_figure1(report, tmp_path):
    start = time.perf_counter()
    code = cli.main(["figure1", "--out", str(tmp_path)])
    m = _manifest(tmp_path, "figure1")
    checks = {f"{c['name']}: {c['value']}": c["passed"] for c in m["checks"]}
    checks["six curves emitted"] = len(list((tmp_path / "figure1").glob("*.csv"))) == 6
    checks["three slope checks"] = sum(c["name"].startswith("slope") for c in m["checks"]) == 3
    checks["exit code 0"] = code == 0
    report(2, "Mittag-Leffler curves and near-origin slopes", checks, start, 5)


def test_criterion_03_green_oracle(report, tmp_path):
    start = time.perf_counter()
    code = cli.main(["green", "--n", "1", "--s", "1", "--pairs", "10000",
                     "--orders", "0.5,1.5,2.5", "--out", str(tmp_path)])
    m = _manifest(tmp_path, "green")
    checks = {f"{c['name']}: {c['value']:.2e}": c["passed"] for c in m["checks"]}
    checks["closed form and three path checks present"] = len(m["checks"]) == 4
    checks["exit code 0"] = code == 0
    report(3, "classical Green kernel and path agreement", checks, start, 30)


def test_criterion_04_dirichlet_residual(report):
    start = time.perf_counter()
    gp = GreenParams(1, 0.5)
    u = solve_dirichlet(interior_bump, gp, BallQuadrature(1, support=0.5))
    checks = {}
    for x in (-0.35, -0.15, 0.0, 0.1, 0.3):
        val = frac_laplacian_point(u, [x], FracOrder(0.5), radii=(0.5, 1.0))
        ref = float(interior_bump(np.array([x])))
        rel = abs(val / ref - 1)
        checks[f"x={x}: {rel:.2e}"] = rel <= 0.02
    report(4, "Dirichlet solve residual", checks, start, 120)


def test_criterion_05_boundary_exponents(report):
    start = time.perf_counter()
    checks = {}
    e = np.array([1.0])
    for s in (0.5, 1.5):
        gp = GreenParams(1, s)
        u = solve_dirichlet(interior_bump, gp, BallQuadrature(1, support=0.5))
        fits = {
            "green": green_boundary_limit(interior_bump, e, -e, gp, u=u)[0],
            "eigen": eigen_boundary_probe(
                first_eigenpair(ExactEnergy(1, s), RadialBasis(1, s, 12, family="operator")),
                e, -e),
            "bump": bump_boundary_fit(1, FracOrder(s)),
        }
        for name, fit in fits.items():
            rel = abs(fit.exponent / s - 1)
            checks[f"{name} s={s}: {rel:.2e}"] = rel <= 0.02
    report(5, "boundary exponents (Green, eigenfunction, bump)", checks, start, 120)


def test_criterion_06_boundary_limit(report):
    start = time.perf_counter()
    checks = {}
    e = np.array([1.0])
    for s in (0.5, 1.5):
        gp = GreenParams(1, s)
        u = solve_dirichlet(interior_bump, gp, BallQuadrature(1, support=0.5))
        fit, pred = green_boundary_limit(interior_bump, e, -e, gp, u=u)
        rel = abs(fit.constant / pred - 1)
        checks[f"constant s={s}: {rel:.2e}"] = rel <= 0.05
    gp = GreenParams(2, 0.5)
    e2 = np.array([1.0, 0.0])
    u = solve_dirichlet(interior_bump, gp, BallQuadrature(2, support=0.5))
    ks = []
    for w in ([-1.0, 0.0], [-0.8, 0.6], [-0.5, -0.8]):
        w = np.asarray(w) / np.linalg.norm(w)
        fit, pred = green_boundary_limit(interior_bump, e2, w, gp, u=u)
        rel = abs(fit.constant / pred - 1)
        checks[f"n=2 direction {w.round(3).tolist()}: {rel:.2e}"] = rel <= 0.05
        ks.append(fit.constant / (-(e2 @ w)) ** gp.s)
    spread = max(ks) / min(ks) - 1
    checks[f"angular law spread {spread:.2e}"] = spread <= 0.05
    report(6, "boundary-limit identity and angular law", checks, start, 120)


def test_criterion_07_eigenvalue(report):
    start = time.perf_counter()
    checks = {}
    ef = ExactEnergy(1, 1.0)
    ladder = [first_eigenpair(ef, RadialBasis(1, 1.0, k, family="operator")).lambda1
              for k in range(4, 13)]
    rel = abs(ladder[-1] / (math.pi ** 2 / 4) - 1)
    checks[f"lambda1 vs pi^2/4: {rel:.2e}"] = rel <= 0.005
    # a rise below 1e-12 relative is rounding in an already converged eigenvalue
    rise = max(0.0, max(np.diff(ladder))) / ladder[-1]
    checks[f"monotone in basis size: rise {rise:.1e}"] = rise <= 1e-12
    rng = np.random.default_rng(7)
    form = EnergyForm(2, 0.5)
    worst = -math.inf
    for _ in range(50):
        e_mean, e_v = spherical_mean_energies(random_modal_function(2, 0.5, rng), form)
        worst = max(worst, e_mean / e_v - 1)
    checks[f"spherical-mean energy on 50 functions: worst excess {worst:.1e}"] = worst <= 1e-10
    report(7, "eigenvalue oracle, monotonicity, spherical mean", checks, start, 60)


def test_criterion_08_span(report, tmp_path):
    start = time.perf_counter()
    code = cli.main(["span", "--K", "3", "--oversample", "4", "--out", str(tmp_path)])
    m = _manifest(tmp_path, "span")
    r = m["results"]
    checks = {f"rank {r['rank']} = K' {r['K_prime']}": r["rank"] == r["K_prime"] == 20,
              f"smin {r['smin']:.2e} > 1e-8": r["smin"] > 1e-8,
              f"degenerate rank {r['degenerate_rank']} < K'": r["degenerate_rank"] < 20,
              "80 blocks": r["blocks"] == 80, "exit code 0": code == 0}
    report(8, "jet span of the toy operator", checks, start, 300)


def test_criterion_09_approximation_ladder(report, tmp_path):
    start = time.perf_counter()
    code = cli.main(["approx", "--iota", "0,1", "--ell", "1", "--etas", "0.2,0.1,0.05,0.025",
                     "--out", str(tmp_path)])
    r = _manifest(tmp_path, "approx")["results"]
    checks = {f"slope {r['slope']:.2f} >= 0.9": r["slope"] >= 0.9,
              "errors decrease": r["monotone"],
              f"kappa {r['kappa_min']} >= 1 (gamma {r['gamma']}, delta {r['delta']}, "
              f"K0 {r['K0']})": r["passes"],
              "exit code 0": code == 0}
    report(9, "approximation ladder for f(t) = t", checks, start, 300)


def test_criterion_10_special_functions(report):
    start = time.perf_counter()
    checks = {}
    z = np.linspace(-5, 5, 201)
    err = float(np.max(np.abs(mittag_leffler(1.0, 1.0, z) / np.exp(z) - 1)))
    checks[f"E_1,1 = exp: {err:.1e}"] = err <= 1e-12
    z = np.linspace(0, 16, 161)
    err = float(np.max(np.abs(mittag_leffler(2.0, 1.0, z) / np.cosh(np.sqrt(z)) - 1)))
    checks[f"E_2,1 = cosh sqrt: {err:.1e}"] = err <= 1e-10
    err = 0.0
    for zz in (0.25, 0.7, 1.9, 4.0):
        for ww in (0.3, 1.0, 3.5):
            ref, _ = integrate.quad(lambda x: 1.0, 0, 1, weight="alg", wvar=(zz - 1, ww - 1),
                                    epsabs=0, epsrel=1e-13)
            err = max(err, abs(beta_value(zz, ww) / ref - 1))
    checks[f"Beta integral: {err:.1e}"] = err <= 1e-10
    err = 0.0
    # the rule holds for integer beta and for beta > k - 1
    for alpha in (0.3, 0.7, 1.5, 2.5):
        p = CaputoParams(alpha)
        for beta in (1.0, 2.0, 3.0, p.k - 0.5, p.k + 0.7):
            t = np.array([0.3, 1.0, 1.8])
            got = caputo_derivative(SmoothFn.power(beta), p, t)
            if beta == int(beta) and beta < p.k:
                want = np.zeros_like(t)
            else:
                want = math.gamma(beta + 1) / math.gamma(beta + 1 - alpha) * t ** (beta - alpha)
            err = max(err, float(np.max(np.abs(got - want) / np.maximum(np.abs(want), 1.0))))
    checks[f"Caputo power rule: {err:.1e}"] = err <= 1e-8
    report(10, "special-function identities", checks, start, 10)
