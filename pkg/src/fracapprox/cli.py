"""Command-line driver: per-module experiments emitting CSV data and JSON manifests.

Every command writes ``<out>/<command>/manifest.json`` plus CSV files and exits
with status 0 iff all of its checks pass. Precedence of settings: command-line
flags, then the ``--config`` file, then defaults. ``FRACAPPROX_OUT`` overrides
the default output directory (``--out`` still wins).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .io import read_config, write_csv, write_json

OUT_ENV = "FRACAPPROX_OUT"

FIGURE1_ALPHAS = (1 / 100, 1 / 20, 1 / 3, 2 / 3, 3 / 2, 11 / 2)

DEFAULTS = {
    "figure1": {"alphas": FIGURE1_ALPHAS, "t_min": 0.0, "t_max": 2.0, "resolution": 201},
    "green": {"n": 1, "s": 1.0, "pairs": 10000, "orders": (0.5, 1.5, 2.5)},
    "eigen": {"n": 1, "s": 1.0, "size": 12, "energy": "exact", "samples": 101},
    "asymp": {"n": 1, "s": 0.5, "alpha": 0.7, "t_star": 0.75, "ell": 1},
    "span": {"K": 3, "oversample": 4},
    "approx": {"iota": (0, 1), "ell": 1, "etas": (0.2, 0.1, 0.05, 0.025)},
}

TYPES = {"alphas": float, "t_min": float, "t_max": float, "resolution": int, "n": int,
         "s": float, "pairs": int, "orders": float, "size": int, "energy": str,
         "samples": int, "alpha": float, "t_star": float, "ell": int, "K": int,
         "oversample": int, "iota": int, "etas": float}

RANGES = {"resolution": (2, 100000), "n": (1, 2), "s": (1e-3, 10.0), "pairs": (1, 10 ** 7),
          "size": (4, 80), "samples": (2, 100000), "alpha": (1e-3, 10.0),
          "t_star": (1e-3, 10.0), "ell": (0, 4), "K": (0, 4), "oversample": (1, 16)}


# ---------------------------------------------------------------------------
# commands


def _check(name: str, value, limit, ok: bool) -> dict:
    return {"name": name, "value": value, "limit": limit, "passed": bool(ok)}


def cmd_figure1(cfg: dict, out: Path):
    from .asymptotics import power_fit
    from .specfun import mittag_leffler

    t = np.linspace(cfg["t_min"], cfg["t_max"], cfg["resolution"])
    near = np.geomspace(1e-12, 1e-9, 8)
    curves, checks = [], []
    for alpha in cfg["alphas"]:
        vals = mittag_leffler(alpha, 1.0, t ** alpha)
        label = f"{alpha:.6g}".replace(".", "p")
        path = write_csv(out / f"figure1_alpha_{label}.csv", ["t", "E"], zip(t, vals))
        # E - 1 = z E_{alpha, alpha+1}(z) avoids cancellation near t = 0
        z = near ** alpha
        slope = power_fit(list(zip(near, z * mittag_leffler(alpha, alpha + 1, z))), ()).exponent
        curves.append({"alpha": alpha, "file": path.name, "near_origin_slope": slope})
        if any(math.isclose(alpha, a) for a in (1 / 3, 2 / 3, 3 / 2)):
            rel = abs(slope / alpha - 1)
            checks.append(_check(f"slope alpha={alpha:.6g}", rel, 0.01, rel <= 0.01))
        if math.isclose(alpha, 1 / 100):
            v = mittag_leffler(alpha, 1.0, 1e-4 ** alpha)
            checks.append(_check("steep rise alpha=0.01 at t=1e-4", v, 1.5, v > 1.5))
        if math.isclose(alpha, 1.0):
            err = float(np.max(np.abs(vals - np.exp(t)) / np.exp(t)))
            checks.append(_check("alpha=1 equals exp", err, 1e-12, err <= 1e-12))
    return {"curves": curves}, checks


def cmd_green(cfg: dict, out: Path, seed: int):
    from .green_ball import GreenParams, green_kernel

    n, s = cfg["n"], cfg["s"]
    rng = np.random.default_rng(seed)
    x = _ball_points(rng, cfg["pairs"], n)
    y = _ball_points(rng, cfg["pairs"], n)
    gp = GreenParams(n, s)
    g = green_kernel(x, y, gp)
    checks = []
    results = {"n": n, "s": s, "pairs": cfg["pairs"]}
    cols, header = [x, y, g[:, None]], [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)]
    header.append("G")
    if n == 1 and s == 1.0:
        exact = 0.5 * ((1 - x[:, 0] * y[:, 0]) - np.abs(x[:, 0] - y[:, 0]))
        err = float(np.max(np.abs(g - exact)))
        results["closed_form_max_error"] = err
        checks.append(_check("closed form n=1 s=1", err, 1e-10, err <= 1e-10))
        cols.append(exact[:, None])
        header.append("exact")
    agree = {}
    for so in cfg["orders"]:
        gq = green_kernel(x, y, GreenParams(n, so), "quadrature")
        gs = green_kernel(x, y, GreenParams(n, so), "series")
        d = float(np.max(np.abs(gq - gs) / np.maximum(np.abs(gq), 1e-300)))
        agree[f"{so:g}"] = d
        checks.append(_check(f"quadrature vs series s={so:g}", d, 1e-8, d <= 1e-8))
    results["path_agreement"] = agree
    write_csv(out / "green_kernel.csv", header, np.hstack(cols))
    return results, checks


def _ball_points(rng, count, n):
    if n == 1:
        return rng.uniform(-1, 1, (count, 1))
    r = np.sqrt(rng.uniform(0, 1, count))
    th = rng.uniform(0, 2 * np.pi, count)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def cmd_eigen(cfg: dict, out: Path):
    from .eigen import EnergyForm, ExactEnergy, RadialBasis, first_eigenpair

    n, s = cfg["n"], cfg["s"]
    exact = cfg["energy"] == "exact"
    if cfg["energy"] not in ("exact", "fourier"):
        raise ValueError("energy must be 'exact' or 'fourier'")
    ef = ExactEnergy(n, s) if exact else EnergyForm(n, s)
    family = "operator" if exact else "l2"
    ladder = []
    for size in range(4, cfg["size"] + 1):
        ladder.append(first_eigenpair(ef, RadialBasis(n, s, size, family=family)).lambda1)
    ep = first_eigenpair(ef, RadialBasis(n, s, cfg["size"], family=family))
    checks = []
    # rises below 1e-12 relative are rounding once lambda1 has converged
    rise = float(np.max(np.diff(ladder), initial=0.0)) / ladder[-1]
    checks.append(_check("variational monotonicity", rise, 1e-12, rise <= 1e-12))
    if n == 1 and s == 1.0:
        rel = abs(ep.lambda1 / (math.pi ** 2 / 4) - 1)
        checks.append(_check("lambda1 vs pi^2/4", rel, 0.005, rel <= 0.005))
    r = np.linspace(0, 1, cfg["samples"])
    write_csv(out / "eigenfunction.csv", ["r", "phi"], zip(r, ep.radial(r)))
    write_csv(out / "eigen_ladder.csv", ["size", "lambda1"], zip(range(4, cfg["size"] + 1), ladder))
    return {"eigenpair": ep.to_dict(), "size_ladder": ladder}, checks


def cmd_asymp(cfg: dict, out: Path):
    from .asymptotics import bump_boundary_fit, ml_time_scaling
    from .fractional_laplacian import FracOrder

    n, s = cfg["n"], cfg["s"]
    bump = bump_boundary_fit(n, FracOrder(s))
    ml = ml_time_scaling(cfg["alpha"], cfg["t_star"], cfg["ell"])
    checks = []
    rel = abs(bump.exponent / s - 1)
    checks.append(_check("bump exponent vs s", rel, 0.02, rel <= 0.02))
    want = ml.meta["expected_exponent"]
    err = abs(ml.exponent - want) / max(abs(want), 1e-12)
    checks.append(_check("time exponent vs alpha-ell", err, 0.02, err <= 0.02))
    cerr = abs(ml.constant / ml.meta["expected_constant"] - 1)
    checks.append(_check("time constant", cerr, 0.05, cerr <= 0.05))
    write_csv(out / "bump_ladder.csv", ["eps", "value"], bump.ladder)
    write_csv(out / "time_ladder.csv", ["eps", "value"], ml.ladder)
    return {"bump": bump.to_dict(), "time_scaling": ml.to_dict()}, checks


def cmd_span(cfg: dict, out: Path, seed: int):
    from .span_harness import (OperatorSpec, jet_matrix, multi_indices, random_dictionary,
                               singular_values, span_rank)

    op = OperatorSpec.toy()
    K = cfg["K"]
    Kp = len(multi_indices(op.N, K))
    count = cfg["oversample"] * Kp
    jm = jet_matrix(random_dictionary(op, count, seed), K)
    rank, smin = span_rank(jm)
    dj = jet_matrix(random_dictionary(op, count, seed, degenerate=True), K)
    drank, dsmin = span_rank(dj)
    sv = singular_values(jm)
    write_csv(out / "singular_values.csv", ["index", "sigma"], zip(range(len(sv)), sv))
    checks = [_check("rank = K'", rank, Kp, rank == Kp),
              _check("smin", smin, 1e-8, smin > 1e-8),
              _check("degenerate control deficient", drank, Kp, drank < Kp)]
    results = {"operator": op.to_dict(), "K": K, "K_prime": Kp, "blocks": count, "rank": rank,
               "smin": smin, "degenerate_rank": drank, "degenerate_smin": dsmin}
    return results, checks


def cmd_approx(cfg: dict, out: Path, seed: int):
    from .span_harness import OperatorSpec, approximation_ladder

    op = OperatorSpec.caputo_toy()
    lad = approximation_ladder(op, tuple(cfg["iota"]), cfg["ell"], tuple(cfg["etas"]), seed)
    write_csv(out / "approx_ladder.csv", ["eta", "error"], zip(lad["etas"], lad["errors"]))
    checks = [_check("log-log slope", lad["slope"], 0.9, lad["slope"] >= 0.9),
              _check("monotone", lad["monotone"], True, lad["monotone"]),
              _check("kappa ledger", lad["kappa_min"], "1", lad["passes"])]
    return {"operator": op.to_dict(), **lad}, checks


COMMANDS = {"figure1": cmd_figure1, "green": cmd_green, "eigen": cmd_eigen,
            "asymp": cmd_asymp, "span": cmd_span, "approx": cmd_approx}
SEEDED = {"green", "span", "approx"}


# ---------------------------------------------------------------------------
# plumbing


def _versions() -> dict:
    out = {"fracapprox": __version__}
    for pkg in ("numpy", "scipy", "mpmath"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "missing"
    return out


def _coerce(key: str, value):
    cast = TYPES.get(key)
    if cast is None:
        raise ValueError(f"unknown setting {key!r}")
    if isinstance(value, (tuple, list)):
        return tuple(cast(v) for v in value)
    if isinstance(DEFAULTS_ANY.get(key), tuple):
        return (cast(value),)
    return cast(value)


DEFAULTS_ANY = {k: v for d in DEFAULTS.values() for k, v in d.items()}


def resolve_config(command: str, flags: dict, config_file=None) -> dict:
    """Defaults < config file < flags; numeric settings are range-checked."""
    cfg = dict(DEFAULTS[command])
    layers = [read_config(config_file)] if config_file else []
    layers.append({k: v for k, v in flags.items() if v is not None})
    for layer in layers:
        for key, value in layer.items():
            if key in ("seed", "out"):
                continue
            if key not in cfg:
                raise ValueError(f"setting {key!r} does not apply to {command}")
            cfg[key] = _coerce(key, value)
    for key, (lo, hi) in RANGES.items():
        if key in cfg and not lo <= cfg[key] <= hi:
            raise ValueError(f"{key}={cfg[key]} outside [{lo}, {hi}]")
    return cfg


def run(command: str, cfg: dict, out: Path, seed: int) -> dict:
    target = out / command
    fn = COMMANDS[command]
    results, checks = fn(cfg, target, seed) if command in SEEDED else fn(cfg, target)
    manifest = {"command": command, "seed": seed, "versions": _versions(), "config": cfg,
                "passed": all(c["passed"] for c in checks), "checks": checks,
                "results": results}
    write_json(target / "manifest.json", manifest)
    return manifest


def _list(cast):
    return lambda text: tuple(cast(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracapprox", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value settings file")
    common.add_argument("--out", type=Path, help=f"output directory (env {OUT_ENV})")
    common.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("figure1", parents=[common], help="Mittag-Leffler curves")
    p.add_argument("--alphas", type=_list(float))
    p.add_argument("--t-min", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--resolution", type=int)
    p = sub.add_parser("green", parents=[common], help="Green kernel oracles")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--pairs", type=int)
    p.add_argument("--orders", type=_list(float))
    p = sub.add_parser("eigen", parents=[common], help="first Dirichlet eigenpair")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--size", type=int)
    p.add_argument("--energy", choices=("exact", "fourier"))
    p.add_argument("--samples", type=int)
    p = sub.add_parser("asymp", parents=[common], help="boundary and initial-point fits")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--t-star", type=float)
    p.add_argument("--ell", type=int)
    p = sub.add_parser("span", parents=[common], help="jet-span rank experiment")
    p.add_argument("--K", type=int)
    p.add_argument("--oversample", type=int)
    p = sub.add_parser("approx", parents=[common], help="monomial approximation ladder")
    p.add_argument("--iota", type=_list(int))
    p.add_argument("--ell", type=int)
    p.add_argument("--etas", type=_list(float))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out", "seed")}
    file_cfg = read_config(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else int(file_cfg.get("seed", 0))
    out = args.out or os.environ.get(OUT_ENV) or file_cfg.get("out") or "out"
    try:
        cfg = resolve_config(args.command, flags, args.config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = run(args.command, cfg, Path(out), seed)
    for c in manifest["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']} (limit {c['limit']})")
    return 0 if manifest["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
