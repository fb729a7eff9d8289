"""Command-line entry point: ``subhardy <command> --config FILE`` or ``--scenario NAME``.

Every command loads a scenario, runs it, writes JSON and/or CSV under
``--out`` and exits 0 only if every verdict holds.  Exit status 1 means a
check failed; 2 means the scenario did not validate.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import frames as fr
from .battery import standard_battery
from .config import (
    COMMAND_FAMILY,
    COMMANDS,
    ConfigError,
    Scenario,
    as_point,
    bundled_scenarios,
    load_scenario,
)
from .domains import build_box, build_euclidean_ball, build_gauge_ball
from .expr import ExpressionError, parse_expression
from .fundsol import PoleError, calibrate_constant, euclidean_solution, heisenberg_solution
from .inequalities import (
    ParameterError,
    green_relative_residuals,
    normalization_check,
    representation_residual,
    run_check,
    stokes_residual,
)
from .quadrature import field_pairings, integrate_boundary, monte_carlo_oracle
from .report import emit_report, rows_to_csv
from .sharpness import family_for, optimize_trial

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# -- scenario objects -----------------------------------------------------


def build_frame(raw: dict):
    f = raw.get("frame")
    if not f:
        return None
    name = f.get("name")
    if name == "euclidean":
        return fr.euclidean(int(f.get("n", 3)))
    if name == "heisenberg":
        return fr.heisenberg(int(f.get("m", 1)))
    if name == "nonsmooth_r3":
        return fr.nonsmooth_r3()
    if name == "custom":
        coeffs = {}
        for key, src in f.get("coefficients", {}).items():
            try:
                k, m = (int(t) for t in key.split(","))
            except ValueError:
                raise ConfigError(f"coefficient key {key!r} must look like 'k,m'") from None
            coeffs[(k, m)] = src
        return fr.custom_frame(int(f["n"]), int(f["N"]), coeffs)
    raise ConfigError(f"unknown frame {name!r}")


def build_solution(raw: dict, frame=None):
    s = raw.get("solution")
    if not s:
        return None
    name = s["name"]
    if name == "euclidean":
        n = int(s.get("n", len(s.get("pole", [])) or (frame.n if frame else 3)))
        fs = euclidean_solution(n, s.get("pole"))
    else:
        fs = heisenberg_solution(int(s.get("m", 1)), s.get("pole"))
    if frame is not None and frame.name != fs.frame.name:
        raise ConfigError(f"frame {frame.name!r} does not match the {name} solution")
    c = s.get("constant", 1.0)
    if c != "calibrate":
        if not isinstance(c, (int, float)) or not c > 0:
            raise ConfigError("solution.constant must be positive or 'calibrate'")
        fs = fs.with_constant(float(c))
    return fs


def build_domain(raw: dict, n: int, fs=None):
    d = raw.get("domain")
    if not d:
        raise ConfigError("missing [domain] table")
    kind = d["kind"]
    if kind == "box":
        return build_box(as_point(d["lo"], n, "domain.lo"), as_point(d["hi"], n, "domain.hi"))
    if kind == "ball":
        center = as_point(d.get("center", [0.0] * n), n, "domain.center")
        return build_euclidean_ball(center, float(d["radius"]))
    if fs is None:
        raise ConfigError("a gauge ball needs a [solution] table")
    return build_gauge_ball(fs, float(d["radius"]))


def _setup(sc: Scenario):
    raw = sc.raw
    frame = build_frame(raw)
    fs = build_solution(raw, frame)
    if frame is None and fs is None:
        raise ConfigError("scenario needs a [frame] or a [solution] table")
    frame = frame or fs.frame
    domain = build_domain(raw, frame.n, fs)
    if fs is not None and raw["solution"].get("constant", 1.0) == "calibrate":
        fs = calibrate_constant(fs, domain, sc.scheme)
    return frame, fs, domain


def _battery(sc: Scenario, n: int, domain):
    b = sc.table("battery")
    if domain.kind == "box":
        center = 0.5 * (np.asarray(domain.lo) + np.asarray(domain.hi))
        scale = 0.5 * float(np.min(np.asarray(domain.hi) - np.asarray(domain.lo)))
    else:
        center, scale = np.asarray(domain.center), float(domain.radius)
    center = as_point(b.get("center", list(center)), n, "battery.center")
    names = b.get("names", "all")
    funcs = standard_battery(n, center, float(b.get("scale", scale)), None if names == "all" else list(names))
    # extra functions are labelled by their source text
    funcs.extend(parse_expression(src) for src in b.get("functions", []))
    return funcs


def _paths(sc: Scenario, out: Optional[str], suffix: str = ""):
    root = Path(out or sc.out_dir)
    return root / f"{sc.stem}{suffix}"


def _write(text: str, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def _meta(sc: Scenario) -> dict:
    return {"scenario": sc.stem, "scheme": asdict(sc.scheme), "scheme_hash": sc.scheme.hash(), "seed": sc.seed}


# -- commands -------------------------------------------------------------


def run_checks(sc: Scenario, out, fmt):
    frame, fs, domain = _setup(sc)
    R = sc.table("check").get("R", "auto")
    reports = []
    for u in _battery(sc, frame.n, domain):
        for name in sc.inequalities():
            for a in sc.alphas():
                rep = run_check(name, fs, u, a, fs.beta, domain, sc.scheme, R)
                reports.append(replace(rep, seed=sc.seed))
    # stable order: inequality, alpha, function
    order = {name: i for i, name in enumerate(sc.inequalities())}
    reports.sort(key=lambda r: (order[r.name], r.params["alpha"]))
    written = []
    if fmt in ("json", "both"):
        written.append(emit_report(reports, "json", _paths(sc, out, ".json"), _meta(sc)))
    if fmt in ("csv", "both"):
        written.append(emit_report(reports, "csv", _paths(sc, out, ".csv")))
    bad = [r for r in reports if r.verdict != "holds"]
    for r in bad:
        print(f"{r.verdict}: {r.name} u={r.u} alpha={r.params['alpha']!r} slack={r.slack!r} tol={r.tolerance!r}")
    print(f"{len(reports)} reports, {len(reports) - len(bad)} hold")
    return (EXIT_OK if not bad else EXIT_FAIL), written


def _emit_table(sc, out, fmt, columns, rows, summary):
    written = []
    if fmt in ("csv", "both"):
        written.append(_write(rows_to_csv(columns, rows), _paths(sc, out, ".csv")))
    if fmt in ("json", "both"):
        payload = {"meta": _meta(sc), "columns": list(columns), "rows": [list(r) for r in rows], "summary": summary}
        written.append(_write(json.dumps(payload, indent=2, sort_keys=True) + "\n", _paths(sc, out, ".json")))
    return written


def run_green(sc: Scenario, out, fmt):
    frame, _, domain = _setup(sc)
    g = sc.table("green")
    tol = float(g.get("tolerance", 1e-6))
    rows = []
    for u_src, v_src in g["pairs"]:
        u, v = parse_expression(u_src), parse_expression(v_src)
        r1, r2, s1, s2 = green_relative_residuals(frame, u, v, domain, sc.scheme)
        rows.append((u_src, v_src, r1, r2, s1, s2, abs(r1) < tol and abs(r2) < tol))
    ok = all(r[-1] for r in rows)
    cols = ("u", "v", "g1_relative", "g2_relative", "g1_scale", "g2_scale", "pass")
    written = _emit_table(sc, out, fmt, cols, rows, {"tolerance": tol, "pass": ok})
    print(f"{len(rows)} pairs, {sum(r[-1] for r in rows)} within {tol:g}")
    return (EXIT_OK if ok else EXIT_FAIL), written


def stokes_oracle(frame, fields, domain, samples: int, seed: int, stratified: bool = True):
    """Summed interior side by Monte Carlo against the summed boundary side by quadrature."""

    def interior(X):
        return sum(frame.apply(f, X)[:, k] for k, f in enumerate(fields))

    mc = monte_carlo_oracle(interior, domain, samples, seed=seed, stratified=stratified)
    bnd = 0.0
    for k, f in enumerate(fields):
        bnd += integrate_boundary(lambda X, N, f=f, k=k: f(X) * field_pairings(frame, X, N)[:, k], domain).value
    return mc, bnd


def run_stokes(sc: Scenario, out, fmt):
    frame, _, domain = _setup(sc)
    st = sc.table("stokes")
    tol = float(st.get("tolerance", 1e-4))
    rows = []
    for i, srcs in enumerate(st["fields"]):
        if len(srcs) != frame.N:
            raise ConfigError(f"stokes.fields[{i}] needs {frame.N} expressions")
        fk = [parse_expression(s) for s in srcs]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _, total, interior, boundary = stokes_residual(frame, fk, domain, sc.scheme)
            mc, bnd = stokes_oracle(frame, fk, domain, sc.mc_samples, sc.seed + i, bool(st.get("stratified", True)))
        quad_int = math.fsum(r.value for r in interior)
        resid = mc.value - bnd
        rows.append((";".join(srcs), quad_int, mc.value, mc.error_estimate, bnd, total, resid, abs(resid) < tol))
    ok = all(r[-1] for r in rows)
    cols = ("fields", "interior_quadrature", "interior_mc", "mc_error", "boundary", "residual_quadrature", "residual_mc", "pass")
    written = _emit_table(sc, out, fmt, cols, rows, {"tolerance": tol, "pass": ok})
    print(f"{len(rows)} field sets, {sum(r[-1] for r in rows)} within {tol:g}")
    return (EXIT_OK if ok else EXIT_FAIL), written


def run_representation(sc: Scenario, out, fmt):
    frame, fs, domain = _setup(sc)
    rp = sc.table("representation")
    tol = float(rp.get("tolerance", 1e-3))
    u = parse_expression(rp["u"])
    rows = []
    for p in rp["points"]:
        x = as_point(p, frame.n, "representation point")
        r = representation_residual(fs, frame, u, x, domain, sc.scheme)
        rows.append((json.dumps([float(t) for t in x]), r, abs(r) < tol))
    ok = all(r[-1] for r in rows)
    written = _emit_table(sc, out, fmt, ("x", "residual", "pass"), rows, {"tolerance": tol, "pass": ok})
    print(f"{len(rows)} points, {sum(r[-1] for r in rows)} within {tol:g}")
    return (EXIT_OK if ok else EXIT_FAIL), written


def run_calibrate(sc: Scenario, out, fmt):
    frame, fs, domain = _setup(sc)
    if sc.raw["solution"].get("constant", 1.0) != "calibrate":
        fs = calibrate_constant(fs, domain, sc.scheme)
    tol = float(sc.table("calibrate").get("tolerance", 1e-3))
    flux = normalization_check(fs, domain, sc.scheme)
    ok = abs(flux.value + 1.0) < tol
    rows = [(fs.kind, fs.beta, fs.constant, flux.value, flux.error_estimate, flux.value + 1.0, ok)]
    cols = ("solution", "beta", "constant", "flux", "flux_error", "residual", "pass")
    written = _emit_table(sc, out, fmt, cols, rows, {"tolerance": tol, "pass": ok})
    print(f"c = {fs.constant!r}, flux = {flux.value!r}")
    return (EXIT_OK if ok else EXIT_FAIL), written


def run_sharpness(sc: Scenario, out, fmt):
    frame, fs, domain = _setup(sc)
    sh = sc.table("sharpness")
    ineq = sh.get("inequality", "LH2a")
    alpha = float(sh.get("alpha", 0.0))
    tol = float(sh.get("tolerance", 0.05))
    radius = float(domain.radius) if domain.radius is not None else 0.5 * domain.scale
    family = family_for(ineq, fs, alpha, radius, float(sh.get("log10_min", -60.0)))
    res = optimize_trial(
        ineq, family, fs, frame, alpha, fs.beta, domain, sc.scheme,
        budget=int(sh.get("budget", 60)), restarts=int(sh.get("restarts", 3)), seed=sc.seed,
    )
    ok = res.relative_gap is not None and abs(res.relative_gap) <= tol and res.respects_bound()
    summary = {
        "meta": _meta(sc),
        "inequality": ineq,
        "alpha": alpha,
        "beta": fs.beta,
        "theta": list(res.theta),
        "ratio": res.ratio,
        "target": res.target,
        "relative_gap": res.relative_gap,
        "restarts": res.restarts,
        "tolerance": tol,
        "pass": ok,
    }
    written = []
    if fmt in ("csv", "both"):
        rows = [(k, i, *theta, r, best) for k, i, theta, r, best in res.trace]
        cols = ("restart", "evaluation") + tuple(f"theta{j + 1}" for j in range(family.dim)) + ("ratio", "best")
        written.append(_write(rows_to_csv(cols, rows), _paths(sc, out, "_trace.csv")))
    if fmt in ("json", "both"):
        written.append(_write(json.dumps(summary, indent=2, sort_keys=True) + "\n", _paths(sc, out, ".json")))
    print(f"best ratio {res.ratio!r} (target {res.target!r}, gap {res.relative_gap:+.3%})")
    return (EXIT_OK if ok else EXIT_FAIL), written


RUNNERS = {
    "green": run_green,
    "stokes": run_stokes,
    "representation": run_representation,
    "calibrate": run_calibrate,
    "sharpness": run_sharpness,
}


def run_scenario(sc: Scenario, out: Optional[str] = None, fmt: str = "both"):
    """Execute a validated scenario; returns (exit status, written paths)."""
    cmd = sc.command
    if cmd in COMMAND_FAMILY:
        return run_checks(sc, out, fmt)
    if cmd in RUNNERS:
        return RUNNERS[cmd](sc, out, fmt)
    raise ConfigError(f"scenario has no runnable command ({cmd!r})")


# -- argument parsing -----------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="scenario TOML file")
    src.add_argument("--scenario", metavar="NAME", help="bundled scenario name")
    p.add_argument("--out", metavar="DIR", help="output directory (default from the scenario, else ./out)")
    p.add_argument("--order", type=int, help="Gauss order per axis")
    p.add_argument("--refine", type=int, help="subdivisions per axis")
    p.add_argument("--eps0", type=float, help="first excision radius, relative to the domain scale")
    p.add_argument("--eps-levels", type=int, dest="eps_levels", help="excision levels for extrapolation")
    p.add_argument("--mc-samples", type=int, dest="mc_samples", help="Monte Carlo samples")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both", dest="fmt")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="subhardy", description="Numerical checks of Hardy, Rellich and Green-type identities for sums of squares of vector fields.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "green": "Green's first and second formulae",
        "stokes": "divergence formula against a Monte Carlo oracle",
        "hardy": "Hardy inequalities over a parameter grid and battery",
        "uncertainty": "uncertainty principles",
        "rellich": "Rellich inequalities",
        "rellich-grad": "Rellich inequalities with a gradient term",
        "representation": "representation formula residuals",
        "calibrate": "calibrate the constant of the fundamental solution",
        "sharpness": "estimate sharp constants by trial-function optimization",
    }
    for cmd in COMMANDS:
        sub.add_parser(cmd, parents=[common], help=helps[cmd])
    v = sub.add_parser("validate-config", parents=[common], help="validate a scenario without running it")
    v.add_argument("--list", action="store_true", help="list bundled scenarios")
    return parser


def _load(args, command: Optional[str]) -> Scenario:
    source = args.config or args.scenario
    if source is None:
        raise ConfigError("pass --config PATH or --scenario NAME")
    overrides = {
        "order": args.order,
        "refine": args.refine,
        "eps0": args.eps0,
        "eps_levels": args.eps_levels,
        "mc_samples": args.mc_samples,
        "seed": args.seed,
    }
    return load_scenario(source, command, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            if args.list:
                print("\n".join(bundled_scenarios()))
                return EXIT_OK
            sc = _load(args, None)
            print(f"{sc.stem}: ok ({sc.command or 'no command'})")
            return EXIT_OK
        sc = _load(args, args.command)
        status, written = run_scenario(sc, args.out, args.fmt)
    except (ConfigError, ParameterError, ExpressionError, PoleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in written:
        print(f"wrote {p}")
    return status


if __name__ == "__main__":
    sys.exit(main())
