"""Acceptance criteria, one PASS/FAIL line each (see the terminal summary)."""

import math
import time
import warnings

import numpy as np
import pytest
import sympy as sp

from subhardy.battery import standard_battery
from subhardy.cli import main, stokes_oracle
from subhardy.config import bundled_scenarios, load_scenario
from subhardy.domains import build_box, build_euclidean_ball, build_gauge_ball
from subhardy.expr import parse_expression
from subhardy.fields import ScalarField
from subhardy.frames import euclidean, heisenberg, nonsmooth_r3
from subhardy.fundsol import calibrate_constant, euclidean_solution, heisenberg_solution, key_identity_residual
from subhardy.inequalities import (
    CHECKS,
    green_relative_residuals,
    hardy_check,
    hardy_refined_check,
    normalization_check,
    rellich_check,
    rellich_gradient_check,
    run_check,
)
from subhardy.quadrature import QuadratureScheme
from subhardy.sharpness import hardy_family, optimize_trial

pytestmark = pytest.mark.slow
S = QuadratureScheme()


def lattice(lo: float, hi: float, step: float = 0.25):
    """Multiples of ``step`` strictly inside (lo, hi)."""
    k0 = math.floor(lo / step) + 1
    k1 = math.ceil(hi / step) - 1
    return [k * step for k in range(k0, k1 + 1)]


def test_c1_normalization_euclidean(record):
    t = time.perf_counter()
    fs = euclidean_solution(3, constant=1 / (4 * math.pi))
    v = normalization_check(fs, build_euclidean_ball(np.zeros(3), 1.0), S).value
    record("C1 normalization R^3", abs(v + 1) < 1e-3, f"flux={v!r}, |flux+1|<1e-3", time.perf_counter() - t, 10)


def test_c1_normalization_heisenberg(record):
    t = time.perf_counter()
    fs = calibrate_constant(heisenberg_solution(), build_gauge_ball(heisenberg_solution(), 1.0), S)
    # calibrated on the unit gauge ball, checked on radius 2
    v = normalization_check(fs, build_gauge_ball(fs, 2.0), S).value
    record("C1 normalization H^1", abs(v + 1) < 1e-2, f"c={fs.constant!r}, flux={v!r}, |flux+1|<1e-2", time.perf_counter() - t, 10)


GREEN_PAIRS = [
    ("x1**2 + x2*x3", "1"),
    ("x1*x2", "x3**2"),
    ("exp(x1)*cos(x2)", "x2 + x3**3"),
    ("sin(x1*x3) + x2**2", "x1*x2*x3"),
    ("(1 + x1**2)*(2 + x2)*x3", "exp(-x1**2 - x3**2)"),
    ("x3", "x1"),
]


def exact_field(src: str) -> ScalarField:
    xs = sp.symbols("x1:4", real=True)
    return ScalarField.from_sympy(sp.sympify(src, locals=dict(zip(map(str, xs), xs))), xs, name=src)


def test_c2_green(record):
    t = time.perf_counter()
    worst = 0.0
    for frame, box in (
        (euclidean(3), build_box([0.1, -0.4, 0.2], [1.0, 0.5, 0.9])),
        (heisenberg(1), build_box([-0.3, 0.1, -0.5], [0.6, 0.8, 0.4])),
    ):
        for u, v in GREEN_PAIRS:
            g1, g2, _, _ = green_relative_residuals(frame, exact_field(u), exact_field(v), box, S)
            worst = max(worst, abs(g1), abs(g2))
    record("C2 Green g1/g2", worst < 1e-6, f"12 pairs, max relative residual={worst:.3e} < 1e-6", time.perf_counter() - t, 30)


def test_c3_stokes_nonsmooth(record):
    t = time.perf_counter()
    frame = nonsmooth_r3()
    cube = build_box([0, 0, 0], [1, 1, 1])
    sets = [["x3^2", "x1*x3"], ["x1*x2*x3", "x3 - x1^2"], ["abs(x2 - 0.5)*x3", "x1*(1 + x2*x3)"]]
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, srcs in enumerate(sets):
            mc, bnd = stokes_oracle(frame, [parse_expression(s) for s in srcs], cube, 4_000_000, 7 + i)
            worst = max(worst, abs(mc.value - bnd))
    record("C3 Stokes nonsmooth frame", worst < 1e-4, f"3 sets, max |MC - boundary|={worst:.3e} < 1e-4", time.perf_counter() - t, 60)


def test_c4_hardy_suite(record):
    t = time.perf_counter()
    cases = [(euclidean_solution(b), b) for b in (3, 4, 5)] + [(heisenberg_solution(), 4)]
    count, bad = 0, []
    for fs, b in cases:
        domain = build_gauge_ball(fs, 1.0)
        for u in standard_battery(fs.n):
            for k in range(1, int(round(4 * (2 * b - 2))) + 1):
                a = 2 - b + 0.25 * k
                for rep in (
                    hardy_check(fs, fs.frame, u, a, b, domain, S),
                    hardy_refined_check(fs, fs.frame, u, a, b, "auto", domain, S),
                ):
                    count += 1
                    if rep.verdict != "holds":
                        bad.append((fs.kind, b, a, u.name, rep.name, rep.slack, rep.tolerance))
    record("C4 Hardy suite", not bad, f"{count} reports, {len(bad)} not holding {bad[:3]}", time.perf_counter() - t, 600)


@pytest.mark.parametrize(
    "label, target, gap",
    [("R^3", 0.25, 0.05), ("H^1", 1.0, 0.10)],
)
def test_c5_sharp_hardy(record, label, target, gap):
    t = time.perf_counter()
    if label == "R^3":
        fs, beta = euclidean_solution(3), 3.0
        domain = build_euclidean_ball(np.zeros(3), 1.0)
    else:
        fs, beta = heisenberg_solution(), 4.0
        domain = build_gauge_ball(fs, 1.0)
    res = optimize_trial("LH2a", hardy_family(fs, 0.0, 1.0), fs, fs.frame, 0.0, beta, domain, S)
    rel = abs(res.ratio - target) / target
    ok = rel < gap and res.respects_bound()
    record(f"C5 sharp Hardy {label}", ok, f"best ratio={res.ratio!r} at {res.theta}, gap {rel:.2%} < {gap:.0%}", time.perf_counter() - t, 300)


def test_c6_rellich_suites(record):
    t = time.perf_counter()
    count, bad = 0, []
    main_c = None
    for n in (5, 9):
        fs = euclidean_solution(n)
        domain = build_euclidean_ball(np.zeros(n), 1.0)
        for u in standard_battery(n):
            for a in lattice(4 - n, n):
                for v in ("LR2a", "LR2"):
                    rep = rellich_check(fs, fs.frame, u, a, n, "auto", v, domain, S)
                    count += 1
                    if n == 5 and a == 0.0:
                        main_c = rep.extras["main_constant"]
                    if rep.verdict != "holds":
                        bad.append((n, a, u.name, v, rep.slack, rep.tolerance))
            for a in lattice((8 - n) / 3, n):
                for v in ("2LR2a", "2LR2"):
                    rep = rellich_gradient_check(fs, fs.frame, u, a, n, "auto", v, domain, S)
                    count += 1
                    if rep.verdict != "holds":
                        bad.append((n, a, u.name, v, rep.slack, rep.tolerance))
    # exactly 25/16; the Rellich factor 4/(n(n-4)) is its inverse square root up to rounding
    exact = main_c == 25 / 16 and math.isclose(main_c, (4 / (5 * 1)) ** -2, rel_tol=1e-15)
    ok = not bad and exact
    record("C6 Rellich suites", ok, f"{count} reports, {len(bad)} not holding {bad[:3]}, main constant n=5 alpha=0: {main_c!r}", time.perf_counter() - t, 900)


def test_c7_key_identity(record, rng):
    t = time.perf_counter()
    worst = 0.0
    for fs in (euclidean_solution(5), heisenberg_solution()):
        X = rng.uniform(-1, 1, size=(100, fs.n))
        for a in (1.0, 2.0, 3.0):
            worst = max(worst, float(np.max(np.abs(key_identity_residual(fs, a, X)))))
    record("C7 key identity", worst < 1e-6, f"max |residual|={worst:.3e} < 1e-6", time.perf_counter() - t, 5)


def _terms(rep):
    return rep.breakdown().as_dict()


def test_c8_scaling_invariance(record):
    t = time.perf_counter()
    alphas = {"hardy": 0.5, "uncertainty": 0.0, "rellich": 2.0, "rellich_gradient": 2.5}
    worst, count = 0.0, 0
    for fs0, domain in (
        (euclidean_solution(3), build_euclidean_ball(np.zeros(3), 1.0)),
        (heisenberg_solution(), build_gauge_ball(heisenberg_solution(), 1.0)),
    ):
        for u in standard_battery(fs0.n, scale=domain.scale):
            for name, kind in CHECKS.items():
                base = _terms(run_check(name, fs0, u, alphas[kind], fs0.beta, domain, S, "auto"))
                for lam in (0.1, 10.0):
                    fs = fs0.with_constant(lam * fs0.constant)
                    other = _terms(run_check(name, fs, u, alphas[kind], fs.beta, domain, S, "auto"))
                    for key, a in base.items():
                        b = other[key]
                        count += 1
                        if a != b:
                            worst = max(worst, abs(a - b) / max(abs(a), abs(b)))
    record("C8 scaling invariance", worst < 1e-10, f"{count} stored terms, max relative change={worst:.3e} < 1e-10", time.perf_counter() - t, 120)


def test_c9_determinism(record, tmp_path):
    t = time.perf_counter()
    differing, failed = [], []
    for name in bundled_scenarios():
        cmd = load_scenario(name).command
        outs = []
        for run in ("a", "b"):
            out = tmp_path / run
            if main([cmd, "--scenario", name, "--out", str(out), "--format", "csv"]) != 0:
                failed.append(name)
            outs.append(out)
        for path in sorted(outs[0].glob(f"{name}*.csv")):
            if path.read_bytes() != (outs[1] / path.name).read_bytes():
                differing.append(path.name)
    ok = not differing and not failed
    detail = f"{len(bundled_scenarios())} bundled scenarios run twice, differing CSV: {differing}, nonzero exit: {failed}"
    record("C9 determinism", ok, detail, time.perf_counter() - t, 1200)
