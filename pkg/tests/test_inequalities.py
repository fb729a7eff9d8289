import json
import math

import numpy as np
import pytest

from subhardy.battery import COMPACT, standard_battery
from subhardy.domains import build_box, build_euclidean_ball, build_gauge_ball
from subhardy.fields import ScalarField
from subhardy.frames import euclidean, heisenberg
from subhardy.fundsol import PoleError, euclidean_solution, heisenberg_solution
from subhardy.inequalities import (
    InequalityReport,
    ParameterError,
    c_functional,
    green_first_residual,
    green_relative_residuals,
    green_second_residual,
    hardy_check,
    hardy_refined_check,
    normalization_check,
    rellich_check,
    rellich_gradient_check,
    representation_residual,
    stokes_residual,
    uncertainty_check,
    validate_parameters,
)
from subhardy.quadrature import QuadratureScheme

x1, x2, x3 = (ScalarField.coordinate(j) for j in range(3))
CUBE = build_box([0, 0, 0], [1, 1, 1])


@pytest.fixture(scope="module")
def r3():
    fs = euclidean_solution(3, constant=1 / (4 * math.pi))
    return fs, build_euclidean_ball(np.zeros(3), 1.0)


@pytest.fixture(scope="module")
def h1():
    fs = heisenberg_solution(constant=1 / (8 * math.pi))
    return fs, build_gauge_ball(fs, 1.0)


def test_stokes_divergence_theorem(scheme):
    res, total, _, _ = stokes_residual(euclidean(3), [x1, x2, x3], CUBE, scheme)
    assert max(abs(r) for r in res) < 1e-10
    one = ScalarField.constant(1.0)
    res, _, _, bnd = stokes_residual(euclidean(3), [one, one, one], CUBE, scheme)
    assert max(abs(b.value) for b in bnd) < 1e-10


def test_stokes_wrong_arity(scheme):
    with pytest.raises(ValueError):
        stokes_residual(euclidean(3), [x1], CUBE, scheme)


def test_green_harmonic_flux(scheme):
    one = ScalarField.constant(1.0)
    # v = 1, u harmonic: the flux of grad u vanishes
    assert abs(green_first_residual(euclidean(3), x1 * x2, one, CUBE, scheme)) < 1e-8


def test_green_polynomials(scheme):
    u = 1 + x1 * x1 - x2 * x3
    assert abs(green_first_residual(euclidean(3), u, u, CUBE, scheme)) < 1e-8
    assert abs(green_second_residual(euclidean(3), x1 * x1, x2 * x2, CUBE, scheme)) < 1e-8


def test_green_heisenberg_box(scheme):
    box = build_box([0.1, -0.3, 0.2], [0.8, 0.4, 0.9])
    assert abs(green_first_residual(heisenberg(1), x3, x1, box, scheme)) < 1e-6
    g1, g2, _, _ = green_relative_residuals(heisenberg(1), x3 * x1, x2 * x2 + x3, box, scheme)
    assert abs(g1) < 1e-6 and abs(g2) < 1e-6


def test_green_second_antisymmetry(scheme):
    u, v = x1 * x2 + x3, x3 * x3
    a = green_second_residual(heisenberg(1), u, v, CUBE, scheme)
    assert green_second_residual(heisenberg(1), v, u, CUBE, scheme) == -a
    assert green_second_residual(heisenberg(1), u, u, CUBE, scheme) == 0.0


def test_normalization_euclidean(r3, scheme):
    fs, ball = r3
    assert normalization_check(fs, ball, scheme).value == pytest.approx(-1.0, abs=1e-3)
    outside = euclidean_solution(3, pole=[2.0, 0.0, 0.0], constant=fs.constant)
    assert abs(normalization_check(outside, ball, QuadratureScheme(order=12)).value) < 1e-6


def test_normalization_heisenberg(h1, scheme):
    fs, ball = h1
    assert normalization_check(fs, ball, scheme).value == pytest.approx(-1.0, abs=1e-2)
    assert normalization_check(fs, build_gauge_ball(fs, 2.0), scheme).value == pytest.approx(-1.0, abs=1e-2)


def test_normalization_pole_on_boundary(r3, scheme):
    fs, ball = r3
    on = euclidean_solution(3, pole=[1.0, 0.0, 0.0], constant=fs.constant)
    with pytest.raises(PoleError):
        normalization_check(on, ball, scheme)


def test_representation(r3, scheme):
    fs, ball = r3
    frame = euclidean(3)
    assert abs(representation_residual(fs, frame, ScalarField.constant(1.0), np.zeros(3), ball, scheme)) < 1e-3
    assert abs(representation_residual(fs, frame, x1 * x1, np.zeros(3), ball, scheme)) < 1e-3
    # harmonic u with an off-centre pole
    assert abs(representation_residual(fs, frame, x1 * x2 + x3, np.array([0.2, -0.1, 0.3]), ball, scheme)) < 1e-3
    with pytest.raises(PoleError):
        representation_residual(fs, frame, x1, np.array([1.5, 0, 0]), ball, scheme)


def test_c_functional(r3, scheme):
    fs, ball = r3
    bump = standard_battery(3, names=["bump_shift"])[0]
    assert abs(c_functional(fs, fs.frame, bump, 1.0, 3.0, ball, scheme)) < 1e-12


def test_c_functional_constant_closed_form(scheme):
    # u = 1 on the unit 5-ball: only the first boundary integral survives
    n, alpha = 5, 1.0
    fs = euclidean_solution(n)
    ball = build_euclidean_ball(np.zeros(n), 1.0)
    k = (alpha - 2) / (2 - n)
    area = 8 * math.pi**2 / 3
    # Gamma^(k-1) <grad Gamma, nu> = 1 * (2 - n) on the unit sphere
    expected = k * (2 - n) * area
    assert c_functional(fs, fs.frame, ScalarField.constant(1.0), alpha, n, ball, scheme) == pytest.approx(expected, rel=1e-8)


def test_hardy_main_constant(r3, scheme):
    fs, ball = r3
    u = standard_battery(3, names=["gauss"])[0]
    rep = hardy_check(fs, fs.frame, u, 0.0, 3.0, ball, scheme)
    assert rep.extras["main_constant"] == 0.25
    assert rep.verdict == "holds"


def test_hardy_compact_support(r3, scheme):
    fs, ball = r3
    for u in standard_battery(3, names=list(COMPACT)):
        rep = hardy_check(fs, fs.frame, u, 0.5, 3.0, ball, scheme)
        assert abs(rep.term("boundary")) < 1e-12
        assert rep.slack >= -rep.tolerance
        ref = hardy_refined_check(fs, fs.frame, u, 0.5, 3.0, "auto", ball, scheme)
        assert ref.slack <= rep.slack + rep.tolerance


def test_refined_R_bound(r3, scheme):
    fs, ball = r3
    with pytest.raises(ParameterError):
        hardy_refined_check(fs, fs.frame, x1, 0.0, 3.0, 0.5, ball, scheme)


def test_beta_must_match_solution(r3, scheme):
    fs, ball = r3
    with pytest.raises(ParameterError):
        hardy_check(fs, fs.frame, x1, 0.0, 4.0, ball, scheme)


@pytest.mark.parametrize(
    "kind, alpha, beta, message",
    [
        ("hardy", -1.5, 3.0, "alpha > 2 - beta"),
        ("rellich", 0.0, 4.0, "beta > alpha > 4 - beta"),
        ("rellich", 5.0, 4.0, "beta > alpha > 4 - beta"),
        ("rellich_gradient", 0.0, 5.0, "(8 - beta)/3"),
        ("uncertainty", 0.0, 2.0, "beta > 2"),
    ],
)
def test_wedge_messages(kind, alpha, beta, message):
    with pytest.raises(ParameterError, match=message.replace("(", r"\(").replace(")", r"\)")):
        validate_parameters(kind, alpha, beta)


def test_uncertainty_compact(r3, scheme):
    fs, ball = r3
    u = standard_battery(3, names=["bump"])[0]
    a = uncertainty_check(fs, fs.frame, u, 3.0, None, "UP1a", ball, scheme)
    b = uncertainty_check(fs, fs.frame, u, 3.0, None, "UP2a", ball, scheme)
    assert a.verdict == "holds" and b.verdict == "holds"
    # |grad Gamma^(1/(2-beta))| is constant on Euclidean space
    assert a.lhs == pytest.approx(b.lhs, rel=1e-10)
    with pytest.raises(ValueError):
        uncertainty_check(fs, fs.frame, u, 3.0, None, "UP3", ball, scheme)


def test_rellich_constants(scheme):
    fs = euclidean_solution(5)
    ball = build_euclidean_ball(np.zeros(5), 1.0)
    u = standard_battery(5, names=["bump"])[0]
    rep = rellich_check(fs, fs.frame, u, 0.0, 5.0, None, "LR2a", ball, scheme)
    assert rep.extras["main_constant"] == 25 / 16
    assert rep.verdict == "holds"
    edge = rellich_check(fs, fs.frame, u, 4 - 5 + 0.01, 5.0, None, "LR2a", ball, scheme)
    assert edge.extras["main_constant"] < 1e-3 and edge.verdict == "holds"
    with pytest.raises(ParameterError):
        rellich_gradient_check(fs, fs.frame, u, 0.0, 5.0, None, "2LR2a", ball, scheme)
    grad = rellich_gradient_check(fs, fs.frame, u, 2.0, 5.0, "auto", "2LR2", ball, scheme)
    assert grad.extras["main_constant"] == 2.25 and grad.verdict == "holds"


def test_rellich_heisenberg(h1, scheme):
    fs, ball = h1
    with pytest.raises(ParameterError):
        rellich_check(fs, fs.frame, x1, 0.0, 4.0, None, "LR2a", ball, scheme)
    u = standard_battery(3, scale=ball.scale, names=["bump"])[0]
    rep = rellich_check(fs, fs.frame, u, 1.0, 4.0, None, "LR2a", ball, scheme)
    assert rep.verdict == "holds" and rep.extras["min_grad_gauge"] > 0


@pytest.mark.parametrize("lam", [0.1, 10.0])
def test_scaling_invariance(r3, scheme, lam):
    fs, ball = r3
    u = standard_battery(3, names=["gauss_shift"])[0]
    base = hardy_refined_check(fs, fs.frame, u, 1.0, 3.0, "auto", ball, scheme)
    other = hardy_refined_check(fs.with_constant(lam * fs.constant), fs.frame, u, 1.0, 3.0, "auto", ball, scheme)
    for (k, a), (_, b) in zip(base.breakdown().as_dict().items(), other.breakdown().as_dict().items()):
        assert abs(a - b) <= 1e-10 * max(abs(a), 1e-300), k


def test_report_json_round_trip(r3, scheme):
    fs, ball = r3
    rep = hardy_check(fs, fs.frame, standard_battery(3, names=["wave"])[0], 0.0, 3.0, ball, scheme)
    back = InequalityReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back == rep
    assert back.verdict == rep.verdict


def test_verdict_levels():
    def rep(lhs, err):
        return InequalityReport("LH2a", {"alpha": 0.0, "beta": 3.0, "R": None}, lhs, (("main", 1.0),), {"lhs": err})

    assert rep(1.0, 0.0).verdict == "holds"
    assert rep(0.99, 0.02).verdict == "holds"
    assert rep(0.95, 0.01).verdict == "violated-within-error"
    assert rep(0.5, 0.01).verdict == "violated"
