import math

import numpy as np
import pytest

from subhardy.battery import standard_battery
from subhardy.domains import build_euclidean_ball
from subhardy.fields import ScalarField
from subhardy.fundsol import euclidean_solution
from subhardy.quadrature import QuadratureScheme
from subhardy.sharpness import (
    DegenerateTrial,
    fixed_family,
    hardy_family,
    optimize_trial,
    rayleigh_ratio,
    rellich_family,
    scheme_for,
)


@pytest.fixture(scope="module")
def r3():
    fs = euclidean_solution(3)
    return fs, build_euclidean_ball(np.zeros(3), 1.0)


def test_battery_ratios_above_hardy_constant(r3, scheme):
    fs, ball = r3
    for u in standard_battery(3):
        if u.name == "one":
            continue  # zero gradient and non-vanishing boundary data: ratio ill-posed
        r = rayleigh_ratio("LH2a", fs, fs.frame, u, 0.0, 3.0, ball, scheme)
        assert r >= 0.25 * (1 - 1e-6), u.name


def test_battery_ratios_above_rellich_constant(scheme):
    fs = euclidean_solution(5)
    ball = build_euclidean_ball(np.zeros(5), 1.0)
    for u in standard_battery(5, names=["bump", "gauss_bump", "poly_bump"]):
        r = rayleigh_ratio("LR2a", fs, fs.frame, u, 0.0, 5.0, ball, scheme)
        assert r >= 25 / 16 * (1 - 1e-6), u.name


def test_extremal_profile_ratio(r3, scheme):
    fs, ball = r3
    fam = hardy_family(fs, 0.0, 1.0)
    u = fam((-60.0, 0.0))
    r = rayleigh_ratio("LH2a", fs, fs.frame, u, 0.0, 3.0, ball, scheme_for(fam, ball, scheme))
    assert r == pytest.approx(0.25, rel=0.10)
    assert r >= 0.25


def test_fixed_family_returns_member_ratio(r3, scheme):
    fs, ball = r3
    u = standard_battery(3, names=["gauss"])[0]
    res = optimize_trial("LH2a", fixed_family(u), fs, fs.frame, 0.0, 3.0, ball, scheme)
    assert res.ratio == rayleigh_ratio("LH2a", fs, fs.frame, u, 0.0, 3.0, ball, scheme)
    assert res.theta == () and len(res.trace) == 1


def test_degenerate_trial(r3, scheme):
    fs, ball = r3
    with pytest.raises(DegenerateTrial):
        rayleigh_ratio("LH2a", fs, fs.frame, ScalarField.constant(0.0), 0.0, 3.0, ball, scheme)


def test_budget_and_inequality_validation(r3, scheme):
    fs, ball = r3
    fam = hardy_family(fs, 0.0, 1.0)
    with pytest.raises(ValueError):
        optimize_trial("LH2a", fam, fs, fs.frame, 0.0, 3.0, ball, scheme, budget=10)
    with pytest.raises(ValueError):
        optimize_trial("UP1", fam, fs, fs.frame, 0.0, 3.0, ball, scheme)


def test_family_parameters_and_regularity(r3):
    fs, _ = r3
    fam = rellich_family(euclidean_solution(5), 0.0, 1.0)
    assert fam.dim == 2 and fam.interior_only
    np.testing.assert_array_equal(fam.clip([-100.0, 2.0]), [-60.0, 0.9])
    u = hardy_family(fs, 0.0, 1.0)((-2.0, 0.5))
    # supported in the unit ball, equal to 1 at the outer radius before the cutoff
    assert u(np.array([[1.0, 0.0, 0.0], [0.0, 1.2, 0.0]])).tolist() == [0.0, 0.0]
    assert u(np.array([[0.1, 0.0, 0.0]]))[0] > 1.0


def test_optimizer_trace_properties(r3, scheme):
    fs, ball = r3
    fam = hardy_family(fs, 0.0, 1.0, log10_min=-20.0)
    res = optimize_trial("LH2a", fam, fs, fs.frame, 0.0, 3.0, ball, scheme, budget=20, restarts=2, seed=3)
    for k in range(2):
        best = [t[4] for t in res.trace if t[0] == k]
        assert all(b1 >= b2 for b1, b2 in zip(best, best[1:]))
    assert res.respects_bound()
    assert res.ratio == min(t[3] for t in res.trace)
    again = optimize_trial("LH2a", fam, fs, fs.frame, 0.0, 3.0, ball, scheme, budget=20, restarts=2, seed=3)
    assert again.ratio == res.ratio and again.trace == res.trace
