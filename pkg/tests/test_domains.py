import math

import numpy as np
import pytest

from subhardy.domains import (
    DegeneratePatchError,
    boundary_form_density,
    build_box,
    build_euclidean_ball,
    build_gauge_ball,
    excise_pole,
    wedge_form_density,
)
from subhardy.fields import ScalarField
from subhardy.frames import euclidean, heisenberg, nonsmooth_r3
from subhardy.fundsol import PoleError, euclidean_solution, heisenberg_solution
from subhardy.quadrature import (
    field_pairings,
    integrate_boundary,
    integrate_interior,
    monte_carlo_oracle,
)


def ones(X):
    return np.ones(X.shape[0])


def test_builders_reject_bad_input():
    with pytest.raises(ValueError):
        build_box([0, 0, 0], [1, 0, 1])
    with pytest.raises(ValueError):
        build_euclidean_ball(np.zeros(3), 0.0)
    with pytest.raises(ValueError):
        build_gauge_ball(heisenberg_solution(), -1.0)


def test_cube_surface_area(scheme):
    D = build_box([0, 0, 0], [1, 1, 1])
    area = integrate_boundary(lambda X, N: np.linalg.norm(N, axis=1), D, scheme).value
    assert area == pytest.approx(6.0, abs=1e-10)


def test_ball_volume(scheme):
    for r in (0.5, 1.0, 2.0):
        D = build_euclidean_ball([0.1, -0.2, 0.3], r)
        assert integrate_interior(ones, D, scheme).value == pytest.approx(4 * math.pi * r**3 / 3, abs=1e-8)


def test_high_dimensional_ball_volume(scheme):
    for n in (5, 7, 9):
        D = build_euclidean_ball(np.zeros(n), 1.0)
        exact = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
        assert integrate_interior(ones, D, scheme).value == pytest.approx(exact, rel=1e-12)


def test_gauge_ball_volume_against_monte_carlo(scheme):
    fs = heisenberg_solution()
    D = build_gauge_ball(fs, 1.0)
    quad = integrate_interior(ones, D, scheme).value
    assert quad == pytest.approx(math.pi**2 / 2, rel=1e-10)
    mc = monte_carlo_oracle(ones, D, 400_000, seed=3, stratified=True)
    assert abs(mc.value - quad) / quad < 1e-3


def test_outward_orientation(scheme):
    # divergence check with f_k = x_k gives volume * N > 0
    for D in (build_box([0, 0, 0], [1, 2, 1]), build_euclidean_ball(np.zeros(3), 1.0)):
        fr = euclidean(3)
        val = integrate_boundary(lambda X, N: np.sum(X * field_pairings(fr, X, N), axis=1), D, scheme).value
        assert val > 0
        assert val == pytest.approx(3 * integrate_interior(ones, D, scheme).value, rel=1e-10)


def test_sphere_x1_density_gives_ball_volume(scheme):
    D = build_euclidean_ball(np.zeros(3), 1.0)
    fr = euclidean(3)
    val = integrate_boundary(lambda X, N: X[:, 0] * field_pairings(fr, X, N)[:, 0], D, scheme).value
    assert val == pytest.approx(4 * math.pi / 3, abs=1e-6)
    patch = D.boundary[0]
    # density = area element times the first component of the unit normal (= x1 on the sphere)
    S = np.array([[0.3, 1.0], [1.2, 4.0], [2.5, 0.2]])
    x = patch.points(S)
    area = np.linalg.norm(patch.normal(S), axis=1)
    np.testing.assert_allclose(boundary_form_density(fr, 1, patch, S), area * x[:, 0], atol=1e-14)


def test_constant_field_flux_vanishes(scheme):
    D = build_box([0, 0, 0], [1, 1, 1])
    fr = nonsmooth_r3()
    for k in range(2):
        v = integrate_boundary(lambda X, N, k=k: field_pairings(fr, X, N)[:, k], D, scheme).value
        assert abs(v) < 1e-10


def test_wedge_form_agrees_with_determinant(rng):
    fs = heisenberg_solution()
    D = build_gauge_ball(fs, 1.0)
    patch = D.boundary[0]
    S = np.column_stack([rng.uniform(-0.9, 0.9, 20), rng.uniform(0.1, 6.0, 20)])
    for fr in (heisenberg(1),):
        for k in (1, 2):
            np.testing.assert_allclose(
                wedge_form_density(fr, k, patch, S), boundary_form_density(fr, k, patch, S), atol=1e-12
            )
    box = build_box([0, 0, 0], [1, 1, 1])
    for patch in box.boundary:
        S = rng.uniform(0, 1, size=(5, 2))
        for k in (1, 2):
            np.testing.assert_allclose(
                wedge_form_density(nonsmooth_r3(), k, patch, S),
                boundary_form_density(nonsmooth_r3(), k, patch, S),
                atol=1e-12,
            )


def test_degenerate_patch_detected():
    D = build_euclidean_ball(np.zeros(3), 1.0)
    with pytest.raises(DegeneratePatchError):
        D.boundary[0].normal(np.array([[0.0, 1.0]]))


def test_flipped_patch_negates(scheme):
    D = build_euclidean_ball(np.zeros(3), 1.0)
    S = np.array([[0.7, 1.1]])
    p = D.boundary[0]
    np.testing.assert_allclose(p.flipped().normal(S), -p.normal(S))


def test_excision_volume(scheme):
    fs = euclidean_solution(3)
    D = build_euclidean_ball(np.zeros(3), 1.0)
    E = excise_pole(D, fs, 0.25)
    v = integrate_interior(ones, E, scheme).value
    assert v == pytest.approx(4 * math.pi / 3 * (1 - 0.25**3), abs=1e-10)
    assert len(E.boundary) == len(D.boundary)
    assert len(E.inner_boundary) == 1
    # the inner sphere points toward the pole
    fr = euclidean(3)
    inner = integrate_boundary(lambda X, N: np.sum(X * field_pairings(fr, X, N), axis=1), E, scheme, which="inner").value
    assert inner == pytest.approx(-3 * 4 * math.pi / 3 * 0.25**3, rel=1e-10)


def test_excision_gauge_ball_volume(scheme):
    fs = heisenberg_solution()
    E = excise_pole(build_gauge_ball(fs, 1.0), fs, 0.5)
    assert integrate_interior(ones, E, scheme).value == pytest.approx(math.pi**2 / 2 * (1 - 0.5**4), rel=1e-10)


def test_excision_monotone_for_positive_integrand(scheme):
    fs = euclidean_solution(3)
    D = build_euclidean_ball(np.zeros(3), 1.0)
    f = lambda X: 1.0 / np.sum(X * X, axis=1)
    a = integrate_interior(f, excise_pole(D, fs, 0.2), scheme).value
    b = integrate_interior(f, excise_pole(D, fs, 0.1), scheme).value
    assert b > a


def test_excision_errors():
    fs = euclidean_solution(3)
    D = build_euclidean_ball(np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        excise_pole(D, fs, 1.5)
    with pytest.raises(PoleError):
        excise_pole(D, euclidean_solution(3, pole=[3.0, 0, 0]), 0.1)
    with pytest.raises(ValueError):
        excise_pole(build_box([-1, -1, -1], [1, 1, 1]), fs, 0.1)


def test_contains_and_distance():
    D = build_euclidean_ball([1.0, 0.0, 0.0], 2.0)
    assert D.contains(np.array([[1.0, 0.0, 0.0], [3.5, 0, 0]])).tolist() == [True, False]
    assert D.distance_to_boundary([1.5, 0.0, 0.0]) == pytest.approx(1.5)
