import warnings

import numpy as np
import pytest

from subhardy.fields import ScalarField
from subhardy.frames import (
    Frame,
    KinkWarning,
    commutator,
    custom_frame,
    directional_derivative,
    euclidean,
    heisenberg,
    horizontal_gradient,
    nonsmooth_r3,
    sub_laplacian,
    tilde_pairing,
    validate_triangular_form,
)
from subhardy.fundsol import heisenberg_solution


def coord(j):
    return ScalarField.coordinate(j)


def norm2(n):
    return sum(coord(j) * coord(j) for j in range(n))


def test_vectors_are_triangular():
    V = nonsmooth_r3().vectors(np.array([[1.0, 2.0, 0.0]]))[0]
    np.testing.assert_allclose(V, [[1.0, 0.0, 6.0], [0.0, 1.0, -2.0]])


def test_directional_derivative_examples():
    assert directional_derivative(euclidean(3), 1, coord(0), [0.3, -1.0, 2.0]) == 1.0
    assert directional_derivative(nonsmooth_r3(), 1, coord(2), [1.0, 2.0, 0.0]) == pytest.approx(6.0)
    assert directional_derivative(heisenberg(1), 1, coord(2), [0.5, 0.25, 0.0]) == pytest.approx(0.5)


def test_directional_derivative_index_range():
    with pytest.raises(IndexError):
        directional_derivative(euclidean(3), 4, coord(0), [0.0, 0.0, 0.0])


def test_horizontal_gradient_examples():
    np.testing.assert_allclose(horizontal_gradient(euclidean(3), norm2(3), [1.0, 0.0, 0.0]), [2.0, 0.0, 0.0])
    inv = norm2(3).power(-0.5)
    g = horizontal_gradient(euclidean(3), inv, [1.0, 0.0, 0.0])
    assert np.sum(g**2) == pytest.approx(1.0)


def test_heisenberg_gauge_gradient_norm(rng):
    fs = heisenberg_solution()
    X = rng.uniform(-1, 1, size=(100, 3))
    g = horizontal_gradient(fs.frame, fs.gauge, X)
    d = fs.gauge(X)
    z = np.hypot(X[:, 0], X[:, 1])
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), z / d, rtol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 6])
def test_sub_laplacian_of_square_norm(n):
    x = np.linspace(-1, 1, n)
    assert sub_laplacian(euclidean(n), norm2(n), x) == pytest.approx(2 * n)


def test_newtonian_kernel_is_harmonic(rng):
    u = norm2(3).power(-0.5)
    X = rng.normal(size=(50, 3))
    assert np.max(np.abs(sub_laplacian(euclidean(3), u, X))) < 1e-8


def test_heisenberg_kernel_is_annihilated(rng):
    fs = heisenberg_solution()
    X = rng.uniform(-1, 1, size=(100, 3))
    G = fs.gauge.power(-2.0)
    L = sub_laplacian(fs.frame, G, X)
    scale = np.abs(G(X)) / fs.gauge(X) ** 2
    assert np.max(np.abs(L) / scale) < 1e-10


def test_sub_laplacian_matches_composition(rng):
    # L u = sum_k X_k (X_k u), second application by finite differences
    fr = heisenberg(1)
    u = coord(0) * coord(2) + coord(1) ** 3
    X = rng.normal(size=(10, 3))
    h = 1e-5
    total = np.zeros(10)
    V = fr.vectors(X)
    for k in range(fr.N):
        Xu = lambda P, k=k: fr.apply(u, P)[:, k]
        total += (Xu(X + h * V[:, k]) - Xu(X - h * V[:, k])) / (2 * h)
    np.testing.assert_allclose(sub_laplacian(fr, u, X), total, atol=1e-6)


def test_tilde_pairing_properties(rng):
    fr = nonsmooth_r3()
    u = coord(0) * coord(2)
    v = coord(1) - coord(2) ** 2
    X = rng.uniform(0.1, 1, size=(20, 3))
    assert np.array_equal(tilde_pairing(fr, u, v, X), tilde_pairing(fr, v, u, X))
    c = ScalarField.constant(2.0)
    assert tilde_pairing(fr, c, c, X[0]) == 0.0
    assert tilde_pairing(euclidean(3), coord(0), coord(1), X[0]) == 0.0


def test_commutators():
    np.testing.assert_allclose(commutator(nonsmooth_r3(), 1, 2, [1.0, 1.0, 0.0]), [0.0, 0.0, -6.0])
    np.testing.assert_allclose(commutator(euclidean(3), 1, 2, [0.2, 0.1, 0.3]), 0.0)
    np.testing.assert_allclose(commutator(heisenberg(1), 1, 2, [0.2, -0.7, 1.3]), [0.0, 0.0, -4.0])


def test_nonsmooth_commutator_formula(rng):
    X = rng.uniform(-2, 2, size=(30, 3))
    X = X[(np.abs(X[:, 0]) > 1e-3) & (np.abs(X[:, 1]) > 1e-3)]
    got = commutator(nonsmooth_r3(), 1, 2, X)[:, 2]
    np.testing.assert_allclose(got, -2.0 * (1 + np.abs(X[:, 0]) + np.abs(X[:, 1])))


def test_jacobian_on_kink_warns_and_shifts():
    fr = nonsmooth_r3()
    with pytest.warns(KinkWarning):
        c = commutator(fr, 1, 2, [0.0, 1.0, 0.0])
    assert np.isfinite(c).all()


def test_triangular_validation(rng):
    samples = rng.normal(size=(50, 3))
    rep = validate_triangular_form(euclidean(3), samples)
    assert rep.passed and rep.max_violation == 0.0
    assert validate_triangular_form(nonsmooth_r3(), samples).passed
    bad = Frame(n=3, N=2, coeff={(0, 0): ScalarField.constant(0.5)}, name="corrupt")
    rep = validate_triangular_form(bad, samples)
    assert not rep.passed and rep.max_violation == pytest.approx(0.5)


def test_custom_frame_from_expressions():
    fr = custom_frame(3, 2, {(1, 3): "x2", (2, 3): "-x1"})
    np.testing.assert_allclose(commutator(fr, 1, 2, [0.3, 0.1, 0.0]), [0.0, 0.0, -2.0])
    with pytest.raises(ValueError):
        custom_frame(3, 2, {(1, 3): "x5"})
    np.testing.assert_allclose(fr.divergence(np.array([[0.1, 0.2, 0.3]])), 0.0)
