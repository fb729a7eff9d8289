"""Triangular vector-field frames and the sum-of-squares operator.

A frame on R^n consists of N fields

    X_k = d/dx_k + sum_{m > N} a_{k,m}(x) d/dx_m,    k = 1..N,

stored through their coefficient functions.  All routines accept a single
point ``(n,)`` or a stack of points ``(M, n)``; field indices are 1-based in
the public functions and 0-based on the :class:`Frame` methods.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .expr import parse_expression
from .fields import ScalarField, as_points

KINK_OFFSET = 1e-9


class KinkWarning(UserWarning):
    """A derivative was requested exactly on a kink of a frame coefficient."""


@dataclass(frozen=True)
class Frame:
    """Immutable triangular frame.

    ``coeff`` maps 0-based pairs ``(k, m)`` to coefficient fields a_{k,m}.
    Triangularity (m >= N) is not enforced here so that corrupted frames
    can be built deliberately; see :func:`validate_triangular_form`.
    """

    n: int
    N: int
    coeff: Mapping[tuple, ScalarField] = field(default_factory=dict)
    name: str = "frame"

    def __post_init__(self):
        if not 1 <= self.N <= self.n:
            raise ValueError(f"need 1 <= N <= n, got N={self.N}, n={self.n}")
        for (k, m) in self.coeff:
            if not (0 <= k < self.N and 0 <= m < self.n):
                raise ValueError(f"coefficient index {(k + 1, m + 1)} out of range")
        object.__setattr__(self, "coeff", MappingProxyType(dict(self.coeff)))

    def _check(self, X):
        X = as_points(X)
        if X.shape[1] != self.n:
            raise ValueError(f"point dimension {X.shape[1]} does not match frame dimension {self.n}")
        return X

    def vectors(self, X) -> np.ndarray:
        """Components of every field at every point, shape ``(M, N, n)``."""
        X = self._check(X)
        V = np.zeros((X.shape[0], self.N, self.n))
        V[:, np.arange(self.N), np.arange(self.N)] = 1.0
        for (k, m), a in self.coeff.items():
            V[:, k, m] += a(X)
        return V

    def _smooth_probe(self, X):
        """Shift points sitting on coefficient kinks by a fixed tiny offset."""
        if not self.coeff:
            return X
        mask = np.zeros(X.shape[0], dtype=bool)
        for a in self.coeff.values():
            mask |= a.kink_mask(X)
        if mask.any():
            warnings.warn(
                f"{int(mask.sum())} probe point(s) on a coefficient kink; "
                f"shifted by {KINK_OFFSET:g}",
                KinkWarning,
                stacklevel=3,
            )
            X = X.copy()
            X[mask] += KINK_OFFSET
        return X

    def vector_jacobians(self, X) -> np.ndarray:
        """Partials d_j of field components, shape ``(M, N, n, n)`` indexed [., k, i, j]."""
        X = self._smooth_probe(self._check(X))
        D = np.zeros((X.shape[0], self.N, self.n, self.n))
        for (k, m), a in self.coeff.items():
            D[:, k, m, :] += a.grad(X)
        return D

    def apply(self, u: ScalarField, X) -> np.ndarray:
        """Horizontal gradient (X_1 u, ..., X_N u), shape ``(M, N)``."""
        X = self._check(X)
        return np.einsum("mkn,mn->mk", self.vectors(X), u.grad(X))

    def sub_laplacian(self, u: ScalarField, X) -> np.ndarray:
        X = self._check(X)
        V = self.vectors(X)
        H = u.hess(X)
        g = u.grad(X)
        second = np.einsum("mki,mij,mkj->m", V, H, V)
        if not self.coeff:
            return second
        D = self.vector_jacobians(X)
        # X_k(V_k) . grad u: derivative of the coefficients along the field
        first = np.einsum("mkj,mkij,mi->m", V, D, g)
        return second + first

    def divergence(self, X) -> np.ndarray:
        """Euclidean divergence of each field, shape ``(M, N)``."""
        D = self.vector_jacobians(X)
        return np.einsum("mkii->mk", D)


# -- built-in frames ------------------------------------------------------


def euclidean(n: int) -> Frame:
    return Frame(n=n, N=n, coeff={}, name=f"euclidean{n}")


def heisenberg(m: int = 1) -> Frame:
    """Heisenberg group H^m in coordinates (x_1..x_m, y_1..y_m, t).

    X_j = d/dx_j + 2 y_j d/dt and Y_j = d/dy_j - 2 x_j d/dt.
    """
    n = 2 * m + 1
    coeff = {}
    for j in range(m):
        coeff[(j, n - 1)] = 2.0 * ScalarField.coordinate(m + j)
        coeff[(m + j, n - 1)] = -2.0 * ScalarField.coordinate(j)
    return Frame(n=n, N=2 * m, coeff=coeff, name=f"heisenberg{m}")


def nonsmooth_r3() -> Frame:
    """The C^{1,1} frame X_1 = d1 + x2(1+|x2|) d3, X_2 = d2 - x1(1+|x1|) d3."""
    return custom_frame(3, 2, {(1, 3): "x2*(1+abs(x2))", (2, 3): "-x1*(1+abs(x1))"}, name="nonsmooth_r3")


def custom_frame(n: int, N: int, coefficients: Mapping[tuple, str], name: str = "custom") -> Frame:
    """Frame from expression strings keyed by 1-based ``(k, m)``."""
    coeff = {}
    for (k, m), src in coefficients.items():
        fld = parse_expression(src)
        if fld.tree.max_var() > n:
            raise ValueError(f"coefficient a_{k},{m} = {src!r} uses a variable beyond x{n}")
        coeff[(k - 1, m - 1)] = fld
    return Frame(n=n, N=N, coeff=coeff, name=name)


BUILTIN_FRAMES = {
    "euclidean": euclidean,
    "heisenberg": heisenberg,
    "nonsmooth_r3": nonsmooth_r3,
}


# -- point-level operations ----------------------------------------------


def _field_index(frame: Frame, k: int) -> int:
    if not 1 <= k <= frame.N:
        raise IndexError(f"field index {k} outside 1..{frame.N}")
    return k - 1


def _squeeze(x, values):
    return values[0] if np.ndim(x) == 1 else values


def directional_derivative(frame: Frame, k: int, u: ScalarField, x):
    """X_k u at x."""
    i = _field_index(frame, k)
    return _squeeze(x, frame.apply(u, x)[:, i])


def horizontal_gradient(frame: Frame, u: ScalarField, x):
    return _squeeze(x, frame.apply(u, x))


def sub_laplacian(frame: Frame, u: ScalarField, x):
    return _squeeze(x, frame.sub_laplacian(u, x))


def tilde_pairing(frame: Frame, u: ScalarField, v: ScalarField, x):
    """sum_k (X_k u)(X_k v) at x."""
    return _squeeze(x, np.sum(frame.apply(u, x) * frame.apply(v, x), axis=1))


def commutator(frame: Frame, i: int, j: int, x):
    """Coefficient vector of [X_i, X_j] at x."""
    a, b = _field_index(frame, i), _field_index(frame, j)
    if a == b:
        raise ValueError("commutator needs two distinct fields")
    X = frame._check(x)
    V = frame.vectors(X)
    D = frame.vector_jacobians(X)
    # [X_i, X_j]^c = X_i(V_j^c) - X_j(V_i^c)
    out = np.einsum("ml,mcl->mc", V[:, a], D[:, b]) - np.einsum("ml,mcl->mc", V[:, b], D[:, a])
    return _squeeze(x, out)


@dataclass(frozen=True)
class TriangularReport:
    passed: bool
    max_violation: float
    samples: int


def validate_triangular_form(frame: Frame, samples: Sequence, tol: float = 0.0) -> TriangularReport:
    """Check that components 1..N of X_k equal the Kronecker delta."""
    X = as_points(samples)
    if X.shape[0] == 0:
        raise ValueError("need at least one sample point")
    V = frame.vectors(X)
    head = V[:, :, : frame.N]
    viol = float(np.max(np.abs(head - np.eye(frame.N)[None])))
    return TriangularReport(passed=viol <= tol, max_violation=viol, samples=X.shape[0])
