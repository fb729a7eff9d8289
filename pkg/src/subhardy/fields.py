"""Scalar test functions with value, gradient and Hessian.

Every evaluation is vectorized over an ``(M, n)`` array of points.  A field
carries exact derivative closures when they are available; otherwise
derivatives fall back to central differences.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

Array = np.ndarray

_EPS = np.finfo(float).eps
FIRST_STEP = _EPS ** (1.0 / 3.0)
SECOND_STEP = _EPS ** 0.25


def as_points(x) -> Array:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise ValueError(f"expected points of shape (M, n), got {pts.shape}")
    return pts


def numeric_gradient(f: Callable[[Array], Array], X: Array) -> Array:
    """Central-difference gradient with step eps^(1/3) * max(1, |x_j|)."""
    X = as_points(X)
    M, n = X.shape
    out = np.empty((M, n))
    for j in range(n):
        h = FIRST_STEP * np.maximum(1.0, np.abs(X[:, j]))
        Xp = X.copy()
        Xm = X.copy()
        Xp[:, j] += h
        Xm[:, j] -= h
        out[:, j] = (f(Xp) - f(Xm)) / (Xp[:, j] - Xm[:, j])
    return out


def numeric_hessian(f: Callable[[Array], Array], X: Array) -> Array:
    """Central-difference Hessian with step eps^(1/4) * max(1, |x_j|)."""
    X = as_points(X)
    M, n = X.shape
    h = SECOND_STEP * np.maximum(1.0, np.abs(X))
    f0 = f(X)
    out = np.empty((M, n, n))
    for i in range(n):
        Xp = X.copy()
        Xm = X.copy()
        Xp[:, i] += h[:, i]
        Xm[:, i] -= h[:, i]
        out[:, i, i] = (f(Xp) - 2.0 * f0 + f(Xm)) / h[:, i] ** 2
        for j in range(i + 1, n):
            pp = X.copy()
            pm = X.copy()
            mp = X.copy()
            mm = X.copy()
            pp[:, i] += h[:, i]
            pp[:, j] += h[:, j]
            pm[:, i] += h[:, i]
            pm[:, j] -= h[:, j]
            mp[:, i] -= h[:, i]
            mp[:, j] += h[:, j]
            mm[:, i] -= h[:, i]
            mm[:, j] -= h[:, j]
            v = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[:, i] * h[:, j])
            out[:, i, j] = v
            out[:, j, i] = v
    return out


class ScalarField:
    """A function u: R^n -> R with first and second partial derivatives.

    Parameters
    ----------
    value : callable
        Maps an ``(M, n)`` array to an ``(M,)`` array.
    gradient, hessian : callable, optional
        Exact derivative closures returning ``(M, n)`` and ``(M, n, n)``.
        Missing closures are replaced by central differences.
    kinks : callable, optional
        Returns a boolean mask of points lying on a non-smooth set, where
        the derivative closures are one-sided.
    """

    def __init__(
        self,
        value: Callable[[Array], Array],
        gradient: Optional[Callable[[Array], Array]] = None,
        hessian: Optional[Callable[[Array], Array]] = None,
        *,
        kinks: Optional[Callable[[Array], Array]] = None,
        name: str = "u",
    ):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._kinks = kinks
        self.name = name

    def __repr__(self) -> str:
        return f"ScalarField({self.name!r}, mode={self.derivative_mode})"

    @property
    def derivative_mode(self) -> str:
        if self._gradient is not None and self._hessian is not None:
            return "exact"
        return "numeric"

    def __call__(self, X) -> Array:
        X = as_points(X)
        return np.broadcast_to(np.asarray(self._value(X), dtype=float), (X.shape[0],))

    def grad(self, X) -> Array:
        X = as_points(X)
        if self._gradient is None:
            return numeric_gradient(self.__call__, X)
        return np.broadcast_to(np.asarray(self._gradient(X), dtype=float), X.shape)

    def hess(self, X) -> Array:
        X = as_points(X)
        if self._hessian is not None:
            return np.broadcast_to(
                np.asarray(self._hessian(X), dtype=float), X.shape + (X.shape[1],)
            )
        if self._gradient is not None:
            # differentiate the exact gradient once instead of the value twice
            M, n = X.shape
            out = np.empty((M, n, n))
            for j in range(n):
                h = FIRST_STEP * np.maximum(1.0, np.abs(X[:, j]))
                Xp = X.copy()
                Xm = X.copy()
                Xp[:, j] += h
                Xm[:, j] -= h
                out[:, :, j] = (self.grad(Xp) - self.grad(Xm)) / (2.0 * h)[:, None]
            return 0.5 * (out + out.transpose(0, 2, 1))
        return numeric_hessian(self.__call__, X)

    def kink_mask(self, X) -> Array:
        X = as_points(X)
        if self._kinks is None:
            return np.zeros(X.shape[0], dtype=bool)
        return np.asarray(self._kinks(X), dtype=bool)

    def numeric(self) -> "ScalarField":
        """The same function with finite-difference derivatives only."""
        return ScalarField(self._value, kinks=self._kinks, name=self.name + "~")

    # -- algebra ---------------------------------------------------------

    def __add__(self, other) -> "ScalarField":
        other = _lift(other)
        return ScalarField(
            lambda X: self(X) + other(X),
            lambda X: self.grad(X) + other.grad(X),
            lambda X: self.hess(X) + other.hess(X),
            kinks=_join_kinks(self, other),
            name=f"({self.name}+{other.name})",
        )

    __radd__ = __add__

    def __neg__(self) -> "ScalarField":
        return -1.0 * self

    def __sub__(self, other) -> "ScalarField":
        return self + (-1.0) * _lift(other)

    def __rsub__(self, other) -> "ScalarField":
        return _lift(other) + (-1.0) * self

    def __mul__(self, other) -> "ScalarField":
        if np.isscalar(other):
            a = float(other)
            return ScalarField(
                lambda X: a * self(X),
                lambda X: a * self.grad(X),
                lambda X: a * self.hess(X),
                kinks=self._kinks,
                name=f"{a:g}*{self.name}",
            )
        other = _lift(other)

        def hess(X):
            u, v = self(X), other(X)
            gu, gv = self.grad(X), other.grad(X)
            cross = gu[:, :, None] * gv[:, None, :]
            return (
                self.hess(X) * v[:, None, None]
                + other.hess(X) * u[:, None, None]
                + cross
                + cross.transpose(0, 2, 1)
            )

        return ScalarField(
            lambda X: self(X) * other(X),
            lambda X: self.grad(X) * other(X)[:, None] + other.grad(X) * self(X)[:, None],
            hess,
            kinks=_join_kinks(self, other),
            name=f"{self.name}*{other.name}",
        )

    __rmul__ = __mul__

    def compose(self, f, df, d2f, name: Optional[str] = None) -> "ScalarField":
        """Return ``f(u)`` given f and its first two derivatives."""

        def hess(X):
            u = self(X)
            g = self.grad(X)
            return (
                df(u)[:, None, None] * self.hess(X)
                + d2f(u)[:, None, None] * g[:, :, None] * g[:, None, :]
            )

        return ScalarField(
            lambda X: f(self(X)),
            lambda X: df(self(X))[:, None] * self.grad(X),
            hess,
            kinks=self._kinks,
            name=name or f"f({self.name})",
        )

    def power(self, s: float) -> "ScalarField":
        """``u**s`` for a positive field u."""
        s = float(s)
        return self.compose(
            lambda u: u**s,
            lambda u: s * u ** (s - 1.0),
            lambda u: s * (s - 1.0) * u ** (s - 2.0),
            name=f"{self.name}^{s:g}",
        )

    def __pow__(self, s) -> "ScalarField":
        if isinstance(s, int) and s >= 0:
            out = ScalarField.constant(1.0)
            for _ in range(s):
                out = out * self
            return out
        return self.power(s)

    # -- constructors ----------------------------------------------------

    @classmethod
    def constant(cls, c: float, name: Optional[str] = None) -> "ScalarField":
        c = float(c)
        return cls(
            lambda X: np.full(X.shape[0], c),
            lambda X: np.zeros(X.shape),
            lambda X: np.zeros(X.shape + (X.shape[1],)),
            name=name or f"{c:g}",
        )

    @classmethod
    def coordinate(cls, j: int, name: Optional[str] = None) -> "ScalarField":
        """The coordinate function x_j (0-based index)."""

        def grad(X):
            g = np.zeros(X.shape)
            g[:, j] = 1.0
            return g

        return cls(
            lambda X: X[:, j].copy(),
            grad,
            lambda X: np.zeros(X.shape + (X.shape[1],)),
            name=name or f"x{j + 1}",
        )

    @classmethod
    def from_sympy(cls, expr, symbols, name: Optional[str] = None) -> "ScalarField":
        """Build an exact field from a sympy expression in ``symbols``."""
        import sympy as sp

        symbols = list(symbols)
        n = len(symbols)
        grads = [sp.diff(expr, s) for s in symbols]
        hess = [[sp.diff(g, s) for s in symbols] for g in grads]
        f_val = sp.lambdify(symbols, expr, "numpy")
        f_grad = sp.lambdify(symbols, grads, "numpy", cse=True)
        f_hess = sp.lambdify(symbols, hess, "numpy", cse=True)

        def value(X):
            return np.broadcast_to(f_val(*X.T), (X.shape[0],)).astype(float)

        def gradient(X):
            M = X.shape[0]
            cols = f_grad(*X.T)
            return np.stack([np.broadcast_to(c, (M,)) for c in cols], axis=1).astype(float)

        def hessian(X):
            M = X.shape[0]
            rows = f_hess(*X.T)
            out = np.empty((M, n, n))
            for i in range(n):
                for j in range(n):
                    out[:, i, j] = np.broadcast_to(rows[i][j], (M,))
            return out

        return cls(value, gradient, hessian, name=name or str(expr))


def _lift(other) -> ScalarField:
    if isinstance(other, ScalarField):
        return other
    return ScalarField.constant(float(other))


def _join_kinks(a: ScalarField, b: ScalarField):
    if a._kinks is None and b._kinks is None:
        return None
    return lambda X: a.kink_mask(X) | b.kink_mask(X)


def smoothstep5(t: Array) -> tuple[Array, Array, Array]:
    """C^2 quintic step 10t^3 - 15t^4 + 6t^5 on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    inside = (t > 0.0) & (t < 1.0)
    s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    ds = np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)
    d2s = np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)
    return s, ds, d2s


def radial_cutoff(radius_field: ScalarField, inner: float, outer: float) -> ScalarField:
    """C^2 cutoff equal to 1 for r <= inner and 0 for r >= outer.

    ``radius_field`` is any distance-like field r(x); the cutoff is composed
    through it with exact chain-rule derivatives.
    """
    if not 0.0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    w = outer - inner

    def f(r):
        return 1.0 - smoothstep5((r - inner) / w)[0]

    def df(r):
        return -smoothstep5((r - inner) / w)[1] / w

    def d2f(r):
        return -smoothstep5((r - inner) / w)[2] / w**2

    return radius_field.compose(f, df, d2f, name=f"cutoff[{inner:g},{outer:g}]")
