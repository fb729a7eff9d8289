"""Closed-form fundamental solutions Gamma = c * d^(2 - beta) and their gauges."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .fields import ScalarField, as_points
from .frames import Frame, euclidean, heisenberg


class PoleError(ValueError):
    """Evaluation requested at (or a domain placed on) the pole."""


def euclidean_gauge(pole) -> ScalarField:
    """d(x) = |x - pole| with exact derivatives."""
    p = np.asarray(pole, dtype=float)

    def value(X):
        return np.linalg.norm(X - p, axis=1)

    def grad(X):
        w = X - p
        return w / np.linalg.norm(w, axis=1)[:, None]

    def hess(X):
        w = X - p
        r = np.linalg.norm(w, axis=1)
        u = w / r[:, None]
        eye = np.eye(X.shape[1])[None]
        return (eye - u[:, :, None] * u[:, None, :]) / r[:, None, None]

    return ScalarField(value, grad, hess, name="|x-y|")


def heisenberg_translate(pole, g) -> np.ndarray:
    """Group product pole * g on H^m for the frame of :func:`frames.heisenberg`.

    (a) * (b) = (a_z + b_z, a_t + b_t + 2(<b_x, a_y> - <b_y, a_x>)).
    Works for real or complex ``g`` (complex-step differentiation).
    """
    p = np.asarray(pole, dtype=float)
    m = (p.size - 1) // 2
    out = g + p
    bx, by = g[:, :m], g[:, m : 2 * m]
    ax, ay = p[:m], p[m : 2 * m]
    out[:, -1] = out[:, -1] + 2.0 * (bx @ ay - by @ ax)
    return out


def heisenberg_gauge(pole, m: int = 1) -> ScalarField:
    """Koranyi gauge d(pole^{-1} x) = (|z'|^4 + t'^2)^(1/4).

    For X_j = d/dx_j + 2 y_j d/dt this is the normalization whose power
    d^(2 - Q) is annihilated by the sub-Laplacian.
    """
    p = np.asarray(pole, dtype=float)
    n = 2 * m + 1
    if p.size != n:
        raise ValueError(f"pole must have {n} coordinates for H^{m}")
    xi, eta, tau = p[:m], p[m : 2 * m], p[-1]
    # gradient of the translated vertical coordinate t'
    dtp = np.concatenate([-2.0 * eta, 2.0 * xi, [1.0]])

    def parts(X):
        zp = X[:, : 2 * m] - p[: 2 * m]
        w = np.sum(zp * zp, axis=1)
        tp = X[:, -1] - tau + 2.0 * (X[:, m : 2 * m] @ xi - X[:, :m] @ eta)
        N = w * w + tp * tp
        gw = np.zeros(X.shape)
        gw[:, : 2 * m] = 2.0 * zp
        gN = 2.0 * w[:, None] * gw + 2.0 * tp[:, None] * dtp[None, :]
        return w, tp, N, gw, gN

    def value(X):
        return parts(X)[2] ** 0.25

    def grad(X):
        _, _, N, _, gN = parts(X)
        return 0.25 * N[:, None] ** -0.75 * gN

    def hess(X):
        w, _, N, gw, gN = parts(X)
        Hw = np.zeros((n, n))
        Hw[np.arange(2 * m), np.arange(2 * m)] = 2.0
        HN = (
            2.0 * gw[:, :, None] * gw[:, None, :]
            + 2.0 * w[:, None, None] * Hw[None]
            + 2.0 * np.outer(dtp, dtp)[None]
        )
        return 0.25 * N[:, None, None] ** -0.75 * HN - (3.0 / 16.0) * N[:, None, None] ** -1.75 * (
            gN[:, :, None] * gN[:, None, :]
        )

    return ScalarField(value, grad, hess, name="koranyi")


@dataclass(frozen=True)
class FundamentalSolution:
    """Gamma_y(x) = constant * gauge(x)^(2 - beta), positive off the pole."""

    frame: Frame
    pole: tuple
    beta: float
    constant: float
    gauge: ScalarField
    kind: str
    validity: str = "R^n"

    def __post_init__(self):
        if self.beta <= 2:
            raise ValueError("beta must exceed 2")
        if self.constant <= 0:
            raise ValueError("the multiplicative constant must be positive")
        object.__setattr__(self, "pole", tuple(float(v) for v in self.pole))

    @property
    def n(self) -> int:
        return self.frame.n

    def with_constant(self, c: float) -> "FundamentalSolution":
        return replace(self, constant=float(c))

    def gauge_power(self, s: float) -> ScalarField:
        """d^s, the c-free part of Gamma^(s / (2 - beta))."""
        return self.gauge.power(s)

    def gamma_field(self) -> ScalarField:
        return self.constant * self.gauge.power(2.0 - self.beta)

    def gamma_power(self, s: float) -> ScalarField:
        """Gamma^(s / (2 - beta)) = c^(s / (2 - beta)) d^s."""
        return self.constant ** (s / (2.0 - self.beta)) * self.gauge.power(s)

    def _off_pole(self, x):
        X = as_points(x)
        if X.shape[1] != self.n:
            raise ValueError(f"point dimension {X.shape[1]} does not match {self.n}")
        d = self.gauge(X)
        if np.any(d == 0.0):
            raise PoleError("evaluation at the pole")
        return X, d


def euclidean_solution(n: int, pole=None, constant: float = 1.0) -> FundamentalSolution:
    if n < 3:
        raise ValueError("Euclidean fundamental solution needs n >= 3")
    pole = np.zeros(n) if pole is None else np.asarray(pole, dtype=float)
    return FundamentalSolution(
        frame=euclidean(n),
        pole=tuple(pole),
        beta=float(n),
        constant=constant,
        gauge=euclidean_gauge(pole),
        kind="euclidean",
    )


def heisenberg_solution(m: int = 1, pole=None, constant: float = 1.0) -> FundamentalSolution:
    n = 2 * m + 1
    pole = np.zeros(n) if pole is None else np.asarray(pole, dtype=float)
    return FundamentalSolution(
        frame=heisenberg(m),
        pole=tuple(pole),
        beta=float(2 * m + 2),
        constant=constant,
        gauge=heisenberg_gauge(pole, m),
        kind="heisenberg",
    )


BUILTIN_SOLUTIONS = {"euclidean": euclidean_solution, "heisenberg": heisenberg_solution}


def _squeeze(x, v):
    return v[0] if np.ndim(x) == 1 else v


def gamma_value(fs: FundamentalSolution, x):
    X, d = fs._off_pole(x)
    return _squeeze(x, fs.constant * d ** (2.0 - fs.beta))


def gauge_value(fs: FundamentalSolution, x):
    """d(x) with d(pole) = 0; Gamma^(1/(2-beta)) = c^(1/(2-beta)) d."""
    return _squeeze(x, fs.gauge(as_points(x)))


def gauge_gradient(fs: FundamentalSolution, x):
    """Horizontal gradient of the gauge."""
    X, _ = fs._off_pole(x)
    return _squeeze(x, fs.frame.apply(fs.gauge, X))


def calibrate_constant(fs: FundamentalSolution, domain, scheme=None) -> FundamentalSolution:
    """Fix c so that the boundary flux of tilde-grad Gamma equals -1.

    The flux of d^(2 - beta) through a boundary enclosing the pole is
    computed by boundary quadrature and c = -1 / flux.
    """
    from .quadrature import QuadratureScheme, boundary_flux

    scheme = scheme or QuadratureScheme()
    if not domain.contains(np.asarray(fs.pole)[None])[0]:
        raise PoleError("the pole must lie strictly inside the domain")
    if domain.distance_to_boundary(fs.pole) <= 1e-12:
        raise PoleError("the pole lies on the boundary")
    flux = boundary_flux(fs.frame, fs.gauge_power(2.0 - fs.beta), domain, scheme).value
    if abs(flux) < 1e-12:
        raise ValueError("degenerate domain: boundary flux vanishes")
    return fs.with_constant(-1.0 / flux)


def key_identity_residual(fs: FundamentalSolution, alpha: float, x):
    """LHS - RHS of L Gamma^((a-2)/(2-b)) = (b+a-4)(a-2) Gamma^((a-4)/(2-b)) |grad d|^2
    + ((a-2)/(2-b)) Gamma^((b+a-4)/(2-b)) L Gamma, with d = Gamma^(1/(2-b))."""
    X, _ = fs._off_pole(x)
    b = fs.beta
    frame = fs.frame
    G = fs.gamma_field()
    e = 1.0 / (2.0 - b)
    lhs = frame.sub_laplacian(G.power((alpha - 2.0) * e), X)
    grad_g = frame.apply(G.power(e), X)
    gval = G(X)
    rhs = (b + alpha - 4.0) * (alpha - 2.0) * gval ** ((alpha - 4.0) * e) * np.sum(grad_g**2, axis=1)
    rhs = rhs + (alpha - 2.0) * e * gval ** ((b + alpha - 4.0) * e) * frame.sub_laplacian(G, X)
    return _squeeze(x, lhs - rhs)


def homogeneous_dimension_heisenberg(m: int) -> int:
    return 2 * m + 2


def surface_area_unit_sphere(n: int) -> float:
    """Area of S^(n-1) in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
