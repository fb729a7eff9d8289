"""Admissible domains: interior cells, oriented boundary patches, excision.

Interior cells are parameter boxes mapped into R^n by a chart (identity,
hyperspherical, or the Heisenberg gauge-sphere chart).  Boundary patches are
parametrizations of pieces of the boundary; the pairing of a field with the
surface form is evaluated as det[X_k | d phi / ds_1 | ... | d phi / ds_(n-1)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .fields import ScalarField, as_points
from .frames import Frame
from .fundsol import FundamentalSolution, PoleError, heisenberg_translate

CSTEP = 1e-30


class DegeneratePatchError(ValueError):
    """Tangent basis of a boundary patch lost rank."""


# -- charts ---------------------------------------------------------------


def sphere_map(phi):
    """Hyperspherical coordinates: (M, k-1) angles -> (M, k) unit vectors.

    The first k-2 angles range over [0, pi] and the last over [0, 2 pi).
    """
    M, a = phi.shape
    out = np.empty((M, a + 1), dtype=phi.dtype)
    prod = np.ones(M, dtype=phi.dtype)
    for i in range(a):
        out[:, i] = prod * np.cos(phi[:, i])
        prod = prod * np.sin(phi[:, i])
    out[:, a] = prod
    return out


def sphere_density(phi):
    """Surface element of the unit sphere in hyperspherical coordinates."""
    a = phi.shape[1]
    dens = np.ones(phi.shape[0])
    for i in range(a - 1):
        dens = dens * np.sin(phi[:, i]) ** (a - 1 - i)
    return dens


def sphere_bounds(a: int):
    return (0.0,) * a, (math.pi,) * (a - 1) + (2.0 * math.pi,)


def _psi(s):
    # psi = (pi/2) g(s) with g(s) = s(3 - s^2)/2; clusters nodes near psi = +-pi/2
    return 0.5 * math.pi * 0.5 * s * (3.0 - s * s)


def _dpsi(s):
    return 0.75 * math.pi * (1.0 - s * s)


def gauge_sphere_point(rho, s, omega, pole):
    """Point at gauge distance rho from ``pole`` on H^m.

    |z'|^2 = rho^2 cos psi and t' = rho^2 sin psi with psi = psi(s);
    ``omega`` are unit vectors in R^(2m).
    """
    psi = _psi(s)
    c = np.cos(psi)
    # clamp tiny negative round-off at the chart poles
    root = np.sqrt(np.where(np.real(c) < 0, 0 * c, c))
    g = np.concatenate([(rho * root)[:, None] * omega, (rho * rho * np.sin(psi))[:, None]], axis=1)
    return heisenberg_translate(pole, g)


class Chart:
    """Map from a parameter box to R^n with a volume density."""

    dim: int
    periodic: tuple = ()
    angular: tuple = ()
    # (axis, k): the density carries sin(s)^k on that axis, s in [0, pi]
    polar: tuple = ()
    radial_center: Optional[tuple] = None

    def map(self, S):
        raise NotImplementedError

    def density(self, S):
        raise NotImplementedError


class BoxChart(Chart):
    def __init__(self, n: int):
        self.dim = n
        self.n = n

    def map(self, S):
        return S

    def density(self, S):
        return np.ones(S.shape[0])


class BallChart(Chart):
    """(r, phi_1, ..., phi_(n-1)) -> center + r * omega(phi)."""

    def __init__(self, center):
        self.center = np.asarray(center, dtype=float)
        self.n = self.dim = self.center.size
        self.periodic = (self.n - 1,)
        self.angular = tuple(range(1, self.n))
        self.polar = tuple((j, self.n - 1 - j) for j in range(1, self.n - 1))
        self.radial_center = tuple(self.center)

    def map(self, S):
        return self.center + S[:, :1] * sphere_map(S[:, 1:])

    def density(self, S):
        return S[:, 0] ** (self.n - 1) * sphere_density(S[:, 1:])


class StarChart(Chart):
    """Ball of radius R about ``center`` in polar coordinates about an interior ``origin``.

    (t, phi) -> origin + t rho(omega) omega with t in [0, 1] and rho the
    distance to the sphere along omega.  The density t^(n-1) rho^n keeps
    integrands with an |x - origin|^(2-n) singularity smooth in t.
    """

    def __init__(self, center, radius: float, origin):
        self.center = np.asarray(center, dtype=float)
        self.origin = np.asarray(origin, dtype=float)
        self.radius = float(radius)
        self.n = self.dim = self.center.size
        self.periodic = (self.n - 1,)
        self.angular = tuple(range(1, self.n))
        self.polar = tuple((j, self.n - 1 - j) for j in range(1, self.n - 1))
        self.radial_center = tuple(self.origin)

    def _rho(self, omega):
        p = self.origin - self.center
        b = omega @ p
        return -b + np.sqrt(b * b - p @ p + self.radius**2)

    def map(self, S):
        omega = sphere_map(S[:, 1:])
        return self.origin + (S[:, 0] * self._rho(omega))[:, None] * omega

    def density(self, S):
        rho = self._rho(sphere_map(S[:, 1:]))
        return S[:, 0] ** (self.n - 1) * rho**self.n * sphere_density(S[:, 1:])


class GaugeBallChart(Chart):
    """(rho, s, theta_1, ..., theta_(2m-1)) on the Heisenberg group H^m.

    Volume density rho^(2m+1) cos(psi)^(m-1) psi'(s) times the sphere
    element of S^(2m-1).
    """

    def __init__(self, pole):
        self.pole = np.asarray(pole, dtype=float)
        self.n = self.dim = self.pole.size
        self.m = (self.n - 1) // 2
        self.periodic = (self.n - 1,)
        self.angular = tuple(range(1, self.n))
        self.polar = tuple((j, 2 * self.m - j) for j in range(2, self.n - 1)) if self.m > 1 else ()
        self.radial_center = tuple(self.pole)

    def map(self, S):
        return gauge_sphere_point(S[:, 0], S[:, 1], sphere_map(S[:, 2:]), self.pole)

    def density(self, S):
        m = self.m
        psi = _psi(S[:, 1])
        out = S[:, 0] ** (2 * m + 1) * _dpsi(S[:, 1])
        if m > 1:
            out = out * np.maximum(np.cos(psi), 0.0) ** (m - 1) * sphere_density(S[:, 2:])
        return out


@dataclass(frozen=True)
class Cell:
    chart: Chart
    lo: tuple
    hi: tuple


# -- boundary patches -----------------------------------------------------


@dataclass(frozen=True)
class BoundaryPatch:
    """phi: U -> R^n on a parameter rectangle U = [lo, hi], with a sign.

    ``phi`` must accept complex parameters; tangents are obtained by
    complex-step differentiation and are exact to rounding.
    """

    phi: Callable
    lo: tuple
    hi: tuple
    orientation: int = 1
    periodic: tuple = ()
    angular: tuple = ()
    polar: tuple = ()
    name: str = "patch"

    @property
    def dim(self) -> int:
        return len(self.lo)

    def points(self, S):
        return np.real(self.phi(np.asarray(S, dtype=float)))

    def tangents(self, S):
        """Columns d phi / d s_j, shape ``(M, n, n-1)``."""
        S = np.asarray(S, dtype=float)
        cols = []
        for j in range(self.dim):
            Z = S.astype(complex)
            Z[:, j] += 1j * CSTEP
            cols.append(np.imag(self.phi(Z)) / CSTEP)
        return np.stack(cols, axis=2)

    def normal(self, S, check: bool = True):
        """Oriented cofactor vector N with det[V | T] = V . N, shape ``(M, n)``."""
        T = self.tangents(S)
        M, n, _ = T.shape
        N = np.empty((M, n))
        rows = np.arange(n)
        for i in range(n):
            N[:, i] = (-1) ** i * np.linalg.det(T[:, rows != i, :])
        if check:
            scale = np.prod(np.linalg.norm(T, axis=1), axis=1)
            bad = np.linalg.norm(N, axis=1) <= 1e-12 * scale
            if bad.any():
                raise DegeneratePatchError(
                    f"patch {self.name!r}: tangent basis degenerate at s={S[np.argmax(bad)]}"
                )
        return self.orientation * N

    def flipped(self) -> "BoundaryPatch":
        return replace(self, orientation=-self.orientation)


def _oriented(patch: BoundaryPatch, reference) -> BoundaryPatch:
    """Fix the sign so that N points away from an interior reference point."""
    mid = 0.5 * (np.asarray(patch.lo) + np.asarray(patch.hi))
    mid = mid[None, :]
    N = patch.normal(mid)
    x = patch.points(mid)
    sign = 1 if float(np.dot(N[0], x[0] - np.asarray(reference))) > 0 else -1
    return replace(patch, orientation=sign * patch.orientation)


def _box_face(lo, hi, axis: int, value: float, name: str) -> BoundaryPatch:
    others = [i for i in range(len(lo)) if i != axis]

    def phi(S):
        out = np.empty((S.shape[0], len(lo)), dtype=S.dtype)
        out[:, others] = S
        out[:, axis] = value
        return out

    return BoundaryPatch(
        phi=phi, lo=tuple(lo[i] for i in others), hi=tuple(hi[i] for i in others), name=name
    )


def _sphere_patch(center, r: float, name: str) -> BoundaryPatch:
    c = np.asarray(center, dtype=float)
    lo, hi = sphere_bounds(c.size - 1)
    return BoundaryPatch(
        phi=lambda S: c + r * sphere_map(S),
        lo=lo,
        hi=hi,
        periodic=(c.size - 2,),
        angular=tuple(range(c.size - 1)),
        polar=tuple((j, c.size - 2 - j) for j in range(c.size - 2)),
        name=name,
    )


def _gauge_sphere_patch(pole, r: float, name: str) -> BoundaryPatch:
    p = np.asarray(pole, dtype=float)
    n = p.size
    alo, ahi = sphere_bounds(n - 2)

    def phi(S):
        rho = np.full(S.shape[0], r, dtype=S.dtype)
        return gauge_sphere_point(rho, S[:, 0], sphere_map(S[:, 1:]), p)

    return BoundaryPatch(
        phi=phi,
        lo=(-1.0,) + alo,
        hi=(1.0,) + ahi,
        periodic=(n - 2,),
        angular=tuple(range(n - 1)),
        polar=tuple((j, n - 2 - j) for j in range(1, n - 2)) if n > 3 else (),
        name=name,
    )


# -- domains --------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """A bounded region with an interior tiling and an oriented boundary.

    ``kind`` is ``"box"``, ``"ball"`` or ``"gauge_ball"``.  Radial domains
    (balls) keep their center; the quadrature grades their radial axis.
    """

    n: int
    kind: str
    cells: tuple
    boundary: tuple
    inner_boundary: tuple = ()
    excision: Optional[tuple] = None
    center: Optional[tuple] = None
    radius: Optional[float] = None
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    gauge: Optional[ScalarField] = field(default=None, compare=False, repr=False)

    @property
    def interior(self) -> tuple:
        return self.cells

    @property
    def scale(self) -> float:
        """Characteristic size: radius, or the half-diagonal of a box."""
        if self.radius is not None:
            return float(self.radius)
        return 0.5 * float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @property
    def inner_radius(self) -> float:
        return 0.0 if self.excision is None else float(self.excision[1])

    def radial_distance(self, X):
        X = as_points(X)
        if self.kind == "ball":
            return np.linalg.norm(X - np.asarray(self.center), axis=1)
        if self.kind == "gauge_ball":
            return self.gauge(X)
        raise TypeError("box domains have no radial coordinate")

    def contains(self, X):
        X = as_points(X)
        if self.kind == "box":
            inside = np.all((X > np.asarray(self.lo)) & (X < np.asarray(self.hi)), axis=1)
        else:
            r = self.radial_distance(X)
            inside = r < self.radius
            if self.excision is not None:
                inside &= r > self.inner_radius
        return inside

    def bounding_box(self):
        if self.kind == "box":
            return np.asarray(self.lo, float), np.asarray(self.hi, float)
        c = np.asarray(self.center, float)
        R = float(self.radius)
        if self.kind == "ball":
            return c - R, c + R
        m = (self.n - 1) // 2
        half = np.full(self.n, R)
        half[-1] = R * R + 2.0 * R * float(np.linalg.norm(c[: 2 * m]))
        return c - half, c + half

    def distance_to_boundary(self, p) -> float:
        p = np.asarray(p, dtype=float)
        if self.kind == "box":
            return float(min(np.min(p - np.asarray(self.lo)), np.min(np.asarray(self.hi) - p)))
        return float(self.radius - self.radial_distance(p)[0])

    def exact_volume(self) -> Optional[float]:
        if self.kind == "box":
            return float(np.prod(np.subtract(self.hi, self.lo)))
        if self.kind == "ball":
            f = math.pi ** (self.n / 2) / math.gamma(self.n / 2 + 1)
            return f * (self.radius**self.n - self.inner_radius**self.n)
        if self.n == 3:
            return 0.5 * math.pi**2 * (self.radius**4 - self.inner_radius**4)
        return None


def build_box(lo, hi) -> Domain:
    lo = tuple(float(v) for v in lo)
    hi = tuple(float(v) for v in hi)
    if len(lo) != len(hi) or not lo:
        raise ValueError("lo and hi must have the same positive length")
    if any(b <= a for a, b in zip(lo, hi)):
        raise ValueError("degenerate box: need lo < hi componentwise")
    n = len(lo)
    mid = 0.5 * (np.asarray(lo) + np.asarray(hi))
    faces = []
    for i in range(n):
        for side, v in (("lo", lo[i]), ("hi", hi[i])):
            faces.append(_oriented(_box_face(lo, hi, i, v, f"x{i + 1}={side}"), mid))
    return Domain(
        n=n,
        kind="box",
        cells=(Cell(BoxChart(n), lo, hi),),
        boundary=tuple(faces),
        lo=lo,
        hi=hi,
    )


def build_euclidean_ball(center, r: float) -> Domain:
    if r <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float)
    n = c.size
    if n < 2:
        raise ValueError("balls need n >= 2")
    alo, ahi = sphere_bounds(n - 1)
    cell = Cell(BallChart(c), (0.0,) + alo, (float(r),) + ahi)
    patch = _oriented(_sphere_patch(c, r, "sphere"), c)
    return Domain(
        n=n, kind="ball", cells=(cell,), boundary=(patch,), center=tuple(c), radius=float(r)
    )


def build_gauge_ball(fs: FundamentalSolution, r: float) -> Domain:
    """The level-set ball {d < r} of the gauge of ``fs`` around its pole."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if fs.kind == "euclidean":
        return build_euclidean_ball(fs.pole, r)
    if fs.kind != "heisenberg":
        raise ValueError(f"no gauge-ball chart for kind {fs.kind!r}")
    p = np.asarray(fs.pole)
    n = p.size
    alo, ahi = sphere_bounds(n - 2)
    cell = Cell(GaugeBallChart(p), (0.0, -1.0) + alo, (float(r), 1.0) + ahi)
    patch = _oriented(_gauge_sphere_patch(p, r, "gauge-sphere"), p)
    return Domain(
        n=n,
        kind="gauge_ball",
        cells=(cell,),
        boundary=(patch,),
        center=tuple(p),
        radius=float(r),
        gauge=fs.gauge,
    )


def excise_pole(domain: Domain, fs: FundamentalSolution, eps: float) -> Domain:
    """Remove the gauge ball {d <= eps} around the pole of ``fs``.

    Supported for radial domains centred at the pole.  The excised sphere is
    exposed as ``inner_boundary`` (oriented out of the remaining region) and
    is not part of ``boundary``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pole = np.asarray(fs.pole)
    if not domain.contains(pole[None])[0] and domain.excision is None:
        raise PoleError("pole outside the domain")
    if domain.kind == "box":
        raise ValueError("excision needs a ball or gauge ball centred at the pole")
    expected = "ball" if fs.kind == "euclidean" else "gauge_ball"
    if domain.kind != expected or not np.allclose(domain.center, pole, rtol=0, atol=1e-14):
        raise ValueError("excision needs a domain centred at the pole in the gauge of fs")
    if eps >= domain.radius:
        raise ValueError(f"eps={eps} exceeds the pole-to-boundary distance {domain.radius}")
    cells = tuple(replace(c, lo=(float(eps),) + tuple(c.lo[1:])) for c in domain.cells)
    if domain.kind == "ball":
        inner = _sphere_patch(pole, eps, "inner-sphere")
    else:
        inner = _gauge_sphere_patch(pole, eps, "inner-gauge-sphere")
    # outward from the annulus means pointing at the pole
    inner = _oriented(inner, pole).flipped()
    return replace(
        domain, cells=cells, inner_boundary=(inner,), excision=(tuple(pole), float(eps))
    )


# -- the surface form -----------------------------------------------------


def boundary_form_density(frame: Frame, k: int, patch: BoundaryPatch, s):
    """Pullback of <X_k, d nu> on the patch tangent basis at parameters s.

    orientation * det[X_k | d phi/ds_1 | ... | d phi/ds_(n-1)]; ``k`` is 1-based.
    """
    S = np.atleast_2d(np.asarray(s, dtype=float))
    if not 1 <= k <= frame.N:
        raise IndexError(f"field index {k} outside 1..{frame.N}")
    x = patch.points(S)
    V = frame.vectors(x)[:, k - 1]
    out = np.sum(V * patch.normal(S), axis=1)
    return out[0] if np.ndim(s) == 1 else out


def wedge_form_density(frame: Frame, k: int, patch: BoundaryPatch, s):
    """Same quantity through the coframe: (-1)^(k-1) dx_(j != k) ^ theta_(m > N).

    theta_m = dx_m - sum_l a_(l,m) dx_l.  Evaluated on the tangent basis as
    the determinant of the matrix of 1-form values.
    """
    S = np.atleast_2d(np.asarray(s, dtype=float))
    n, N = frame.n, frame.N
    x = patch.points(S)
    T = patch.tangents(S)
    V = frame.vectors(x)
    forms = np.zeros((S.shape[0], n - 1, n))
    row = 0
    for j in range(N):
        if j != k - 1:
            forms[:, row, j] = 1.0
            row += 1
    for mm in range(N, n):
        forms[:, row, mm] = 1.0
        forms[:, row, :N] -= V[:, :, mm]
        row += 1
    out = (-1) ** (k - 1) * patch.orientation * np.linalg.det(forms @ T)
    return out[0] if np.ndim(s) == 1 else out
