"""Interior and boundary quadrature with pole grading and excision.

Interior rules are tensor Gauss-Legendre products on the cells of a domain
(periodic axes use the trapezoid rule).  Radial cells centred at a pole are
split into shells at the excision radii eps_j = eps0 * 2^-j; every node
carries the index of the first excision level whose region contains it, so
one function evaluation yields all partial integrals I(eps_j) at once.
Error estimates compare against a coarser rule (order - 2, one refinement
level fewer) and add the extrapolation uncertainty.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_jacobi

from .domains import BallChart, BoundaryPatch, Cell, Domain, StarChart
from .frames import Frame

ANGULAR_CAP = 8000
CHUNK = 1 << 17


class NonFiniteIntegrand(FloatingPointError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class QuadratureScheme:
    """Gauss order per axis, pole refinement levels and excision schedule.

    ``eps0`` is relative to the domain scale (radius, or half-diagonal of a
    box); the excision radii are eps0 * scale * 2^-j for j = 0..eps_levels.
    """

    order: int = 8
    refinement: int = 4
    eps0: float = 0.2
    eps_levels: int = 4

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("order must be >= 2")
        if self.refinement < 0:
            raise ValueError("refinement must be >= 0")
        if not 0 < self.eps0 < 1:
            raise ValueError("eps0 must lie in (0, 1)")
        if self.eps_levels < 2:
            raise ValueError("eps_levels must be >= 2 for extrapolation")

    def hash(self) -> str:
        key = repr(sorted(asdict(self).items())).encode()
        return hashlib.sha256(key).hexdigest()[:12]


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    nodes_used: int
    partials: tuple = ()
    p: Optional[float] = None

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error estimate must be non-negative")


@dataclass(frozen=True)
class Extrapolation:
    limit: float
    p: float
    error: float
    monotone: bool


# -- 1-D rules and summation ---------------------------------------------


def gauss_rule(order: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def periodic_rule(npts: int, a: float, b: float):
    h = (b - a) / npts
    return a + h * (np.arange(npts) + 0.5), np.full(npts, h)


def pairwise_sum(values) -> float:
    """Sum with a fixed binary tree (reproducible, O(log n) error growth)."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def angular_order(order: int, n_axes: int) -> int:
    if n_axes <= 0:
        return order
    return max(2, min(order, int(math.floor(ANGULAR_CAP ** (1.0 / n_axes) + 1e-9))))


def _orders(scheme: QuadratureScheme, coarse: bool, n_ang: int):
    o = scheme.order
    ang = angular_order(o, n_ang)
    if not coarse:
        return o, ang, scheme.refinement
    oc = max(2, o - 2)
    return oc, max(2, min(angular_order(oc, n_ang), ang - 1)), max(0, scheme.refinement - 1)


def _tensor(rules):
    """Tensor product of 1-D (nodes, weights) pairs."""
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    S = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(S.shape[0])
    for g in wgrids:
        W = W * g.ravel()
    return S, W


def polar_rule(order: int, k: int):
    """Nodes on [0, pi] for integrands carrying sin^k, with that factor divided out.

    Gauss-Jacobi in cos(theta) absorbs the sine power, so a chart density
    that multiplies it back in gives exact weights for any ``order``.
    """
    t, w = roots_jacobi(order, 0.5 * (k - 1), 0.5 * (k - 1))
    theta = np.arccos(t)
    return theta, w / np.sin(theta) ** k


def _axis_rule(axis, lo, hi, order, ang, periodic, angular, polar=()):
    o = ang if axis in angular else order
    if axis in periodic:
        return periodic_rule(2 * o, lo, hi)
    k = dict(polar).get(axis)
    if k and lo == 0.0 and hi == math.pi:
        return polar_rule(o, k)
    return gauss_rule(o, lo, hi)


# -- node sets ------------------------------------------------------------


@dataclass(frozen=True)
class NodeSet:
    """Interior nodes with their excision level.

    ``radii`` is the excision schedule (empty when no extrapolation applies);
    nodes with ``level <= j`` lie outside the ball of radius ``radii[j]``.
    """

    points: np.ndarray
    weights: np.ndarray
    level: np.ndarray
    radii: tuple = ()

    @property
    def size(self) -> int:
        return self.weights.size

    def partials(self, values) -> np.ndarray:
        """I(eps_j) for every level (a single total when unstratified)."""
        wv = self.weights * values
        nlev = len(self.radii) if self.radii else 1
        shells = [pairwise_sum(wv[self.level == j]) for j in range(nlev)]
        return np.cumsum(shells)


@dataclass(frozen=True)
class BoundaryNodes:
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


def radial_intervals(r_in: float, R: float, scheme: QuadratureScheme, refinement: int, extrapolate=True):
    """Radial sub-intervals (a, b, level) and the excision radii."""
    pieces = max(1, refinement)
    if r_in > 0 or not extrapolate:
        start = r_in if r_in > 0 else 0.0
        if start == 0.0:
            edges = np.linspace(0.0, R, pieces + 1)
        else:
            edges = np.geomspace(start, R, pieces + 1)
        return [(edges[i], edges[i + 1], 0) for i in range(pieces)], ()
    e0 = scheme.eps0 * R
    edges = np.geomspace(e0, R, pieces + 1)
    out = [(edges[i], edges[i + 1], 0) for i in range(pieces)]
    radii = tuple(e0 * 2.0**-j for j in range(scheme.eps_levels + 1))
    for j in range(scheme.eps_levels):
        out.append((radii[j + 1], radii[j], j + 1))
    return out, radii


def _graded_boxes(lo, hi, pole, levels):
    """Dyadic subdivision of a box toward ``pole``; returns a list of (lo, hi)."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if pole is None or levels == 0 or not np.all((pole >= lo) & (pole <= hi)):
        return [(lo, hi)]
    mid = 0.5 * (lo + hi)
    out = []
    n = lo.size
    for corner in range(2**n):
        bits = np.array([(corner >> i) & 1 for i in range(n)], dtype=bool)
        clo = np.where(bits, mid, lo)
        chi = np.where(bits, hi, mid)
        out.extend(_graded_boxes(clo, chi, pole, levels - 1))
    return out


_CACHE: dict = {}


def _cached(key, domain, build):
    hit = _CACHE.get(key)
    if hit is not None and hit[0] is domain:
        return hit[1]
    if len(_CACHE) > 64:
        _CACHE.clear()
    value = build()
    _CACHE[key] = (domain, value)
    return value


def interior_nodes(
    domain: Domain, scheme: QuadratureScheme, pole=None, coarse: bool = False, extrapolate: bool = True
) -> NodeSet:
    """Quadrature nodes for ``domain``; radial cells are shelled at the centre."""
    pole_key = None if pole is None else tuple(np.asarray(pole, float))
    key = ("int", id(domain), scheme, pole_key, coarse, extrapolate)
    return _cached(key, domain, lambda: _build_interior(domain, scheme, pole_key, coarse, extrapolate))


def _build_interior(domain, scheme, pole, coarse, extrapolate):
    pts, wts, lev = [], [], []
    radii = ()
    for cell in domain.cells:
        chart = cell.chart
        if (
            pole is not None
            and isinstance(chart, BallChart)
            and domain.excision is None
            and not np.allclose(pole, chart.center, rtol=0.0, atol=1e-14)
        ):
            # re-centre on an off-centre singularity
            chart = StarChart(chart.center, cell.hi[0], pole)
            cell = Cell(chart, (0.0,) + tuple(cell.lo[1:]), (1.0,) + tuple(cell.hi[1:]))
            extrapolate = False
        n_ang = len(chart.angular)
        order, ang, refine = _orders(scheme, coarse, n_ang)
        if chart.radial_center is not None:
            intervals, radii = radial_intervals(cell.lo[0], cell.hi[0], scheme, refine, extrapolate)
            ang_rules = [
                _axis_rule(a, cell.lo[a], cell.hi[a], order, ang, chart.periodic, chart.angular, chart.polar)
                for a in range(1, chart.dim)
            ]
            Sa, Wa = _tensor(ang_rules)
            for a, b, level in intervals:
                r, wr = gauss_rule(order, a, b)
                S = np.concatenate([np.repeat(r, Sa.shape[0])[:, None], np.tile(Sa, (r.size, 1))], axis=1)
                W = np.repeat(wr, Wa.size) * np.tile(Wa, r.size)
                pts.append(chart.map(S))
                wts.append(W * chart.density(S))
                lev.append(np.full(W.size, level))
        else:
            boxes = _graded_boxes(cell.lo, cell.hi, None if pole is None else np.asarray(pole), refine)
            for blo, bhi in boxes:
                rules = [
                    _axis_rule(a, blo[a], bhi[a], order, ang, chart.periodic, chart.angular, chart.polar)
                    for a in range(chart.dim)
                ]
                S, W = _tensor(rules)
                pts.append(chart.map(S))
                wts.append(W * chart.density(S))
                lev.append(np.zeros(W.size, dtype=int))
    return NodeSet(
        points=np.concatenate(pts),
        weights=np.concatenate(wts),
        level=np.concatenate(lev).astype(int),
        radii=radii,
    )


def patch_nodes(patch: BoundaryPatch, scheme: QuadratureScheme, coarse: bool = False, splits: int = 1):
    order, ang, _ = _orders(scheme, coarse, len(patch.angular))
    lo = np.asarray(patch.lo, float)
    hi = np.asarray(patch.hi, float)
    pts, wts, nrm = [], [], []
    edges = [np.linspace(lo[a], hi[a], (1 if a in patch.angular else splits) + 1) for a in range(patch.dim)]
    for idx in np.ndindex(*[e.size - 1 for e in edges]):
        rules = [
            _axis_rule(a, edges[a][i], edges[a][i + 1], order, ang, patch.periodic, patch.angular, patch.polar)
            for a, i in enumerate(idx)
        ]
        S, W = _tensor(rules)
        pts.append(patch.points(S))
        wts.append(W)
        nrm.append(patch.normal(S))
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(nrm)


def boundary_nodes(domain: Domain, scheme: QuadratureScheme, which: str = "outer", coarse: bool = False) -> BoundaryNodes:
    """Nodes on the outer boundary, the excised inner sphere, or both."""
    if which not in ("outer", "inner", "all"):
        raise ValueError("which must be 'outer', 'inner' or 'all'")
    key = ("bnd", id(domain), scheme, which, coarse)

    def build():
        patches = ()
        if which in ("outer", "all"):
            patches += tuple(domain.boundary)
        if which in ("inner", "all"):
            patches += tuple(domain.inner_boundary)
        if not patches:
            return BoundaryNodes(np.zeros((0, domain.n)), np.zeros(0), np.zeros((0, domain.n)))
        _, _, refine = _orders(scheme, coarse, 0)
        splits = max(1, refine - 2)
        parts = [patch_nodes(p, scheme, coarse, splits) for p in patches]
        return BoundaryNodes(*(np.concatenate([q[i] for q in parts]) for i in range(3)))

    return _cached(key, domain, build)


# -- evaluation helpers ---------------------------------------------------


def evaluate(f: Callable, X: np.ndarray, chunk: int = CHUNK) -> np.ndarray:
    """Evaluate a pointwise integrand in fixed-size chunks."""
    if X.shape[0] <= chunk:
        out = np.asarray(f(X), dtype=float)
    else:
        out = np.concatenate([np.asarray(f(X[i : i + chunk]), dtype=float) for i in range(0, X.shape[0], chunk)])
    bad = ~np.isfinite(out)
    if bad.any():
        i = int(np.argmax(bad))
        raise NonFiniteIntegrand(f"non-finite integrand {out[i]} at node {X[i].tolist()}")
    return out


def extrapolate_excision(values, p: Optional[float] = None, ratio: float = 2.0) -> Extrapolation:
    """Richardson limit of I(eps_j) as eps_j = eps0 ratio^-j -> 0.

    Assumes I(eps) - I(0) ~ eps^p.  Without a hint ``p`` is estimated from
    the last two increments; a tail whose increments do not shrink
    geometrically yields the last raw value and an ExtrapolationWarning.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("extrapolation needs at least 3 values")
    d = np.diff(v)
    last = float(v[-1])
    scale = float(np.max(np.abs(v)))
    if np.all(np.abs(d) <= 1e-15 * max(scale, 1e-300)):
        return Extrapolation(last, math.inf, 0.0, True)
    if p is not None:
        q = ratio**p
        lim = last + d[-1] / (q - 1.0)
        prev = float(v[-2]) + d[-2] / (q - 1.0)
        return Extrapolation(float(lim), float(p), float(abs(lim - prev)), True)
    if d[-1] == 0.0:
        return Extrapolation(last, math.inf, float(abs(d[-2])), True)
    r = d[-2] / d[-1]
    if not np.isfinite(r) or r <= 1.0:
        warnings.warn("non-monotone excision tail; using the last raw value", ExtrapolationWarning, stacklevel=2)
        return Extrapolation(last, math.nan, float(abs(d[-1]) + abs(d[-2])), False)
    lim = last + d[-1] / (r - 1.0)
    if v.size >= 4 and d[-2] != 0.0 and d[-3] / d[-2] > 1.0:
        prev = float(v[-2]) + d[-2] / (d[-3] / d[-2] - 1.0)
    else:
        prev = last
    return Extrapolation(float(lim), float(math.log(r, ratio)), float(abs(lim - prev)), True)


def combine(nodes: NodeSet, values: np.ndarray, extrapolate: bool = True, p=None, quiet=True):
    """Value, extrapolation error and partial sums for values at ``nodes``."""
    part = nodes.partials(values)
    if nodes.radii and extrapolate:
        with warnings.catch_warnings():
            if quiet:
                warnings.simplefilter("ignore", ExtrapolationWarning)
            ex = extrapolate_excision(part, p)
        return ex.limit, ex.error, part, ex.p
    return float(part[-1]), 0.0, part, None


def result_from(fine: NodeSet, vf, coarse: NodeSet, vc, extrapolate=True, p=None) -> IntegralResult:
    val, err, part, pf = combine(fine, vf, extrapolate, p)
    valc, errc, _, _ = combine(coarse, vc, extrapolate, p)
    return IntegralResult(
        value=val,
        error_estimate=abs(val - valc) + err,
        nodes_used=fine.size + coarse.size,
        partials=tuple(float(x) for x in part),
        p=pf,
    )


def integrate_interior(
    f: Callable, domain: Domain, scheme: Optional[QuadratureScheme] = None, pole=None, extrapolate: bool = True, p=None
) -> IntegralResult:
    """Integrate a pointwise integrand ``f(X) -> (M,)`` over ``domain``.

    ``pole`` grades box cells toward a singular point; radial cells are
    always shelled toward their centre and extrapolated in the excision
    radius unless the domain is already excised or ``extrapolate`` is off.
    """
    scheme = scheme or QuadratureScheme()
    fine = interior_nodes(domain, scheme, pole, False, extrapolate)
    coarse = interior_nodes(domain, scheme, pole, True, extrapolate)
    return result_from(fine, evaluate(f, fine.points), coarse, evaluate(f, coarse.points), extrapolate, p)


def integrate_boundary(
    density: Callable, domain: Domain, scheme: Optional[QuadratureScheme] = None, which: str = "outer"
) -> IntegralResult:
    """Integrate ``density(x, N) -> (M,)`` over boundary patches.

    ``N`` is the oriented cofactor vector of each patch, so that
    ``density = F . N`` integrates the flux of a vector field F.
    """
    scheme = scheme or QuadratureScheme()
    vals = []
    for coarse in (False, True):
        b = boundary_nodes(domain, scheme, which, coarse)
        v = np.asarray(density(b.points, b.normals), dtype=float) if b.size else np.zeros(0)
        if not np.all(np.isfinite(v)):
            raise NonFiniteIntegrand("non-finite boundary density")
        vals.append((pairwise_sum(b.weights * v), b.size))
    (vf, nf), (vc, nc) = vals
    return IntegralResult(value=vf, error_estimate=abs(vf - vc), nodes_used=nf + nc)


def field_pairings(frame: Frame, X: np.ndarray, N: np.ndarray) -> np.ndarray:
    """<X_k, d nu> on the area vectors N, shape ``(M, N_fields)``."""
    return np.einsum("mkn,mn->mk", frame.vectors(X), N)


def boundary_flux(frame: Frame, w, domain: Domain, scheme=None, which: str = "outer", weight=None) -> IntegralResult:
    """Integral of weight * <tilde grad w, d nu> over the boundary."""

    def density(X, N):
        out = np.sum(frame.apply(w, X) * field_pairings(frame, X, N), axis=1)
        return out if weight is None else out * weight(X)

    return integrate_boundary(density, domain, scheme, which)


# -- Monte Carlo ----------------------------------------------------------


def monte_carlo_oracle(
    f: Callable, domain: Domain, samples: int, seed: int = 0, stratified: bool = False, chunk: int = 1 << 18
) -> IntegralResult:
    """Rejection-sampling estimate of the integral of ``f`` over ``domain``.

    Plain mode draws i.i.d. uniform points in the bounding box.  Stratified
    mode splits the box into k^n equal strata with two jittered samples each
    and estimates the variance from the within-stratum pairs.
    """
    if samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    lo, hi = domain.bounding_box()
    n = lo.size
    box = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)
    accepted = 0

    def g(X):
        inside = domain.contains(X)
        out = np.zeros(X.shape[0])
        if inside.any():
            out[inside] = evaluate(f, X[inside])
        return out, int(inside.sum())

    if not stratified:
        s1 = s2 = 0.0
        done = 0
        while done < samples:
            m = min(chunk, samples - done)
            X = lo + (hi - lo) * rng.random((m, n))
            v, a = g(X)
            accepted += a
            s1 += pairwise_sum(v)
            s2 += pairwise_sum(v * v)
            done += m
        if accepted == 0:
            raise ValueError("zero acceptance: domain misses its bounding box samples")
        mean = s1 / samples
        var = max(s2 / samples - mean * mean, 0.0)
        return IntegralResult(box * mean, box * math.sqrt(var / samples), samples)

    k = max(1, int(math.floor((samples / 2) ** (1.0 / n))))
    strata = k**n
    h = (hi - lo) / k
    total = 0.0
    var = 0.0
    per = max(1, chunk // 2)
    for start in range(0, strata, per):
        idx = np.arange(start, min(strata, start + per))
        cells = np.stack(np.unravel_index(idx, (k,) * n), axis=1)
        base = lo + h * cells
        v1, a1 = g(base + h * rng.random(base.shape))
        v2, a2 = g(base + h * rng.random(base.shape))
        accepted += a1 + a2
        total += pairwise_sum(0.5 * (v1 + v2))
        var += pairwise_sum(0.25 * (v1 - v2) ** 2)
    if accepted == 0:
        raise ValueError("zero acceptance: domain misses its bounding box samples")
    cell_vol = box / strata
    # Var of the pair mean is sigma^2 / 2 and (v1 - v2)^2 / 2 estimates sigma^2
    return IntegralResult(cell_vol * total, cell_vol * math.sqrt(var), 2 * strata)
