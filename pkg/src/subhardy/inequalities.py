"""Term-by-term evaluation of the integral identities and inequalities.

Every inequality is reported as ``lhs >= sum(rhs_terms)`` with per-term
quadrature error bars.  Weights are powers of Gamma computed through the
gauge, Gamma^(s/(2-beta)) = c^(s/(2-beta)) d^s, and every stored term is
divided by its homogeneity factor in c, so reports do not depend on the
normalization of Gamma.  The radius R of the logarithmic refinements is
given in units of the normalized gauge d and defaults to 1.05 e sup d.
"""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domains import Domain
from .fields import ScalarField, as_points
from .frames import Frame
from .fundsol import FundamentalSolution, PoleError
from .quadrature import (
    IntegralResult,
    QuadratureScheme,
    boundary_nodes,
    evaluate,
    field_pairings,
    integrate_boundary,
    integrate_interior,
    interior_nodes,
    pairwise_sum,
    result_from,
)

R_INFLATION = 1.05
ROUNDING = 1e-12
FIELD_CACHE = 4
VERDICTS = ("holds", "violated-within-error", "violated")


class ParameterError(ValueError):
    """(alpha, beta, R) outside the admissible wedge of a theorem."""


# -- reports --------------------------------------------------------------


@dataclass(frozen=True)
class TermBreakdown:
    labels: tuple
    values: tuple

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.values))


@dataclass(frozen=True)
class InequalityReport:
    """lhs >= sum of rhs_terms, with error bars keyed by term label."""

    name: str
    params: dict
    lhs: float
    rhs_terms: tuple
    error_bars: dict
    u: str = "u"
    constant: Optional[float] = None
    scheme_hash: str = ""
    seed: Optional[int] = None
    extras: dict = field(default_factory=dict)

    @property
    def rhs(self) -> float:
        return math.fsum(v for _, v in self.rhs_terms)

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def tolerance(self) -> float:
        scale = abs(self.lhs) + math.fsum(abs(v) for _, v in self.rhs_terms)
        return math.fsum(self.error_bars.values()) + ROUNDING * scale

    @property
    def verdict(self) -> str:
        s, e = self.slack, self.tolerance
        if s >= -e:
            return "holds"
        if s >= -10.0 * e:
            return "violated-within-error"
        return "violated"

    def breakdown(self) -> TermBreakdown:
        labels = ("lhs",) + tuple(k for k, _ in self.rhs_terms)
        return TermBreakdown(labels, (self.lhs,) + tuple(v for _, v in self.rhs_terms))

    def term(self, label: str) -> float:
        return self.breakdown().as_dict()[label]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "u": self.u,
            "params": dict(self.params),
            "constant": self.constant,
            "lhs": self.lhs,
            "rhs_terms": [[k, v] for k, v in self.rhs_terms],
            "slack": self.slack,
            "verdict": self.verdict,
            "error_bars": dict(self.error_bars),
            "scheme_hash": self.scheme_hash,
            "seed": self.seed,
            "extras": dict(self.extras),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "InequalityReport":
        return cls(
            name=data["name"],
            params=dict(data["params"]),
            lhs=data["lhs"],
            rhs_terms=tuple((k, v) for k, v in data["rhs_terms"]),
            error_bars=dict(data["error_bars"]),
            u=data.get("u", "u"),
            constant=data.get("constant"),
            scheme_hash=data.get("scheme_hash", ""),
            seed=data.get("seed"),
            extras=dict(data.get("extras", {})),
        )


# -- parameter wedges -----------------------------------------------------


def validate_parameters(kind: str, alpha: float, beta: float) -> None:
    """Raise ParameterError naming the violated constraint."""
    if not beta > 2:
        raise ParameterError(f"beta > 2 violated (beta={beta})")
    if kind == "hardy":
        if not alpha > 2 - beta:
            raise ParameterError(f"alpha > 2 - beta violated (alpha={alpha}, beta={beta})")
    elif kind == "rellich":
        if not beta > alpha > 4 - beta:
            raise ParameterError(f"beta > alpha > 4 - beta violated (alpha={alpha}, beta={beta})")
    elif kind == "rellich_gradient":
        if not beta > alpha > (8 - beta) / 3:
            raise ParameterError(f"beta > alpha > (8 - beta)/3 violated (alpha={alpha}, beta={beta})")
    elif kind != "uncertainty":
        raise ValueError(f"unknown inequality family {kind!r}")


# -- node-level workspace -------------------------------------------------


class _Side:
    """Gauge data on one node set (interior or boundary, fine or coarse)."""

    def __init__(self, fs: FundamentalSolution, X, N=None):
        self.X = X
        frame = fs.frame
        self.d = evaluate(fs.gauge, X)
        if np.any(self.d <= 0.0):
            raise PoleError("a quadrature node sits on the pole")
        gd = frame.apply(fs.gauge, X)
        self.g = np.sum(gd * gd, axis=1)
        if N is not None:
            self.P = field_pairings(frame, X, N)
            # <tilde grad d^(2-beta), d nu> = (2-beta) d^(1-beta) sum_k (X_k d) P_k
            self.flux = (2.0 - fs.beta) * self.d ** (1.0 - fs.beta) * np.sum(gd * self.P, axis=1)


class Workspace:
    """Cached gauge and field values at the nodes of a domain.

    One workspace serves a whole (alpha, beta) grid and a battery of test
    functions: gauge quantities are evaluated once, field values once per
    function.
    """

    def __init__(self, fs: FundamentalSolution, domain: Domain, scheme: Optional[QuadratureScheme] = None):
        self.fs = fs
        self.domain = domain
        self.scheme = scheme or QuadratureScheme()
        pole = np.asarray(fs.pole)
        inside = bool(domain.contains(pole[None])[0])
        # poles on the boundary are excluded; distance in gauge units for radial domains
        if domain.excision is None and abs(domain.distance_to_boundary(pole)) <= 1e-12:
            raise PoleError("the pole lies on the boundary")
        radial_at_pole = domain.kind != "box" and np.allclose(domain.center, pole, atol=1e-14)
        self.extrapolate = radial_at_pole and domain.excision is None
        grade = pole if (domain.kind == "box" and inside) else None
        self.grade_pole = grade
        self.nodes = {}
        self.sides = {}
        for coarse in (False, True):
            nd = interior_nodes(domain, self.scheme, grade, coarse, self.extrapolate)
            self.nodes[("int", coarse)] = nd
            self.sides[("int", coarse)] = _Side(fs, nd.points)
            bn = boundary_nodes(domain, self.scheme, "outer", coarse)
            self.nodes[("bnd", coarse)] = bn
            self.sides[("bnd", coarse)] = _Side(fs, bn.points, bn.normals)
        self.sup_d = float(max(np.max(s.d) for s in self.sides.values() if s.d.size))
        self.min_g = float(min(np.min(s.g) for s in self.sides.values() if s.g.size))
        self._fields: dict = {}

    @property
    def R_min(self) -> float:
        return math.e * self.sup_d

    def R_auto(self) -> float:
        return R_INFLATION * self.R_min

    def check_R(self, R: Optional[float]) -> float:
        if R is None or R == "auto":
            return self.R_auto()
        R = float(R)
        if R < self.R_min:
            raise ParameterError(f"R >= e sup d violated (R={R}, e sup d={self.R_min})")
        return R

    def field(self, u: ScalarField, laplacian: bool = False) -> dict:
        key = id(u)
        entry = self._fields.get(key)
        if entry is None or entry[0] is not u:
            if len(self._fields) >= FIELD_CACHE:
                self._fields.pop(next(iter(self._fields)))
            entry = (u, {})
            self._fields[key] = entry
        data = entry[1]
        frame = self.fs.frame
        for key2, side in self.sides.items():
            if key2 not in data:
                X = side.X
                data[key2] = {"u": evaluate(u, X), "gu": _chunked(lambda Y: frame.apply(u, Y), X)}
            if laplacian and key2[0] == "int" and "lap" not in data[key2]:
                data[key2]["lap"] = evaluate(lambda Y: frame.sub_laplacian(u, Y), X=side.X)
        return data

    def interior(self, integrand) -> IntegralResult:
        """``integrand(side, coarse) -> values`` integrated with extrapolation."""
        vals = {c: integrand(self.sides[("int", c)], c) for c in (False, True)}
        for v in vals.values():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError("non-finite interior integrand")
        return result_from(
            self.nodes[("int", False)], vals[False], self.nodes[("int", True)], vals[True], self.extrapolate
        )

    def boundary(self, integrand) -> IntegralResult:
        out = []
        for c in (False, True):
            nd = self.nodes[("bnd", c)]
            v = integrand(self.sides[("bnd", c)], c) if nd.size else np.zeros(0)
            if not np.all(np.isfinite(v)):
                raise FloatingPointError("non-finite boundary integrand")
            out.append(pairwise_sum(nd.weights * v))
        return IntegralResult(out[0], abs(out[0] - out[1]), self.nodes[("bnd", False)].size)


def _chunked(fn, X, chunk=1 << 17):
    if X.shape[0] <= chunk:
        return fn(X)
    return np.concatenate([fn(X[i : i + chunk]) for i in range(0, X.shape[0], chunk)])


_WORKSPACES: dict = {}


def workspace(fs: FundamentalSolution, domain: Domain, scheme: Optional[QuadratureScheme] = None) -> Workspace:
    """Shared workspace for (fs, domain, scheme); the constant of fs is irrelevant."""
    scheme = scheme or QuadratureScheme()
    key = (fs.kind, fs.pole, fs.beta, id(fs.gauge), id(domain), scheme)
    hit = _WORKSPACES.get(key)
    if hit is not None and hit.domain is domain and hit.fs.gauge is fs.gauge:
        if hit.fs is not fs:
            # node data is c-free; only the constant read by the term builders changes
            hit = copy.copy(hit)
            hit.fs = fs
        return hit
    if len(_WORKSPACES) > 8:
        _WORKSPACES.clear()
    ws = Workspace(fs, domain, scheme)
    _WORKSPACES[key] = ws
    return ws


# -- Gamma-weight helpers -------------------------------------------------


class _Weights:
    """Gamma-based weights at one side, normalized through c."""

    def __init__(self, fs: FundamentalSolution, side: _Side):
        b = fs.beta
        self.c = fs.constant
        self.cf = fs.constant ** (1.0 / (2.0 - b))  # Gamma^(1/(2-b)) = cf * d
        self.side = side
        self.b = b

    def gpow(self, s):
        """Gamma^(s/(2-beta))."""
        return self.cf**s * self.side.d**s

    def grad2(self):
        """|grad_X Gamma^(1/(2-beta))|^2."""
        return self.cf**2 * self.side.g

    def flux(self):
        """<tilde grad Gamma, d nu> per unit parameter area."""
        return self.c * self.side.flux

    def log(self, R):
        """ln(R_Gamma / Gamma^(1/(2-beta))) with R given in units of d."""
        return np.log(R / self.side.d)


def _scaled(res: IntegralResult, factor: float):
    return res.value * factor, res.error_estimate * abs(factor)


def _product(a, b):
    """(value, err) for a product of two (value, err) pairs."""
    return a[0] * b[0], abs(a[0]) * b[1] + abs(b[0]) * a[1]


def _report(name, params, lhs, terms, fs, domain, scheme, u, norm, extras=None):
    """Assemble a report, dividing every term by the homogeneity factor ``norm``."""
    labels = [k for k, _ in terms]
    err = {"lhs": lhs[1] / norm}
    for k, (v, e) in terms:
        err[k] = e / norm
    extras = dict(extras or {})
    return InequalityReport(
        name=name,
        params=params,
        lhs=lhs[0] / norm,
        rhs_terms=tuple((k, v / norm) for k, (v, _) in terms),
        error_bars=err,
        u=getattr(u, "name", "u"),
        constant=fs.constant,
        scheme_hash=scheme.hash(),
        extras=extras,
    )


def _prepare(fs, frame, u, alpha, beta, domain, scheme, kind, laplacian=False):
    if frame is not None and frame is not fs.frame and frame.name != fs.frame.name:
        raise ValueError("frame does not match the frame of the fundamental solution")
    if abs(beta - fs.beta) > 1e-12:
        raise ParameterError(f"beta={beta} must equal the exponent of Gamma ({fs.beta})")
    validate_parameters(kind, alpha, beta)
    scheme = scheme or QuadratureScheme()
    ws = workspace(fs, domain, scheme)
    data = ws.field(u, laplacian)
    return ws, data, scheme


# -- identities -----------------------------------------------------------


def stokes_residual(frame: Frame, fk: Sequence[ScalarField], domain: Domain, scheme=None):
    """Per-field residuals of int X_k f_k = int_boundary f_k <X_k, d nu> and their sum.

    Returns ``(residuals, total, interior, boundary)`` where the last two are
    lists of IntegralResult per field.
    """
    if len(fk) != frame.N:
        raise ValueError(f"need {frame.N} functions, got {len(fk)}")
    scheme = scheme or QuadratureScheme()
    _warn_divergence(frame, domain)
    interior, boundary, res = [], [], []
    for k, f in enumerate(fk):
        vi = integrate_interior(lambda X, f=f, k=k: frame.apply(f, X)[:, k], domain, scheme, extrapolate=False)
        vb = integrate_boundary(
            lambda X, N, f=f, k=k: f(X) * field_pairings(frame, X, N)[:, k], domain, scheme
        )
        interior.append(vi)
        boundary.append(vb)
        res.append(vi.value - vb.value)
    return res, math.fsum(res), interior, boundary


def _warn_divergence(frame: Frame, domain: Domain):
    """The divergence formula needs div X_k = 0; warn for custom frames."""
    lo, hi = domain.bounding_box()
    rng = np.random.default_rng(12345)
    X = lo + (hi - lo) * rng.random((64, frame.n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        div = frame.divergence(X)
    if np.max(np.abs(div)) > 1e-10:
        warnings.warn(
            f"frame {frame.name!r} has non-zero Euclidean divergence; the divergence formula does not apply",
            RuntimeWarning,
            stacklevel=3,
        )


def _tilde(frame, u, v, X):
    return np.sum(frame.apply(u, X) * frame.apply(v, X), axis=1)


def _green_first_parts(frame, u, v, domain, scheme, pole=None):
    scheme = scheme or QuadratureScheme()
    vi = integrate_interior(
        lambda X: _tilde(frame, v, u, X) + v(X) * frame.sub_laplacian(u, X), domain, scheme, pole, False
    )
    vb = integrate_boundary(
        lambda X, N: v(X) * np.sum(frame.apply(u, X) * field_pairings(frame, X, N), axis=1), domain, scheme
    )
    return vi.value, vb.value


def green_first_residual(frame: Frame, u: ScalarField, v: ScalarField, domain: Domain, scheme=None, pole=None):
    """int ((tilde grad v) u + v L u) - int_boundary v <tilde grad u, d nu>."""
    a, b = _green_first_parts(frame, u, v, domain, scheme, pole)
    return a - b


def _green_second_parts(frame, u, v, domain, scheme):
    scheme = scheme or QuadratureScheme()
    a = integrate_interior(lambda X: u(X) * frame.sub_laplacian(v, X), domain, scheme, None, False).value
    b = integrate_interior(lambda X: v(X) * frame.sub_laplacian(u, X), domain, scheme, None, False).value

    def flux(w, f):
        return integrate_boundary(
            lambda X, N: f(X) * np.sum(frame.apply(w, X) * field_pairings(frame, X, N), axis=1), domain, scheme
        ).value

    return a, b, flux(v, u), flux(u, v)


def green_second_residual(frame: Frame, u: ScalarField, v: ScalarField, domain: Domain, scheme=None):
    """int (u L v - v L u) - int_boundary (u <tilde grad v, d nu> - v <tilde grad u, d nu>)."""
    if u is v:
        return 0.0
    a, b, c, d = _green_second_parts(frame, u, v, domain, scheme)
    # (a - b) - (c - d), arranged so that swapping u and v negates it exactly
    return (a - c) - (b - d)


def green_relative_residuals(frame: Frame, u: ScalarField, v: ScalarField, domain: Domain, scheme=None):
    """Both Green residuals divided by the largest integral entering each.

    Returns ``(g1, g2, scale1, scale2)``.
    """
    a, b = _green_first_parts(frame, u, v, domain, scheme)
    s1 = max(abs(a), abs(b))
    if u is v:
        g2, s2 = 0.0, 0.0
    else:
        p = _green_second_parts(frame, u, v, domain, scheme)
        g2, s2 = (p[0] - p[2]) - (p[1] - p[3]), max(abs(t) for t in p)
    return (a - b) / s1 if s1 > 0 else a - b, g2 / s2 if s2 > 0 else g2, s1, s2


def normalization_check(fs: FundamentalSolution, domain: Domain, scheme=None) -> IntegralResult:
    """Boundary integral of <tilde grad Gamma, d nu>; -1 for poles inside."""
    from .quadrature import boundary_flux

    pole = np.asarray(fs.pole)
    if domain.excision is None and abs(domain.distance_to_boundary(pole)) <= 1e-12:
        raise PoleError("the pole lies on the boundary")
    res = boundary_flux(fs.frame, fs.gamma_field(), domain, scheme or QuadratureScheme())
    return res


def representation_residual(
    fs: FundamentalSolution, frame: Frame, u: ScalarField, x, domain: Domain, scheme=None
) -> float:
    """u(x) minus the right-hand side of the representation formula with pole x."""
    from dataclasses import replace as _replace

    from .fundsol import euclidean_gauge, heisenberg_gauge

    x = np.asarray(x, dtype=float)
    scheme = scheme or QuadratureScheme()
    if fs.kind == "euclidean":
        fx = _replace(fs, pole=tuple(x), gauge=euclidean_gauge(x))
    elif fs.kind == "heisenberg":
        fx = _replace(fs, pole=tuple(x), gauge=heisenberg_gauge(x, (x.size - 1) // 2))
    else:
        raise ValueError("representation needs a built-in solution to move the pole")
    if not domain.contains(x[None])[0]:
        raise PoleError("x must lie inside the domain")
    if domain.distance_to_boundary(x) < 0.05 * domain.scale:
        warnings.warn("x is close to the boundary; quadrature may be inaccurate", RuntimeWarning, stacklevel=2)
    G = fx.gamma_field()
    radial = domain.kind != "box" and np.allclose(domain.center, x, atol=1e-14)
    vol = integrate_interior(
        lambda X: G(X) * frame.sub_laplacian(u, X),
        domain,
        scheme,
        None if radial else x,
        extrapolate=radial,
    ).value
    b1 = integrate_boundary(
        lambda X, N: u(X) * np.sum(frame.apply(G, X) * field_pairings(frame, X, N), axis=1), domain, scheme
    ).value
    b2 = integrate_boundary(
        lambda X, N: G(X) * np.sum(frame.apply(u, X) * field_pairings(frame, X, N), axis=1), domain, scheme
    ).value
    return float(u(x[None])[0] - (-vol - b1 + b2))


# -- boundary pieces shared by the inequalities ---------------------------


def _bnd_gamma_term(ws: Workspace, data, s_exp: float, log_power: int = 0, R=None):
    """int_boundary Gamma^(s/(2-beta) - 1) ln^(-p) u^2 <tilde grad Gamma, d nu>."""
    fs = ws.fs

    # Gamma^(s/(2-b) - 1) = Gamma^(s/(2-b)) d^(b-2) / c
    def g(side, c):
        w = _Weights(fs, side)
        val = w.gpow(s_exp) * side.d ** (fs.beta - 2.0) / w.c * w.flux() * data[("bnd", c)]["u"] ** 2
        if log_power:
            val = val * w.log(R) ** (-log_power)
        return val

    return ws.boundary(g)


def c_term(ws: Workspace, data, alpha: float):
    """C(u) as (value, err) in Gamma units."""
    fs = ws.fs
    b = fs.beta
    first = _bnd_gamma_term(ws, data, alpha - 2.0)

    def second(side, c):
        w = _Weights(fs, side)
        d = data[("bnd", c)]
        return w.gpow(alpha - 2.0) * d["u"] * np.sum(d["gu"] * side.P, axis=1)

    sec = ws.boundary(second)
    k = (alpha - 2.0) / (2.0 - b)
    return k * first.value - 2.0 * sec.value, abs(k) * first.error_estimate + 2.0 * sec.error_estimate


def c_functional(fs: FundamentalSolution, frame: Frame, u: ScalarField, alpha: float, beta: float, domain: Domain, scheme=None) -> float:
    """C(u), normalized by c^((alpha-2)/(2-beta))."""
    if abs(beta - fs.beta) > 1e-12:
        raise ParameterError(f"beta={beta} must equal the exponent of Gamma ({fs.beta})")
    ws = workspace(fs, domain, scheme)
    data = ws.field(u)
    v, _ = c_term(ws, data, alpha)
    return v / fs.constant ** ((alpha - 2.0) / (2.0 - beta))


# -- Hardy ----------------------------------------------------------------


def _hardy(fs, frame, u, alpha, beta, R, domain, scheme, refined):
    ws, data, scheme = _prepare(fs, frame, u, alpha, beta, domain, scheme, "hardy")
    a, b = float(alpha), float(beta)

    def lhs_f(side, c):
        w = _Weights(fs, side)
        return w.gpow(a) * np.sum(data[("int", c)]["gu"] ** 2, axis=1)

    def main_f(side, c, log_power=0):
        w = _Weights(fs, side)
        val = w.gpow(a - 2.0) * w.grad2() * data[("int", c)]["u"] ** 2
        if log_power:
            val = val * w.log(Rv) ** (-log_power)
        return val

    Rv = ws.check_R(R) if refined else None
    lhs = ws.interior(lhs_f)
    main = ws.interior(main_f)
    bnd = _bnd_gamma_term(ws, data, a)
    k1 = ((b + a - 2.0) / 2.0) ** 2
    k2 = (b + a - 2.0) / (2.0 * (b - 2.0))
    terms = [("main", _scaled(main, k1))]
    if refined:
        terms.append(("log_interior", _scaled(ws.interior(lambda s, c: main_f(s, c, 2)), 0.25)))
        terms.append(("log_boundary", _scaled(_bnd_gamma_term(ws, data, a, 1, Rv), 1.0 / (2.0 * (b - 2.0)))))
    terms.append(("boundary", _scaled(bnd, k2)))
    norm = fs.constant ** (a / (2.0 - b))
    params = {"alpha": a, "beta": b, "R": Rv}
    extras = {"main_constant": k1, "min_grad_gauge": math.sqrt(ws.min_g)}
    return _report("LH2" if refined else "LH2a", params, (lhs.value, lhs.error_estimate), terms, fs, domain, scheme, u, norm, extras)


def hardy_check(fs: FundamentalSolution, frame: Frame, u: ScalarField, alpha: float, beta: float, domain: Domain, scheme=None) -> InequalityReport:
    """Weighted local Hardy inequality with a boundary term."""
    return _hardy(fs, frame, u, alpha, beta, None, domain, scheme, False)


def hardy_refined_check(fs, frame, u, alpha, beta, R, domain, scheme=None) -> InequalityReport:
    """Hardy inequality with the additional logarithmic terms; ``R`` may be "auto"."""
    return _hardy(fs, frame, u, alpha, beta, R, domain, scheme, True)


# -- uncertainty ----------------------------------------------------------


def uncertainty_check(fs, frame, u, beta, R, variant: str, domain: Domain, scheme=None) -> InequalityReport:
    """Product-form uncertainty principles UP1a, UP2a, UP1 and UP2."""
    if variant not in ("UP1a", "UP2a", "UP1", "UP2"):
        raise ValueError("variant must be one of UP1a, UP2a, UP1, UP2")
    ws, data, scheme = _prepare(fs, frame, u, 0.0, beta, domain, scheme, "uncertainty")
    b = float(beta)
    refined = not variant.endswith("a")
    Rv = ws.check_R(R) if refined else None
    first = variant.startswith("UP1")

    def weight_f(side, c):
        w = _Weights(fs, side)
        if first:
            wt = w.gpow(2.0) * w.grad2()
        else:
            g = w.grad2()
            if np.any(g <= 0.0):
                raise FloatingPointError("|grad_X d| vanishes at a node")
            wt = w.gpow(2.0) / g
        return wt * data[("int", c)]["u"] ** 2

    def grad_f(side, c):
        return np.sum(data[("int", c)]["gu"] ** 2, axis=1)

    def inner_f(side, c):
        w = _Weights(fs, side)
        if first:
            return w.grad2() * data[("int", c)]["u"] ** 2
        return data[("int", c)]["u"] ** 2

    def log_f(side, c):
        w = _Weights(fs, side)
        return w.grad2() / w.gpow(2.0) * w.log(Rv) ** -2 * data[("int", c)]["u"] ** 2

    A = ws.interior(weight_f)
    Aa = (A.value, A.error_estimate)
    G = ws.interior(grad_f)
    I = ws.interior(inner_f)
    lhs = _product(Aa, (G.value, G.error_estimate))
    k = ((b - 2.0) / 2.0) ** 2
    main = _product((I.value, I.error_estimate), (I.value, I.error_estimate))
    terms = [("main", (k * main[0], k * main[1]))]
    bnd = _bnd_gamma_term(ws, data, 0.0)
    if refined:
        L = ws.interior(log_f)
        terms.append(("log_interior", _product((0.25 * L.value, 0.25 * L.error_estimate), Aa)))
        lb = _bnd_gamma_term(ws, data, 0.0, 1, Rv)
        f = 1.0 / (2.0 * (b - 2.0))
        terms.append(("log_boundary", _product((f * lb.value, f * lb.error_estimate), Aa)))
    terms.append(("boundary", _product((0.5 * bnd.value, 0.5 * bnd.error_estimate), Aa)))
    norm = fs.constant ** (4.0 / (2.0 - b)) if first else 1.0
    params = {"alpha": 0.0, "beta": b, "R": Rv}
    extras = {"main_constant": k, "min_grad_gauge": math.sqrt(ws.min_g)}
    return _report(variant, params, lhs, terms, fs, domain, scheme, u, norm, extras)


# -- Rellich --------------------------------------------------------------


def _rellich_lhs(ws, data, alpha):
    fs = ws.fs

    def f(side, c):
        w = _Weights(fs, side)
        g = w.grad2()
        if np.any(g <= 0.0):
            raise FloatingPointError("|grad_X d| vanishes at a node")
        return w.gpow(alpha) / g * data[("int", c)]["lap"] ** 2

    return ws.interior(f)


def _weighted_u2(ws, data, alpha, log_power=0, R=None):
    """int Gamma^((alpha-4)/(2-beta)) |grad Gamma^(1/(2-beta))|^2 ln^-p u^2."""
    fs = ws.fs

    def f(side, c):
        w = _Weights(fs, side)
        val = w.gpow(alpha - 4.0) * w.grad2() * data[("int", c)]["u"] ** 2
        if log_power:
            val = val * w.log(R) ** (-log_power)
        return val

    return ws.interior(f)


def rellich_check(fs, frame, u, alpha, beta, R, variant: str, domain: Domain, scheme=None) -> InequalityReport:
    """Weighted local Rellich inequality LR2a or its refinement LR2."""
    if variant not in ("LR2a", "LR2"):
        raise ValueError("variant must be LR2a or LR2")
    ws, data, scheme = _prepare(fs, frame, u, alpha, beta, domain, scheme, "rellich", laplacian=True)
    a, b = float(alpha), float(beta)
    refined = variant == "LR2"
    Rv = ws.check_R(R) if refined else None
    k, m = b + a - 4.0, b - a
    lhs = _rellich_lhs(ws, data, a)
    main_c = k * k * m * m / 16.0
    terms = [("main", _scaled(_weighted_u2(ws, data, a), main_c))]
    if refined:
        terms.append(("log_interior", _scaled(_weighted_u2(ws, data, a, 2, Rv), k * m / 8.0)))
        lb = _bnd_gamma_term(ws, data, a - 2.0, 1, Rv)
        terms.append(("log_boundary", _scaled(lb, k * m / (4.0 * (b - 2.0)))))
    bnd = _bnd_gamma_term(ws, data, a - 2.0)
    terms.append(("boundary", _scaled(bnd, k * k * m / (4.0 * (b - 2.0)))))
    cv, ce = c_term(ws, data, a)
    terms.append(("C", (k * m / 4.0 * cv, abs(k * m / 4.0) * ce)))
    norm = fs.constant ** ((a - 2.0) / (2.0 - b))
    params = {"alpha": a, "beta": b, "R": Rv}
    extras = {"main_constant": main_c, "min_grad_gauge": math.sqrt(ws.min_g)}
    return _report(variant, params, (lhs.value, lhs.error_estimate), terms, fs, domain, scheme, u, norm, extras)


def rellich_gradient_check(fs, frame, u, alpha, beta, R, variant: str, domain: Domain, scheme=None) -> InequalityReport:
    """Rellich inequality with the weighted Dirichlet integral on the right (2LR2a, 2LR2)."""
    if variant not in ("2LR2a", "2LR2"):
        raise ValueError("variant must be 2LR2a or 2LR2")
    ws, data, scheme = _prepare(fs, frame, u, alpha, beta, domain, scheme, "rellich_gradient", laplacian=True)
    a, b = float(alpha), float(beta)
    refined = variant == "2LR2"
    Rv = ws.check_R(R) if refined else None
    k, m, q = b + a - 4.0, b - a, b + 3.0 * a - 8.0
    lhs = _rellich_lhs(ws, data, a)

    def grad_f(side, c):
        w = _Weights(fs, side)
        return w.gpow(a - 2.0) * np.sum(data[("int", c)]["gu"] ** 2, axis=1)

    main_c = m * m / 4.0
    terms = [("main", _scaled(ws.interior(grad_f), main_c))]
    if refined:
        terms.append(("log_interior", _scaled(_weighted_u2(ws, data, a, 2, Rv), q * m / 16.0)))
        lb = _bnd_gamma_term(ws, data, a - 2.0, 1, Rv)
        terms.append(("log_boundary", _scaled(lb, q * m / (8.0 * (b - 2.0)))))
    bnd = _bnd_gamma_term(ws, data, a - 2.0)
    terms.append(("boundary", _scaled(bnd, q * k * m / (8.0 * (b - 2.0)))))
    cv, ce = c_term(ws, data, a)
    terms.append(("C", (k * m / 4.0 * cv, abs(k * m / 4.0) * ce)))
    norm = fs.constant ** ((a - 2.0) / (2.0 - b))
    params = {"alpha": a, "beta": b, "R": Rv}
    extras = {"main_constant": main_c, "min_grad_gauge": math.sqrt(ws.min_g)}
    return _report(variant, params, (lhs.value, lhs.error_estimate), terms, fs, domain, scheme, u, norm, extras)


CHECKS = {
    "LH2a": "hardy",
    "LH2": "hardy",
    "UP1a": "uncertainty",
    "UP2a": "uncertainty",
    "UP1": "uncertainty",
    "UP2": "uncertainty",
    "LR2a": "rellich",
    "LR2": "rellich",
    "2LR2a": "rellich_gradient",
    "2LR2": "rellich_gradient",
}


def run_check(name: str, fs, u, alpha, beta, domain, scheme=None, R=None) -> InequalityReport:
    """Dispatch by inequality label."""
    if name == "LH2a":
        return hardy_check(fs, fs.frame, u, alpha, beta, domain, scheme)
    if name == "LH2":
        return hardy_refined_check(fs, fs.frame, u, alpha, beta, R, domain, scheme)
    if name in ("UP1a", "UP2a", "UP1", "UP2"):
        return uncertainty_check(fs, fs.frame, u, beta, R, name, domain, scheme)
    if name in ("LR2a", "LR2"):
        return rellich_check(fs, fs.frame, u, alpha, beta, R, name, domain, scheme)
    if name in ("2LR2a", "2LR2"):
        return rellich_gradient_check(fs, fs.frame, u, alpha, beta, R, name, domain, scheme)
    raise ValueError(f"unknown inequality {name!r}")
