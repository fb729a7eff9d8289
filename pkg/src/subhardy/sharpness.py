"""Numerical best constants by minimizing Rayleigh-type ratios.

For a compactly supported trial u the boundary terms vanish and the ratio

    (lhs - boundary terms) / (main interior integral without its constant)

is bounded below by the constant of the inequality.  Minimizing it over a
family of near-extremal profiles estimates how sharp that constant is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .fields import ScalarField, smoothstep5
from .fundsol import FundamentalSolution
from .inequalities import hardy_check, rellich_check
from .quadrature import QuadratureScheme


class DegenerateTrial(ValueError):
    pass


@dataclass(frozen=True)
class TrialFamily:
    """theta -> ScalarField over a box of admissible parameters."""

    generator: Callable
    lower: tuple
    upper: tuple
    description: str = ""
    interior_only: bool = True
    min_scale: Optional[float] = None

    @property
    def dim(self) -> int:
        return len(self.lower)

    def __call__(self, theta) -> ScalarField:
        return self.generator(np.asarray(theta, dtype=float))

    def clip(self, theta):
        return np.clip(np.asarray(theta, float), self.lower, self.upper)


def _profile_field(gauge: ScalarField, s: float, theta1: float, inner: float, outer: float) -> ScalarField:
    """((theta1^2 + d^2) / (theta1^2 + outer^2))^(-s) times a C^2 cutoff in d.

    Normalized to 1 at d = outer so that integrals stay O(1) however small
    theta1 is; the ratio is invariant under this scaling.
    """
    w = outer - inner
    D = theta1 * theta1 + outer * outer

    def parts(d):
        q = (theta1 * theta1 + d * d) / D
        f = q**-s
        df = -2.0 * s * d / D * q ** (-s - 1.0)
        d2f = -2.0 * s / D * q ** (-s - 1.0) + 4.0 * s * (s + 1.0) * d * d / (D * D) * q ** (-s - 2.0)
        t = (d - inner) / w
        S, dS, d2S = smoothstep5(t)
        chi, dchi, d2chi = 1.0 - S, -dS / w, -d2S / w**2
        return f * chi, df * chi + f * dchi, d2f * chi + 2.0 * df * dchi + f * d2chi

    return gauge.compose(
        lambda d: parts(d)[0],
        lambda d: parts(d)[1],
        lambda d: parts(d)[2],
        name=f"profile(theta1={theta1:.3g},inner={inner:.3g})",
    )


def hardy_family(fs: FundamentalSolution, alpha: float, radius: float, log10_min: float = -60.0) -> TrialFamily:
    """u = (1 + (d/theta1)^2)^(-(beta+alpha-2)/4) * cutoff(theta2 * radius, radius).

    Parameters are (log10 theta1, theta2); the profile follows the formal
    extremal d^(-(beta+alpha-2)/2) outside the core of size theta1.
    """
    s = (fs.beta + alpha - 2.0) / 4.0

    def gen(theta):
        return _profile_field(fs.gauge, s, 10.0 ** theta[0], theta[1] * radius, radius)

    return TrialFamily(
        generator=gen,
        lower=(log10_min, 0.0),
        upper=(-1.0, 0.9),
        description="regularized extremal profile with C^2 cutoff",
        min_scale=10.0**log10_min,
    )


def rellich_family(fs: FundamentalSolution, alpha: float, radius: float, log10_min: float = -60.0) -> TrialFamily:
    """Same construction with the Rellich extremal exponent d^(-(beta+alpha-4)/2)."""
    s = (fs.beta + alpha - 4.0) / 4.0

    def gen(theta):
        return _profile_field(fs.gauge, s, 10.0 ** theta[0], theta[1] * radius, radius)

    return TrialFamily(
        generator=gen,
        lower=(log10_min, 0.0),
        upper=(-1.0, 0.9),
        description="regularized Rellich extremal profile with C^2 cutoff",
        min_scale=10.0**log10_min,
    )


def family_for(inequality: str, fs: FundamentalSolution, alpha: float, radius: float, log10_min: float = -60.0):
    if inequality == "LH2a":
        return hardy_family(fs, alpha, radius, log10_min)
    if inequality == "LR2a":
        return rellich_family(fs, alpha, radius, log10_min)
    raise ValueError("no trial family for " + repr(inequality))


def fixed_family(u: ScalarField) -> TrialFamily:
    """A family with no parameters, returning ``u``."""
    return TrialFamily(generator=lambda theta: u, lower=(), upper=(), description=u.name)


def rayleigh_ratio(inequality: str, fs, frame, u, alpha, beta, domain, scheme=None) -> float:
    """(lhs - boundary terms) / main integral, for LH2a or LR2a."""
    if inequality == "LH2a":
        rep = hardy_check(fs, frame, u, alpha, beta, domain, scheme)
        extra = rep.term("boundary")
    elif inequality == "LR2a":
        rep = rellich_check(fs, frame, u, alpha, beta, None, "LR2a", domain, scheme)
        extra = rep.term("boundary") + rep.term("C")
    else:
        raise ValueError("rayleigh_ratio supports LH2a and LR2a")
    k = rep.extras["main_constant"]
    main = rep.term("main") / k
    if not abs(main) > 1e-14:
        raise DegenerateTrial("main integral vanishes for this trial function")
    return (rep.lhs - extra) / main


def scheme_for(family: TrialFamily, domain, scheme: QuadratureScheme) -> QuadratureScheme:
    """Deepen the excision schedule so the shells resolve the smallest core."""
    if family.min_scale is None:
        return scheme
    e0 = scheme.eps0 * domain.scale
    levels = int(math.ceil(math.log2(e0 / family.min_scale))) + 6
    return replace(scheme, eps_levels=max(scheme.eps_levels, levels))


@dataclass
class OptimizationResult:
    theta: tuple
    ratio: float
    trace: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    target: Optional[float] = None

    @property
    def relative_gap(self) -> Optional[float]:
        if self.target is None:
            return None
        return (self.ratio - self.target) / self.target

    def respects_bound(self, allowance: float = 1e-2) -> bool:
        """No evaluated ratio fell below the theorem constant by more than ``allowance`` (relative)."""
        if self.target is None:
            return True
        finite = [t[3] for t in self.trace if math.isfinite(t[3])]
        return not finite or min(finite) >= self.target * (1.0 - allowance)


def optimize_trial(
    inequality: str,
    family: TrialFamily,
    fs: FundamentalSolution,
    frame,
    alpha: float,
    beta: float,
    domain,
    scheme: Optional[QuadratureScheme] = None,
    budget: int = 60,
    restarts: int = 3,
    seed: int = 0,
) -> OptimizationResult:
    """Minimize the ratio over the family with restarted Nelder-Mead.

    Each restart starts at a seeded random point of the parameter box and
    may use ``budget`` evaluations.  The trace records every evaluation as
    (restart, index, theta, ratio, best-so-far).
    """
    if budget < 20:
        raise ValueError("budget must allow at least 20 evaluations")
    scheme = scheme_for(family, domain, scheme or QuadratureScheme())
    if inequality == "LH2a":
        target = ((beta + alpha - 2.0) / 2.0) ** 2
    elif inequality == "LR2a":
        target = (beta + alpha - 4.0) ** 2 * (beta - alpha) ** 2 / 16.0
    else:
        raise ValueError("optimize_trial supports LH2a and LR2a")
    trace: list = []

    def ratio_at(theta):
        return rayleigh_ratio(inequality, fs, frame, family(theta), alpha, beta, domain, scheme)

    if family.dim == 0:
        r = ratio_at(())
        trace.append((0, 0, (), r, r))
        return OptimizationResult((), r, trace, [r], target)

    rng = np.random.default_rng(seed)
    lo = np.asarray(family.lower, float)
    hi = np.asarray(family.upper, float)
    best = (math.inf, None)
    per_restart = []
    for k in range(restarts):
        x0 = lo + (hi - lo) * rng.random(lo.size)
        local = {"best": math.inf, "n": 0}

        def objective(theta, k=k, local=local):
            theta = family.clip(theta)
            try:
                r = ratio_at(theta)
            except DegenerateTrial:
                r = math.inf
            local["n"] += 1
            local["best"] = min(local["best"], r)
            trace.append((k, local["n"], tuple(float(t) for t in theta), float(r), float(local["best"])))
            return r

        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"maxfev": budget, "xatol": 1e-3, "fatol": 1e-6},
        )
        per_restart.append(float(local["best"]))
        if res.fun < best[0]:
            best = (float(res.fun), tuple(float(t) for t in family.clip(res.x)))
    if not math.isfinite(best[0]):
        raise DegenerateTrial("all evaluations were degenerate")
    return OptimizationResult(best[1], best[0], trace, per_restart, target)
