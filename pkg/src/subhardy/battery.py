"""The fixed battery of twelve test functions.

Functions are written in rescaled coordinates xh = (x - center) / scale and
built with sympy, so they carry exact first and second derivatives.  The
set mixes functions that vanish on the unit sphere |xh| = 1 (C^2 polynomial
bumps) with ones that do not, so that boundary terms are exercised.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import sympy as sp

from .fields import ScalarField

BATTERY_VERSION = 1

NAMES = (
    "one",
    "affine",
    "quadratic",
    "gauss",
    "gauss_shift",
    "bump",
    "bump_shift",
    "poly_bump",
    "bump_product",
    "gauss_bump",
    "wave",
    "radial_zero",
)


def _bump(r2):
    """(1 - r2)^3 inside the unit ball, 0 outside: C^2 across the sphere."""
    return sp.Piecewise(((1 - r2) ** 3, r2 < 1), (0, True))


def battery_expressions(n: int, center=None, scale: float = 1.0):
    """Sympy expressions of the battery and their symbols ``x1..xn``."""
    xs = sp.symbols(f"x1:{n + 1}", real=True)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    L = sp.Float(scale)
    h = [(xs[i] - sp.Float(c[i])) / L for i in range(n)]
    r2 = sum(v * v for v in h)

    def shifted(offsets):
        return sum((h[i] - sp.Float(offsets.get(i, 0.0))) ** 2 for i in range(n))

    last = n - 1
    exprs = {
        "one": sp.Integer(1),
        "affine": 1 + h[0] / 2 - h[1] / 3,
        "quadratic": 1 + h[0] ** 2 - h[1] * h[last] / 2,
        "gauss": sp.exp(-2 * r2),
        "gauss_shift": sp.exp(-3 * shifted({0: 0.3, 1: -0.2})),
        "bump": _bump(r2),
        "bump_shift": _bump(shifted({0: 0.25}) / sp.Float(0.5)),
        "poly_bump": (h[0] + h[1] ** 2) * _bump(r2),
        "bump_product": _bump(shifted({0: 0.2}) / sp.Float(0.7)) * _bump(shifted({1: -0.2}) / sp.Float(0.7)),
        "gauss_bump": sp.exp(-4 * shifted({i: 0.1 for i in range(n)})) * _bump(r2),
        "wave": sp.cos(sp.pi * h[0] / 2) + h[1] / 2,
        "radial_zero": r2 * sp.exp(-r2),
    }
    return [(name, exprs[name]) for name in NAMES], xs


def standard_battery(n: int, center=None, scale: float = 1.0, names: Optional[list] = None):
    """The twelve battery functions as exact ScalarFields.

    Parameters
    ----------
    n : int
        Ambient dimension.
    center, scale : optional
        Affine rescaling; bumps are supported in the ball of radius ``scale``
        around ``center`` in the coordinate norm.
    names : list of str, optional
        Subset selection by name.
    """
    exprs, xs = battery_expressions(n, center, scale)
    out = []
    for name, e in exprs:
        if names is not None and name not in names:
            continue
        out.append(ScalarField.from_sympy(e, xs, name=name))
    if names is not None:
        missing = set(names) - {f.name for f in out}
        if missing:
            raise KeyError(f"unknown battery functions: {sorted(missing)}")
    return out


COMPACT = ("bump", "bump_shift", "poly_bump", "bump_product", "gauss_bump")
