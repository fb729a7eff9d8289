"""Scenario files: TOML with a fixed schema, validated before any integration.

A scenario names a frame, a fundamental solution, a domain, the quadrature
scheme and the work to do.  Unknown keys anywhere are errors, since a typo
in a parameter name would otherwise silently fall back to a default.

Layout::

    command = "hardy"                 # optional; must match the subcommand
    [frame]      name = "euclidean" | "heisenberg" | "nonsmooth_r3" | "custom"
    [solution]   name, pole, constant ("calibrate" or a number)
    [domain]     kind = "box" | "ball" | "gauge_ball", with lo/hi, center, radius
    [scheme]     order, refine, eps0, eps_levels, mc_samples, seed
    [check]      inequalities, alpha, R            (hardy, uncertainty, rellich, rellich-grad)
    [battery]    names, center, scale, functions
    [green]      pairs, tolerance
    [stokes]     fields, tolerance, stratified
    [representation]  u, points, tolerance
    [calibrate]  tolerance
    [sharpness]  inequality, alpha, budget, restarts, log10_min, tolerance
    [output]     dir, stem
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .inequalities import CHECKS, ParameterError, validate_parameters
from .quadrature import QuadratureScheme

COMMANDS = (
    "green",
    "stokes",
    "hardy",
    "uncertainty",
    "rellich",
    "rellich-grad",
    "representation",
    "calibrate",
    "sharpness",
)

# inequality families accepted by each battery command
COMMAND_FAMILY = {
    "hardy": "hardy",
    "uncertainty": "uncertainty",
    "rellich": "rellich",
    "rellich-grad": "rellich_gradient",
}

SCHEMA = {
    "command": None,
    "description": None,
    "frame": {"name", "n", "m", "N", "coefficients"},
    "solution": {"name", "n", "m", "pole", "constant"},
    "domain": {"kind", "lo", "hi", "center", "radius"},
    "scheme": {"order", "refine", "eps0", "eps_levels", "mc_samples", "seed"},
    "check": {"inequalities", "alpha", "R"},
    "battery": {"names", "center", "scale", "functions"},
    "green": {"pairs", "tolerance"},
    "stokes": {"fields", "tolerance", "stratified"},
    "representation": {"u", "points", "tolerance"},
    "calibrate": {"tolerance"},
    "sharpness": {"inequality", "alpha", "budget", "restarts", "log10_min", "tolerance"},
    "output": {"dir", "stem"},
}


class ConfigError(ValueError):
    pass


@dataclass
class Scenario:
    """A validated scenario; ``raw`` keeps the parsed tables."""

    command: Optional[str]
    raw: dict
    scheme: QuadratureScheme
    mc_samples: int = 1_000_000
    seed: int = 0
    out_dir: str = "out"
    stem: str = "scenario"
    source: Optional[str] = None

    def table(self, name: str) -> dict:
        return dict(self.raw.get(name, {}))

    def alphas(self) -> list:
        return alpha_grid(self.table("check").get("alpha", [0.0]))

    def inequalities(self) -> list:
        return list(self.table("check").get("inequalities", []))


def alpha_grid(grid) -> list:
    """A list of numbers, or a table {start, stop, step} with ``stop`` included."""
    if isinstance(grid, (int, float)):
        return [float(grid)]
    if isinstance(grid, list):
        return [float(a) for a in grid]
    if isinstance(grid, dict):
        extra = set(grid) - {"start", "stop", "step"}
        if extra:
            raise ConfigError(f"unknown keys in alpha grid: {sorted(extra)}")
        start, stop, step = float(grid["start"]), float(grid["stop"]), float(grid.get("step", 0.25))
        if step <= 0:
            raise ConfigError("alpha grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(max(count, 0))]
    raise ConfigError("alpha must be a number, a list or a {start, stop, step} table")


def _check_keys(raw: dict) -> None:
    for key, value in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        allowed = SCHEMA[key]
        if allowed is None:
            if isinstance(value, dict):
                raise ConfigError(f"{key!r} must be a value, not a table")
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"{key!r} must be a table")
        for sub in value:
            if sub not in allowed:
                raise ConfigError(f"unknown key {key}.{sub!r}")


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def bundled_scenarios() -> list:
    root = resources.files("subhardy") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def bundled_path(name: str) -> Path:
    root = resources.files("subhardy") / "scenarios"
    p = root / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"no bundled scenario {name!r}; available: {', '.join(bundled_scenarios())}")
    return Path(str(p))


def scheme_from(raw: dict, overrides: Optional[dict] = None) -> tuple:
    """(QuadratureScheme, mc_samples, seed) from the [scheme] table and CLI overrides."""
    s = dict(raw.get("scheme", {}))
    for k, v in (overrides or {}).items():
        if v is not None:
            s[k] = v
    try:
        scheme = QuadratureScheme(
            order=int(s.get("order", 8)),
            refinement=int(s.get("refine", 4)),
            eps0=float(s.get("eps0", 0.2)),
            eps_levels=int(s.get("eps_levels", 4)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    mc = int(s.get("mc_samples", 1_000_000))
    if mc < 10_000:
        raise ConfigError("mc_samples must be at least 10000")
    return scheme, mc, int(s.get("seed", 0))


def solution_beta(raw: dict) -> Optional[float]:
    sol = raw.get("solution")
    if not sol:
        return None
    name = sol.get("name")
    if name == "euclidean":
        return float(sol.get("n", len(sol.get("pole", [0, 0, 0]))))
    if name == "heisenberg":
        return float(2 * int(sol.get("m", 1)) + 2)
    raise ConfigError(f"unknown solution {name!r}; expected 'euclidean' or 'heisenberg'")


def validate(raw: dict, command: Optional[str] = None) -> None:
    """Structural and theorem-wedge validation; raises ConfigError or ParameterError."""
    _check_keys(raw)
    declared = raw.get("command")
    if declared is not None and declared not in COMMANDS:
        raise ConfigError(f"unknown command {declared!r}")
    if command is not None and declared is not None and command != declared:
        raise ConfigError(f"scenario is for {declared!r}, not {command!r}")
    cmd = command or declared
    scheme_from(raw)
    if "domain" in raw:
        kind = raw["domain"].get("kind")
        if kind not in ("box", "ball", "gauge_ball"):
            raise ConfigError(f"unknown domain kind {kind!r}")
    beta = solution_beta(raw)
    if cmd in COMMAND_FAMILY:
        if beta is None:
            raise ConfigError(f"{cmd} needs a [solution] table")
        names = raw.get("check", {}).get("inequalities")
        if not names:
            raise ConfigError("check.inequalities must list at least one inequality")
        for name in names:
            if CHECKS.get(name) != COMMAND_FAMILY[cmd]:
                raise ConfigError(f"inequality {name!r} does not belong to {cmd}")
        alphas = alpha_grid(raw.get("check", {}).get("alpha", [0.0]))
        if not alphas:
            raise ConfigError("empty alpha grid")
        for a in alphas:
            validate_parameters(COMMAND_FAMILY[cmd], a, beta)
        R = raw.get("check", {}).get("R", "auto")
        if R != "auto" and not isinstance(R, (int, float)):
            raise ConfigError("check.R must be a number or 'auto'")
    if cmd == "sharpness":
        sh = raw.get("sharpness", {})
        ineq = sh.get("inequality", "LH2a")
        if ineq not in ("LH2a", "LR2a"):
            raise ConfigError("sharpness.inequality must be LH2a or LR2a")
        if beta is None:
            raise ConfigError("sharpness needs a [solution] table")
        validate_parameters(CHECKS[ineq], float(sh.get("alpha", 0.0)), beta)
        if int(sh.get("budget", 60)) < 20:
            raise ConfigError("sharpness.budget must be at least 20")
    if cmd == "green" and not raw.get("green", {}).get("pairs"):
        raise ConfigError("green.pairs must list [u, v] expression pairs")
    if cmd == "stokes" and not raw.get("stokes", {}).get("fields"):
        raise ConfigError("stokes.fields must list expression sets")
    if cmd == "representation":
        rep = raw.get("representation", {})
        if "u" not in rep or "points" not in rep:
            raise ConfigError("representation needs u and points")


def load_scenario(source, command: Optional[str] = None, overrides: Optional[dict] = None) -> Scenario:
    """Load and validate a scenario from a path, a bundled name or a dict."""
    if isinstance(source, dict):
        raw, label = source, None
    else:
        p = Path(source)
        if not p.exists() and p.suffix != ".toml":
            p = bundled_path(str(source))
        try:
            raw = load_toml(p)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from None
        label = str(p)
    validate(raw, command)
    scheme, mc, seed = scheme_from(raw, overrides)
    out = raw.get("output", {})
    stem = out.get("stem") or (Path(label).stem if label else "scenario")
    return Scenario(
        command=command or raw.get("command"),
        raw=raw,
        scheme=scheme,
        mc_samples=mc,
        seed=seed,
        out_dir=out.get("dir", "out"),
        stem=stem,
        source=label,
    )


def with_overrides(sc: Scenario, overrides: dict) -> Scenario:
    scheme, mc, seed = scheme_from(sc.raw, overrides)
    return replace(sc, scheme=scheme, mc_samples=mc, seed=seed)


def as_point(v: Any, n: int, what: str) -> np.ndarray:
    p = np.asarray(v, dtype=float)
    if p.shape != (n,):
        raise ConfigError(f"{what} must have {n} coordinates")
    return p
