"""Property suites behind ``vvlab verify``.

Each suite returns a :class:`SuiteResult` holding named checks with their
measured value and the tolerance it is held to.  ``inject`` names suites
whose input is perturbed by a seeded disturbance; it exists so tests can
confirm that every suite is able to fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import Polynomial

from .config import RunConfig
from .euler import check_shear_selection
from .hierarchy import ExpansionHierarchy, _layer_checks, build_hierarchy
from .prandtl import batchelor_closed_form, batchelor_constant
from .problem import ProblemSpec
from .strip import Grid1D, StripField, ddy, hardy_check

SCHEMA = "vvlab.verify/1"

#: Frozen constant of the anisotropic embedding ``||u||_inf <= C (||u_x|| + ||u_y|| + ||u_xy||)``.
EMBEDDING_C = 1.0

#: Tolerances for the per-term invariant checks of the expansion.
TERM_TOLERANCES = {
    "continuity": 1e-10,
    "mean_zero_v": 1e-10,
    "wall_condition": 1e-12,
    "far_u": 1e-4,
    "far_v": 1e-4,
    "batchelor_wood": 1e-6,
    "divergence": 1e-10,
    "harmonic_u": 1e-10,
    "harmonic_v": 1e-10,
    "mean_v": 1e-12,
    "compatibility": 1e-12,
    "momentum_x": 1e-9,
    "momentum_y": 1e-9,
}

SUITES = ("hardy", "embedding", "batchelor_wood", "hierarchy", "shear_selection")


@dataclass
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def as_dict(self) -> dict:
        return {"name": self.name, "value": float(self.value), "tolerance": float(self.tolerance),
                "passed": self.passed}


@dataclass
class SuiteResult:
    name: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: float, tol: float) -> None:
        self.checks.append(Check(name, float(value), float(tol)))

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "checks": [c.as_dict() for c in self.checks]}


# ---------------------------------------------------------------------------
# random admissible inputs
# ---------------------------------------------------------------------------

def random_hardy_profile(rng: np.random.Generator, variant: str, degree: int = 6) -> Polynomial:
    """Random polynomial with the boundary zeros a Hardy variant needs."""
    core = Polynomial(rng.normal(size=rng.integers(1, degree + 1)))
    factor = Polynomial([1.0, -1.0]) if variant == "hardy1" else Polynomial([0.0, 1.0, -1.0])
    return core * factor


def random_wall_zero_field(rng: np.random.Generator, grid: Grid1D, n_x: int,
                           max_n: int = 6, max_k: int = 5) -> StripField:
    """Random trigonometric field vanishing at ``y = 0`` and ``y = 1``."""
    x = 2 * np.pi * np.arange(n_x) / n_x
    y = grid.nodes
    u = np.zeros((n_x, len(y)))
    for n in range(rng.integers(0, max_n + 1) + 1):
        for k in range(1, rng.integers(1, max_k + 1) + 1):
            a, b = rng.normal(size=2) / (1 + n + k)
            u += (a * np.cos(n * x) + b * np.sin(n * x))[:, None] * np.sin(k * np.pi * y)[None, :]
    return StripField.from_physical(u, grid, name="random")


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def hardy_suite(cfg: RunConfig, injected: bool = False, n_y: int = 2000) -> SuiteResult:
    """``lhs/rhs <= 1`` for random admissible polynomials, every variant and weight exponent."""
    rng = np.random.default_rng(cfg.seed)
    grid = Grid1D.interval_y(n_y)
    y = grid.nodes
    res = SuiteResult("hardy")
    cases = [("hardy1", k) for k in cfg.kappas] + [("hardy2-lower", 0.0), ("hardy2-upper", 0.0)]
    for variant, kappa in cases:
        worst = 0.0
        for _ in range(cfg.samples):
            p = random_hardy_profile(rng, variant)
            f, df = p(y), p.deriv()(y)
            if injected:
                # shift the profile off its boundary zeros; the derivative is unchanged
                _, rhs0 = hardy_check(f, grid, kappa, variant, df=df)
                f = f + 10.0 * (1.0 + np.max(np.abs(f)) + np.sqrt(rhs0))
            lhs, rhs = hardy_check(f, grid, kappa, variant, df=df, atol=np.inf if injected else 1e-12)
            worst = max(worst, lhs / rhs if rhs > 0 else (np.inf if lhs > 0 else 0.0))
        res.add(f"{variant}[kappa={kappa:g}] max lhs/rhs", worst, 1.0)
    return res


def embedding_suite(cfg: RunConfig, injected: bool = False) -> SuiteResult:
    from .ns import sobolev_embedding_check

    rng = np.random.default_rng(cfg.seed + 1)
    grid = Grid1D.interval_y(256)
    worst = 0.0
    for _ in range(cfg.samples):
        u = random_wall_zero_field(rng, grid, 32)
        if injected:
            # a constant offset leaves every derivative unchanged but breaks the wall zeros
            modes = u.modes.copy()
            modes[0] += 10.0 * (1.0 + u.max_abs())
            u = u.with_modes(modes)
        lhs, rhs = sobolev_embedding_check(u, wall_tol=np.inf if injected else 1e-12)
        worst = max(worst, lhs / rhs)
    res = SuiteResult("embedding")
    res.add(f"max ||u||_inf/(||u_x||+||u_y||+||u_xy||) (frozen C={EMBEDDING_C:g})", worst, EMBEDDING_C)
    return res


def batchelor_suite(cfg: RunConfig, injected: bool = False,
                    hierarchies: dict[float, ExpansionHierarchy] | None = None) -> SuiteResult:
    res = SuiteResult("batchelor_wood")
    for d in _deltas(cfg):
        spec = cfg.spec(d)
        if injected:
            # quadrature fed a slightly wrong wall speed
            rng = np.random.default_rng(cfg.seed + 4)
            spec_q = ProblemSpec(spec.alpha * (1 + 1e-6 * rng.uniform(1, 2)), d, spec.f_modes, spec.disc)
        else:
            spec_q = spec
        A = batchelor_constant(spec_q).A
        res.add(f"|A - closed form| (delta={d:g})", abs(A - batchelor_closed_form(spec)), 1e-10)
        h = (hierarchies or {}).get(d)
        if h is not None and h.von_mises is not None:
            res.add(f"max_psi |d_psi int U^2 dx| (delta={d:g})", h.von_mises.batchelor_wood_defect(),
                    TERM_TOLERANCES["batchelor_wood"])
    return res


def hierarchy_suite(cfg: RunConfig, injected: bool = False,
                    hierarchies: dict[float, ExpansionHierarchy] | None = None) -> SuiteResult:
    """Every invariant of every expansion term, worst case per check name and delta."""
    res = SuiteResult("hierarchy")
    for d in _deltas(cfg):
        h = hierarchies[d]
        worst: dict[str, tuple[float, str]] = {}
        for label, checks in h.all_checks().items():
            for name, val in checks.items():
                if name not in TERM_TOLERANCES:
                    continue
                if abs(val) >= worst.get(name, (-1.0, ""))[0]:
                    worst[name] = (abs(val), label)
        if injected:
            # seeded noise on the first upper u-layer breaks its continuity balance
            rng = np.random.default_rng(cfg.seed + 2)
            u1, v2 = h.upper.u[Fraction(1)], h.upper.v[Fraction(2)]
            noisy = StripField.from_physical(u1.physical + 1e-6 * rng.normal(size=u1.physical.shape), u1.grid)
            wall = -h.cascade.terms[Fraction(1)].u(np.array([1.0]))[:, 0]
            for name, val in _layer_checks(noisy, v2, wall, "upper").items():
                if val >= worst.get(name, (-1.0, ""))[0]:
                    worst[name] = (val, "upper-1 (perturbed)")
        for name in sorted(worst):
            val, label = worst[name]
            res.add(f"{name} (delta={d:g}, worst {label})", val, TERM_TOLERANCES[name])
    return res


def shear_selection_suite(cfg: RunConfig, injected: bool = False,
                          hierarchies: dict[float, ExpansionHierarchy] | None = None) -> SuiteResult:
    res = SuiteResult("shear_selection")
    y = np.linspace(0.0, 1.0, 201)
    for d in _deltas(cfg):
        h = hierarchies[d]
        term = h.cascade.terms.get(Fraction(1))
        if term is None:
            continue
        if injected:
            # an in-phase distortion of u_e^(1) that is not harmonic
            rng = np.random.default_rng(cfg.seed + 3)
            x = 2 * np.pi * np.arange(term.n_x) / term.n_x
            bump = 1e-3 * rng.uniform(0.5, 1.5) * np.outer(np.cos(x) + np.sin(x), y**2)
            uy = term.u(y, 1) + ddy(bump, Grid1D.interval_y(len(y) - 1))
            val = float(np.max(np.abs(2 * np.pi * np.mean(term.v(y) * uy, axis=0))))
        else:
            val = check_shear_selection(term, term, y)
        res.add(f"max_y |int v_e^(1) d_y u_e^(1) dx| (delta={d:g})", val, 1e-8)
    return res


def _deltas(cfg: RunConfig) -> list[float]:
    return sorted(set(cfg.verify_deltas) | {cfg.delta})


def build_verify_hierarchies(cfg: RunConfig) -> dict[float, ExpansionHierarchy]:
    order = max(cfg.order, Fraction(1))
    return {d: build_hierarchy(cfg.spec(d), order, rtol=min(cfg.gmres_rtol, 1e-10)) for d in _deltas(cfg)}


def run_verify(cfg: RunConfig, inject: frozenset[str] | set[str] = frozenset(),
               hierarchies: dict[float, ExpansionHierarchy] | None = None) -> dict:
    """Run every suite and return the report dictionary (see ``docs/verify-report.md``)."""
    unknown = set(inject) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites: {sorted(unknown)}")
    if hierarchies is None:
        hierarchies = build_verify_hierarchies(cfg)
    suites = [
        hardy_suite(cfg, "hardy" in inject),
        embedding_suite(cfg, "embedding" in inject),
        batchelor_suite(cfg, "batchelor_wood" in inject, hierarchies),
        hierarchy_suite(cfg, "hierarchy" in inject, hierarchies),
        shear_selection_suite(cfg, "shear_selection" in inject, hierarchies),
    ]
    return {
        "schema": SCHEMA,
        "config_hash": cfg.hash,
        "seed": cfg.seed,
        "passed": all(s.passed for s in suites),
        "suites": [s.as_dict() for s in suites],
    }


def validate_report(report: dict) -> list[str]:
    """Structural check against the documented report schema; returns the problems found."""
    errs = []
    if report.get("schema") != SCHEMA:
        errs.append("schema tag missing or wrong")
    for key, typ in (("config_hash", str), ("seed", int), ("passed", bool), ("suites", list)):
        if not isinstance(report.get(key), typ):
            errs.append(f"{key} missing or not {typ.__name__}")
    for s in report.get("suites", []):
        if not isinstance(s.get("name"), str) or s["name"] not in SUITES:
            errs.append(f"bad suite name {s.get('name')!r}")
        if not isinstance(s.get("passed"), bool):
            errs.append("suite.passed must be a boolean")
        for c in s.get("checks", []):
            for key, typ in (("name", str), ("value", (int, float, str)), ("tolerance", (int, float)),
                             ("passed", bool)):
                if not isinstance(c.get(key), typ):
                    errs.append(f"check field {key} missing or mistyped in suite {s.get('name')}")
        if isinstance(s.get("passed"), bool) and s["passed"] != all(c.get("passed") for c in s.get("checks", [])):
            errs.append(f"suite {s.get('name')} pass flag disagrees with its checks")
    if isinstance(report.get("passed"), bool) and report["passed"] != all(s.get("passed") for s in report.get("suites", [])):
        errs.append("top-level pass flag disagrees with the suites")
    return errs
