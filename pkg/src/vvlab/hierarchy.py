"""Column-by-column construction of the matched expansion.

Exponents of epsilon that occur form the lattice ``{0} U {1 + 2i/3 + j}``:
the upper layer shifts exponents by 1 (``v ~ eps u``) and the lower layer by
2/3.  For every exponent ``s`` up to the truncation order the construction
solves, in this order,

1. the outer term ``s`` with v-data taken from the two layers,
2. the upper layer ``s`` (after its pressure ``p[s]``), cancelling ``u_e^(s)`` at ``y = 1``,
3. the lower layer ``s`` (after its pressure ``p[s + 2/3]``), cancelling ``u_e^(s)`` at ``y = 0``,
4. the far-field correction: both layers are shifted to decay and the outer
   term receives the linear mean flow joining their far constants.

The leading column is the shear ``A y``, the von Mises layer and an empty
lower layer.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .euler import EulerCascade, EulerTerm, solve_harmonic_dirichlet
from .lower import lower_pressure, solve_lower_layer
from .prandtl import (
    VonMisesSolution,
    batchelor_constant,
    invert_von_mises,
    solve_upper_linear_bl,
    solve_von_mises,
    upper_pressure,
    v_from_continuity,
)
from .problem import ProblemSpec
from .series import TWO_THIRDS, HierarchyGap, LayerSeries
from .strip import StripField, box_continuity, quad_x

log = logging.getLogger(__name__)

KINDS = ("euler", "upper", "lower")


def lattice(m: float | Fraction) -> list[Fraction]:
    """Exponents ``s <= m`` of the expansion: 0 and ``1 + 2i/3 + j``."""
    m = Fraction(m).limit_denominator(3) if not isinstance(m, Fraction) else m
    out = {Fraction(0)} if m >= 0 else set()
    i = 0
    while 1 + TWO_THIRDS * i <= m:
        j = 0
        while 1 + TWO_THIRDS * i + j <= m:
            out.add(1 + TWO_THIRDS * i + j)
            j += 1
        i += 1
    return sorted(out)


def next_exponent(m: float | Fraction) -> Fraction:
    """Smallest lattice exponent above the truncation order."""
    m = Fraction(m)
    top = m + 2
    return next(s for s in lattice(top) if s > m)


@dataclass
class HierarchyEntry:
    """One term of the expansion with the outcome of its invariant checks."""

    exponent: Fraction
    kind: str
    far_constant: float = 0.0
    checks: dict[str, float] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def label(self) -> str:
        return f"{self.kind}-{self.exponent}"


@dataclass
class ExpansionHierarchy:
    """All terms up to a truncation order, with the layer series used to build them."""

    spec: ProblemSpec
    order: Fraction
    A: float
    von_mises: VonMisesSolution | None
    cascade: EulerCascade
    upper: LayerSeries
    lower: LayerSeries
    entries: list[HierarchyEntry] = field(default_factory=list)

    @property
    def exponents(self) -> list[Fraction]:
        return lattice(self.order)

    @property
    def corrector_exponent(self) -> Fraction:
        return next_exponent(self.order)

    def entry(self, kind: str, s: Fraction) -> HierarchyEntry:
        for e in self.entries:
            if e.kind == kind and e.exponent == Fraction(s):
                return e
        raise HierarchyGap(f"{kind}-{s}")

    def far_constants(self) -> dict[str, float]:
        return {e.label: e.far_constant for e in self.entries if e.kind != "euler"}

    def all_checks(self) -> dict[str, dict[str, float]]:
        return {e.label: dict(e.checks) for e in self.entries}

    def truncated(self, m: float | Fraction) -> "ExpansionHierarchy":
        """View of the same terms cut at a lower order (the terms are shared, not copied)."""
        m = Fraction(m).limit_denominator(3)
        if m > self.order:
            raise ValueError(f"order {m} exceeds the built order {self.order}")
        return replace(self, order=m)

    def is_trivial(self, tol: float = 0.0) -> bool:
        """True when every layer term vanishes identically (up to ``tol``)."""
        for store in (self.upper.u, self.upper.v, self.upper.p, self.lower.u, self.lower.v, self.lower.p):
            for f in store.values():
                if f.max_abs() > tol:
                    return False
        return True


def _layer_checks(u: StripField, v: StripField, wall_total: np.ndarray, side: str) -> dict[str, float]:
    grid = u.grid
    cont = box_continuity(u, v)
    n = len(grid)
    m = max(2, n // 10)
    far = slice(0, m) if side == "upper" else slice(n - m, n)
    wall = -1 if side == "upper" else 0
    return {
        "continuity": float(np.max(np.abs(cont))),
        "mean_zero_v": float(np.max(np.abs(quad_x(v.physical)))),
        "wall_condition": float(np.max(np.abs(u.physical[:, wall] + wall_total))),
        "far_u": float(np.max(np.abs(u.physical[:, far]))),
        "far_v": float(np.max(np.abs(v.physical[:, far]))),
    }


def _euler_checks(cascade: EulerCascade, s: Fraction, n_y: int = 65) -> dict[str, float]:
    y = np.linspace(0.0, 1.0, n_y)
    return cascade.invariants(s, y)


def build_hierarchy(spec: ProblemSpec, order: float | Fraction = 1, rtol: float = 1e-12) -> ExpansionHierarchy:
    """Build every term with exponent up to ``order``."""
    order = Fraction(order).limit_denominator(3)
    if order < 0 or order > 3:
        raise ValueError("truncation order must lie in [0, 3]")
    disc = spec.disc
    n_x = disc.n_x
    if spec.max_mode > n_x // 4:
        raise ValueError("wall data must be band-limited to N_x/4")
    zeta, eta = disc.zeta_grid(), disc.eta_grid()
    t0 = time.perf_counter()
    A = batchelor_constant(spec).A
    cascade = EulerCascade(A, n_x)
    upper = LayerSeries("upper", cascade, zeta)
    lower = LayerSeries("lower", cascade, eta)
    vm = solve_von_mises(spec)
    u0 = invert_von_mises(vm, zeta)
    v1 = v_from_continuity(u0)
    upper.u[Fraction(0)] = u0
    upper.v[Fraction(1)] = v1
    upper.p[Fraction(1)] = StripField.zeros(zeta, n_x, name="p_p^(1)", exponent=1.0)
    lower.u[Fraction(0)] = StripField.zeros(eta, n_x, name="u_hat^(0)", exponent=0.0)
    lower.v[TWO_THIRDS] = StripField.zeros(eta, n_x, name="v_hat^(2/3)", exponent=2 / 3)
    lower.p[TWO_THIRDS] = StripField.zeros(eta, n_x, name="p_hat^(2/3)", exponent=2 / 3)
    wall_x = spec.wall(disc.x_grid().nodes)
    h = ExpansionHierarchy(spec, order, A, vm, cascade, upper, lower)
    h.entries.append(HierarchyEntry(Fraction(0), "euler", 0.0, _euler_checks(cascade, Fraction(0))))
    h.entries.append(HierarchyEntry(Fraction(0), "upper", 0.0, _layer_checks(u0, v1, A - wall_x, "upper"),
                                    time.perf_counter() - t0))
    h.entries[-1].checks["batchelor_wood"] = vm.batchelor_wood_defect()
    h.entries.append(HierarchyEntry(Fraction(0), "lower", 0.0,
                                    _layer_checks(lower.u[Fraction(0)], lower.v[TWO_THIRDS], np.zeros(n_x), "lower")))

    for s in lattice(order)[1:]:
        _solve_column(h, s, rtol)
    _complete_pressures(h)
    return h


def _solve_column(h: ExpansionHierarchy, s: Fraction, rtol: float) -> None:
    cascade, upper, lower = h.cascade, h.upper, h.lower
    n_x = cascade.n_x
    zero = np.zeros(n_x)
    t0 = time.perf_counter()

    # 1. outer term
    top = -upper.v[s].physical[:, -1] if s in upper.v else zero
    bottom = -lower.v[s].physical[:, 0] if s in lower.v else zero
    term = solve_harmonic_dirichlet(top, bottom, s)
    cascade.terms[s] = term
    upper.invalidate()
    lower.invalidate()
    e_entry = HierarchyEntry(s, "euler", 0.0, seconds=time.perf_counter() - t0)
    h.entries.append(e_entry)

    # 2. upper layer
    t1 = time.perf_counter()
    if s not in upper.p:
        upper.p[s] = upper_pressure(upper.pressure_source(s), upper.grid)
        upper.p[s] = upper.p[s].with_modes(upper.p[s].modes, name=f"p_p^({s})", exponent=float(s))
        upper.invalidate()
    if Fraction(1) not in cascade.terms:
        raise HierarchyGap("euler-1")
    ubar = h.A + upper.u[Fraction(0)].physical
    vbar = cascade.terms[Fraction(1)].v(np.array([1.0]))[:, 0][:, None] + upper.v[Fraction(1)].physical
    f_up = upper.forcing(s)
    wall_up = -term.u(np.array([1.0]))[:, 0]
    layer = solve_upper_linear_bl(ubar, vbar, f_up, wall_up, upper.grid, float(s), rtol=rtol)
    upper.u[s] = layer.u
    upper.v[s + 1] = layer.v.with_modes(layer.v.modes, name=f"v_p^({s + 1})", exponent=float(s + 1))
    upper.invalidate()
    u_entry = HierarchyEntry(s, "upper", layer.far_constant, seconds=time.perf_counter() - t1)
    u_entry.checks["gmres_products"] = float(layer.gmres_iterations)
    h.entries.append(u_entry)

    # 3. lower layer
    t2 = time.perf_counter()
    r = s + TWO_THIRDS
    if r not in lower.p:
        p = lower_pressure(lower.pressure_source(r), lower.grid)
        lower.p[r] = p.with_modes(p.modes, name=f"p_hat^({r})", exponent=float(r))
        lower.invalidate()
    f_lo = lower.forcing(s)
    wall_lo = -term.u(np.array([0.0]))[:, 0]
    low = solve_lower_layer(f_lo, wall_lo, h.A, lower.grid, float(s))
    lower.u[s] = low.u
    lower.v[r] = low.v.with_modes(low.v.modes, name=f"v_hat^({r})", exponent=float(r))
    lower.invalidate()
    l_entry = HierarchyEntry(s, "lower", low.far_constant, seconds=time.perf_counter() - t2)
    h.entries.append(l_entry)

    # 4. far-field correction
    a_top, a_bot = layer.far_constant, low.far_constant
    cascade.terms[s] = term.corrected(a_top, a_bot)
    for series, c in ((upper, a_top), (lower, a_bot)):
        f = series.u[s]
        modes = f.modes.copy()
        modes[0] -= c
        series.u[s] = f.with_modes(modes, far_constant=0.0)
        series.invalidate()
    corrected = cascade.terms[s]
    e_entry.checks = _euler_checks(cascade, s)
    e_entry.checks["shift_top"] = a_top
    e_entry.checks["shift_bottom"] = a_bot
    u_entry.checks.update(_layer_checks(upper.u[s], upper.v[s + 1], corrected.u(np.array([1.0]))[:, 0], "upper"))
    l_entry.checks.update(_layer_checks(lower.u[s], lower.v[r], corrected.u(np.array([0.0]))[:, 0], "lower"))
    log.info("column %s: A_s=%.3e, A_hat_s=%.3e", s, a_top, a_bot)


def _complete_pressures(h: ExpansionHierarchy) -> None:
    """Pressure partners of the last layer terms, from the terms that are present."""
    up = h.upper
    for s in list(up.u):
        if s + 1 not in up.p:
            p = upper_pressure(up.pressure_source(s + 1), up.grid)
            up.p[s + 1] = p.with_modes(p.modes, name=f"p_p^({s + 1})", exponent=float(s + 1))
            up.invalidate()
