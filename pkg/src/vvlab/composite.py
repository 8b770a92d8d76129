"""Composite approximate solution on the strip.

The outer sum is glued to the two layer sums with a cutoff ``chi`` that
equals 1 near the bottom wall and 0 near the top wall:

    ``u^a = u_e + (1 - chi)^2 u_p + chi^2 u_hat + eps^q h``

and the same weights for v, while the pressure uses ``(1 - chi)^4`` and
``chi^4``.  The cutoff spoils the divergence only where ``chi' != 0``; the
corrector ``h`` is the zero-mean x-antiderivative of that defect, which
makes the composite exactly divergence-free.

All y-derivatives are taken analytically from the pieces: outer terms are
closed-form, layer terms carry finite-difference derivatives on their
native grids interpolated with cubic splines, and the cutoff is a
polynomial.  The residual of the Navier-Stokes equations is assembled from
that derivative data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.interpolate import CubicSpline

from .hierarchy import ExpansionHierarchy, lattice, next_exponent
from .series import TWO_THIRDS
from .strip import (
    Grid1D,
    GridError,
    StripField,
    antiderivative_x,
    ddx,
    ddy,
    dft_forward,
    quad_x,
    quad_y,
)


class CompositeError(ValueError):
    """The composite cannot be assembled for the requested parameters."""


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

# 1 - smoothstep of degree 7: 1 - (35 t^4 - 84 t^5 + 70 t^6 - 20 t^7)
_SMOOTH = np.polynomial.Polynomial([0, 0, 0, 0, 35, -84, 70, -20])


@dataclass(frozen=True)
class Cutoff:
    """``chi = 1`` on ``[0, lo]``, ``chi = 0`` on ``[hi, 1]``, degree-7 polynomial in between."""

    lo: float = 0.25
    hi: float = 0.75

    def __post_init__(self) -> None:
        if not 0 < self.lo < self.hi < 1:
            raise ValueError("cutoff needs 0 < lo < hi < 1")

    def __call__(self, y: np.ndarray, deriv: int = 0) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        w = self.hi - self.lo
        t = np.clip((y - self.lo) / w, 0.0, 1.0)
        inside = (y > self.lo) & (y < self.hi)
        if deriv == 0:
            return 1.0 - _SMOOTH(t)
        val = -_SMOOTH.deriv(deriv)(t) / w**deriv
        return np.where(inside, val, 0.0)

    def power(self, y: np.ndarray, k: int, deriv: int, complement: bool = False) -> np.ndarray:
        """Derivative ``d^deriv/dy^deriv`` of ``chi^k`` (or ``(1 - chi)^k``), ``deriv <= 3``."""
        c = [self(y, d) for d in range(4)]
        if complement:
            c = [1.0 - c[0]] + [-ci for ci in c[1:]]
        g0, g1, g2, g3 = c
        if deriv == 0:
            return g0**k
        if deriv == 1:
            return k * g0 ** (k - 1) * g1
        if deriv == 2:
            return k * (k - 1) * g0 ** max(k - 2, 0) * g1**2 + k * g0 ** (k - 1) * g2
        if deriv == 3:
            return (k * (k - 1) * (k - 2) * g0 ** max(k - 3, 0) * g1**3
                    + 3 * k * (k - 1) * g0 ** max(k - 2, 0) * g1 * g2 + k * g0 ** (k - 1) * g3)
        raise ValueError("derivatives up to third order are provided")


# ---------------------------------------------------------------------------
# layer sums
# ---------------------------------------------------------------------------

@dataclass
class _LayerSum:
    """A layer sum and its stretched-coordinate derivatives on the strip points."""

    u: np.ndarray
    u_c: np.ndarray
    u_cc: np.ndarray
    v: np.ndarray
    p: np.ndarray
    p_c: np.ndarray


def _interp(values: np.ndarray, nodes: np.ndarray, points: np.ndarray, active: np.ndarray) -> np.ndarray:
    out = np.zeros((values.shape[0], len(points)))
    if np.any(active):
        out[:, active] = CubicSpline(nodes, values, axis=1)(points[active])
    return out


def _layer_sum(h: ExpansionHierarchy, side: str, eps: float, y: np.ndarray, weight: np.ndarray) -> _LayerSum:
    series = h.upper if side == "upper" else h.lower
    step = Fraction(1) if side == "upper" else TWO_THIRDS
    grid = series.grid
    m = h.order
    exps = [s for s in lattice(m) if s in series.u]
    n_x = h.cascade.n_x
    n = len(grid)
    U = np.zeros((n_x, n))
    V = np.zeros((n_x, n))
    P = np.zeros((n_x, n))
    wall = -1 if side == "upper" else 0
    for s in exps:
        U += eps ** float(s) * series.u[s].physical
        r = s + step
        if r in series.v:
            v = series.v[r].physical
            if r not in lattice(m):
                v = v - v[:, wall : wall + 1 if wall != -1 else None]
            V += eps ** float(r) * v
        if r in series.p:
            P += eps ** float(r) * series.p[r].physical
    scale = eps if side == "upper" else eps ** (2 / 3)
    coord = (y - 1.0) / scale if side == "upper" else y / scale
    active = weight > 0
    lo, hi = grid.nodes[0], grid.nodes[-1]
    if np.any(active & ((coord < lo - 1e-12) | (coord > hi + 1e-12))):
        raise CompositeError(
            f"{side} layer grid [{lo:g}, {hi:g}] is too short for eps={eps:g}; enlarge the truncation bound")
    coord = np.clip(coord, lo, hi)
    Uc = ddy(U, grid)
    Ucc = ddy(U, grid, 2)
    Pc = ddy(P, grid)
    nodes = grid.nodes
    return _LayerSum(
        _interp(U, nodes, coord, active), _interp(Uc, nodes, coord, active),
        _interp(Ucc, nodes, coord, active), _interp(V, nodes, coord, active),
        _interp(P, nodes, coord, active), _interp(Pc, nodes, coord, active),
    )


# ---------------------------------------------------------------------------
# composite
# ---------------------------------------------------------------------------

@dataclass
class CompositeSolution:
    """Assembled approximate solution on a y-grid, with derivative data.

    ``d`` maps names like ``"u_y"`` or ``"p_x"`` to physical arrays of shape
    ``(N_x, N_y + 1)``.
    """

    eps: float
    order: Fraction
    q: Fraction
    grid: Grid1D
    u: StripField
    v: StripField
    p: StripField
    h: StripField
    K: StripField
    d: dict[str, np.ndarray] = field(default_factory=dict)
    R_u: StripField | None = None
    R_v: StripField | None = None

    @property
    def n_x(self) -> int:
        return self.u.n_x

    def divergence(self) -> np.ndarray:
        return self.d["u_x"] + self.d["v_y"]


def assemble_composite(h: ExpansionHierarchy, eps: float, grid: Grid1D | None = None,
                       cutoff: Cutoff | None = None, with_corrector: bool = True) -> CompositeSolution:
    """Composite ``(u^a, v^a, p^a)`` of the hierarchy at viscosity ``eps^2``."""
    if not 0 < eps < 1:
        raise CompositeError("eps must lie in (0, 1)")
    grid = grid or h.spec.disc.y_grid()
    cutoff = cutoff or Cutoff()
    y = grid.nodes
    n_x = h.cascade.n_x
    m = h.order
    q = next_exponent(m)
    eq = eps ** float(q)

    # outer sum
    uE = np.zeros((n_x, len(y)))
    uEy = np.zeros_like(uE)
    uEyy = np.zeros_like(uE)
    vE = np.zeros_like(uE)
    vEy = np.zeros_like(uE)
    vEyy = np.zeros_like(uE)
    pE = np.zeros_like(uE)
    pEy = np.zeros_like(uE)
    for s in lattice(m):
        t = h.cascade.terms[s]
        w = eps ** float(s)
        uE += w * t.u(y)
        uEy += w * t.u(y, 1)
        uEyy += w * t.u(y, 2)
        vE += w * t.v(y)
        vEy += w * t.v(y, 1)
        vEyy += w * t.v(y, 2)
        if s > 0:
            p, py = h.cascade.pressure(s, y)
            pE += w * p
            pEy += w * py

    W = [cutoff.power(y, 2, d, complement=True)[None, :] for d in range(4)]
    X = [cutoff.power(y, 2, d)[None, :] for d in range(4)]
    W4 = [cutoff.power(y, 4, d, complement=True)[None, :] for d in range(2)]
    X4 = [cutoff.power(y, 4, d)[None, :] for d in range(2)]
    up = _layer_sum(h, "upper", eps, y, W[0][0])
    lo = _layer_sum(h, "lower", eps, y, X[0][0])
    iu, il = 1.0 / eps, eps ** (-2 / 3)

    Ux, Ucx, Lx, Lcx = ddx(up.u), ddx(up.u_c), ddx(lo.u), ddx(lo.u_c)
    u = uE + W[0] * up.u + X[0] * lo.u
    u_y = uEy + W[1] * up.u + W[0] * iu * up.u_c + X[1] * lo.u + X[0] * il * lo.u_c
    u_yy = (uEyy + W[2] * up.u + 2 * W[1] * iu * up.u_c + W[0] * iu**2 * up.u_cc
            + X[2] * lo.u + 2 * X[1] * il * lo.u_c + X[0] * il**2 * lo.u_cc)
    v = vE + W[0] * up.v + X[0] * lo.v
    v_y = vEy + W[1] * up.v - W[0] * Ux + X[1] * lo.v - X[0] * Lx
    v_yy = (vEyy + W[2] * up.v - 2 * W[1] * Ux - W[0] * iu * Ucx
            + X[2] * lo.v - 2 * X[1] * Lx - X[0] * il * Lcx)
    p = pE + W4[0] * up.p + X4[0] * lo.p
    p_y = pEy + W4[1] * up.p + W4[0] * iu * up.p_c + X4[1] * lo.p + X4[0] * il * lo.p_c

    # divergence mismatch and its corrector
    K = -(W[1] * up.v + X[1] * lo.v) / eq
    K_y = -(W[2] * up.v - W[1] * Ux + X[2] * lo.v - X[1] * Lx) / eq
    K_yy = -(W[3] * up.v - 2 * W[2] * Ux - W[1] * iu * Ucx
             + X[3] * lo.v - 2 * X[2] * Lx - X[1] * il * Lcx) / eq
    mean_K = np.max(np.abs(np.mean(K, axis=0)))
    if mean_K > 1e-9 * max(1.0, float(np.max(np.abs(K)))):
        raise CompositeError(f"divergence mismatch has nonzero x-mean {mean_K:.3e}")
    hh, h_y, h_yy = (antiderivative_x(a) for a in (K, K_y, K_yy))
    if with_corrector:
        u = u + eq * hh
        u_y = u_y + eq * h_y
        u_yy = u_yy + eq * h_yy

    d = {
        "u": u, "u_y": u_y, "u_yy": u_yy, "u_x": ddx(u), "u_xx": ddx(u, 2), "u_xy": ddx(u_y),
        "v": v, "v_y": v_y, "v_yy": v_yy, "v_x": ddx(v), "v_xx": ddx(v, 2), "v_xy": ddx(v_y),
        "p": p, "p_x": ddx(p), "p_y": p_y,
    }
    mk = lambda a, name: StripField.from_physical(a, grid, name=name)
    return CompositeSolution(eps, m, q, grid, mk(u, "u^a"), mk(v, "v^a"), mk(p, "p^a"),
                             mk(hh, "h"), mk(K, "K"), d)


def mismatch_K(comp: CompositeSolution) -> StripField:
    """Divergence defect of the cut-off sum, scaled by ``eps^-q``."""
    return comp.K


def corrector_h(K: StripField, mean_tol: float = 1e-10) -> StripField:
    """Zero-mean x-antiderivative ``h_n = K_n/(i n)`` of a zero-mean field."""
    scale = max(1.0, K.max_abs())
    if np.max(np.abs(K.modes[0])) > mean_tol * scale:
        raise CompositeError("K must have zero x-mean")
    return StripField.from_physical(antiderivative_x(K.physical), K.grid, name="h")


@dataclass(frozen=True)
class ResidualReport:
    l2_u: float
    l2_v: float
    l2_dx_u: float
    l2_dx_v: float

    @property
    def l2(self) -> float:
        return float(np.hypot(self.l2_u, self.l2_v))


def _l2(a: np.ndarray, grid: Grid1D) -> float:
    return float(np.sqrt(quad_y(quad_x(a**2), grid)))


def residual(comp: CompositeSolution) -> ResidualReport:
    """Navier-Stokes residual of the composite and its L2 norms."""
    d = comp.d
    e2 = comp.eps**2
    Ru = d["u"] * d["u_x"] + d["v"] * d["u_y"] + d["p_x"] - e2 * (d["u_xx"] + d["u_yy"])
    Rv = d["u"] * d["v_x"] + d["v"] * d["v_y"] + d["p_y"] - e2 * (d["v_xx"] + d["v_yy"])
    comp.R_u = StripField.from_physical(Ru, comp.grid, name="R_u^a")
    comp.R_v = StripField.from_physical(Rv, comp.grid, name="R_v^a")
    g = comp.grid
    return ResidualReport(_l2(Ru, g), _l2(Rv, g), _l2(ddx(Ru), g), _l2(ddx(Rv), g))


def approx_diagnostics(comp: CompositeSolution, A: float, delta: float, y_min: float = 1e-3) -> dict[str, float]:
    """Sampled ratios ``u^a/(A y)``, ``|d_x u^a|/(delta y)`` and ``|v^a|/(eps delta y)``."""
    y = comp.grid.nodes
    sel = y >= y_min
    u = comp.d["u"][:, sel]
    yy = y[sel][None, :]
    out = {
        "min_u_over_Ay": float(np.min(u / (A * yy))),
        "max_u_over_Ay": float(np.max(u / (A * yy))),
        "max_v_over_y": float(np.max(np.abs(comp.d["v"][:, sel]) / yy)),
    }
    if delta > 0:
        out["max_ux_over_delta_y"] = float(np.max(np.abs(comp.d["u_x"][:, sel]) / (delta * yy)))
        out["max_v_over_eps_delta_y"] = out["max_v_over_y"] / (comp.eps * delta)
    return out
