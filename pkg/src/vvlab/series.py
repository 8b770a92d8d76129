"""Order-by-order forcing of the boundary-layer equations.

Inside a layer every quantity is written as ``Q(r) = T_q(r) + L_q(r)``: the
Taylor expansion of the outer terms at the wall plus the layer correction.
Substituting into the rescaled Navier-Stokes equations and collecting the
coefficient of ``eps^r`` gives a sum of products.  The products made only of
Taylor parts cancel exactly (each outer term is a harmonic solution of the
linearised Euler equations), so the layer equations keep only the terms that
contain at least one layer factor.  The forcing of an order is minus that
sum evaluated with the unknown terms absent.

Upper layer, ``zeta = (y - 1)/eps``::

    T_q(r) = sum_j zeta^j/j! d_y^j q_e^(r-j)(x, 1),   d_zeta T_q(r) = T_{q_y}(r-1)

Lower layer, ``eta = y/eps^(2/3)``::

    T_q(r) = sum_j eta^j/j! d_y^j q_e^(r-2j/3)(x, 0), d_eta T_q(r) = T_{q_y}(r-2/3)

Storage: the upper u-layer of exponent r is ``u[r]``, its v-layer ``v[r + 1]``
and pressure ``p[r + 1]``; in the lower layer the partners are shifted by
2/3 instead of 1.  The v-layers are kept in the decaying form, so
``d_zeta v[r+1] = -d_x u[r]`` (respectively ``d_eta``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np

from .euler import EulerCascade
from .strip import Grid1D, StripField, ddx, ddy

TWO_THIRDS = Fraction(2, 3)


class HierarchyGap(KeyError):
    """A forcing needs a term of the hierarchy that has not been computed."""


@dataclass
class LayerSeries:
    """Layer terms of one wall together with the outer cascade they sit on.

    ``side`` is ``"upper"`` or ``"lower"``; ``grid`` the stretched-coordinate
    grid.  ``u``, ``v`` and ``p`` map epsilon exponents to layer fields.
    """

    side: str
    cascade: EulerCascade
    grid: Grid1D
    u: dict[Fraction, StripField] = field(default_factory=dict)
    v: dict[Fraction, StripField] = field(default_factory=dict)
    p: dict[Fraction, StripField] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.side not in ("upper", "lower"):
            raise ValueError("side must be 'upper' or 'lower'")
        self.step = Fraction(1) if self.side == "upper" else TWO_THIRDS
        self.wall = 1.0 if self.side == "upper" else 0.0
        self._trace_cache: dict = {}
        self._layer_cache: dict = {}

    @property
    def n_x(self) -> int:
        return self.cascade.n_x

    def invalidate(self) -> None:
        """Drop cached traces and derivatives after the hierarchy changed."""
        self._trace_cache.clear()
        self._layer_cache.clear()

    # Taylor part -------------------------------------------------------
    def _trace(self, kind: str, s: Fraction, dy: int, dx: int) -> np.ndarray:
        key = (kind, s, dy, dx)
        if key not in self._trace_cache:
            t = self.cascade.terms[s]
            y = np.array([self.wall])
            val = (t.u if kind == "u" else t.v)(y, dy, dx)[:, 0]
            self._trace_cache[key] = val
        return self._trace_cache[key]

    def taylor(self, kind: str, r: Fraction, dy: int = 0, dx: int = 0) -> np.ndarray | None:
        """``d_x^dx d_coord^dy`` of the Taylor part ``T_kind(r)``, or None if it vanishes."""
        r = Fraction(r) - dy * self.step
        c = self.grid.nodes[None, :]
        out = None
        j = 0
        while r - j * self.step >= 0:
            s = r - j * self.step
            if s in self.cascade.terms:
                tr = self._trace(kind, s, j + dy, dx)
                if np.any(tr):
                    term = tr[:, None] * (c**j / factorial(j))
                    out = term if out is None else out + term
            j += 1
        return out

    # layer part --------------------------------------------------------
    def layer(self, kind: str, r: Fraction, d: str = "") -> np.ndarray | None:
        """Derivative ``d`` (``""``, ``"x"``, ``"c"``, ``"xx"``, ``"cc"``, ``"xc"``) of a layer term."""
        r = Fraction(r)
        key = (kind, r, d)
        if key in self._layer_cache:
            return self._layer_cache[key]
        store = {"u": self.u, "v": self.v, "p": self.p}[kind]
        if r not in store:
            return None
        nx, nc = d.count("x"), d.count("c")
        if kind == "v" and nc:
            # continuity: d_c v[r] = -d_x u[r - step]
            src = self.layer("u", r - self.step, "x" * (nx + 1) + "c" * (nc - 1))
            val = None if src is None else -src
        else:
            val = store[r].physical
            if nc:
                val = ddy(val, self.grid, nc)
            if nx:
                val = ddx(val, nx)
        self._layer_cache[key] = val
        return val

    def _candidates(self, top: Fraction) -> list[Fraction]:
        cands = set()
        for s in self.cascade.terms:
            r = s
            while r <= top:
                cands.add(r)
                r += self.step
        for store in (self.u, self.v, self.p):
            cands.update(r for r in store if r <= top)
        return sorted(cands)

    def _mixed(self, ka: str, a: Fraction, da: tuple[int, int], kb: str, b: Fraction, db: tuple[int, int]):
        """Layer-containing part of ``Q_a * Q_b`` with derivative specs ``(d_coord, d_x)``."""
        ta = self.taylor(ka, a, *da)
        tb = self.taylor(kb, b, *db)
        la = self.layer(ka, a, _dname(*da))
        lb = self.layer(kb, b, _dname(*db))
        out = None
        for x, y in ((ta, lb), (la, tb), (la, lb)):
            if x is not None and y is not None:
                out = x * y if out is None else out + x * y
        return out

    def _sum_products(self, order: Fraction, ka, da, kb, db) -> np.ndarray:
        total = np.zeros((self.n_x, len(self.grid)))
        for a in self._candidates(order):
            b = order - a
            if b < 0:
                continue
            term = self._mixed(ka, a, da, kb, b, db)
            if term is not None:
                total += term
        return total

    def _add(self, total: np.ndarray, val: np.ndarray | None, sign: float = 1.0) -> None:
        if val is not None:
            total += sign * val

    # momentum balances ---------------------------------------------------
    def x_momentum(self, r: Fraction) -> np.ndarray:
        """Layer-containing part of the order-r x-momentum balance (present terms only)."""
        r = Fraction(r)
        st = self.step
        tot = self._sum_products(r, "u", (0, 0), "u", (0, 1))
        tot += self._sum_products(r + st, "v", (0, 0), "u", (1, 0))
        self._add(tot, self.layer("p", r, "x"))
        self._add(tot, self.layer("u", r - 2, "xx"), -1.0)
        self._add(tot, self.layer("u", r - (2 - 2 * st), "cc"), -1.0)
        return tot

    def y_momentum(self, r: Fraction) -> np.ndarray:
        """Layer-containing part of the order-r y-momentum balance, excluding the pressure."""
        r = Fraction(r)
        st = self.step
        tot = self._sum_products(r, "u", (0, 0), "v", (0, 1))
        tot += self._sum_products(r + st, "v", (0, 0), "v", (1, 0))
        self._add(tot, self.layer("v", r - 2, "xx"), -1.0)
        self._add(tot, self.layer("v", r - (2 - 2 * st), "cc"), -1.0)
        return tot

    def forcing(self, s: Fraction) -> np.ndarray:
        """Right-hand side of the linear layer problem for the u-layer of exponent s."""
        s = Fraction(s)
        if s in self.u:
            raise ValueError(f"{self.side} layer {s} is already part of the hierarchy")
        order = s if self.side == "upper" else s + TWO_THIRDS
        return -self.x_momentum(order)

    def pressure_source(self, r: Fraction) -> np.ndarray:
        """``d_coord p[r]`` from the y-momentum balance of order ``r - step``."""
        return -self.y_momentum(Fraction(r) - self.step)


def _dname(dc: int, dx: int) -> str:
    return "x" * dx + "c" * dc


def upper_forcing(series: LayerSeries, k: Fraction) -> tuple[np.ndarray, np.ndarray]:
    """``(f_upper,k, g_upper,k)``: x-momentum forcing of order k and the pressure source of order k+1."""
    if series.side != "upper":
        raise ValueError("an upper-layer series is required")
    return series.forcing(k), series.pressure_source(Fraction(k) + 1)


def lower_forcing(series: LayerSeries, k: Fraction) -> tuple[np.ndarray, np.ndarray]:
    """``(f_lower,k, g_lower,k)``: x-momentum forcing for the u-layer k and the pressure source of order k+2/3."""
    if series.side != "lower":
        raise ValueError("a lower-layer series is required")
    return series.forcing(k), series.pressure_source(Fraction(k) + TWO_THIRDS)
