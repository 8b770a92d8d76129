"""Outer (Euler) terms of the expansion.

Every outer correction is a linearised Euler flow around the shear ``A y``.
Its vertical velocity is harmonic with Dirichlet data supplied by the two
boundary layers, so each Fourier mode is an explicit combination of
``sinh(n y)`` and ``sinh(n (1 - y))``.  The terms are therefore stored by
their boundary traces and evaluated in closed form, including y-derivatives
of any order; only the x-mean of the pressure needs a quadrature.

Conventions: the x-mean of ``u`` is zero before the far-field correction,
after which it is the linear profile ``phi(y) = A_bot + (A_top - A_bot) y``.
The leading shear flow is the term of exponent 0 with ``phi(y) = A y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .strip import (
    Grid1D,
    StripField,
    ddy,
    dft_forward,
    dft_inverse,
    solve_mode_helmholtz,
    wavenumbers,
)


class EulerError(ValueError):
    """Input to an outer solve violates a compatibility requirement."""


def _sc(n: np.ndarray, y: np.ndarray, odd: bool) -> np.ndarray:
    """``sinh(n y)/sinh(n)`` (``odd=False``) or ``cosh(n y)/sinh(n)`` for n >= 1, overflow-free."""
    n = n[:, None]
    y = np.asarray(y, dtype=float)[None, :]
    a = np.exp(n * (y - 1.0))
    b = np.exp(-n * (y + 1.0))
    den = 1.0 - np.exp(-2.0 * n)
    return (a + b) / den if odd else (a - b) / den


@dataclass(frozen=True, eq=False)
class EulerTerm:
    """Outer term of a given epsilon exponent, stored by its v-traces.

    ``top`` and ``bottom`` are the one-sided Fourier coefficients of
    ``v(x, 1)`` and ``v(x, 0)``; ``phi_top``/``phi_bottom`` are the values of
    the x-mean of ``u`` at the walls.
    """

    exponent: Fraction
    top: np.ndarray
    bottom: np.ndarray
    n_x: int
    phi_top: float = 0.0
    phi_bottom: float = 0.0

    def __post_init__(self) -> None:
        for name in ("top", "bottom"):
            c = np.asarray(getattr(self, name), dtype=complex).copy()
            if c.shape != (self.n_x // 2 + 1,):
                raise EulerError(f"{name} trace has the wrong number of modes")
            c[-1] = 0.0
            c.setflags(write=False)
            object.__setattr__(self, name, c)

    @property
    def k(self) -> np.ndarray:
        return wavenumbers(self.n_x)

    def v_modes(self, y: np.ndarray, deriv: int = 0) -> np.ndarray:
        """``d^deriv v_n / dy^deriv`` for n = 0..N_x/2 at the points ``y``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros((len(self.k), len(y)), complex)
        n = np.arange(1, len(self.k) - 1, dtype=float)
        if len(n):
            odd = deriv % 2 == 1
            up = _sc(n, y, odd) * n[:, None] ** deriv
            down = _sc(n, 1.0 - y, odd) * (-n[:, None]) ** deriv
            out[1:-1] = self.top[1:-1, None] * up + self.bottom[1:-1, None] * down
        return out

    def u_modes(self, y: np.ndarray, deriv: int = 0) -> np.ndarray:
        """``d^deriv u_n / dy^deriv``; nonzero modes from continuity, mode 0 is ``phi``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros((len(self.k), len(y)), complex)
        n = np.arange(1, len(self.k) - 1, dtype=float)
        if len(n):
            out[1:-1] = 1j * self.v_modes(y, deriv + 1)[1:-1] / n[:, None]
        if deriv == 0:
            out[0] = self.phi_bottom + (self.phi_top - self.phi_bottom) * y
        elif deriv == 1:
            out[0] = self.phi_top - self.phi_bottom
        return out

    def u(self, y: np.ndarray, deriv: int = 0, dx: int = 0) -> np.ndarray:
        return _phys(self.u_modes(y, deriv), self.n_x, dx)

    def v(self, y: np.ndarray, deriv: int = 0, dx: int = 0) -> np.ndarray:
        return _phys(self.v_modes(y, deriv), self.n_x, dx)

    def corrected(self, a_top: float, a_bottom: float) -> "EulerTerm":
        """Add the linear mean flow ``phi`` with ``phi(1) = a_top``, ``phi(0) = a_bottom``."""
        return EulerTerm(self.exponent, self.top, self.bottom, self.n_x,
                         self.phi_top + a_top, self.phi_bottom + a_bottom)

    def as_fields(self, grid: Grid1D) -> tuple[StripField, StripField]:
        y = grid.nodes
        e = float(self.exponent)
        return (StripField(self.u_modes(y), grid, self.n_x, name=f"u_e^({self.exponent})", exponent=e),
                StripField(self.v_modes(y), grid, self.n_x, name=f"v_e^({self.exponent})", exponent=e))

    def is_zero(self) -> bool:
        return not (np.any(self.top) or np.any(self.bottom) or self.phi_top or self.phi_bottom)


def _phys(modes: np.ndarray, n_x: int, dx: int = 0) -> np.ndarray:
    if dx:
        modes = modes * (1j * wavenumbers(n_x)[:, None]) ** dx
    return dft_inverse(modes, n_x)


def couette(A: float, n_x: int) -> EulerTerm:
    """The shear flow ``(A y, 0)`` as the outer term of exponent 0."""
    z = np.zeros(n_x // 2 + 1, complex)
    return EulerTerm(Fraction(0), z, z, n_x, phi_top=A, phi_bottom=0.0)


# ---------------------------------------------------------------------------
# elementary operations
# ---------------------------------------------------------------------------

def solve_harmonic_dirichlet(top: np.ndarray, bottom: np.ndarray, exponent: Fraction = Fraction(1),
                             mean_tol: float = 1e-10) -> EulerTerm:
    """Harmonic ``v`` on the strip with ``v(x, 1) = top`` and ``v(x, 0) = bottom``.

    The traces are real samples on the periodic grid.  Both must have zero
    x-mean; the returned term carries ``u`` from continuity with zero mean.
    """
    top = np.asarray(top, dtype=float)
    bottom = np.asarray(bottom, dtype=float)
    n_x = top.shape[0]
    ct, cb = dft_forward(top), dft_forward(bottom)
    scale = max(1.0, float(np.max(np.abs(top))), float(np.max(np.abs(bottom))))
    if abs(ct[0]) > mean_tol * scale or abs(cb[0]) > mean_tol * scale:
        raise EulerError("v-traces must have zero x-mean")
    ct[0] = 0.0
    cb[0] = 0.0
    return EulerTerm(Fraction(exponent), ct, cb, n_x)


def u_from_v(v: StripField, mean_tol: float = 1e-10) -> StripField:
    """``u_n = -(1/(i n)) d_y v_n`` for n != 0 and zero mean, from a sampled v.

    With the finite-difference ``d_y`` of the strip module the result is
    discretely divergence-free to rounding error.
    """
    vy = ddy(v.modes, v.grid)
    if np.max(np.abs(vy[0])) > mean_tol * max(1.0, float(np.max(np.abs(vy)))):
        raise EulerError("x-mean of d_y v does not vanish; the antiderivative is not periodic")
    k = wavenumbers(v.n_x)
    out = np.zeros_like(vy)
    nz = k > 0
    out[nz] = -vy[nz] / (1j * k[nz, None])
    return v.with_modes(out, name=f"u from {v.name}")


def correct_with_phi(u: StripField, a_top: float, a_bottom: float, tol: float = 1e-8) -> tuple[StripField, np.ndarray]:
    """Add ``phi(y)`` with ``phi'' = -(Delta u)(y)``, ``phi(1) = a_top``, ``phi(0) = a_bottom``.

    Requires the Laplacian of ``u`` to depend on y only.  Returns the
    corrected field and the profile ``phi``.
    """
    lap = u.ddy(2).modes - (wavenumbers(u.n_x) ** 2)[:, None] * u.modes
    inner = slice(1, -1)
    if np.max(np.abs(lap[1:, inner])) > tol * max(1.0, float(np.max(np.abs(lap[:, inner])))):
        raise EulerError("Laplacian of u depends on x; a y-only correction cannot make it harmonic")
    phi = solve_mode_helmholtz(0, -lap[0].real.astype(complex), a_bottom, a_top, u.grid).values.real
    modes = u.modes.copy()
    modes[0] = modes[0] + phi
    return u.with_modes(modes, far_constant=0.0), phi


# ---------------------------------------------------------------------------
# the cascade: forcing, pressure, invariants
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass
class EulerCascade:
    """Outer terms indexed by epsilon exponent, around the shear ``A y``."""

    A: float
    n_x: int
    terms: dict[Fraction, EulerTerm] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if Fraction(0) not in self.terms:
            self.terms[Fraction(0)] = couette(self.A, self.n_x)

    def exponents(self) -> list[Fraction]:
        return sorted(self.terms)

    def pairs(self, s: Fraction) -> Iterable[tuple[EulerTerm, EulerTerm]]:
        """Ordered pairs ``(a, b)`` of present terms with ``a + b = s`` and ``a, b > 0``."""
        for a in self.exponents():
            b = s - a
            if a > 0 and b > 0 and b in self.terms:
                yield self.terms[a], self.terms[b]

    def forcing(self, s: Fraction, y: np.ndarray, with_dy: bool = False):
        """Order-s outer forcing ``(f, g)`` (and ``d_y f``) as physical arrays at the points ``y``.

        ``f = -sum (u^a u^b_x + v^a u^b_y)`` and ``g = -sum (u^a v^b_x + v^a v^b_y)``
        over the present pairs; the Laplacian terms vanish because every
        stored term is harmonic.
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))
        shape = (self.n_x, len(y))
        f = np.zeros(shape)
        g = np.zeros(shape)
        fy = np.zeros(shape)
        for ta, tb in self.pairs(Fraction(s)):
            ua, va = ta.u(y), ta.v(y)
            ubx, uby = tb.u(y, dx=1), tb.u(y, 1)
            f -= ua * ubx + va * uby
            g -= ua * tb.v(y, dx=1) + va * tb.v(y, 1)
            if with_dy:
                fy -= (ta.u(y, 1) * ubx + ua * tb.u(y, 1, dx=1)
                       + ta.v(y, 1) * uby + va * tb.u(y, 2))
        return (f, g, fy) if with_dy else (f, g)

    def pressure(self, s: Fraction, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pressure of the order-s term and its y-derivative, physical, at the points ``y``.

        Nonzero modes come from the x-momentum balance
        ``A y d_x u + A v + d_x p = f``; the x-mean integrates the y-momentum
        balance by Gauss-Legendre quadrature.  Gauge: ``p(0, 1) = 0``.
        """
        s = Fraction(s)
        t = self.terms[s]
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if s == 0:
            z = np.zeros((self.n_x, len(y)))
            return z, z.copy()
        k = wavenumbers(self.n_x)
        nz = k > 0
        f, g, fy = self.forcing(s, y, with_dy=True)
        fm, fym = dft_forward(f), dft_forward(fy)
        un, un1 = t.u_modes(y), t.u_modes(y, 1)
        vn, vn1 = t.v_modes(y), t.v_modes(y, 1)
        ik = 1j * k[:, None]
        p = np.zeros_like(fm)
        py = np.zeros_like(fm)
        p[nz] = (fm[nz] - self.A * y * ik[nz] * un[nz] - self.A * vn[nz]) / ik[nz]
        py[nz] = (fym[nz] - self.A * ik[nz] * un[nz] - self.A * y * ik[nz] * un1[nz] - self.A * vn1[nz]) / ik[nz]
        py[0] = dft_forward(g)[0]
        # x-mean: p0(y) = p0(1) - int_y^1 g0
        p[0] = -self._integrate_g0_to_top(s, y)
        ptop = self._nonzero_pressure_at_top(s)
        p[0] += -(2.0 * ptop.real)
        return dft_inverse(p, self.n_x), dft_inverse(py, self.n_x)

    def _g0(self, s: Fraction, y: np.ndarray) -> np.ndarray:
        _, g = self.forcing(s, y)
        return np.mean(g, axis=0)

    def _integrate_g0_to_top(self, s: Fraction, y: np.ndarray) -> np.ndarray:
        order = np.argsort(y)
        ys = np.append(y[order], 1.0)
        a, b = ys[:-1], ys[1:]
        mid, half = (a + b) / 2, (b - a) / 2
        pts = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        vals = self._g0(s, pts).reshape(len(a), len(_GL_X))
        seg = half * (vals @ _GL_W)
        tail = np.cumsum(seg[::-1])[::-1]
        out = np.empty_like(y)
        out[order] = tail
        return out

    def _nonzero_pressure_at_top(self, s: Fraction) -> complex:
        t = self.terms[s]
        y1 = np.array([1.0])
        k = wavenumbers(self.n_x)
        nz = k > 0
        f, _ = self.forcing(s, y1)
        fm = dft_forward(f)[:, 0]
        un = t.u_modes(y1)[:, 0]
        vn = t.v_modes(y1)[:, 0]
        p = (fm[nz] - self.A * 1j * k[nz] * un[nz] - self.A * vn[nz]) / (1j * k[nz])
        return complex(np.sum(p))

    # invariants ------------------------------------------------------
    def invariants(self, s: Fraction, y: np.ndarray) -> dict[str, float]:
        """Divergence, harmonicity, mean-zero, compatibility and momentum residuals of term s."""
        s = Fraction(s)
        t = self.terms[s]
        y = np.atleast_1d(np.asarray(y, dtype=float))
        div = t.u(y, dx=1) + t.v(y, 1)
        harm_v = t.v(y, dx=2) + t.v(y, 2)
        harm_u = t.u(y, dx=2) + t.u(y, 2)
        mean_v = np.mean(t.v(y), axis=0)
        out = {
            "divergence": float(np.max(np.abs(div))),
            "harmonic_v": float(np.max(np.abs(harm_v))),
            "harmonic_u": float(np.max(np.abs(harm_u))),
            "mean_v": float(np.max(np.abs(mean_v))),
        }
        if s > 0:
            f, g = self.forcing(s, y)
            p, py = self.pressure(s, y)
            px = dft_inverse(dft_forward(p) * 1j * wavenumbers(self.n_x)[:, None], self.n_x)
            yy = y[None, :]
            rx = self.A * yy * t.u(y, dx=1) + self.A * t.v(y) + px - f
            ry = self.A * yy * t.v(y, dx=1) + py - g
            out["compatibility"] = float(np.max(np.abs(np.mean(f, axis=0))))
            out["momentum_x"] = float(np.max(np.abs(rx)))
            out["momentum_y"] = float(np.max(np.abs(ry)))
        return out


def euler_forcing(cascade: EulerCascade, s: Fraction, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order-s forcing of the outer equations at the points ``y``."""
    return cascade.forcing(Fraction(s), y)


def pressure_from_field(cascade: EulerCascade, s: Fraction, y: np.ndarray) -> np.ndarray:
    """Pressure of the stored order-s outer term at the points ``y``."""
    return cascade.pressure(Fraction(s), y)[0]


def check_shear_selection(v1: EulerTerm, u1: EulerTerm | None = None, y: np.ndarray | None = None) -> float:
    """``max_y |int_0^{2pi} v_e^(1) d_y u_e^(1) dx|``.

    A nonzero value would force a curvature ``u_e'' != 0`` in the outer shear
    flow; harmonic first-order terms make it vanish.
    """
    u1 = v1 if u1 is None else u1
    if y is None:
        y = np.linspace(0.0, 1.0, 201)
    return float(np.max(np.abs(2 * np.pi * np.mean(v1.v(y) * u1.u(y, 1), axis=0))))


def shear_selection_defect_sampled(v: StripField, u: StripField) -> float:
    """Same defect for sampled fields (finite-difference ``d_y``)."""
    uy = u.ddy().physical
    return float(np.max(np.abs(2 * np.pi * np.mean(v.physical * uy, axis=0))))
