"""Upper boundary layer of thickness eps at the moving wall y = 1.

The leading layer is computed in von Mises variables.  With
``psi = int_0^zeta (A + u) dzeta'`` and ``U = A + u`` the steady Prandtl
system becomes ``2 U_x = (U^2)_psi_psi`` with ``U = alpha + delta f`` at
``psi = 0`` and ``U -> A`` as ``psi -> -inf``.  Integrating in x shows that
``int U^2 dx`` is linear in psi, which pins ``A^2`` to the mean of the squared
wall data (the Batchelor-Wood constant).

Higher orders solve a linear layer problem around the leading layer (see
:func:`solve_upper_linear_bl`).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from ._krylov import ModeFactors, SolverError, gmres_solve
from .problem import ProblemSpec
from .strip import (
    Grid1D,
    GridError,
    StripField,
    box_continuity,
    cumulative_trapezoid,
    ddx,
    ddy,
    dft_forward,
    dft_inverse,
    quad_x,
    wavenumbers,
)

log = logging.getLogger(__name__)


class LayerError(ValueError):
    """Input to a layer solver violates its decay or positivity requirements."""


# ---------------------------------------------------------------------------
# Batchelor-Wood constant
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BatchelorConstants:
    A: float
    B: float = 0.0


def batchelor_constant(spec: ProblemSpec, n_check: int = 4096) -> BatchelorConstants:
    """Slope ``A`` of the Euler shear flow ``A y``: ``A^2 = (1/2pi) int (alpha + delta f)^2 dx``."""
    x = 2 * np.pi * np.arange(n_check) / n_check
    wall = spec.wall(x)
    if np.min(wall) <= 0:
        raise LayerError("wall data alpha + delta f(x) must be positive everywhere")
    n = max(16, 4 * spec.max_mode + 4)
    xq = 2 * np.pi * np.arange(n) / n
    a2 = np.mean(spec.wall(xq) ** 2)
    return BatchelorConstants(float(np.sqrt(a2)), 0.0)


def batchelor_closed_form(spec: ProblemSpec) -> float:
    """``A`` from the Fourier coefficients of ``f`` (Parseval), independent of quadrature."""
    a0 = sum(a for n, a, _ in spec.f_modes if n == 0)
    osc = sum(a * a + b * b for n, a, b in spec.f_modes if n > 0)
    return float(np.sqrt((spec.alpha + spec.delta * a0) ** 2 + 0.5 * spec.delta**2 * osc))


# ---------------------------------------------------------------------------
# von Mises solve
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VonMisesSolution:
    U: np.ndarray  # (N_x, N_psi + 1)
    psi: Grid1D
    A: float
    wall: np.ndarray
    residual_history: list = field(default_factory=list)
    periodicity_defect: float = 0.0

    def batchelor_wood_defect(self) -> float:
        """``max_psi |d/dpsi int U^2 dx|``."""
        s = quad_x(self.U**2)
        return float(np.max(np.abs(ddy(s, self.psi))))


def psi_grid(A: float, n_psi: int, zeta_min: float = -40.0, margin: float = 1.1) -> Grid1D:
    """Uniform psi-grid on ``[margin * A * zeta_min, 0]``.

    The margin keeps the inverted map covering the whole zeta-grid even where
    the layer is faster than the far field.
    """
    return Grid1D.upper_zeta(n_psi, margin * A * zeta_min)


def _vm_residual(U_int: np.ndarray, bottom: float, wall: np.ndarray, inv_h2: float) -> np.ndarray:
    n_x = U_int.shape[0]
    q = np.empty((n_x, U_int.shape[1] + 2))
    q[:, 0] = bottom**2
    q[:, -1] = wall**2
    q[:, 1:-1] = U_int**2
    d2 = (q[:, 2:] - 2 * q[:, 1:-1] + q[:, :-2]) * inv_h2
    return 2 * ddx(U_int) - d2


def solve_von_mises(
    spec: ProblemSpec,
    psi: Grid1D | None = None,
    tol: float = 1e-10,
    max_newton: int = 30,
) -> VonMisesSolution:
    """Periodic steady solution of ``2 U_x = (U^2)_psi_psi`` by Newton-GMRES.

    x is discretised spectrally on the problem's periodic grid, psi by
    second-order differences.  ``U = A`` is imposed at the bottom of the
    psi-grid.  Raises :class:`SolverError` if the discrete L2 residual does
    not drop below ``tol``.
    """
    A = batchelor_constant(spec).A
    disc = spec.disc
    if psi is None:
        psi = psi_grid(A, disc.n_psi, disc.zeta_min)
    if not psi.uniform:
        raise GridError("the von Mises solver expects a uniform psi-grid")
    n_x = disc.n_x
    x = 2 * np.pi * np.arange(n_x) / n_x
    wall = spec.wall(x)
    h = psi.h
    inv_h2 = 1.0 / h**2
    p = psi.nodes
    n_int = len(p) - 2
    k = wavenumbers(n_x)

    # linearised initial guess: each mode decays like exp(sqrt(i n / A) psi)
    cw = dft_forward(wall)
    modes = np.zeros((len(k), len(p)), complex)
    for n in range(1, len(k) - 1):
        mu = np.sqrt(1j * n / A)
        modes[n] = cw[n] * np.exp(mu * p)
    modes[0] = A + (cw[0].real - A) * np.exp(p)
    U = dft_inverse(modes, n_x)
    U[:, -1] = wall
    U[:, 0] = A
    Ui = U[:, 1:-1].copy()

    def l2(r: np.ndarray) -> float:
        return float(np.sqrt(np.sum(r**2) * (2 * np.pi / n_x) * h))

    main = -2 * inv_h2 * np.ones(n_int)
    off = inv_h2 * np.ones(n_int - 1)
    d2 = sp.diags([off, main, off], [-1, 0, 1], format="csc")

    history: list[float] = []
    for it in range(max_newton + 1):
        r = _vm_residual(Ui, A, wall, inv_h2)
        rn = l2(r)
        history.append(rn)
        log.debug("von Mises Newton %d: residual %.3e", it, rn)
        if rn < tol:
            break
        if it == max_newton:
            raise SolverError(f"von Mises Newton did not converge: history {history}")
        U0 = np.mean(Ui, axis=0)
        mats = [2j * kk * sp.identity(n_int, format="csc") - d2 @ sp.diags(2 * U0) for kk in k]
        fac = ModeFactors.build(mats)

        def precondition(vec: np.ndarray) -> np.ndarray:
            c = np.fft.rfft(vec.reshape(n_x, n_int), axis=0)
            out = np.empty_like(c)
            for n in range(len(k)):
                out[n] = fac.solve(n, c[n])
            out[-1] = out[-1].real
            out[0] = out[0].real
            return np.fft.irfft(out, n=n_x, axis=0).ravel()

        def jac(vec: np.ndarray) -> np.ndarray:
            d = vec.reshape(n_x, n_int)
            q = np.zeros((n_x, n_int + 2))
            q[:, 1:-1] = 2 * Ui * d
            return (2 * ddx(d) - (q[:, 2:] - 2 * q[:, 1:-1] + q[:, :-2]) * inv_h2).ravel()

        step, _ = gmres_solve(jac, precondition, -r.ravel(), rtol=1e-12)
        step = step.reshape(n_x, n_int)
        lam = 1.0
        while True:
            trial = Ui + lam * step
            if np.all(trial > 0) and l2(_vm_residual(trial, A, wall, inv_h2)) < rn or lam < 1e-3:
                break
            lam /= 2
        Ui = trial
    U = np.empty((n_x, len(p)))
    U[:, 0] = A
    U[:, -1] = wall
    U[:, 1:-1] = Ui
    if np.min(U) <= 0:
        raise SolverError("von Mises solution lost positivity")
    return VonMisesSolution(U, psi, A, wall, history, 0.0)


def invert_von_mises(vm: VonMisesSolution, zeta: Grid1D) -> StripField:
    """Leading layer ``u_p^(0)(x, zeta) = U(x, psi(zeta)) - A`` on a zeta-grid.

    For each x the map ``zeta(psi) = -int_psi^0 dpsi'/U`` is built by the
    cumulative trapezoid rule and inverted with a cubic spline.  Below the
    deepest covered zeta the layer is set to its far-field value 0.
    """
    if zeta.kind != "upper-zeta":
        raise GridError("inversion target must be an upper zeta-grid")
    if np.min(vm.U) <= 0:
        raise LayerError("von Mises map needs U > 0")
    z_of_psi = cumulative_trapezoid(1.0 / vm.U, vm.psi, start="last")
    n_x = vm.U.shape[0]
    out = np.zeros((n_x, len(zeta)))
    for i in range(n_x):
        zi = z_of_psi[i]
        if np.any(np.diff(zi) <= 0):  # pragma: no cover - impossible for U > 0
            raise LayerError("zeta(psi) is not monotone")
        spl = CubicSpline(zi, vm.U[i])
        inside = zeta.nodes >= zi[0]
        out[i, inside] = spl(zeta.nodes[inside]) - vm.A
    out[:, -1] = vm.wall - vm.A
    return StripField.from_physical(out, zeta, name="u_p^(0)", exponent=0.0)


# ---------------------------------------------------------------------------
# continuity, pressure, far-field constants
# ---------------------------------------------------------------------------

def _tail_scale(values: np.ndarray, grid: Grid1D) -> float:
    """Largest magnitude over the 10% of the grid farthest from the wall."""
    n = len(grid)
    m = max(2, n // 10)
    if grid.kind == "upper-zeta":
        tail = values[..., :m]
    else:
        tail = values[..., -m:]
    return float(np.max(np.abs(tail)))


def v_from_continuity(u: StripField, tail_tol: float = 1e-6) -> StripField:
    """``v = -int_{zeta_min}^zeta d_x u`` so that v vanishes in the far field."""
    ux = u.ddx().physical
    if _tail_scale(ux, u.grid) > tail_tol * max(1.0, np.max(np.abs(ux))):
        raise LayerError("u-layer does not settle in the far field; v cannot be pinned there")
    v = -cumulative_trapezoid(ux, u.grid, start="first")
    return StripField.from_physical(v, u.grid, name="v_p", exponent=u.exponent + 1)


def upper_pressure(g: np.ndarray | StripField, zeta: Grid1D | None = None, tail_tol: float = 1e-6) -> StripField:
    """``p = int_{zeta_min}^zeta g`` (far field pinned to 0)."""
    if isinstance(g, StripField):
        zeta = g.grid
        g = g.physical
    if zeta is None:
        raise GridError("a zeta-grid is required")
    g = np.asarray(g, dtype=float)
    if _tail_scale(g, zeta) > tail_tol * max(1.0, float(np.max(np.abs(g)))):
        raise LayerError("pressure source does not decay")
    return StripField.from_physical(cumulative_trapezoid(g, zeta, start="first"), zeta, name="p_p")


def extract_far_constant(layer: StripField, plateau_tol: float = 1e-6) -> tuple[float, StripField]:
    """Far-field constant of a u-type layer and the layer shifted to decay to zero.

    The constant is the mean over the 10% of nodes farthest from the wall;
    those nodes must agree to ``plateau_tol`` or the grid is too short.
    """
    phys = layer.physical
    n = len(layer.grid)
    m = max(2, n // 10)
    tail = phys[:, :m] if layer.grid.kind == "upper-zeta" else phys[:, -m:]
    c = float(np.mean(tail))
    if np.max(np.abs(tail - c)) > plateau_tol * max(1.0, abs(c)):
        raise LayerError("layer has no far-field plateau; enlarge the truncation bound")
    modes = layer.modes.copy()
    modes[0] -= c
    return c, layer.with_modes(modes, far_constant=0.0)


# ---------------------------------------------------------------------------
# wall lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Homogenizer:
    """Polynomial bump ``kappa(s) = (1 + s)^4 (1 + 6 s)`` on ``[-1, 0]``.

    ``kappa(0) = 1`` and ``int_{-1}^0 kappa = 0``; it is C^3 at ``s = -1``
    and vanishes below.  ``side = "lower"`` mirrors it onto ``[0, 1]``.
    """

    side: str = "upper"

    def _s(self, t: np.ndarray) -> tuple[np.ndarray, float]:
        t = np.asarray(t, dtype=float)
        return (t, 1.0) if self.side == "upper" else (-t, -1.0)

    def kappa(self, t: np.ndarray, deriv: int = 0) -> np.ndarray:
        s, sign = self._s(t)
        inside = (s >= -1.0) & (s <= 0.0)
        a = 1.0 + s
        if deriv == 0:
            val = a**4 * (1 + 6 * s)
        elif deriv == 1:
            val = 4 * a**3 * (1 + 6 * s) + 6 * a**4
        elif deriv == 2:
            val = 12 * a**2 * (1 + 6 * s) + 48 * a**3
        elif deriv == 3:
            val = 24 * a * (1 + 6 * s) + 216 * a**2
        else:
            raise ValueError("derivatives up to third order are provided")
        return np.where(inside, val * sign**deriv, 0.0)

    def antiderivative(self, t: np.ndarray) -> np.ndarray:
        """``K(t) = int_0^t kappa``; zero at the wall and outside the support."""
        s, sign = self._s(t)
        inside = (s >= -1.0) & (s <= 0.0)
        a = 1.0 + s
        # int_{-1}^{s} (1+r)^4 (1+6r) dr = a^5 (1 + 6 s)/5 - a^6/5  ; total over [-1,0] is 0
        val = a**5 * (1 + 6 * s) / 5 - a**6 / 5
        return np.where(inside, sign * val, 0.0)


# ---------------------------------------------------------------------------
# linear upper layer
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class UpperLayer:
    """u-layer at order k, decaying v-layer at order k+1 and the far constant A_k."""

    u: StripField
    v: StripField
    far_constant: float
    gmres_iterations: int = 0

    def continuity_defect(self) -> float:
        return float(np.max(np.abs(box_continuity(self.u, self.v))))


def _upper_operator(ubar, ubar_x, ubar_z, vbar, u, w, grid: Grid1D) -> np.ndarray:
    """``ubar u_x + u ubar_x + vbar u_z + w ubar_z - u_zz`` with Neumann ghost at zeta_min."""
    uz = ddy(u, grid)
    uzz = ddy(u, grid, 2)
    h0 = grid.nodes[1] - grid.nodes[0]
    uz[:, 0] = 0.0
    uzz[:, 0] = 2 * (u[:, 1] - u[:, 0]) / h0**2
    return ubar * ddx(u) + u * ubar_x + vbar * uz + w * ubar_z - uzz


def solve_upper_linear_bl(
    ubar: np.ndarray,
    vbar: np.ndarray,
    forcing: np.ndarray,
    wall_value: np.ndarray,
    zeta: Grid1D,
    exponent: float = 1.0,
    rtol: float = 1e-12,
    tail_tol: float = 1e-4,
) -> UpperLayer:
    """Solve the linearised upper-layer problem on a zeta-grid.

    Finds ``u`` and ``w = v - v(x, 0)`` with

        ``ubar u_x + u ubar_x + vbar u_z + w ubar_z - u_zz = forcing``,
        ``u_x + w_z = 0``,  ``u(x, 0) = wall_value``,  ``w(x, 0) = 0``,
        ``u_z -> 0`` at ``zeta_min``.

    ``ubar`` is ``A + u_p^(0)`` and ``vbar`` the order-one vertical velocity
    seen by the layer.  The wall data are removed with the :class:`Homogenizer`
    lift before the homogeneous problem is solved by GMRES with a
    mode-decoupled preconditioner.  The returned v is re-pinned to vanish in
    the far field.
    """
    n_x, n = ubar.shape
    if n != len(zeta):
        raise GridError("background does not match the zeta-grid")
    fscale = max(1.0, float(np.max(np.abs(forcing))))
    if _tail_scale(forcing, zeta) > tail_tol * fscale:
        raise LayerError("upper-layer forcing does not decay")
    z = zeta.nodes
    ubar_x = ddx(ubar)
    ubar_z = ddy(ubar, zeta)
    hom = Homogenizer("upper")
    kap = hom.kappa(z)[None, :]
    lift_u = wall_value[:, None] * kap
    lift_w = -ddx(wall_value)[:, None] * hom.antiderivative(z)[None, :]
    lift_uz = wall_value[:, None] * hom.kappa(z, 1)[None, :]
    lift_uzz = wall_value[:, None] * hom.kappa(z, 2)[None, :]
    lift_op = ubar * ddx(lift_u) + lift_u * ubar_x + vbar * lift_uz + lift_w * ubar_z - lift_uzz
    rhs_field = forcing - lift_op

    m = n - 1  # unknown nodes 0..n-2; the wall node n-1 is zero
    h = np.diff(z)

    def unpack(vec):
        u = np.zeros((n_x, n))
        w = np.zeros((n_x, n))
        vv = vec.reshape(2, n_x, m)
        u[:, :m] = vv[0]
        w[:, :m] = vv[1]
        return u, w

    def apply(vec):
        u, w = unpack(vec)
        mom = _upper_operator(ubar, ubar_x, ubar_z, vbar, u, w, zeta)[:, :m]
        ux = ddx(u)
        cont = (w[:, 1:] - w[:, :-1]) / h + 0.5 * (ux[:, 1:] + ux[:, :-1])
        return np.concatenate([mom.ravel(), cont.ravel()])

    rhs = np.concatenate([rhs_field[:, :m].ravel(), np.zeros(n_x * m)])

    # frozen-coefficient per-mode blocks: unknown ordering [u_0..u_{m-1}, w_0..w_{m-1}]
    U0 = np.mean(ubar, axis=0)
    U0z = np.mean(ubar_z, axis=0)
    d2 = zeta.d2.tolil()
    d2[0, :] = 0.0
    d2[0, 0] = -2 / h[0] ** 2
    d2[0, 1] = 2 / h[0] ** 2
    d2 = sp.csr_matrix(d2)[:m, :m]
    # box continuity: (w_{j+1}-w_j)/h_j + i k (u_{j+1}+u_j)/2, with u_m = w_m = 0
    e = sp.diags([-1 / h, 1 / h[:-1]], [0, 1], shape=(m, m))
    avg = sp.diags([0.5 * np.ones(m), 0.5 * np.ones(m - 1)], [0, 1], shape=(m, m))
    k = wavenumbers(n_x)
    mats = []
    for kk in k:
        a11 = sp.diags(1j * kk * U0[:m]) - d2
        a12 = sp.diags(U0z[:m])
        mats.append(sp.bmat([[a11, a12], [1j * kk * avg, e]], format="csc"))
    fac = ModeFactors.build(mats)

    def precondition(vec):
        vv = vec.reshape(2, n_x, m)
        c = np.fft.rfft(vv, axis=1)
        out = np.empty_like(c)
        for i in range(len(k)):
            sol = fac.solve(i, np.concatenate([c[0, i], c[1, i]]))
            out[0, i] = sol[:m]
            out[1, i] = sol[m:]
        out[:, 0] = out[:, 0].real
        out[:, -1] = out[:, -1].real
        return np.fft.irfft(out, n=n_x, axis=1).ravel()

    sol, iters = gmres_solve(apply, precondition, rhs, rtol=rtol)
    u, _ = unpack(sol)
    u = u + lift_u
    uf = StripField.from_physical(u, zeta, name=f"u_p^({exponent:g})", exponent=exponent)
    c, _ = extract_far_constant(uf, plateau_tol=tail_tol)
    vf = v_from_continuity(uf, tail_tol=tail_tol)
    return UpperLayer(uf.with_modes(uf.modes, far_constant=c), vf, c, iters)
