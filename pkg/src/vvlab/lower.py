"""Lower boundary layer of thickness eps^(2/3) at the resting wall y = 0.

Near ``y = 0`` the outer shear ``A y`` is small, so the balance between
advection by the shear and viscous diffusion selects the scaling
``eta = y/eps^(2/3)``.  Every order leads to the same linear problem

    ``A eta d_x u + A v - u_etaeta = f``,  ``d_x u + d_eta v = 0``,

with ``u(x, 0)`` given, ``v -> 0`` and ``u_eta -> 0`` far from the wall.  The
operator does not couple Fourier modes: the mean mode is a double
integration and each nonzero mode an Airy-type two-point problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .prandtl import Homogenizer, LayerError, _tail_scale
from .strip import (
    Grid1D,
    GridError,
    StripField,
    box_continuity,
    antiderivative_x,
    cumulative_trapezoid,
    ddx,
    ddy,
    dft_forward,
    dft_inverse,
    wavenumbers,
)


@dataclass(frozen=True, eq=False)
class LowerLayer:
    """u-layer of exponent k, v-layer of exponent k + 2/3 and the far constant."""

    u: StripField
    v: StripField
    far_constant: float

    def continuity_defect(self) -> float:
        return float(np.max(np.abs(box_continuity(self.u, self.v))))


def _check_eta(grid: Grid1D) -> None:
    if grid.kind != "lower-eta":
        raise GridError("a lower eta-grid is required")


def _check_decay(f: np.ndarray, grid: Grid1D, tail_tol: float, what: str) -> None:
    scale = max(1.0, float(np.max(np.abs(f))))
    if _tail_scale(f, grid) > tail_tol * scale:
        raise LayerError(f"{what} does not decay before eta_max")


def zero_mode_solve(f0: np.ndarray, grid: Grid1D, tail_tol: float = 1e-6) -> tuple[np.ndarray, float]:
    """Mean mode ``u0(eta) = int_0^eta int_s^inf f0`` and its far value.

    Nested midpoint quadrature: the inner integral lives on the cell faces
    and the outer sum is taken node to node.  This is the exact solution of
    the three-point discretisation of ``-u0'' = f0`` with ``u0(0) = 0`` and a
    mirrored ghost node at ``eta_max``, which keeps the mean mode consistent
    with :func:`nonzero_mode_solve`.
    """
    _check_eta(grid)
    f0 = np.asarray(f0)
    if f0.shape != (len(grid),):
        raise GridError("profile length does not match the grid")
    _check_decay(f0, grid, tail_tol, "mean-mode forcing")
    h = np.diff(grid.nodes)
    # control-volume widths around interior nodes; half cell at eta_max
    width = np.empty(len(grid))
    width[1:-1] = 0.5 * (h[:-1] + h[1:])
    width[-1] = 0.5 * h[-1]
    width[0] = 0.0
    contrib = f0 * width
    flux = np.cumsum(contrib[::-1])[::-1][1:]  # int over [eta_{j+1/2}, eta_max], j = 0..N-1
    u0 = np.zeros(len(grid), dtype=np.result_type(f0, float))
    u0[1:] = np.cumsum(flux * h)
    return u0, float(np.real(u0[-1]))


def nonzero_mode_solve(
    n: int, f: np.ndarray, A: float, grid: Grid1D, wall: complex = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode problem ``A i n eta u + A v - u'' = f``, ``v' = -i n u``.

    Boundary data ``u(0) = wall``, ``v(eta_max) = 0``, ``u'(eta_max) = 0``.
    Momentum is collocated at the nodes (mirrored ghost node at ``eta_max``)
    and continuity on a box scheme at cell midpoints, giving one sparse
    system of size ``2 N``.
    """
    _check_eta(grid)
    if n == 0:
        raise ValueError("the mean mode is handled by zero_mode_solve")
    if A <= 0:
        raise ValueError("A must be positive")
    f = np.asarray(f, dtype=complex)
    eta = grid.nodes
    N = len(grid) - 1
    h = np.diff(eta)
    ik = 1j * n
    # unknown layout: u_1..u_N -> 0..N-1 ; v_0..v_{N-1} -> N..2N-1
    rows, cols, vals = [], [], []
    rhs = np.zeros(2 * N, complex)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for j in range(1, N + 1):
        r = j - 1
        if j < N:
            hm, hp = h[j - 1], h[j]
            cm, cp = 2 / (hm * (hm + hp)), 2 / (hp * (hm + hp))
        else:
            hm = hp = h[-1]
            cm = cp = 1 / hm**2
        cc = -(cm + cp)
        add(r, j - 1, A * ik * eta[j] - cc)
        if j - 1 >= 1:
            add(r, j - 2, -cm)
        else:
            rhs[r] += cm * wall
        if j < N:
            add(r, j, -cp)
        else:
            add(r, j - 2, -cp)  # ghost u_{N+1} = u_{N-1}
        if j < N:
            add(r, N + j, A)
        rhs[r] += f[j]
    for j in range(N):
        r = N + j
        # (v_{j+1} - v_j)/h_j + i n (u_{j+1} + u_j)/2 = 0
        if j + 1 < N:
            add(r, N + j + 1, 1 / h[j])
        add(r, N + j, -1 / h[j])
        add(r, j, 0.5 * ik)
        if j >= 1:
            add(r, j - 1, 0.5 * ik)
        else:
            rhs[r] -= 0.5 * ik * wall
    mat = sp.csc_matrix((vals, (rows, cols)), shape=(2 * N, 2 * N), dtype=complex)
    sol = spla.spsolve(mat, rhs)
    u = np.empty(N + 1, complex)
    v = np.zeros(N + 1, complex)
    u[0] = wall
    u[1:] = sol[:N]
    v[:N] = sol[N:]
    if not np.all(np.isfinite(sol)):
        raise LayerError(f"singular lower-layer system for mode {n}")
    return u, v


@dataclass(frozen=True)
class LowerLift:
    """Wall lift ``u_L = kappa(eta) w(x)``, ``v_L = -w'(x) K(eta)`` with ``K = int_0^eta kappa``."""

    u: np.ndarray
    v: np.ndarray


def homogenize_lower(
    wall_value: np.ndarray, rhs: np.ndarray, A: float, grid: Grid1D
) -> tuple[np.ndarray, LowerLift]:
    """Forcing for homogeneous wall data and the lift that restores ``u(x, 0) = wall_value``."""
    _check_eta(grid)
    hom = Homogenizer("lower")
    eta = grid.nodes
    w = np.asarray(wall_value, dtype=float)
    wx = ddx(w)
    u_l = w[:, None] * hom.kappa(eta)[None, :]
    ux_l = wx[:, None] * hom.kappa(eta)[None, :]
    # trapezoidal v keeps the lift exactly consistent with the box continuity scheme
    v_l = -cumulative_trapezoid(ux_l, grid, start="last")
    uee_l = w[:, None] * hom.kappa(eta, 2)[None, :]
    lifted = np.asarray(rhs, dtype=float) - (A * eta[None, :] * ux_l + A * v_l - uee_l)
    return lifted, LowerLift(u_l, v_l)


def v_hat_from_continuity(u: StripField, tail_tol: float = 1e-6) -> StripField:
    """``v(x, eta) = int_eta^eta_max d_x u`` (vanishes at eta_max)."""
    _check_eta(u.grid)
    ux = u.ddx().physical
    _check_decay(ux, u.grid, tail_tol, "d_x of the u-layer")
    v = -cumulative_trapezoid(ux, u.grid, start="last")
    return StripField.from_physical(v, u.grid, name="v_hat", exponent=u.exponent + 2 / 3)


def lower_pressure(
    g: np.ndarray, grid: Grid1D, wall_v: np.ndarray | None = None, A: float = 0.0,
    tail_tol: float = 1e-6, mean_tol: float = 1e-10,
) -> StripField:
    """``p = -int_eta^inf g``, optionally plus ``A int_0^x v(x', 0) dx'``.

    The x-only part is needed when the layer problem is posed with
    ``v - v(x, 0)``; with the decaying v used throughout the package the
    outer pressure trace supplies it instead, so ``wall_v`` defaults to None.
    """
    _check_eta(grid)
    g = np.asarray(g, dtype=float)
    _check_decay(g, grid, tail_tol, "pressure source")
    p = cumulative_trapezoid(g, grid, start="last")
    if wall_v is not None:
        wall_v = np.asarray(wall_v, dtype=float)
        if abs(np.mean(wall_v)) > mean_tol * max(1.0, float(np.max(np.abs(wall_v)))):
            raise LayerError("wall trace of v must have zero x-mean")
        prim = antiderivative_x(wall_v)
        p = p + A * (prim - prim[0])[:, None]
    return StripField.from_physical(p, grid, name="p_hat")


def solve_lower_layer(
    forcing: np.ndarray,
    wall_value: np.ndarray,
    A: float,
    grid: Grid1D,
    exponent: float = 1.0,
    tail_tol: float = 1e-4,
) -> LowerLayer:
    """Solve the linear lower-layer problem mode by mode.

    Returns the u-layer with its far-field plateau still in place (recorded
    as ``far_constant``) and the decaying v-layer.
    """
    _check_eta(grid)
    forcing = np.asarray(forcing, dtype=float)
    n_x = forcing.shape[0]
    _check_decay(forcing, grid, tail_tol, "lower-layer forcing")
    lifted, lift = homogenize_lower(wall_value, forcing, A, grid)
    fm = dft_forward(lifted)
    k = wavenumbers(n_x)
    um = np.zeros_like(fm)
    vm = np.zeros_like(fm)
    um[0], _ = zero_mode_solve(fm[0].real, grid, tail_tol=np.inf)
    for i in range(1, len(k) - 1):
        um[i], vm[i] = nonzero_mode_solve(int(k[i]), fm[i], A, grid)
    u = dft_inverse(um, n_x) + lift.u
    v = dft_inverse(vm, n_x) + lift.v
    uf = StripField.from_physical(u, grid, name=f"u_hat^({exponent:g})", exponent=exponent)
    vf = StripField.from_physical(v, grid, name=f"v_hat^({exponent + 2/3:g})", exponent=exponent + 2 / 3)
    c = float(uf.modes[0, -1].real)
    return LowerLayer(uf.with_modes(uf.modes, far_constant=c), vf, c)
