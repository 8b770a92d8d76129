"""Steady Navier-Stokes on the periodic strip with viscosity eps^2.

Unknowns are Fourier modes in x (Nyquist mode dropped) and nodal values in
y.  For every mode ``n >= 1`` the discrete system holds x- and y-momentum at
interior nodes and continuity at every node (one-sided second-order
differences at the walls), with u and v prescribed at the walls and the
pressure free at all nodes.  The mean mode carries only ``u_0``: ``v_0``
vanishes by continuity and the mean pressure follows from the mean
y-momentum balance after the solve, with the gauge ``p(0, 1) = 0``.

Newton's method is run with GMRES on the exact Jacobian action; the
preconditioner is the Oseen operator about the current x-mean velocity,
which is block diagonal in the Fourier modes and factorised mode by mode.
For the Stokes problem that operator is exact, so one block solve suffices.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from ._krylov import ModeFactors, SolverError, gmres_solve
from .problem import ProblemSpec
from .strip import (
    Grid1D,
    StripField,
    cumulative_trapezoid,
    ddx,
    ddy,
    dft_forward,
    dft_inverse,
    quad_x,
    quad_y,
    wavenumbers,
)

log = logging.getLogger(__name__)


class ResolutionWarning(UserWarning):
    """The y-grid is too coarse for the requested eps."""


@dataclass
class NSState:
    """Discrete solution with its Newton history."""

    u: StripField
    v: StripField
    p: StripField
    eps: float
    residual_history: list[float] = field(default_factory=list)
    step_norms: list[float] = field(default_factory=list)
    converged: bool = True
    gmres_products: int = 0
    seconds: float = 0.0

    @property
    def iterations(self) -> int:
        return max(len(self.residual_history) - 1, 0)

    @property
    def grid(self) -> Grid1D:
        return self.u.grid

    def divergence(self) -> float:
        return float(np.max(np.abs(self.u.ddx().physical + self.v.ddy().physical)))


class _System:
    """Packing, residual, Jacobian action and preconditioner for one (grid, eps)."""

    def __init__(self, grid: Grid1D, n_x: int, eps: float, wall_u: np.ndarray,
                 f_u: np.ndarray | None = None, f_v: np.ndarray | None = None):
        self.grid = grid
        self.n_x = n_x
        self.eps2 = eps * eps
        self.M = n_x // 2
        self.N = len(grid) - 1
        self.I = self.N - 1
        self.L = 2 * self.I + self.N + 1
        self.k = wavenumbers(n_x)
        self.ik = (1j * self.k)[:, None]
        self.wall = dft_forward(np.asarray(wall_u, dtype=float))
        shape = (n_x, len(grid))
        self.Fu = dft_forward(np.zeros(shape) if f_u is None else f_u)
        self.Fv = dft_forward(np.zeros(shape) if f_v is None else f_v)
        self.D1 = grid.d1
        self.D2 = grid.d2
        self.size = self.I + 2 * (self.M - 1) * self.L

    # packing -------------------------------------------------------------
    def pack(self, a0: np.ndarray, blocks: np.ndarray) -> np.ndarray:
        return np.concatenate([np.real(a0), np.ascontiguousarray(blocks).view(float).ravel()])

    def split(self, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a0 = vec[: self.I]
        blocks = np.ascontiguousarray(vec[self.I:]).view(complex).reshape(self.M - 1, self.L)
        return a0, blocks

    def modes(self, vec: np.ndarray, with_bc: bool = True):
        """Mode arrays ``U, V, P`` of shape ``(N_x/2 + 1, N + 1)``."""
        a0, b = self.split(vec)
        I, N = self.I, self.N
        shape = (self.M + 1, N + 1)
        U = np.zeros(shape, complex)
        V = np.zeros(shape, complex)
        P = np.zeros(shape, complex)
        U[0, 1:N] = a0
        U[1 : self.M, 1:N] = b[:, :I]
        V[1 : self.M, 1:N] = b[:, I : 2 * I]
        P[1 : self.M, :] = b[:, 2 * I :]
        if with_bc:
            U[: self.M, N] = self.wall[: self.M]
        return U, V, P

    def vector(self, U: np.ndarray, V: np.ndarray, P: np.ndarray) -> np.ndarray:
        N = self.N
        b = np.concatenate([U[1 : self.M, 1:N], V[1 : self.M, 1:N], P[1 : self.M, :]], axis=1)
        return self.pack(U[0, 1:N].real, b)

    def _pack_residual(self, Rx, Ry, C) -> np.ndarray:
        N = self.N
        b = np.concatenate([Rx[1 : self.M, 1:N], Ry[1 : self.M, 1:N], C[1 : self.M, :]], axis=1)
        return self.pack(Rx[0, 1:N].real, b)

    # operators -------------------------------------------------------------
    def _dy(self, A: np.ndarray, order: int = 1) -> np.ndarray:
        return ddy(A, self.grid, order)

    def _phys(self, A: np.ndarray) -> np.ndarray:
        return dft_inverse(A, self.n_x)

    def _linear(self, U, V, P):
        lapU = self._dy(U, 2) - self.k[:, None] ** 2 * U
        lapV = self._dy(V, 2) - self.k[:, None] ** 2 * V
        Lx = self.ik * P - self.eps2 * lapU
        Ly = self._dy(P) - self.eps2 * lapV
        C = self.ik * U + self._dy(V)
        return Lx, Ly, C

    def convective(self, U, V):
        u, v = self._phys(U), self._phys(V)
        ux, vx = self._phys(self.ik * U), self._phys(self.ik * V)
        uy, vy = self._phys(self._dy(U)), self._phys(self._dy(V))
        return dft_forward(u * ux + v * uy), dft_forward(u * vx + v * vy)

    def residual(self, vec: np.ndarray, convection: bool = True) -> np.ndarray:
        U, V, P = self.modes(vec)
        Lx, Ly, C = self._linear(U, V, P)
        Rx, Ry = Lx - self.Fu, Ly - self.Fv
        if convection:
            Nu, Nv = self.convective(U, V)
            Rx, Ry = Rx + Nu, Ry + Nv
        return self._pack_residual(Rx, Ry, C)

    def jvp(self, vec: np.ndarray, dvec: np.ndarray, convection: bool = True) -> np.ndarray:
        dU, dV, dP = self.modes(dvec, with_bc=False)
        Lx, Ly, C = self._linear(dU, dV, dP)
        if convection:
            U, V, _ = self.modes(vec)
            u, v, du, dv = (self._phys(a) for a in (U, V, dU, dV))
            ux, vx, dux, dvx = (self._phys(self.ik * a) for a in (U, V, dU, dV))
            uy, vy, duy, dvy = (self._phys(self._dy(a)) for a in (U, V, dU, dV))
            Lx = Lx + dft_forward(du * ux + u * dux + dv * uy + v * duy)
            Ly = Ly + dft_forward(du * vx + u * dvx + dv * vy + v * dvy)
        return self._pack_residual(Lx, Ly, C)

    def l2(self, res: np.ndarray) -> float:
        """L2 norm over the strip of the residual fields behind a packed vector (Parseval in x)."""
        a0, b = self.split(res)
        w = self.grid.trapezoid_weights
        wi = w[1 : self.N]
        wb = np.concatenate([wi, wi, w])
        total = np.sum(wi * a0**2) + 2.0 * np.sum(wb[None, :] * np.abs(b) ** 2)
        return float(np.sqrt(2 * np.pi * total))

    # preconditioner -----------------------------------------------------------
    def factors(self, U0: np.ndarray | None) -> tuple[ModeFactors, sp.spmatrix]:
        I, N = self.I, self.N
        inner = slice(1, N)
        D1 = sp.csr_matrix(self.D1)
        D2 = sp.csr_matrix(self.D2)
        D2ii = D2[inner, inner]
        eye = sp.identity(I, format="csr")
        if U0 is None:
            U0 = np.zeros(N + 1)
        U0y = D1 @ U0
        mats = []
        for n in range(1, self.M):
            ikn = 1j * n
            A = sp.diags(ikn * U0[inner]) - self.eps2 * (D2ii - n * n * eye)
            Pin = sp.csr_matrix((ikn * np.ones(I), (np.arange(I), np.arange(1, N))), shape=(I, N + 1))
            Cu = sp.csr_matrix((ikn * np.ones(I), (np.arange(1, N), np.arange(I))), shape=(N + 1, I))
            blk = sp.bmat([
                [A, sp.diags(U0y[inner]), Pin],
                [None, A, D1[inner, :]],
                [Cu, D1[:, inner], None],
            ], format="csc")
            mats.append(blk)
        mean = (-self.eps2 * D2ii).tocsc()
        return ModeFactors.build(mats), sp.linalg.splu(mean)

    def make_preconditioner(self, U0: np.ndarray | None):
        fac, mean = self.factors(U0)

        def apply(vec: np.ndarray) -> np.ndarray:
            a0, b = self.split(vec)
            x0 = mean.solve(np.asarray(a0, dtype=float))
            out = np.empty_like(b)
            for i in range(self.M - 1):
                out[i] = fac.solve(i, b[i])
            return self.pack(x0, out)

        return apply

    # mean pressure -------------------------------------------------------------
    def mean_pressure(self, U, V, P) -> np.ndarray:
        """Mean pressure from the mean y-momentum balance, gauge ``p(0, 1) = 0``."""
        _, Nv = self.convective(U, V)
        g0 = (self.Fv[0] - Nv[0]).real
        prim = cumulative_trapezoid(g0, self.grid, start="last")  # -int_y^1 g0
        others = 2.0 * np.sum(P[1:, -1].real)
        return prim - others


def _fields(sys_: _System, vec: np.ndarray, eps: float, convection: bool = True):
    U, V, P = sys_.modes(vec)
    P = P.copy()
    P[0] = sys_.mean_pressure(U, V, P) if convection else _stokes_mean_pressure(sys_, P)
    g = sys_.grid
    mk = lambda A, name: StripField(A, g, sys_.n_x, name=name)
    return mk(U, "u"), mk(V, "v"), mk(P, "p")


def _stokes_mean_pressure(sys_: _System, P: np.ndarray) -> np.ndarray:
    prim = cumulative_trapezoid(sys_.Fv[0].real, sys_.grid, start="last")
    return prim - 2.0 * np.sum(P[1:, -1].real)


def check_resolution(grid: Grid1D, eps: float, strict: bool = False) -> bool:
    """Warn (or raise) when ``N_y < 8/eps``."""
    ok = (len(grid) - 1) >= 8.0 / eps
    if not ok:
        msg = f"N_y={len(grid) - 1} does not resolve a layer of width eps={eps:g} (need >= {8 / eps:.0f})"
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, ResolutionWarning, stacklevel=3)
    return ok


def stokes_solve(eps: float, f_u: np.ndarray, f_v: np.ndarray, grid: Grid1D) -> NSState:
    """``-eps^2 Lap u + p_x = f_u``, ``-eps^2 Lap v + p_y = f_v``, ``div u = 0``, zero wall data."""
    f_u = np.asarray(f_u, dtype=float)
    n_x = f_u.shape[0]
    t0 = time.perf_counter()
    s = _System(grid, n_x, eps, np.zeros(n_x), f_u, f_v)
    zero = np.zeros(s.size)
    rhs = -s.residual(zero, convection=False)
    x = s.make_preconditioner(None)(rhs)
    res = s.l2(s.residual(x, convection=False))
    u, v, p = _fields(s, x, eps, convection=False)
    return NSState(u, v, p, eps, [s.l2(rhs), res], [float(np.linalg.norm(x))], True, 0,
                   time.perf_counter() - t0)


def solve_steady_ns(
    spec: ProblemSpec | None,
    eps: float,
    guess: "NSState | object | None" = None,
    grid: Grid1D | None = None,
    n_x: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 30,
    forcing: tuple[np.ndarray, np.ndarray] | None = None,
    wall_u: np.ndarray | None = None,
    gmres_rtol: float = 1e-12,
) -> NSState:
    """Newton-GMRES for the steady equations with ``u(x, 1) = alpha + delta f``.

    ``guess`` may be an :class:`NSState`, a composite solution (anything
    with ``u``, ``v``, ``p`` strip fields on the same grid) or None (zero
    interior values).  Steps are halved while the residual grows.  On
    failure the best iterate is returned with ``converged = False``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if grid is None:
        grid = spec.disc.y_grid() if spec is not None else guess.u.grid
    if n_x is None:
        n_x = spec.disc.n_x if spec is not None else guess.u.n_x
    check_resolution(grid, eps)
    x_nodes = 2 * np.pi * np.arange(n_x) / n_x
    if wall_u is None:
        wall_u = spec.wall(x_nodes) if spec is not None else np.zeros(n_x)
    f_u, f_v = forcing if forcing is not None else (None, None)
    t0 = time.perf_counter()
    s = _System(grid, n_x, eps, wall_u, f_u, f_v)
    if guess is None:
        vec = np.zeros(s.size)
    else:
        vec = s.vector(guess.u.modes, guess.v.modes, guess.p.modes)
    res = s.residual(vec)
    r = s.l2(res)
    history, steps = [r], []
    products = 0
    best = (r, vec)
    converged = r < tol
    for it in range(max_iter):
        if converged:
            break
        U, _, _ = s.modes(vec)
        pre = s.make_preconditioner(U[0].real)
        try:
            dx, k = gmres_solve(lambda d: s.jvp(vec, d), pre, -res, rtol=gmres_rtol, maxiter=30)
        except SolverError as exc:
            log.warning("linear solve failed: %s", exc)
            break
        products += k
        lam = 1.0
        while True:
            trial = vec + lam * dx
            rt = s.residual(trial)
            rn = s.l2(rt)
            if rn < r or lam < 1e-3:
                break
            lam *= 0.5
        if rn >= r and lam < 1e-3:
            log.warning("Newton stalled at residual %.3e", r)
            break
        vec, res, r = trial, rt, rn
        history.append(r)
        steps.append(float(lam * np.sqrt(np.mean(dx**2))))
        if r < best[0]:
            best = (r, vec)
        converged = r < tol
        log.debug("Newton %d: residual %.3e (step %.2g)", it + 1, r, lam)
    if not converged:
        vec = best[1]
    u, v, p = _fields(s, vec, eps)
    return NSState(u, v, p, eps, history, steps, converged, products, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorReport:
    """Distances between the discrete solution and the asymptotic prediction."""

    err_leading: float
    v_max: float
    err_composite: float | None
    weighted: dict[str, float]
    energy: float

    def as_dict(self) -> dict[str, float | None]:
        out = {"err_leading": self.err_leading, "v_max": self.v_max,
               "err_composite": self.err_composite, "energy": self.energy}
        out.update({f"weighted_{k}": v for k, v in self.weighted.items()})
        return out


def leading_prediction(y: np.ndarray, A: float, u_p0: StripField, eps: float) -> np.ndarray:
    """``A y + u_p^(0)(x, (y - 1)/eps)``; the layer is taken as 0 beyond its grid."""
    zeta = (np.asarray(y) - 1.0) / eps
    nodes = u_p0.grid.nodes
    out = np.zeros((u_p0.n_x, len(zeta)))
    inside = zeta >= nodes[0]
    out[:, inside] = CubicSpline(nodes, u_p0.physical, axis=1)(zeta[inside])
    return A * np.asarray(y)[None, :] + out


def _l2(a: np.ndarray, grid: Grid1D) -> float:
    return float(np.sqrt(max(quad_y(quad_x(a**2), grid), 0.0)))


def energy_norm(du: np.ndarray, dv: np.ndarray, grid: Grid1D, eps: float) -> tuple[float, dict[str, float]]:
    """Energy norm of a velocity pair sampled on the strip grid.

    ``||(u, v)||_E^2 = ||(sqrt(y) u_x, sqrt(y) v_x, eps sqrt(y) u_y, eps u_0')||^2
    + eps^4 ||(u_xx, v_xx, v_xy, u_xy)||^2`` with ``u_0`` the x-mean of u.
    """
    y = grid.nodes[None, :]
    sy = np.sqrt(y)
    ux, vx = ddx(du), ddx(dv)
    uy = ddy(du, grid)
    u0y = ddy(np.mean(du, axis=0), grid)
    parts = {
        "sqrt_y_u_x": _l2(sy * ux, grid),
        "sqrt_y_v_x": _l2(sy * vx, grid),
        "eps_sqrt_y_u_y": eps * _l2(sy * uy, grid),
        "eps_u0_y": eps * float(np.sqrt(2 * np.pi * quad_y(u0y**2, grid))),
        "u_xx": _l2(ddx(du, 2), grid),
        "v_xx": _l2(ddx(dv, 2), grid),
        "v_xy": _l2(ddy(vx, grid), grid),
        "u_xy": _l2(ddy(ux, grid), grid),
    }
    first = sum(parts[k] ** 2 for k in ("sqrt_y_u_x", "sqrt_y_v_x", "eps_sqrt_y_u_y", "eps_u0_y"))
    second = sum(parts[k] ** 2 for k in ("u_xx", "v_xx", "v_xy", "u_xy"))
    return float(np.sqrt(first + eps**4 * second)), parts


def error_norms(state: NSState, A: float, u_p0: StripField, composite=None) -> ErrorReport:
    """Distances of the discrete solution from the leading prediction and the composite."""
    y = state.grid.nodes
    u = state.u.physical
    v = state.v.physical
    lead = leading_prediction(y, A, u_p0, state.eps)
    err_lead = float(np.max(np.abs(u - lead)))
    err_comp = None
    if composite is not None:
        du = u - composite.u.physical
        dv = v - composite.v.physical
        err_comp = float(np.max(np.abs(du)))
    else:
        du, dv = u - lead, v
    energy, parts = energy_norm(du, dv, state.grid, state.eps)
    return ErrorReport(err_lead, float(np.max(np.abs(v))), err_comp, parts, energy)


def stream_vorticity(state: NSState) -> tuple[StripField, StripField]:
    """Stream function ``phi = int_1^y u`` and vorticity ``omega = v_x - u_y``."""
    g = state.grid
    phi = cumulative_trapezoid(state.u.physical, g, start="last")
    omega = state.v.ddx().physical - state.u.ddy().physical
    return StripField.from_physical(phi, g, name="phi"), StripField.from_physical(omega, g, name="omega")


def sobolev_embedding_check(u: StripField, wall_tol: float = 1e-12) -> tuple[float, float]:
    """``(||u||_inf, ||u_x|| + ||u_y|| + ||u_xy||)`` for a field vanishing at both walls."""
    phys = u.physical
    if max(np.max(np.abs(phys[:, 0])), np.max(np.abs(phys[:, -1]))) > wall_tol:
        raise ValueError("the embedding needs a field that vanishes at y = 0 and y = 1")
    g = u.grid
    ux = ddx(phys)
    uy = ddy(phys, g)
    uxy = ddy(ux, g)
    return float(np.max(np.abs(phys))), _l2(ux, g) + _l2(uy, g) + _l2(uxy, g)
