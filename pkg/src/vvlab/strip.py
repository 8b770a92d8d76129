"""Discretisation core for the periodic strip T x [0, 1] and the layer half-lines.

Fields are periodic in x and stored either as real samples on the uniform
x-grid (shape ``(N_x, n)``) or as one-sided Fourier coefficients
``c_n, n = 0..N_x/2`` (shape ``(N_x//2 + 1, n)``) normalised so that
``c_0`` is the x-mean.  Negative modes are implied by ``c_{-n} = conj(c_n)``.
The Nyquist coefficient is kept at zero throughout.

Derivatives in x are spectral; derivatives in the wall-normal coordinate use
second-order finite differences (three-point stencils in the interior and
second-order one-sided stencils at the ends), on uniform or smoothly graded
nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

GridKind = Literal["periodic-x", "interval-y", "upper-zeta", "lower-eta"]

#: Nominal order of accuracy of every wall-normal difference operator.
FD_ORDER = 2


class GridError(ValueError):
    """Raised when grids do not match or a grid violates its invariants."""


def fd_weights(x0: float, xs: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at ``x0`` (Fornberg)."""
    n = len(xs)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Node set for one coordinate direction.

    ``bound`` is the truncation point of a half-line grid (``zeta_min`` or
    ``eta_max``) and ``None`` otherwise.
    """

    kind: GridKind
    nodes: np.ndarray
    bound: float | None = None
    spacing: str = "uniform"

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 3:
            raise GridError("a grid needs at least three nodes")
        if np.any(np.diff(nodes) <= 0):
            raise GridError("grid nodes must be strictly increasing")
        if self.kind == "periodic-x":
            n = len(nodes)
            if not np.allclose(nodes, 2 * np.pi * np.arange(n) / n, atol=1e-14):
                raise GridError("periodic grid must be uniform on [0, 2pi)")
        elif self.kind == "interval-y":
            if nodes[0] != 0.0 or nodes[-1] != 1.0:
                raise GridError("interval grid must include both endpoints 0 and 1")
        elif self.kind == "upper-zeta":
            if nodes[-1] != 0.0 or self.bound is None or nodes[0] != self.bound:
                raise GridError("upper half-line grid must run from zeta_min to the wall 0")
        elif self.kind == "lower-eta":
            if nodes[0] != 0.0 or self.bound is None or nodes[-1] != self.bound:
                raise GridError("lower half-line grid must run from the wall 0 to eta_max")
        else:  # pragma: no cover - Literal guards this
            raise GridError(f"unknown grid kind {self.kind!r}")

    # constructors -------------------------------------------------------
    @classmethod
    def periodic_x(cls, n_x: int) -> "Grid1D":
        check_nx(n_x)
        return cls("periodic-x", 2 * np.pi * np.arange(n_x) / n_x)

    @classmethod
    def interval_y(cls, n_y: int, grading: float = 0.0) -> "Grid1D":
        """Interval grid with ``n_y`` cells; ``grading > 0`` clusters nodes at both walls."""
        s = np.linspace(0.0, 1.0, n_y + 1)
        if grading > 0:
            y = 0.5 * (1.0 + np.tanh(grading * (2 * s - 1)) / np.tanh(grading))
            y[0], y[-1] = 0.0, 1.0
            return cls("interval-y", y, spacing=f"tanh({grading:g})")
        return cls("interval-y", s)

    @classmethod
    def upper_zeta(cls, n: int, zeta_min: float = -40.0) -> "Grid1D":
        if zeta_min >= 0:
            raise GridError("zeta_min must be negative")
        z = np.linspace(zeta_min, 0.0, n + 1)
        z[-1] = 0.0
        return cls("upper-zeta", z, bound=float(zeta_min))

    @classmethod
    def lower_eta(cls, n: int, eta_max: float = 40.0) -> "Grid1D":
        if eta_max <= 0:
            raise GridError("eta_max must be positive")
        e = np.linspace(0.0, eta_max, n + 1)
        e[-1] = eta_max
        return cls("lower-eta", e, bound=float(eta_max))

    # properties ---------------------------------------------------------
    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def h(self) -> float:
        """Largest node spacing."""
        return float(np.max(np.diff(self.nodes)))

    @property
    def uniform(self) -> bool:
        d = np.diff(self.nodes)
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=0))

    @cached_property
    def d1(self) -> sp.csr_matrix:
        return _fd_matrix(self.nodes, 1)

    @cached_property
    def d2(self) -> sp.csr_matrix:
        return _fd_matrix(self.nodes, 2)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        d = np.diff(self.nodes)
        w = np.zeros(len(self.nodes))
        w[:-1] += d / 2
        w[1:] += d / 2
        return w

    def same_as(self, other: "Grid1D") -> bool:
        return (
            self is other
            or (self.kind == other.kind and len(self) == len(other) and np.array_equal(self.nodes, other.nodes))
        )


def _fd_matrix(x: np.ndarray, m: int) -> sp.csr_matrix:
    n = len(x)
    rows, cols, vals = [], [], []
    for i in range(n):
        if i == 0:
            idx = np.arange(0, m + 2)
        elif i == n - 1:
            idx = np.arange(n - m - 2, n)
        else:
            idx = np.array([i - 1, i, i + 1])
        w = fd_weights(x[i], x[idx], m)
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def require_same_grid(a: Grid1D, b: Grid1D) -> None:
    if not a.same_as(b):
        raise GridError(f"grid mismatch: {a.kind}[{len(a)}] vs {b.kind}[{len(b)}]")


# ---------------------------------------------------------------------------
# Fourier transform in x
# ---------------------------------------------------------------------------

def check_nx(n_x: int) -> None:
    if int(n_x) != n_x or n_x < 4 or n_x % 2:
        raise GridError(f"N_x must be an even integer >= 4, got {n_x}")


def dft_forward(samples: np.ndarray, axis: int = 0) -> np.ndarray:
    """One-sided Fourier coefficients of real samples on the periodic grid.

    ``c_n = (1/N) sum_j u_j exp(-i n x_j)`` for ``n = 0..N/2``, so that
    ``c_0`` is the x-mean and ``u(x) = sum_{|n|<=N/2} c_n exp(i n x)``.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[axis]
    check_nx(n)
    return np.fft.rfft(samples, axis=axis) / n


def dft_inverse(coeffs: np.ndarray, n_x: int, axis: int = 0) -> np.ndarray:
    """Real samples from one-sided coefficients (inverse of :func:`dft_forward`)."""
    check_nx(n_x)
    return np.fft.irfft(np.asarray(coeffs) * n_x, n=n_x, axis=axis)


def wavenumbers(n_x: int) -> np.ndarray:
    """Wavenumbers ``0..N/2`` matching :func:`dft_forward`; Nyquist entry zeroed."""
    k = np.arange(n_x // 2 + 1, dtype=float)
    k[-1] = 0.0
    return k


def full_spectrum(coeffs: np.ndarray, n_x: int) -> np.ndarray:
    """Two-sided coefficient array ``c_n, n = -N/2+1..N/2`` in FFT order."""
    c = np.fft.fft(dft_inverse(coeffs, n_x), axis=0) / n_x
    return c


def ddx(samples: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral x-derivative of real samples along axis 0 (Nyquist mode dropped)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    c = np.fft.rfft(samples, axis=0)
    k = wavenumbers(n).reshape((-1,) + (1,) * (samples.ndim - 1))
    return np.fft.irfft(c * (1j * k) ** order, n=n, axis=0)


def antiderivative_x(samples: np.ndarray) -> np.ndarray:
    """Zero-mean periodic x-antiderivative of a zero-mean field (mode-wise ``c_n/(i n)``)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    c = np.fft.rfft(samples, axis=0)
    k = wavenumbers(n).reshape((-1,) + (1,) * (samples.ndim - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(k != 0, c / (1j * np.where(k != 0, k, 1.0)), 0.0)
    return np.fft.irfft(out, n=n, axis=0)


def dealias_nyquist(samples: np.ndarray) -> np.ndarray:
    """Remove the Nyquist component of real samples along axis 0."""
    n = samples.shape[0]
    c = np.fft.rfft(samples, axis=0)
    c[-1] = 0.0
    return np.fft.irfft(c, n=n, axis=0)


def quad_x(samples: np.ndarray, axis: int = 0) -> np.ndarray:
    """Integral over one period by the (spectrally accurate) trapezoid rule."""
    samples = np.asarray(samples)
    return 2 * np.pi * np.mean(samples, axis=axis)


def quad_y(values: np.ndarray, grid: Grid1D, weight_exponent: float = 0.0, axis: int = -1) -> np.ndarray:
    """Trapezoid integral over ``grid`` of ``values * y**weight_exponent``."""
    values = np.asarray(values)
    if values.shape[axis] != len(grid):
        raise GridError("profile length does not match the grid")
    w = grid.trapezoid_weights
    if weight_exponent:
        with np.errstate(divide="ignore"):
            w = w * np.where(grid.nodes > 0, np.abs(grid.nodes) ** weight_exponent, 0.0)
    return np.tensordot(values, w, axes=([axis], [0]))


def ddy(values: np.ndarray, grid: Grid1D, order: int = 1, axis: int = -1) -> np.ndarray:
    """Second-order finite-difference derivative along ``axis``."""
    values = np.asarray(values)
    if values.shape[axis] != len(grid):
        raise GridError("profile length does not match the grid")
    mat = grid.d1 if order == 1 else grid.d2 if order == 2 else None
    if mat is None:
        raise ValueError("only first and second derivatives are provided")
    moved = np.moveaxis(values, axis, 0)
    shape = moved.shape
    out = mat @ moved.reshape(shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(shape), 0, axis)


def cumulative_trapezoid(values: np.ndarray, grid: Grid1D, start: Literal["first", "last"] = "first") -> np.ndarray:
    """Running trapezoid integral along the last axis, anchored at the first or last node."""
    d = np.diff(grid.nodes)
    inc = 0.5 * (values[..., 1:] + values[..., :-1]) * d
    out = np.zeros(values.shape, dtype=np.result_type(values, float))
    out[..., 1:] = np.cumsum(inc, axis=-1)
    if start == "last":
        out = out - out[..., -1:]
    return out


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModeProfile:
    """Complex profile of a single Fourier mode on a wall-normal grid."""

    n: int
    values: np.ndarray
    grid: Grid1D

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (len(self.grid),):
            raise GridError("profile length does not match the grid")
        object.__setattr__(self, "values", v)

    def conj_pair(self) -> "ModeProfile":
        return ModeProfile(-self.n, np.conj(self.values), self.grid)


@dataclass(frozen=True, eq=False)
class StripField:
    """Real field stored by one-sided Fourier coefficients on a wall-normal grid.

    ``modes[n]`` is the profile of ``exp(i n x)`` for ``n = 0..N_x/2``; the
    negative modes follow from the reality pairing.  The same container is used
    for layer fields, where ``grid`` is a half-line grid and ``far_constant``
    records the value the u-type profile settles to away from the wall.
    """

    modes: np.ndarray
    grid: Grid1D
    n_x: int
    name: str = ""
    exponent: float = 0.0
    far_constant: float = 0.0

    def __post_init__(self) -> None:
        check_nx(self.n_x)
        m = np.asarray(self.modes, dtype=complex)
        if m.shape != (self.n_x // 2 + 1, len(self.grid)):
            raise GridError(f"mode array shape {m.shape} does not match N_x={self.n_x}, grid={len(self.grid)}")
        m = m.copy()
        m[0] = m[0].real
        m[-1] = 0.0
        m.setflags(write=False)
        object.__setattr__(self, "modes", m)

    @classmethod
    def from_physical(cls, samples: np.ndarray, grid: Grid1D, **meta) -> "StripField":
        samples = np.asarray(samples, dtype=float)
        return cls(dft_forward(samples, axis=0), grid, samples.shape[0], **meta)

    @classmethod
    def zeros(cls, grid: Grid1D, n_x: int, **meta) -> "StripField":
        return cls(np.zeros((n_x // 2 + 1, len(grid)), complex), grid, n_x, **meta)

    @cached_property
    def physical(self) -> np.ndarray:
        out = dft_inverse(self.modes, self.n_x)
        out.setflags(write=False)
        return out

    def profile(self, n: int) -> ModeProfile:
        if abs(n) > self.n_x // 2:
            raise IndexError(f"mode {n} outside |n| <= {self.n_x // 2}")
        v = self.modes[abs(n)]
        return ModeProfile(n, v if n >= 0 else np.conj(v), self.grid)

    def evaluate(self, x: np.ndarray | float) -> np.ndarray:
        """Truncated Fourier sum at arbitrary abscissae, for every grid node."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = np.arange(self.modes.shape[0])
        w = np.where(n == 0, 1.0, 2.0)
        e = np.exp(1j * np.outer(x, n)) * w
        return (e @ self.modes).real

    def ddx(self) -> "StripField":
        k = wavenumbers(self.n_x)[:, None]
        return self.with_modes(1j * k * self.modes, name=f"d_x {self.name}")

    def ddy(self, order: int = 1) -> "StripField":
        return self.with_modes(ddy(self.modes, self.grid, order), name=f"d_y {self.name}")

    def with_modes(self, modes: np.ndarray, **meta) -> "StripField":
        kw = dict(name=self.name, exponent=self.exponent, far_constant=self.far_constant)
        kw.update(meta)
        return StripField(modes, self.grid, self.n_x, **kw)

    def __add__(self, other: "StripField") -> "StripField":
        require_same_grid(self.grid, other.grid)
        return self.with_modes(self.modes + other.modes)

    def __sub__(self, other: "StripField") -> "StripField":
        require_same_grid(self.grid, other.grid)
        return self.with_modes(self.modes - other.modes)

    def scale(self, c: float) -> "StripField":
        return self.with_modes(c * self.modes, far_constant=c * self.far_constant)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.physical)))


def box_continuity(u: StripField, v: StripField) -> np.ndarray:
    """Cell-midpoint residual ``(v_{j+1} - v_j)/h_j + (d_x u_{j+1} + d_x u_j)/2``.

    This is the discrete continuity equation used by every layer solver, so
    it vanishes to rounding error for their output.
    """
    require_same_grid(u.grid, v.grid)
    ux = u.ddx().physical
    vp = v.physical
    h = np.diff(u.grid.nodes)
    return np.diff(vp, axis=1) / h + 0.5 * (ux[:, 1:] + ux[:, :-1])


#: Layer fields share the strip container; the grid kind tells them apart.
LayerField = StripField


# ---------------------------------------------------------------------------
# Per-mode Helmholtz problem
# ---------------------------------------------------------------------------

def solve_mode_helmholtz(
    n: int,
    rhs: ModeProfile | np.ndarray,
    bc_bottom: complex,
    bc_top: complex,
    grid: Grid1D | None = None,
) -> ModeProfile:
    """Solve ``w'' - n^2 w = rhs`` on the interval with Dirichlet data at both ends."""
    if isinstance(rhs, ModeProfile):
        if grid is not None:
            require_same_grid(grid, rhs.grid)
        grid = rhs.grid
        r = rhs.values
    else:
        if grid is None:
            raise GridError("a grid is required when rhs is a plain array")
        r = np.asarray(rhs, dtype=complex)
        if r.shape != (len(grid),):
            raise GridError("rhs length does not match the grid")
    size = len(grid)
    a = (grid.d2 - n * n * sp.identity(size)).tolil()
    b = r.astype(complex).copy()
    a[0, :] = 0.0
    a[0, 0] = 1.0
    a[size - 1, :] = 0.0
    a[size - 1, size - 1] = 1.0
    b[0] = bc_bottom
    b[-1] = bc_top
    w = spla.spsolve(a.tocsc().astype(complex), b)
    return ModeProfile(n, w, grid)


# ---------------------------------------------------------------------------
# Hardy inequalities
# ---------------------------------------------------------------------------

HardyVariant = Literal["hardy1", "hardy2-lower", "hardy2-upper"]


def hardy_check(
    f: np.ndarray,
    grid: Grid1D,
    kappa: float = 0.0,
    variant: HardyVariant = "hardy1",
    df: np.ndarray | None = None,
    atol: float = 1e-12,
) -> tuple[float, float]:
    """Both sides of a one-dimensional Hardy inequality on ``[0, 1]``.

    ``hardy1``:        ``int y^k f^2        <= 4/(k+1)^2 int y^(k+2) f'^2``, needs ``f(1)=0``
    ``hardy2-lower``:  ``int f^2/y^2        <= 4 int f'^2``, needs ``f(0)=f(1)=0``
    ``hardy2-upper``:  ``int f^2/(1-y)^2    <= 4 int f'^2``, needs ``f(0)=f(1)=0``

    The derivative ``df`` may be supplied; otherwise it is taken by finite
    differences.  The removable singularities of the hardy2 integrands are
    filled with their limits ``f'(0)^2`` and ``f'(1)^2``.
    """
    f = np.asarray(f, dtype=float)
    y = grid.nodes
    if grid.kind != "interval-y":
        raise GridError("Hardy checks live on the interval grid")
    if f.shape != y.shape:
        raise GridError("profile length does not match the grid")
    scale = max(1.0, float(np.max(np.abs(f))))
    if abs(f[-1]) > atol * scale:
        raise ValueError("Hardy inequality requires f(1) = 0")
    if variant != "hardy1" and abs(f[0]) > atol * scale:
        raise ValueError("this Hardy variant requires f(0) = 0")
    if not -1.0 < kappa < 1.0:
        raise ValueError("weight exponent must lie in (-1, 1)")
    d = ddy(f, grid) if df is None else np.asarray(df, dtype=float)
    w = grid.trapezoid_weights
    if variant == "hardy1":
        with np.errstate(divide="ignore", invalid="ignore"):
            wk = np.where(y > 0, y**kappa, 1.0 if kappa == 0 else 0.0)
        lhs = float(np.sum(w * wk * f**2))
        rhs = float(4.0 / (kappa + 1.0) ** 2 * np.sum(w * y ** (kappa + 2) * d**2))
        return lhs, rhs
    if variant == "hardy2-lower":
        dist = y
        end = 0
    elif variant == "hardy2-upper":
        dist = 1.0 - y
        end = -1
    else:
        raise ValueError(f"unknown Hardy variant {variant!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(dist > 0, f / np.where(dist > 0, dist, 1.0), 0.0)
    q[end] = d[end] * (1 if end == 0 else -1)
    lhs = float(np.sum(w * q**2))
    rhs = float(4.0 * np.sum(w * d**2))
    return lhs, rhs
