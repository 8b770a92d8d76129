"""Navier-Stokes solver: Stokes and Newton solves, manufactured rates, error norms and diagnostics."""

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vvlab.composite import assemble_composite
from vvlab.hierarchy import build_hierarchy
from vvlab.ns import (
    ResolutionWarning,
    check_resolution,
    energy_norm,
    error_norms,
    leading_prediction,
    sobolev_embedding_check,
    solve_steady_ns,
    stokes_solve,
    stream_vorticity,
)
from vvlab.problem import make_spec
from vvlab.strip import Grid1D, StripField, ddx, quad_x, quad_y
from vvlab.verify import EMBEDDING_C, random_wall_zero_field

from conftest import rate

PI = np.pi
NX = 16


def manufactured(grid, n_x=NX):
    """Stream function sin x sin^2(pi y), pressure cos x cos(pi y), with first and second derivatives."""
    x = (2 * PI * np.arange(n_x) / n_x)[:, None]
    y = grid.nodes[None, :]
    s, c = np.sin(x), np.cos(x)
    S = {
        "psi": s * np.sin(PI * y) ** 2,
        "u": PI * s * np.sin(2 * PI * y),
        "ux": PI * c * np.sin(2 * PI * y),
        "uy": 2 * PI**2 * s * np.cos(2 * PI * y),
        "lapu": -(PI + 4 * PI**3) * s * np.sin(2 * PI * y),
        "v": -c * np.sin(PI * y) ** 2,
        "vx": s * np.sin(PI * y) ** 2,
        "vy": -PI * c * np.sin(2 * PI * y),
        "lapv": c * np.sin(PI * y) ** 2 - 2 * PI**2 * c * np.cos(2 * PI * y),
        "p": c * np.cos(PI * y),
        "px": -s * np.cos(PI * y),
        "py": -PI * c * np.sin(PI * y),
    }
    S["p"] = S["p"] - S["p"][0, -1]  # gauge p(0, 1) = 0
    return S


def stokes_forcing(S, eps):
    return -eps**2 * S["lapu"] + S["px"], -eps**2 * S["lapv"] + S["py"]


def ns_forcing(S, eps):
    fu, fv = stokes_forcing(S, eps)
    return fu + S["u"] * S["ux"] + S["v"] * S["uy"], fv + S["u"] * S["vx"] + S["v"] * S["vy"]


def tail_ratios(history, start=1e-4, floor=1e-11):
    """``r_{k+1}/r_k^2`` for steps that start below ``start`` and end above the rounding floor."""
    return [history[k + 1] / history[k] ** 2 for k in range(len(history) - 1)
            if history[k] < start and history[k + 1] > floor]


# Stokes ---------------------------------------------------------------------------------

def test_stokes_zero_forcing():
    g = Grid1D.interval_y(32)
    z = np.zeros((NX, len(g)))
    s = stokes_solve(0.1, z, z, g)
    assert s.u.max_abs() == 0.0 and s.v.max_abs() == 0.0 and s.p.max_abs() == 0.0


def test_stokes_manufactured_rate():
    eps, sizes, errs = 0.3, [32, 64, 128], []
    for n in sizes:
        g = Grid1D.interval_y(n)
        S = manufactured(g)
        s = stokes_solve(eps, *stokes_forcing(S, eps), g)
        errs.append(max(np.max(np.abs(s.u.physical - S["u"])), np.max(np.abs(s.v.physical - S["v"])),
                        np.max(np.abs(s.p.physical - S["p"]))))
        assert s.divergence() < 1e-10
    assert abs(rate(sizes, errs) - 2.0) < 0.2


def test_stokes_second_derivative_estimate():
    """||(u_xx, v_xx, u_xy, v_xy)||^2 <= C eps^-2 |int (f u_xx + g v_xx)| with C <= 4."""
    g, eps = Grid1D.interval_y(96), 0.2
    rng = np.random.default_rng(7)
    x = (2 * PI * np.arange(NX) / NX)[:, None]
    y = g.nodes[None, :]
    l2sq = lambda a: quad_y(quad_x(a**2), g)

    def random_forcing():
        return sum(rng.normal() * np.cos(n * x + rng.uniform(0, 2 * PI)) * np.sin((j + 1) * PI * y)
                   for n in range(1, 4) for j in range(3))

    worst = 0.0
    for _ in range(20):
        fu, fv = random_forcing(), random_forcing()
        s = stokes_solve(eps, fu, fv, g)
        uxx, vxx = ddx(s.u.physical, 2), ddx(s.v.physical, 2)
        uxy, vxy = ddx(s.u.ddy().physical), ddx(s.v.ddy().physical)
        lhs = sum(l2sq(a) for a in (uxx, vxx, uxy, vxy))
        rhs = eps**-2 * abs(quad_y(quad_x(fu * uxx + fv * vxx), g))
        worst = max(worst, lhs / rhs)
    assert worst <= 4.0


# Newton ----------------------------------------------------------------------------------

def test_newton_manufactured_rate():
    eps, sizes, errs, ratios = 0.3, [32, 64, 128], [], []
    for n in sizes:
        g = Grid1D.interval_y(n)
        S = manufactured(g)
        s = solve_steady_ns(None, eps, grid=g, n_x=NX, forcing=ns_forcing(S, eps), wall_u=np.zeros(NX))
        assert s.converged and s.divergence() < 1e-10
        errs.append(max(np.max(np.abs(s.u.physical - S["u"])), np.max(np.abs(s.p.physical - S["p"]))))
        # this problem enters the quadratic regime early, so the window starts at 1
        ratios += tail_ratios(s.residual_history, start=1.0)
    assert abs(rate(sizes, errs) - 2.0) < 0.2
    assert ratios and max(ratios) <= 10


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_couette_is_immediate(eps):
    s = solve_steady_ns(make_spec(1.0, 0.0, [(1, 1.0, 0.0)]), eps)
    assert s.converged and s.iterations <= 2
    assert s.residual_history[-1] < 1e-10
    assert np.max(np.abs(s.u.physical - s.grid.nodes[None, :])) < 1e-12
    assert s.v.max_abs() < 1e-12


@pytest.fixture(scope="module")
def solves(spec01):
    h = build_hierarchy(spec01, 1)
    out = {}
    for m in (0, 1):
        comp = assemble_composite(h.truncated(m), 0.1)
        out[m] = (comp, solve_steady_ns(spec01, 0.1, guess=comp))
    return h, out


def test_composite_guess_converges(solves):
    _, out = solves
    comp, s = out[1]
    assert s.converged and s.residual_history[-1] < 1e-10
    assert s.iterations <= 5
    # the composite is already within O(eps) of the discrete solution
    assert np.max(np.abs(s.u.physical - comp.u.physical)) < 0.05


def test_guess_robust(solves):
    _, out = solves
    a, b = out[0][1], out[1][1]
    for f in ("u", "v", "p"):
        assert np.max(np.abs(getattr(a, f).physical - getattr(b, f).physical)) < 1e-10


def test_state_invariants(solves, spec01):
    _, out = solves
    x = 2 * PI * np.arange(spec01.disc.n_x) / spec01.disc.n_x
    for _, s in out.values():
        assert s.divergence() < 1e-10
        assert abs(s.p.physical[0, -1]) < 1e-14
        assert np.max(np.abs(s.u.physical[:, -1] - spec01.wall(x))) < 1e-14
        assert np.max(np.abs(s.u.physical[:, 0])) == 0.0
        assert np.max(np.abs(s.v.physical[:, [0, -1]])) == 0.0
        assert len(s.step_norms) == s.iterations


def test_quadratic_tail(spec01):
    ratios = []
    h = build_hierarchy(spec01, 1)
    for m in (0, 1):
        comp = assemble_composite(h.truncated(m), 0.05)
        ratios += tail_ratios(solve_steady_ns(spec01, 0.05, guess=comp).residual_history)
    ratios += tail_ratios(solve_steady_ns(make_spec(1.0, 0.2, [(1, 1.0, 0.0)]), 0.1).residual_history)
    assert ratios and max(ratios) <= 10


def test_nonconvergence_returns_best_iterate(spec01):
    s = solve_steady_ns(spec01, 0.1, max_iter=1)
    assert not s.converged
    assert s.residual_history[-1] == min(s.residual_history)


def test_resolution_rule():
    g = Grid1D.interval_y(64)
    assert check_resolution(g, 0.2)
    with pytest.warns(ResolutionWarning):
        assert not check_resolution(g, 0.05)
    with pytest.raises(ValueError):
        check_resolution(g, 0.05, strict=True)


# error norms and diagnostics -------------------------------------------------------------

def test_error_norms_vanish_for_couette(couette_hier):
    s = solve_steady_ns(couette_hier.spec, 0.1)
    comp = assemble_composite(couette_hier.truncated(1), 0.1)
    rep = error_norms(s, couette_hier.A, couette_hier.upper.u[0], comp)
    for key, val in rep.as_dict().items():
        assert 0.0 <= val < 1e-10, key


def test_energy_norm_of_zero():
    g = Grid1D.interval_y(32)
    z = np.zeros((NX, len(g)))
    val, parts = energy_norm(z, z, g, 0.1)
    assert val == 0.0 and all(p == 0.0 for p in parts.values())


def test_error_norms_nonnegative_and_ordered(solves):
    h, out = solves
    comp, s = out[1]
    rep = error_norms(s, h.A, h.upper.u[0], comp)
    d = rep.as_dict()
    assert all(v >= 0 for v in d.values())
    # sup norm dominates the L2 norm over a domain of measure 2 pi
    du = s.u.physical - comp.u.physical
    l2 = np.sqrt(quad_y(quad_x(du**2), s.grid))
    assert rep.err_composite >= l2 / np.sqrt(2 * PI)
    comp0, s0 = out[0]
    assert rep.err_composite <= 0.5 * error_norms(s0, h.A, h.upper.u[0], comp0).err_composite


def test_leading_prediction_far_from_wall(hier2):
    y = np.array([0.0, 0.2, 0.5])
    pred = leading_prediction(y, hier2.A, hier2.upper.u[0], 0.01)
    assert np.max(np.abs(pred - hier2.A * y[None, :])) == 0.0


def test_stream_vorticity_couette():
    s = solve_steady_ns(make_spec(1.3, 0.0, [(1, 1.0, 0.0)]), 0.2)
    phi, omega = stream_vorticity(s)
    y = phi.grid.nodes
    assert np.max(np.abs(phi.physical - 1.3 * (y**2 - 1) / 2)) < 1e-12
    assert np.max(np.abs(omega.physical + 1.3)) < 1e-10


def test_stream_vorticity_zero():
    g = Grid1D.interval_y(32)
    s = stokes_solve(0.1, np.zeros((NX, 33)), np.zeros((NX, 33)), g)
    phi, omega = stream_vorticity(s)
    assert phi.max_abs() == 0.0 and omega.max_abs() == 0.0


def test_stream_vorticity_manufactured():
    errs, sizes = [], [64, 128, 256]
    eps = 0.3
    for n in sizes:
        g = Grid1D.interval_y(n)
        S = manufactured(g)
        s = stokes_solve(eps, *stokes_forcing(S, eps), g)
        phi, omega = stream_vorticity(s)
        assert np.max(np.abs(phi.physical[:, -1])) == 0.0
        errs.append(np.max(np.abs(phi.physical - S["psi"])))
        # -Lap phi = omega up to discretisation error
        lap = phi.ddy(2).physical + ddx(phi.physical, 2)
        assert np.max(np.abs((lap + omega.physical)[:, 2:-2])) < 500.0 / n**2
    assert abs(rate(sizes, errs) - 2.0) < 0.3


def test_embedding_examples():
    g = Grid1D.interval_y(256)
    assert sobolev_embedding_check(StripField.zeros(g, 32)) == (0.0, 0.0)
    x = (2 * PI * np.arange(32) / 32)[:, None]
    u = StripField.from_physical(np.sin(x) * np.sin(PI * g.nodes[None, :]), g)
    lhs, rhs = sobolev_embedding_check(u)
    assert lhs == pytest.approx(1.0, abs=1e-12)
    # ||u_x|| = sqrt(pi/2) and ||u_y|| = ||u_xy|| = pi sqrt(pi/2)
    exact = np.sqrt(PI / 2) * (1 + 2 * PI)
    assert rhs == pytest.approx(exact, rel=1e-3)
    assert lhs <= 2 * rhs


def test_embedding_rejects_wall_data():
    g = Grid1D.interval_y(32)
    with pytest.raises(ValueError):
        sobolev_embedding_check(StripField.from_physical(np.ones((8, 33)), g))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_embedding_random_fields(seed):
    g = Grid1D.interval_y(128)
    u = random_wall_zero_field(np.random.default_rng(seed), g, 16)
    lhs, rhs = sobolev_embedding_check(u)
    assert lhs <= EMBEDDING_C * rhs
