"""Grids, transforms, finite differences, the per-mode Helmholtz solve and Hardy checks."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from vvlab.strip import (
    Grid1D,
    GridError,
    StripField,
    antiderivative_x,
    box_continuity,
    cumulative_trapezoid,
    ddx,
    ddy,
    dft_forward,
    dft_inverse,
    hardy_check,
    quad_x,
    quad_y,
    solve_mode_helmholtz,
)

from conftest import rate

NX = 16
X = 2 * np.pi * np.arange(NX) / NX


# grids ---------------------------------------------------------------------

def test_grid_kinds_and_bounds():
    z = Grid1D.upper_zeta(100, -40.0)
    e = Grid1D.lower_eta(100, 40.0)
    assert z.nodes[0] == -40.0 and z.nodes[-1] == 0.0 and z.bound == -40.0
    assert e.nodes[0] == 0.0 and e.nodes[-1] == 40.0
    with pytest.raises(GridError):
        Grid1D("interval-y", np.array([0.0, 0.5, 0.4]))
    with pytest.raises(GridError):
        Grid1D.upper_zeta(10, 1.0)


def test_graded_grid_clusters_at_walls():
    g = Grid1D.interval_y(64, grading=2.0)
    d = np.diff(g.nodes)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    assert d[0] < d[32] and d[-1] < d[32]


# transforms ----------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (NX, 5), elements=st.floats(-10, 10)))
def test_dft_round_trip(a):
    c = dft_forward(a)
    c[-1] = 0.0
    nyq = np.fft.rfft(a, axis=0)[-1] / NX
    expected = a - np.real(nyq) * np.cos(NX / 2 * X)[:, None]
    assert np.allclose(dft_inverse(c, NX), expected, atol=1e-12)


def test_ddx_single_mode_exact():
    g = np.linspace(0, 1, 7)
    f = np.cos(X)[:, None] * g[None, :]
    assert np.max(np.abs(ddx(f) + np.sin(X)[:, None] * g[None, :])) < 1e-13


def test_quadratures():
    assert abs(quad_x(np.sin(X))) < 1e-14
    assert abs(quad_x(np.ones(NX)) - 2 * np.pi) < 1e-14
    g = Grid1D.interval_y(400)
    assert abs(quad_y(g.nodes**2, g) - 1 / 3) < 2e-6


def test_antiderivative_inverts_ddx():
    f = np.sin(2 * X) + 0.3 * np.cos(X)
    F_ = antiderivative_x(f)
    assert abs(np.mean(F_)) < 1e-14
    assert np.max(np.abs(ddx(F_) - f)) < 1e-13


@pytest.mark.parametrize("n", [32, 64, 128])
def test_ddy_second_order(n):
    g = Grid1D.interval_y(n)
    err1 = np.max(np.abs(ddy(np.sin(3 * g.nodes), g) - 3 * np.cos(3 * g.nodes)))
    err2 = np.max(np.abs(ddy(np.sin(3 * g.nodes), g, 2) + 9 * np.sin(3 * g.nodes)))
    assert err1 < 60 / n**2 and err2 < 200 / n**2


def test_ddy_grid_mismatch():
    with pytest.raises(GridError):
        ddy(np.zeros(5), Grid1D.interval_y(10))


def test_cumulative_trapezoid_anchors():
    g = Grid1D.interval_y(200)
    y = g.nodes
    first = cumulative_trapezoid(2 * y, g)
    last = cumulative_trapezoid(2 * y, g, start="last")
    assert np.allclose(first, y**2, atol=1e-12)
    assert np.allclose(last, y**2 - 1, atol=1e-12)


def test_strip_field_arithmetic_and_evaluate():
    g = Grid1D.interval_y(8)
    f = StripField.from_physical(np.cos(X)[:, None] * g.nodes[None, :], g)
    assert np.allclose(f.evaluate(0.3)[0], np.cos(0.3) * g.nodes)
    assert np.allclose((f + f).physical, 2 * f.physical)
    assert np.allclose((f - f).physical, 0)
    assert f.profile(-1).values[3] == np.conj(f.profile(1).values[3])


def test_box_continuity_vanishes_for_exact_pair():
    g = Grid1D.lower_eta(200, 10.0)
    eta = g.nodes
    u = StripField.from_physical(np.cos(X)[:, None] * np.exp(-eta)[None, :], g)
    v = StripField.from_physical(
        -cumulative_trapezoid(u.ddx().physical, g, start="last"), g)
    assert np.max(np.abs(box_continuity(u, v))) < 1e-13


# Helmholtz -----------------------------------------------------------------

def test_helmholtz_closed_form():
    g = Grid1D.interval_y(512)
    w = solve_mode_helmholtz(1, np.zeros(len(g)), 0.0, 1.0, g)
    i = np.searchsorted(g.nodes, 0.5)
    assert abs(w.values[i] - 0.443409) < 1e-5
    assert np.max(np.abs(w.values - np.sinh(g.nodes) / np.sinh(1))) < 1e-5


def test_helmholtz_zero_data():
    g = Grid1D.interval_y(32)
    assert np.all(solve_mode_helmholtz(0, np.zeros(len(g)), 0.0, 0.0, g).values == 0)


def test_helmholtz_manufactured_rate():
    sizes, errs = [32, 64, 128], []
    for n in sizes:
        g = Grid1D.interval_y(n)
        y = g.nodes
        w_star = y**2 * (1 - y)
        rhs = (2 - 6 * y) - 4 * w_star
        w = solve_mode_helmholtz(2, rhs, 0.0, 0.0, g)
        errs.append(np.max(np.abs(w.values - w_star)))
    # the manufactured profile is cubic, so the scheme is exact up to rounding
    assert max(errs) < 1e-12


def test_helmholtz_rate_on_smooth_profile():
    sizes, errs = [32, 64, 128], []
    for n in sizes:
        g = Grid1D.interval_y(n)
        y = g.nodes
        w_star = np.sin(np.pi * y) * np.exp(y)
        d2 = np.exp(y) * ((1 - np.pi**2) * np.sin(np.pi * y) + 2 * np.pi * np.cos(np.pi * y))
        w = solve_mode_helmholtz(3, d2 - 9 * w_star, 0.0, 0.0, g)
        errs.append(np.max(np.abs(w.values - w_star)))
    assert abs(rate(sizes, errs) - 2.0) < 0.3


# Hardy ---------------------------------------------------------------------

HG = Grid1D.interval_y(4000)
Y = HG.nodes


def test_hardy1_linear_profile():
    lhs, rhs = hardy_check(1 - Y, HG, 0.0, "hardy1", df=-np.ones_like(Y))
    assert abs(lhs - 1 / 3) < 1e-6 and abs(rhs - 4 / 3) < 1e-6


def test_hardy2_lower_parabola():
    lhs, rhs = hardy_check(Y * (1 - Y), HG, 0.0, "hardy2-lower", df=1 - 2 * Y)
    assert abs(lhs - 1 / 3) < 1e-6 and abs(rhs - 4 / 3) < 1e-6


def test_hardy_zero_function():
    assert hardy_check(np.zeros_like(Y), HG, 0.5, "hardy2-upper") == (0.0, 0.0)


@pytest.mark.parametrize("variant,f", [("hardy1", 1 + 0 * Y), ("hardy2-lower", 1 - Y)])
def test_hardy_rejects_boundary_violation(variant, f):
    with pytest.raises(ValueError):
        hardy_check(f, HG, 0.0, variant)
