"""Lower boundary layer: mean mode, Airy-type modes, lift, continuity, pressure and forcing."""

from fractions import Fraction

import numpy as np
import pytest

from vvlab.euler import EulerCascade
from vvlab.lower import (
    homogenize_lower,
    lower_pressure,
    nonzero_mode_solve,
    solve_lower_layer,
    v_hat_from_continuity,
    zero_mode_solve,
)
from vvlab.prandtl import LayerError
from vvlab.series import TWO_THIRDS, LayerSeries, lower_forcing
from vvlab.strip import Grid1D, GridError, StripField, box_continuity, quad_x

from conftest import rate

NX = 16
X = (2 * np.pi * np.arange(NX) / NX)[:, None]
ETA = Grid1D.lower_eta(2000, 40.0)
E = ETA.nodes[None, :]


# mean mode -------------------------------------------------------------------------

@pytest.mark.parametrize("profile,far", [
    (lambda e: np.where(e <= 1.0, 1.0, 0.0), 0.5),
    (lambda e: np.exp(-e), 1.0),
])
def test_zero_mode_far_value(profile, far):
    g = Grid1D.lower_eta(8000, 40.0)
    u0, c = zero_mode_solve(profile(g.nodes), g)
    assert u0[0] == 0.0
    assert abs(c - far) < 5e-3


def test_zero_mode_exponential_profile():
    u0, c = zero_mode_solve(np.exp(-ETA.nodes), ETA)
    assert np.max(np.abs(u0 - (1 - np.exp(-ETA.nodes)))) < 1e-4


def test_zero_mode_rejects_slow_tail_and_bad_grid():
    with pytest.raises(LayerError):
        zero_mode_solve(np.exp(-ETA.nodes / 20), ETA)
    with pytest.raises(GridError):
        zero_mode_solve(np.ones(101), Grid1D.interval_y(100))


# nonzero modes: manufactured solution u = eta e^-eta ------------------------------

def _mms_rhs(n, eta, A=1.0):
    u = eta * np.exp(-eta)
    v = 1j * n * (eta + 1) * np.exp(-eta)
    upp = (eta - 2) * np.exp(-eta)
    return A * 1j * n * eta * u + A * v - upp, u, v


def test_mms_forcing_value_at_one():
    f, _, _ = _mms_rhs(1, np.array([1.0]))
    assert abs(f[0] - (1 + 3j) / np.e) < 1e-15


@pytest.mark.parametrize("n", [1, 3])
def test_nonzero_mode_manufactured_rate(n):
    sizes, errs = [500, 1000, 2000], []
    for m in sizes:
        g = Grid1D.lower_eta(m, 30.0)
        f, u_ex, v_ex = _mms_rhs(n, g.nodes)
        u, v = nonzero_mode_solve(n, f, 1.0, g)
        errs.append(max(np.max(np.abs(u - u_ex)), np.max(np.abs(v - v_ex))))
    assert errs[-1] < 1e-4
    assert abs(rate(sizes, errs) - 2.0) < 0.3


def test_nonzero_mode_rejects_mean_and_bad_A():
    with pytest.raises(ValueError):
        nonzero_mode_solve(0, np.zeros(len(ETA)), 1.0, ETA)
    with pytest.raises(ValueError):
        nonzero_mode_solve(1, np.zeros(len(ETA)), 0.0, ETA)


# lift, continuity, pressure --------------------------------------------------------

def test_homogenize_lift_matches_wall_and_continuity():
    w = np.cos(X[:, 0]) + 0.3 * np.sin(2 * X[:, 0])
    lifted, lift = homogenize_lower(w, np.zeros((NX, len(ETA))), 1.0, ETA)
    assert np.max(np.abs(lift.u[:, 0] - w)) < 1e-15
    u = StripField.from_physical(lift.u, ETA)
    v = StripField.from_physical(lift.v, ETA)
    assert np.max(np.abs(box_continuity(u, v))) < 1e-12
    assert np.max(np.abs(lift.v[:, -1])) == 0.0
    assert np.max(np.abs(lifted[:, ETA.nodes > 3])) < 1e-14


def test_homogenize_zero_wall_is_identity():
    rhs = np.cos(X) * np.exp(-E)
    lifted, lift = homogenize_lower(np.zeros(NX), rhs, 1.0, ETA)
    assert np.max(np.abs(lifted - rhs)) == 0.0 and np.max(np.abs(lift.u)) == 0.0


def test_v_hat_from_continuity():
    u = StripField.from_physical(np.cos(X) * E * np.exp(-E), ETA)
    v = v_hat_from_continuity(u)
    assert np.max(np.abs(v.physical - (-np.sin(X) * (E + 1) * np.exp(-E)))) < 1e-4
    assert np.max(np.abs(v.physical[:, -1])) == 0.0


def test_lower_pressure():
    assert lower_pressure(np.zeros((NX, len(ETA))), ETA).max_abs() == 0.0
    p = lower_pressure(np.cos(X) * np.exp(-E), ETA)
    assert np.max(np.abs(p.physical + np.cos(X) * np.exp(-E))) < 1e-4
    with pytest.raises(LayerError):
        lower_pressure(np.zeros((NX, len(ETA))), ETA, wall_v=1.0 + np.cos(X[:, 0]), A=1.0)


def test_lower_pressure_wall_trace_term():
    p = lower_pressure(np.zeros((NX, len(ETA))), ETA, wall_v=np.cos(X[:, 0]), A=2.0)
    assert np.max(np.abs(p.physical - 2.0 * np.sin(X))) < 1e-12


# full layer ---------------------------------------------------------------------------

def test_solve_lower_layer_wall_data():
    w = -0.1 * np.cos(X[:, 0])
    layer = solve_lower_layer(np.zeros((NX, len(ETA))), w, 1.0, ETA)
    assert np.max(np.abs(layer.u.physical[:, 0] - w)) < 1e-12
    assert layer.continuity_defect() < 1e-10
    assert np.max(np.abs(quad_x(layer.v.physical))) < 1e-12
    assert np.max(np.abs(layer.v.physical[:, -1])) < 1e-12
    # zero-mean wall data and no forcing: no plateau
    assert abs(layer.far_constant) < 1e-12
    assert np.max(np.abs(layer.u.physical[:, -50:])) < 1e-6


def test_solve_lower_layer_zero_problem():
    layer = solve_lower_layer(np.zeros((NX, len(ETA))), np.zeros(NX), 1.0, ETA)
    assert layer.u.max_abs() == 0.0 and layer.v.max_abs() == 0.0


def test_hierarchy_lower_terms(hier2):
    for e in hier2.entries:
        if e.kind == "lower" and e.exponent > 0:
            assert e.checks["continuity"] < 1e-10
            assert e.checks["wall_condition"] < 1e-12
            assert e.checks["mean_zero_v"] < 1e-10


def test_order_one_lower_forcing_vanishes(hier2):
    cascade = EulerCascade(hier2.A, hier2.cascade.n_x,
                           {k: hier2.cascade.terms[k] for k in (Fraction(0), Fraction(1))})
    s = LayerSeries("lower", cascade, hier2.lower.grid)
    s.u[Fraction(0)] = hier2.lower.u[Fraction(0)]
    s.v[TWO_THIRDS] = hier2.lower.v[TWO_THIRDS]
    s.p[TWO_THIRDS] = hier2.lower.p[TWO_THIRDS]
    f, _ = lower_forcing(s, Fraction(1))
    assert np.max(np.abs(f)) < 1e-14
