"""Property-based checks of the invariants that hold for every admissible input."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vvlab.composite import Cutoff
from vvlab.euler import EulerCascade, solve_harmonic_dirichlet
from vvlab.hierarchy import lattice, next_exponent
from vvlab.lower import nonzero_mode_solve, solve_lower_layer
from vvlab.ns import stokes_solve
from vvlab.prandtl import LayerError, batchelor_closed_form, batchelor_constant
from vvlab.problem import make_spec
from vvlab.strip import Grid1D, StripField, box_continuity, hardy_check, quad_x
from vvlab.verify import random_hardy_profile

SLOW = settings(max_examples=20, deadline=None)
FAST = settings(max_examples=100, deadline=None)

seeds = st.integers(0, 2**32 - 1)
modes = st.lists(st.tuples(st.integers(0, 4), st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=3,
                 unique_by=lambda m: m[0])


@FAST
@given(alpha=st.floats(0.5, 3), delta=st.floats(0, 0.3), f=modes)
def test_batchelor_constant_is_rms_wall_speed(alpha, delta, f):
    spec = make_spec(alpha, delta, f)
    x = 2 * np.pi * np.arange(spec.disc.n_x) / spec.disc.n_x
    assume(np.min(spec.wall(x)) > 0)
    A = batchelor_constant(spec).A
    assert abs(A - batchelor_closed_form(spec)) < 1e-12
    # the root mean square dominates the mean
    assert A >= abs(np.mean(spec.wall(x))) - 1e-12
    assert A <= np.max(np.abs(spec.wall(x))) + 1e-12


@FAST
@given(seeds)
def test_harmonic_terms_are_divergence_free(seed):
    rng = np.random.default_rng(seed)
    nx = 16
    x = 2 * np.pi * np.arange(nx) / nx
    trace = lambda: sum(rng.normal() * np.cos(n * x + rng.uniform(0, 6)) for n in range(1, 5))
    top, bottom = trace(), trace()
    t = solve_harmonic_dirichlet(top, bottom)
    inv = EulerCascade(1.0, nx, {Fraction(1): t}).invariants(Fraction(1), np.linspace(0, 1, 21))
    assert max(inv["divergence"], inv["harmonic_u"], inv["harmonic_v"], inv["mean_v"]) < 1e-10
    assert np.max(np.abs(t.v(np.array([0.0, 1.0])) - np.stack([bottom, top], axis=1))) < 1e-12


@SLOW
@given(seeds, st.integers(1, 4), st.floats(0.5, 2.0))
def test_lower_mode_solve_is_linear(seed, n, A):
    rng = np.random.default_rng(seed)
    g = Grid1D.lower_eta(300, 20.0)
    e = g.nodes
    f1 = (rng.normal() + 1j * rng.normal()) * np.exp(-e) * e
    f2 = (rng.normal() + 1j * rng.normal()) * np.exp(-2 * e)
    a = rng.normal()
    u1, v1 = nonzero_mode_solve(n, f1, A, g)
    u2, v2 = nonzero_mode_solve(n, f2, A, g)
    u, v = nonzero_mode_solve(n, f1 + a * f2, A, g)
    scale = 1 + np.max(np.abs(u1)) + np.max(np.abs(u2))
    assert np.max(np.abs(u - u1 - a * u2)) < 1e-10 * scale
    assert np.max(np.abs(v - v1 - a * v2)) < 1e-10 * scale


@SLOW
@given(seeds)
def test_lower_layer_invariants(seed):
    rng = np.random.default_rng(seed)
    nx = 16
    g = Grid1D.lower_eta(800, 30.0)
    x = (2 * np.pi * np.arange(nx) / nx)[:, None]
    e = g.nodes[None, :]
    forcing = sum(rng.normal() * np.cos(n * x + rng.uniform(0, 6)) for n in range(1, 4)) * e * np.exp(-e)
    wall = sum(rng.normal() * np.cos(n * x[:, 0] + rng.uniform(0, 6)) for n in range(1, 4))
    layer = solve_lower_layer(forcing, wall, 1.0, g)
    assert np.max(np.abs(layer.u.physical[:, 0] - wall)) < 1e-12
    assert np.max(np.abs(box_continuity(layer.u, layer.v))) < 1e-10
    assert np.max(np.abs(quad_x(layer.v.physical))) < 1e-10


@FAST
@given(seeds, st.sampled_from([0.0, 0.25, 0.5, 0.9]))
def test_hardy_one(seed, kappa):
    g = Grid1D.interval_y(1000)
    p = random_hardy_profile(np.random.default_rng(seed), "hardy1")
    lhs, rhs = hardy_check(p(g.nodes), g, kappa, "hardy1", df=p.deriv()(g.nodes))
    assert lhs <= rhs * (1 + 1e-9) + 1e-300


@FAST
@given(seeds, st.sampled_from(["hardy2-lower", "hardy2-upper"]))
def test_hardy_two(seed, variant):
    g = Grid1D.interval_y(1000)
    p = random_hardy_profile(np.random.default_rng(seed), variant)
    lhs, rhs = hardy_check(p(g.nodes), g, 0.0, variant, df=p.deriv()(g.nodes))
    assert lhs <= rhs * (1 + 1e-9) + 1e-300


@FAST
@given(st.floats(-0.5, 1.5, allow_nan=False))
def test_cutoff_range(y):
    c = Cutoff()
    v = float(c(np.array([y]))[0])
    assert 0.0 <= v <= 1.0
    if y <= 0.25:
        assert v == 1.0
    if y >= 0.75:
        assert v == 0.0


@FAST
@given(st.integers(0, 9).map(lambda k: Fraction(k, 3)))
def test_lattice_structure(m):
    lat = lattice(m)
    assert lat[0] == 0 and all(s <= m for s in lat)
    for s in lat:
        if s > 0:
            assert s >= 1 and (s - 1) * 3 == int((s - 1) * 3)
        for step in (Fraction(1), Fraction(2, 3)):
            if s > 0 and s + step <= m:
                assert s + step in lat
    q = next_exponent(m)
    assert q > m and q in lattice(q)
    assert not any(m < s < q for s in lattice(q))


@SLOW
@given(seeds, st.floats(0.1, 0.5), st.floats(-3, 3))
def test_stokes_is_linear_and_solenoidal(seed, eps, a):
    rng = np.random.default_rng(seed)
    nx, g = 8, Grid1D.interval_y(40)
    x = (2 * np.pi * np.arange(nx) / nx)[:, None]
    y = g.nodes[None, :]
    f = sum(rng.normal() * np.cos(n * x + rng.uniform(0, 6)) * np.sin((j + 1) * np.pi * y)
            for n in range(0, 3) for j in range(2))
    s1 = stokes_solve(eps, f, 0 * f, g)
    s2 = stokes_solve(eps, a * f, 0 * f, g)
    assert np.max(np.abs(s2.u.physical - a * s1.u.physical)) < 1e-10 * (1 + abs(a) * s1.u.max_abs())
    assert s1.divergence() < 1e-10 and s2.divergence() < 1e-10


def test_repeated_mode_number_rejected():
    with pytest.raises(ValueError):
        make_spec(1.0, 0.1, [(1, 1.0, 0.0), (1, 0.5, 0.0)])


@FAST
@given(st.floats(0.1, 3), st.floats(1.01, 3))
def test_nonpositive_wall_speed_rejected(alpha, ratio):
    """A wall speed touching zero is outside the theory whatever the amplitude."""
    try:
        batchelor_constant(make_spec(alpha, alpha * ratio, [(1, 1.0, 0.0)]))
    except LayerError:
        return
    raise AssertionError("a wall speed with a sign change was accepted")


@FAST
@given(seeds)
def test_strip_field_arithmetic(seed):
    rng = np.random.default_rng(seed)
    g = Grid1D.interval_y(10)
    a = StripField.from_physical(rng.normal(size=(8, 11)), g)
    b = StripField.from_physical(rng.normal(size=(8, 11)), g)
    assert np.max(np.abs((a + b - b).physical - a.physical)) < 1e-13
    assert np.max(np.abs(a.scale(2.0).physical - 2 * a.physical)) < 1e-13
