import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from s1classes.errors import ParameterError, PreconditionError, ResolutionError
from s1classes.fields import (
    canonical_field,
    constant_field,
    energy_lp,
    extract_singularities,
    plane_wave,
)
from s1classes.geometry import grid_avoiding
from s1classes.matching import Configuration, sigma_exact
from s1classes.sigma import (
    SolverSettings,
    averaging_identity_check,
    dipole_sequence,
    dist_bounds,
    equality_case_probe,
    growth_experiment,
    near_minimizer,
    optimal_lifting_energy,
    p_infimum,
    p_infimum_variational,
    projection_distance,
    reverse_triangle_margin,
    sigma_of_config,
    sigma_variational,
    strict_inequality_probe,
    tn_distance_experiment,
)

TWO_PI = 2 * math.pi
VORTEX = Configuration(((0.1, 0.05),), (1,))
FAST = SolverSettings(max_iters=600)


@pytest.fixture(scope="module")
def vortex_grid(disc):
    return grid_avoiding(disc, 1 / 32, VORTEX.points)


@pytest.fixture(scope="module")
def vortex_minimizer(disc, vortex_grid):
    return near_minimizer(VORTEX, disc, vortex_grid, FAST)


def test_sigma_variational_smooth(disc_grid32):
    res = sigma_variational(plane_wave(3, disc_grid32), FAST)
    assert res.value <= 0.02 * TWO_PI
    assert res.lower_bound <= res.value + 1e-12


def test_sigma_variational_vortex(disc, vortex_grid):
    u = canonical_field(VORTEX, disc, vortex_grid)
    res = sigma_variational(u, FAST)
    exact = sigma_exact(VORTEX, disc)
    assert res.value == pytest.approx(exact, rel=0.08)
    assert res.lower_bound <= res.value
    assert set(res.to_json()) >= {"value", "lower_bound", "gap", "iterations", "converged", "backend"}


def test_sigma_variational_bad_settings(disc_grid32):
    with pytest.raises(ParameterError):
        sigma_variational(constant_field(disc_grid32), SolverSettings(rho=0))


def test_sigma_of_config(disc, vortex_grid):
    est = sigma_of_config(Configuration(), disc, vortex_grid, FAST)
    assert est.exact == 0.0 and est.dual == 0.0
    assert est.variational <= 0.02 * TWO_PI
    est = sigma_of_config(VORTEX, disc, vortex_grid, FAST, rel_tol=0.08)
    assert est.checks["exact_vs_dual"] and est.checks["exact_vs_variational"]
    assert est.to_json()["h"] == vortex_grid.h


def test_near_minimizer(disc, vortex_grid, vortex_minimizer):
    w = vortex_minimizer
    assert extract_singularities(w) == extract_singularities(canonical_field(VORTEX, disc, vortex_grid))
    assert energy_lp(w, 1).value == pytest.approx(sigma_exact(VORTEX, disc), rel=0.1)
    c = near_minimizer(Configuration(), disc, vortex_grid)
    assert np.allclose(c.values[vortex_grid.mask], 1)


def test_dipole_constant_field(disc_grid32):
    seq = dipole_sequence(constant_field(disc_grid32), n_theta=12)
    assert all(s.energy == 0.0 and s.support == 0.0 for s in seq.steps)
    assert len(seq.table()) == len(seq.steps)


def test_dipole_sequence_support(vortex_minimizer):
    seq = dipole_sequence(vortex_minimizer, n_theta=36)
    g = vortex_minimizer.grid
    area = g.n_interior * g.h**2
    for s in seq.steps:
        assert s.support <= 1.5 * s.eps * area
    assert extract_singularities(seq.final.field) == extract_singularities(vortex_minimizer)


def test_averaging_identity(disc):
    g = grid_avoiding(disc, 1 / 32, [(0.0, 0.0)])
    assert averaging_identity_check(constant_field(g), Q=16)[:2] == (0.0, 0.0)
    u = canonical_field(Configuration(((0.0, 0.0),), (1,)), disc, g)
    lhs, rhs, rel = averaging_identity_check(u, Q=32)
    assert rel < 0.03
    with pytest.raises(ParameterError):
        averaging_identity_check(u, Q=8)


def test_projection_distance_band(disc, vortex_minimizer):
    sig = sigma_exact(VORTEX, disc)
    _, d = projection_distance(vortex_minimizer, Q=32)
    assert 0.95 * 2 / math.pi * sig <= d <= 1.1 * sig


def test_dist_bounds(disc, vortex_grid):
    b = dist_bounds(VORTEX, VORTEX, 1.0, disc, vortex_grid)
    assert b.lower == 0.0
    with pytest.raises(ParameterError):
        dist_bounds(VORTEX, Configuration(), 2.0, disc, vortex_grid)
    b = dist_bounds(VORTEX, Configuration(), 1.0, disc, vortex_grid, FAST, Q=16, n_theta=12)
    assert b.lower == pytest.approx(2 / math.pi * sigma_exact(VORTEX, disc))
    assert b.upper >= b.lower * 0.97
    assert b.to_json()["p"] == 1.0


def test_p_infimum(disc):
    g = grid_avoiding(disc, 1 / 32, [(0.0, 0.0)])
    u = canonical_field(Configuration(((0.0, 0.0),), (1,)), disc, g)
    p = 1.5
    res = p_infimum(u, p)
    assert res.norm == pytest.approx((TWO_PI / (2 - p)) ** (1 / p), rel=0.02)
    assert p_infimum_variational(Configuration(), disc, g, 1.5) == 0.0
    for bad in (1.0, 2.0):
        with pytest.raises(ParameterError):
            p_infimum_variational(Configuration(((0.0, 0.0),), (1,)), disc, g, bad)


def test_tn_precondition(disc, vortex_grid):
    with pytest.raises(PreconditionError):
        tn_distance_experiment(VORTEX, VORTEX, [3], disc, vortex_grid)


def test_growth_precondition(disc, vortex_grid):
    with pytest.raises(PreconditionError):
        growth_experiment(Configuration(), 1.5, [3, 5], disc, vortex_grid)


def test_lifting_energy(disc):
    g = grid_avoiding(disc, 1 / 64, [(0.0, 0.0)])
    u = canonical_field(Configuration(((0.0, 0.0),), (1,)), disc, g)
    assert optimal_lifting_energy(u) == pytest.approx(4 * math.pi, rel=0.01)


def test_equality_probe(disc, vortex_grid):
    r = equality_case_probe(constant_field(vortex_grid), Q=16)
    assert r["status"] == "not-applicable" and r["ratio"] is None
    dip = Configuration(((-0.2, 0.0), (0.3, 0.0)), (1, -1))
    g = grid_avoiding(disc, 1 / 32, dip.points)
    r = equality_case_probe(canonical_field(dip, disc, g), Q=16)
    assert r["status"] == "ok" and r["ratio"] > 1


def test_strict_probe_validation():
    with pytest.raises(ParameterError):
        strict_inequality_probe(0.3, 1.0, 1 / 32)
    with pytest.raises(ParameterError):
        strict_inequality_probe(0.1, 2.0, 1 / 32)
    with pytest.raises(ResolutionError):
        strict_inequality_probe(0.02, 1.0, 1 / 16)


def _tangent(z, t):
    return np.array([-(z.imag), z.real]) * t


@hsettings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1.5), st.floats(0, 2 * math.pi), st.floats(0, 1), st.floats(-3, 3), st.floats(-3, 3))
def test_reverse_triangle(eps, a1, frac, t1, t2):
    if eps >= math.pi / 2:
        return
    gap = eps + frac * (math.pi - 2 * eps)
    if not eps < gap < math.pi - eps:
        return
    z1, z2 = np.exp(1j * a1), np.exp(1j * (a1 + gap))
    v1, v2 = _tangent(z1, t1), _tangent(z2, t2)
    assert reverse_triangle_margin(z1, z2, v1, v2, eps) >= -1e-12
    n1, n2 = np.hypot(*v1), np.hypot(*v2)
    assert np.hypot(*(v1 - v2)) ** 2 >= math.sin(eps) ** 2 / 2 * (n1**2 + n2**2) - 1e-12


def test_reverse_triangle_rejects_close_points():
    with pytest.raises(ParameterError):
        reverse_triangle_margin(1 + 0j, np.exp(0.01j), (0, 1), (0, 1), 0.1)
