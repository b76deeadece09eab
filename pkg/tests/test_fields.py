import math

import numpy as np
import pytest

from s1classes.circlemaps import identity_map, projection_map, sine_map, tn_map
from s1classes.errors import GridError, ResolutionError
from s1classes.fields import (
    canonical_field,
    cell_integral,
    compose_circle,
    conjugate_field,
    constant_field,
    diff_energy,
    energy_lp,
    extract_singularities,
    from_angles,
    modulus_diff_energy,
    multiply,
    multiply_phase,
    phase_field,
    plane_wave,
    plaquette_circulation,
    plaquette_winding,
    pv,
    snap_to_plaquettes,
    square_loop,
    support_measure,
    vorticity,
    winding_number,
)
from s1classes.geometry import Domain, build_grid, grid_avoiding
from s1classes.matching import Configuration

TWO_PI = 2 * math.pi
ORIGIN = Configuration(((0.0, 0.0),), (1,))


def node_index(g, x, y):
    return int(round((y - g.origin[1]) / g.h)), int(round((x - g.origin[0]) / g.h))


def random_canonical(rng, dom, g, k=2):
    pts = []
    while len(pts) < k:
        p = tuple(rng.uniform(-0.6, 0.6, 2))
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > 0.15 for q in pts):
            pts.append(p)
    c = Configuration(tuple(pts), tuple(int(rng.choice([-1, 1])) for _ in pts))
    return c, canonical_field(c, dom, g)


def test_pv_range():
    a = np.linspace(-20, 20, 4001)
    v = pv(a)
    assert np.all(v > -math.pi) and np.all(v <= math.pi)
    assert np.allclose(np.exp(1j * v), np.exp(1j * a))
    assert pv(math.pi) == pytest.approx(math.pi)


def test_canonical_angles(disc):
    g = grid_avoiding(disc, 1 / 16, [(0.0, 0.0)])
    u = canonical_field(ORIGIN, disc, g)
    X, Y = g.XY
    expect = np.arctan2(Y, X)
    assert np.allclose(np.exp(1j * u.angle[g.mask]), np.exp(1j * expect[g.mask]))
    # nodes on the positive axes of a lattice that has them
    g2 = build_grid(disc, 0.25, offset=(0.25, 0.0))  # nodes at x = -0.75 + k/4, y = -1 + k/4
    c = Configuration(((0.125, 0.0),), (1,))
    u2 = canonical_field(c, disc, g2)
    i, j = node_index(g2, 0.5, 0.0)
    assert pv(u2.angle[i, j]) == pytest.approx(0.0, abs=1e-15)
    c = Configuration(((0.25, -0.125),), (1,))
    u3 = canonical_field(c, disc, g2)
    i, j = node_index(g2, 0.25, 0.5)
    assert pv(u3.angle[i, j]) == pytest.approx(math.pi / 2)
    # a far node sees the difference of two arguments
    dip = Configuration(((0.0, 0.0), (0.5, 0.0)), (1, -1))
    ud = canonical_field(dip, disc, grid_avoiding(disc, 1 / 16, dip.points))
    gd = ud.grid
    X, Y = gd.XY
    exp_d = np.arctan2(Y, X) - np.arctan2(Y, X - 0.5)
    assert np.allclose(np.exp(1j * ud.angle[gd.mask]), np.exp(1j * exp_d[gd.mask]))


def test_canonical_node_coincidence(disc):
    g = build_grid(disc, 0.25)
    with pytest.raises(GridError):
        canonical_field(ORIGIN, disc, g)


def test_plane_wave(disc):
    g = grid_avoiding(disc, 1 / 128)
    assert np.allclose(plane_wave(0, g).values[g.mask], 1)
    u = plane_wave(4, g)
    assert energy_lp(u, 1).value == pytest.approx(4 * math.pi, rel=0.01)
    assert not plaquette_winding(u).any()
    v = vorticity(u)
    assert np.allclose(v.x[g.edge_x], 4) and np.allclose(v.y, 0)


def test_multiply_conjugate(disc, disc_grid32, rng):
    g = disc_grid32
    _, u = random_canonical(rng, disc, g)
    one = multiply(u, conjugate_field(u))
    assert np.allclose(one.values[g.mask], 1)
    assert energy_lp(one, 1).value == pytest.approx(0.0, abs=1e-12)
    assert (plaquette_winding(conjugate_field(u)) == -plaquette_winding(u)).all()
    with pytest.raises(GridError):
        multiply(u, constant_field(grid_avoiding(disc, 1 / 16)))


def test_winding_additivity_loops(disc, disc_grid32, rng):
    g = disc_grid32
    for _ in range(5):
        _, u = random_canonical(rng, disc, g)
        _, v = random_canonical(rng, disc, g)
        uv = multiply(u, v)
        for (i0, j0, i1, j1) in [(20, 20, 44, 44), (12, 28, 30, 36), (30, 12, 50, 30)]:
            loop = square_loop(g, i0, j0, i1, j1)
            assert winding_number(uv, loop) == winding_number(u, loop) + winding_number(v, loop)


def test_compose_identity_projection_tn(disc, disc_grid64):
    g = disc_grid64
    c = Configuration(((0.1, 0.05), (-0.3, 0.2)), (1, -1))
    u = canonical_field(c, disc, g)
    ui = compose_circle(identity_map(), u)
    assert np.allclose(ui.values, u.values) and np.allclose(ui.inc_x, u.inc_x)
    up = compose_circle(projection_map(np.exp(0.3j)), u)
    assert len(extract_singularities(up)) == 0
    ut = compose_circle(tn_map(9), u)
    assert extract_singularities(ut) == extract_singularities(u)
    assert ut.config == c and up.config == Configuration()


def test_chain_rule(disc, disc_grid64):
    g = disc_grid64
    u = canonical_field(Configuration(((0.1, 0.05),), (1,)), disc, g)
    T = tn_map(3)
    v = compose_circle(T, u)
    a0 = np.mod(u.angle[:, :-1], TWO_PI)
    a1 = a0 + u.inc_x
    idx = np.searchsorted(T.breaks, a0, side="right")
    same = (np.searchsorted(T.breaks, a1, side="right") == idx) & (a1 < TWO_PI) & g.edge_x & (np.abs(u.inc_x) > 0)
    slope = T.slopes[np.clip(idx - 1, 0, len(T.slopes) - 1)]
    assert same.sum() > 100
    assert np.allclose(np.abs(v.inc_x[same]), np.abs(slope[same] * u.inc_x[same]), atol=1e-9)


def test_energy_radial(disc):
    g = grid_avoiding(disc, 1 / 64, [(0.0, 0.0)])
    u = canonical_field(ORIGIN, disc, g)
    assert energy_lp(u, 1).value == pytest.approx(TWO_PI, rel=0.01)
    assert energy_lp(u, 1.5).value == pytest.approx(4 * math.pi, rel=0.01)
    rep = energy_lp(u, 2.0)
    assert any("divergent" in f for f in rep.flags)
    assert energy_lp(constant_field(g), 1.3).value == 0.0
    assert rep.to_json()["p"] == 2.0


def test_core_correction_improves(disc):
    g = grid_avoiding(disc, 1 / 64, [(0.0, 0.0)])
    u = canonical_field(ORIGIN, disc, g)
    raw = energy_lp(u, 1.5, core_correction=False).value
    cor = energy_lp(u, 1.5).value
    assert abs(cor - 4 * math.pi) < abs(raw - 4 * math.pi)


def test_cell_integral_oracle():
    # numerical quadrature of r^-p on a few cells
    from scipy.integrate import dblquad

    for (x0, y0, h, p) in [(0.1, 0.2, 0.05, 1.0), (-0.03, -0.02, 0.05, 1.5), (0.0, 0.0, 0.1, 1.25)]:
        q, _ = dblquad(lambda y, x: (x * x + y * y) ** (-p / 2), x0, x0 + h, y0, y0 + h, epsabs=1e-12)
        assert float(cell_integral(x0, y0, h, p)) == pytest.approx(q, rel=1e-6)


def test_diff_energy_examples(disc, disc_grid64):
    g = disc_grid64
    c = Configuration(((0.1, 0.05),), (1,))
    u = canonical_field(c, disc, g)
    assert diff_energy(u, u, 1).value == 0.0
    assert diff_energy(u, constant_field(g), 1).value <= energy_lp(u, 1).value * 1.01
    a = (0.25, 0.0)
    ga = grid_avoiding(disc, 1 / 64, [(0.0, 0.0), a])
    u0 = canonical_field(ORIGIN, disc, ga)
    v0 = canonical_field(Configuration((a,), (1,)), disc, ga)
    assert diff_energy(u0, v0, 1).value >= 4 * 0.25 * (1 - 0.03)


def test_diff_energy_smooth_matches_fd(disc, disc_grid64):
    # for slowly varying phases the exact edge length equals |u(a) - u(b)| to high order
    g = disc_grid64
    X, Y = g.XY
    u = phase_field(g, 0.7 * X + 0.2 * Y**2)
    v = phase_field(g, -0.3 * Y)
    d = u.values - v.values
    lx = np.abs(np.diff(d, axis=1))
    ly = np.abs(np.diff(d, axis=0))
    from s1classes.fields import _cell_sum

    assert diff_energy(u, v, 1).value == pytest.approx(_cell_sum(g, lx, ly, 1), rel=1e-4)


def test_modulus_diff_energy(disc, disc_grid64, rng):
    g = disc_grid64
    c = Configuration(((0.1, 0.05),), (1,))
    u = canonical_field(c, disc, g)
    assert modulus_diff_energy(u, u).value == 0.0
    for _ in range(5):
        _, a = random_canonical(rng, disc, g)
        _, b = random_canonical(rng, disc, g)
        assert modulus_diff_energy(a, b).value <= diff_energy(a, b, 1).value + 1e-9
    g2 = grid_avoiding(disc, 1 / 64, [(0.0, 0.0)])
    w = canonical_field(ORIGIN, disc, g2)  # Sigma = 2 pi
    assert modulus_diff_energy(w, constant_field(g2)).value >= 4 * (1 - 0.02)


def test_vorticity_and_circulation(disc):
    g = grid_avoiding(disc, 1 / 16, [(0.0, 0.0)])
    assert not vorticity(constant_field(g)).x.any()
    u = canonical_field(ORIGIN, disc, g)
    circ = plaquette_circulation(u)
    i, j = np.unravel_index(np.nanargmax(np.abs(circ)), circ.shape)
    assert circ[i, j] == pytest.approx(TWO_PI)
    v = vorticity(u)
    assert np.allclose(np.abs(v.x) * g.h, np.abs(u.inc_x))


def test_winding_numbers(disc):
    g = grid_avoiding(disc, 1 / 16, [(0.0, 0.0)])
    u = canonical_field(ORIGIN, disc, g)
    assert winding_number(u, square_loop(g, 10, 10, 20, 20)) == 1
    assert winding_number(u, square_loop(g, 2 + 10, 20, 2 + 14, 26)) == 0
    u2 = canonical_field(Configuration(((0.0, 0.0),), (2,)), disc, g)
    assert winding_number(u2, square_loop(g, 10, 10, 20, 20)) == 2
    with pytest.raises(GridError):
        winding_number(u, square_loop(g, 0, 0, 31, 31))
    with pytest.raises(GridError):
        winding_number(u, [(10, 10), (12, 10)])


def test_extract_singularities(disc):
    dip = Configuration(((0.0, 0.0), (0.5, 0.0)), (1, -1))
    g = grid_avoiding(disc, 1 / 32, dip.points)
    u = canonical_field(dip, disc, g)
    ex = extract_singularities(u)
    assert ex == snap_to_plaquettes(dip, g)
    assert sorted(ex.degrees) == [-1, 1]
    assert extract_singularities(compose_circle(tn_map(9), u)) == ex
    assert len(extract_singularities(plane_wave(3, g))) == 0
    assert plaquette_winding(u).sum() == dip.total_degree


def test_jacobian_additivity(disc, disc_grid32, rng):
    g = disc_grid32
    for _ in range(10):
        _, u = random_canonical(rng, disc, g, 3)
        _, v = random_canonical(rng, disc, g, 2)
        lhs = extract_singularities(multiply(u, v)).canonical()
        assert lhs == extract_singularities(u).merge(extract_singularities(v))


def test_multiply_phase_preserves_winding(disc, disc_grid32, rng):
    g = disc_grid32
    c, u = random_canonical(rng, disc, g)
    X, Y = g.XY
    w = multiply_phase(u, 3 * np.sin(4 * X) * Y)
    assert extract_singularities(w) == extract_singularities(u)
    assert w.config == c


def test_resolution_check(disc):
    g = grid_avoiding(disc, 1 / 16)
    rng = np.random.default_rng(0)
    with pytest.raises(ResolutionError):
        from_angles(g, rng.uniform(-math.pi, math.pi, g.shape))
    X, _ = g.XY
    assert from_angles(g, X).tag == "angles"


def test_support_measure(disc_grid32):
    g = disc_grid32
    assert support_measure(constant_field(g)) == 0.0
    X, _ = g.XY
    u = phase_field(g, np.where(X > 0, 0.5, 0.0))
    assert support_measure(u) == pytest.approx(((X > 0) & g.mask).sum() * g.h**2)


def test_exports(tmp_path, disc_grid32):
    g = disc_grid32
    u = plane_wave(2, g)
    u.to_csv(tmp_path / "u.csv")
    data = np.loadtxt(tmp_path / "u.csv", delimiter=",", skiprows=1)
    assert data.shape == (g.n_interior, 3)
    assert np.allclose(data[:, 2], 2 * data[:, 0])
    u.to_binary(tmp_path / "u.bin")
    arr = np.fromfile(tmp_path / "u.bin", dtype="<f8").reshape(g.shape)
    assert np.allclose(arr[g.mask], u.angle[g.mask]) and np.isnan(arr[~g.mask]).all()


def test_sine_map_field_identity(disc_grid32):
    # |u - 1| = (2/pi)|theta| pointwise after the sine map
    g = disc_grid32
    X, Y = g.XY
    u = phase_field(g, 2.5 * X * Y)
    t = compose_circle(sine_map(), u)
    theta = pv(t.angle[g.mask])
    assert np.allclose(np.abs(u.values[g.mask] - 1), 2 / math.pi * np.abs(theta), atol=1e-12)


def test_resolution_check_multiple_vortex(disc):
    c = Configuration(((0.1, 0.05),), (2,))
    g = grid_avoiding(disc, 1 / 128, c.points)
    u = canonical_field(c, disc, g)
    assert plaquette_winding(u).sum() == 2
