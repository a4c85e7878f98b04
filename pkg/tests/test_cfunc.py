import numpy as np
import pytest
from hypothesis import given, strategies as st

from cconvex.cfunc import (CFunction, Grid, Region, SemidiscretePotential, c_cone, c_polar_dual, c_subdifferential,
                           cell_masses, focus_grid_potential, map_of_cones_check, mask_from_rle, mask_to_rle,
                           random_potential, subdiff_image_volume, sublevel_set)
from cconvex.config import rng
from cconvex.cost import CostModel
from cconvex.errors import EmptyAdmissible, EmptyBoundary, EmptySet
from cconvex.geometry import convex_hull, polar_dual, regular_polygon

seeds = st.integers(0, 2**32 - 1)
WIDE = [[-1.5, 1.5]] * 2


def test_single_piece_subdifferential_is_its_focus():
    c = CostModel.make("inverse_square")
    u = SemidiscretePotential(c, [[3.5, 3.2]], [0.3])
    for x in rng(0, 1).random((10, 2)):
        sd = c_subdifferential(u, x)
        assert sd.indices.tolist() == [0]
        np.testing.assert_allclose(sd.covectors[0], c.target_momentum(x, u.foci[0]))


def test_equal_offsets_tie_on_bisector():
    c = CostModel.make("quadratic")
    u = SemidiscretePotential(c, [[0.2, 0.5], [0.8, 0.5]], [0.0, 0.0])
    assert c_subdifferential(u, [0.5, 0.3]).indices.tolist() == [0, 1]
    assert c_subdifferential(u, [0.4, 0.3]).indices.tolist() == [0]


@pytest.mark.parametrize("kind", ["quadratic", "inverse_square"])
@given(seed=seeds)
def test_subdifferential_matches_brute_force(kind, seed):
    c = CostModel.make(kind)
    u = random_potential(c, 5, seed)
    x = c.sample_omega(rng(seed, 2), 1)[0]
    vals = np.array([-c.value(x, f) + o for f, o in zip(u.foci, u.offsets)])
    assert set(c_subdifferential(u, x).indices) == set(np.flatnonzero(vals >= vals.max() - 1e-9))


def test_cell_masses_partition_the_domain():
    c = CostModel.make("inverse_square")
    u = random_potential(c, 64, 5)
    g = Grid.on_box(c.omega, 64, oversample=2)
    assert cell_masses(u, g).sum() == pytest.approx(1.0, abs=1e-9)


def test_single_piece_image_volume_is_mass_of_region():
    c = CostModel.make("quadratic")
    u = SemidiscretePotential(c, [[0.4, 0.4]], [0.0])
    g = Grid.on_box(c.omega, 32)
    A = Region.from_polytope(g, regular_polygon(32, 0.3, (0.5, 0.5)))
    iv = subdiff_image_volume(u, A)
    assert iv.volume == pytest.approx(A.volume, rel=1e-12)
    assert iv.cell_mass[0] == pytest.approx(A.volume, rel=1e-12)


def test_identity_gradient_image_of_ball():
    # zero-offset focus grid: u is the envelope whose c-subdifferential is the identity
    c = CostModel.make("quadratic", omega=[[-1, 1]] * 2, omega_bar=[[-1, 1]] * 2)
    g = Grid.on_box(c.omega, 64)
    u = focus_grid_potential(c, g)
    r = 0.5
    A = Region.from_predicate(g, lambda X: np.linalg.norm(X, axis=1) <= r)
    iv = subdiff_image_volume(u, A)
    assert iv.volume == pytest.approx(np.pi * r**2, rel=0.02)
    mc = subdiff_image_volume(u, A, mc_samples=4 * g.size, seed=1)
    assert mc.volume == pytest.approx(np.pi * r**2, rel=0.02) and mc.stderr > 0


def test_unit_ball_sublevel_set():
    c = CostModel.make("quadratic", omega=WIDE, omega_bar=WIDE)
    g = Grid.on_box(WIDE, 96)
    u = focus_grid_potential(c, Grid.on_box(WIDE, 96))
    S = sublevel_set(u, CFunction([0.0, 0.0], 0.5), g)
    r = np.linalg.norm(g.points, axis=1)
    ball = r <= 1.0
    diff = S.mask.ravel() != ball
    assert S.compact
    assert np.all(np.abs(r[diff] - 1.0) <= g.cell_diameter)
    assert S.volume == pytest.approx(np.pi, rel=0.03)
    assert S.defect <= 2.0


def test_piece_below_gives_full_mask_not_compact():
    c = CostModel.make("quadratic")
    m = CFunction([0.5, 0.5], 0.0)
    u = SemidiscretePotential.from_pieces(c, [m.shifted(-1.0)])
    S = sublevel_set(u, m, Grid.on_box(c.omega, 16))
    assert S.mask.all() and not S.compact


def test_sublevel_errors():
    c = CostModel.make("quadratic")
    m = CFunction([0.5, 0.5], 0.0)
    u = SemidiscretePotential.from_pieces(c, [m.shifted(1.0)])
    with pytest.raises(EmptySet):
        sublevel_set(u, m, Grid.on_box(c.omega, 16))
    with pytest.raises(ValueError):
        sublevel_set(u, m, Grid.on_box(c.omega, 8))


def test_masked_points_satisfy_sublevel_inequality():
    c = CostModel.make("inverse_square")
    u = random_potential(c, 12, 3)
    m = CFunction([3.5, 3.5], float(u.evaluate(np.array([[0.5, 0.5]]))[0]) + 0.3 + c.value([0.5, 0.5], [3.5, 3.5]))
    S = sublevel_set(u, m, Grid.on_box(c.omega, 32))
    X = S.points
    assert np.all(u.evaluate(X) <= m(c, X) + 1e-9)


def test_inverse_square_coordinate_defect_small():
    c = CostModel.make("inverse_square")
    for s in range(4):
        u = random_potential(c, 12, s)
        x0 = np.array([0.5, 0.5])
        f = c.sample_omega_bar(rng(s, 4), 1)[0]
        m = CFunction(f, float(u.evaluate(x0[None])[0]) + c.value(x0, f) + 0.05)
        assert sublevel_set(u, m, Grid.on_box(c.omega, 48)).defect < 2.0


def test_quadratic_polar_dual_is_translated_vector_polar():
    c = CostModel.make("quadratic", omega=WIDE, omega_bar=WIDE)
    A = convex_hull(rng(0, 5).random((8, 2)) - 0.5)
    x = A.centroid
    m = CFunction([0.1, -0.2], 0.3)
    Y = Grid.on_box(WIDE, 64).points
    mask = c_polar_dual(c, A, x, m, 0.2, Y)
    P = polar_dual(A, x, m.focus, 0.2)
    s = np.min(P.offsets - Y @ P.normals.T, axis=1)
    clear = np.abs(s) > 1e-9
    assert np.array_equal(mask[clear], (s >= 0)[clear])


def test_polar_dual_monotone_and_saturates():
    c = CostModel.make("inverse_square")
    A = regular_polygon(12, 0.2, (0.5, 0.5))
    m = CFunction([3.4, 3.6], 0.0)
    Y = Grid.on_box(c.omega_bar, 32).points
    prev = None
    for lam in (0.01, 0.05, 0.2, 1.0):
        cur = c_polar_dual(c, A, [0.5, 0.5], m, lam, Y)
        if prev is not None:
            assert np.all(cur[prev])
        prev = cur
    assert c_polar_dual(c, A, [0.5, 0.5], m, 1e6, Y).all()
    with pytest.raises(EmptyBoundary):
        c_polar_dual(c, np.zeros((0, 2)), [0.5, 0.5], m, 0.1, Y)


def test_inverse_square_polar_dual_matches_double_loop():
    c = CostModel.make("inverse_square")
    A = regular_polygon(6, 0.1, (0.4, 0.6))
    x = np.array([0.4, 0.6])
    m = CFunction([3.3, 3.7], 0.1)
    Y = Grid.on_box(c.omega_bar, 12).points
    lam = 0.02
    B = np.array([v * (1 - t) + w * t for v, w in zip(A.vertices, np.roll(A.vertices, -1, axis=0))
                  for t in np.linspace(0, 1, 16, endpoint=False)])
    ref = np.array([all(-c.value(b, y) + c.value(x, y) - (m(c, b) - m(c, x)) <= lam for b in B) for y in Y])
    assert np.array_equal(c_polar_dual(c, A, x, m, lam, Y), ref)


def test_cone_vertex_depth_and_boundary_bound():
    c = CostModel.make("quadratic")
    A = regular_polygon(24, 0.25, (0.5, 0.5))
    m = CFunction([0.5, 0.5], 0.0)
    x0 = np.array([0.5, 0.5])
    fg = Grid.on_box(c.omega_bar, 49)  # odd so the focus of m is a grid point
    K = c_cone(c, x0, m, A, 0.02, fg)
    assert K(x0[None])[0] == pytest.approx(m(c, x0) - 0.02, abs=1e-3)
    assert np.all(K(A.vertices) <= m(c, A.vertices) + 1e-12)
    K0 = c_cone(c, x0, m, A, 0.0, fg)
    assert K0(x0[None])[0] == pytest.approx(m(c, x0), abs=1e-12)


def test_cone_without_admissible_focus():
    c = CostModel.make("quadratic")
    A = regular_polygon(8, 0.2, (0.5, 0.5))
    m = CFunction([0.5, 0.5], 0.0)
    with pytest.raises(EmptyAdmissible):
        c_cone(c, [0.5, 0.5], m, A, -10.0, np.zeros((0, 2)))


@pytest.mark.parametrize("kind", ["quadratic", "inverse_square"])
def test_map_of_cones_small(kind):
    rep = map_of_cones_check(CostModel.make(kind), 0, 0, resolution=32, focus_resolution=32)
    assert rep.passed and 0 < rep.n_polar < 32 * 32


@given(mask=st.lists(st.booleans(), min_size=12, max_size=12))
def test_rle_roundtrip(mask):
    m = np.array(mask).reshape(3, 4)
    assert np.array_equal(mask_from_rle(mask_to_rle(m)), m)


def test_potential_gauge_and_json():
    c = CostModel.make("inverse_square")
    u = random_potential(c, 7, 2)
    X = c.sample_omega(rng(2, 3), 50)
    _, a = u.evaluate(X, return_index=True)
    _, b = u.shifted(3.0).evaluate(X, return_index=True)
    assert np.array_equal(a, b)
    v = SemidiscretePotential.from_json(c, u.to_json())
    np.testing.assert_array_equal(v.offsets, u.offsets)
