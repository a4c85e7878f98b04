import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cconvex.config import rng
from cconvex.errors import DegenerateBody, NotAVertex, PointOutside, UnboundedDual
from cconvex.geometry import (Polytope, bishop_phelps, box, convex_hull, dual_volume_bound, john_ellipsoid,
                              john_inclusion_violation, inward_normal, normal_cone, plane_gap, polar_dual,
                              property_battery, random_polytope, regular_polygon, supporting_plane_distance,
                              width_segment)

SQUARE = box([-1, -1], [1, 1])
TRIANGLE = convex_hull(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))

seeds = st.integers(0, 2**32 - 1)


# ---------------------------------------------------------------- hulls

def test_hull_drops_interior_point():
    P = convex_hull(np.array([[0, 0], [1, 0], [0, 1], [0.2, 0.2]], float))
    assert len(P.vertices) == 3
    assert P.volume == pytest.approx(0.5)


def test_hull_of_single_point():
    P = convex_hull(np.array([[0.3, 0.7]]))
    assert len(P.vertices) == 1 and P.volume == 0.0 and P.affine_dim == 0


def test_collinear_hull_is_segment():
    P = convex_hull(np.array([[0, 0], [1, 1], [2, 2], [0.5, 0.5]], float))
    assert P.affine_dim == 1 and P.volume == 0.0
    assert len(P.vertices) == 2


@given(seeds)
def test_hull_volume_monotone_under_nesting(seed):
    X = rng(seed, 0).random((100, 2))
    full = convex_hull(X)
    sub = convex_hull(X[:30])
    assert sub.volume <= full.volume + 1e-12 <= 1.0 + 1e-12


def test_polytope_json_roundtrip():
    P = random_polytope(rng(3), 3)
    Q = Polytope.from_json(P.to_json())
    assert json.loads(P.to_json())["dim"] == 3
    assert np.allclose(np.sort(P.vertices, axis=0), np.sort(Q.vertices, axis=0))
    assert Q.volume == pytest.approx(P.volume)


# ---------------------------------------------------------------- polar duals

def test_polar_of_square_is_cross_polytope():
    D = polar_dual(SQUARE, [0, 0], [0, 0], 1.0)
    assert D.volume == pytest.approx(2.0)
    assert sorted(map(tuple, np.round(D.vertices, 12).tolist())) == [(-1, 0), (0, -1), (0, 1), (1, 0)]


def test_polar_homogeneity_in_lambda():
    assert polar_dual(SQUARE, [0, 0], [0, 0], 2.0).volume == pytest.approx(8.0)


def test_polar_of_disk_is_disk():
    D = polar_dual(regular_polygon(64), [0, 0], [0, 0], 1.0)
    assert D.volume == pytest.approx(np.pi, rel=0.02)


@given(seeds, st.floats(0.1, 10.0))
def test_polar_vertices_scale_with_lambda(seed, lam):
    gen = rng(seed, 1)
    A = random_polytope(gen, 2)
    p = A.centroid
    q = gen.normal(size=2)
    V1 = polar_dual(A, p, q, 1.0).vertices
    Vl = polar_dual(A, p, q, lam).vertices
    expect = q + lam * (V1 - q)
    d = np.min(np.linalg.norm(Vl[:, None, :] - expect[None, :, :], axis=2), axis=1)
    assert np.max(d) <= 1e-9 * max(1.0, lam * np.abs(V1).max())


def test_polar_with_boundary_center_is_flagged():
    with pytest.warns(UnboundedDual):
        D = polar_dual(SQUARE, [1.0, 0.0], [0, 0], 1.0)
    assert "unbounded" in D.flags


# ---------------------------------------------------------------- dual volume bound

def test_dual_volume_square():
    assert dual_volume_bound(SQUARE, [0, 0], 1.0).constant == pytest.approx(8.0)


@pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_dual_volume_regular_polygon_closed_form(r, lam):
    # |P| |P*| for a centred regular k-gon equals k^2 sin^2(pi/k) -> pi^2
    k = 64
    rep = dual_volume_bound(regular_polygon(k, r), [0, 0], lam)
    assert rep.constant == pytest.approx(k**2 * np.sin(np.pi / k) ** 2, rel=1e-9)


@given(seeds)
def test_dual_volume_constant_independent_of_lambda(seed):
    gen = rng(seed, 2)
    A = random_polytope(gen, 2)
    q = gen.normal(size=2)
    cs = [dual_volume_bound(A, q, lam).constant for lam in (0.1, 1.0, 10.0)]
    assert (max(cs) - min(cs)) / max(cs) <= 1e-6


def test_dual_volume_envelope(oracles):
    # Santalo-type envelope C_ball * n^n for the 20 seeded hulls used by the baseline
    assert oracles["envelopes"]["dual_volume_max"] <= np.pi**2 * 4
    for i in range(20):
        A = random_polytope(rng(0, 80, i), 2)
        assert dual_volume_bound(A, np.zeros(2), 1.0).constant <= oracles["envelopes"]["dual_volume_max"] * (1 + 1e-9)


def test_dual_volume_needs_interior():
    with pytest.raises(DegenerateBody):
        dual_volume_bound(convex_hull(np.array([[0, 0], [1, 1.0]])), [0, 0], 1.0)


# ---------------------------------------------------------------- John ellipsoid

def test_john_square_mvee_and_inscribed():
    E, c = john_ellipsoid(SQUARE)
    assert np.allclose(c, 0, atol=1e-7)
    assert np.allclose(E.axes[0], 1 / np.sqrt(2), atol=1e-6)
    pytest.importorskip("cvxpy")
    Ei, _ = john_ellipsoid(SQUARE, method="inscribed")
    assert np.allclose(Ei.axes[0], 1.0, atol=1e-4)


def test_john_ball_inscribed_is_ball():
    pytest.importorskip("cvxpy")
    E, _ = john_ellipsoid(regular_polygon(64), method="inscribed")
    assert np.allclose(E.axes[0], np.cos(np.pi / 64), atol=1e-4)


def test_john_triangle_double_inclusion():
    E, _ = john_ellipsoid(TRIANGLE)
    assert max(john_inclusion_violation(TRIANGLE, E)) <= 1e-7


@given(seeds, st.sampled_from([2, 3]))
def test_john_double_inclusion(seed, n):
    A = random_polytope(rng(seed, 3), n)
    E, c = john_ellipsoid(A)
    inner, outer = john_inclusion_violation(A, E)
    assert inner <= 1e-7 and outer <= 1e-7
    # vertices lie in c + n (E - c)
    assert np.all(E.scaled(n).gauge(A.vertices) <= 1 + 1e-7)


# ---------------------------------------------------------------- planes and widths

def test_supporting_plane_distance_examples():
    assert supporting_plane_distance(SQUARE, [0, 0], [1, 0]) == pytest.approx(1.0)
    assert supporting_plane_distance(SQUARE, [0.5, 0], [1, 0]) == pytest.approx(0.5)
    with pytest.raises(PointOutside):
        supporting_plane_distance(SQUARE, [2, 0], [1, 0])


@given(seeds)
def test_supporting_plane_distance_brute_force(seed):
    gen = rng(seed, 4)
    A = random_polytope(gen, 2)
    p = gen.dirichlet(np.ones(len(A.vertices))) @ A.vertices
    v = gen.normal(size=2)
    v /= np.linalg.norm(v)
    assert supporting_plane_distance(A, p, v) == pytest.approx(max((q - p) @ v for q in A.vertices))


def test_width_examples():
    assert width_segment(SQUARE, [1, 0])[0] == pytest.approx(2.0)
    L, (a, b) = width_segment(TRIANGLE, [1, 0])
    assert L == pytest.approx(1.0)
    assert abs(a[1]) < 1e-9 and abs(b[1]) < 1e-9


@given(seeds)
def test_width_below_plane_gap(seed):
    gen = rng(seed, 5)
    A = random_polytope(gen, int(gen.integers(2, 4)))
    v = gen.normal(size=A.dim)
    v /= np.linalg.norm(v)
    L, (a, b) = width_segment(A, v)
    assert L <= plane_gap(A, v) + 1e-9
    assert A.contains(a) and A.contains(b)
    assert np.allclose(b - a, L * v, atol=1e-8)


# ---------------------------------------------------------------- Bishop-Phelps

def test_bishop_phelps_near_facet():
    A = box([0, 0], [1, 1])
    pe, eh = bishop_phelps(A, [0.9, 0.5], [1, 0], 0.3)
    assert np.allclose(pe, [1, 0.5]) and np.allclose(eh, [1, 0])


def test_bishop_phelps_centre_of_square():
    A = box([0, 0], [1, 1])
    p = np.array([0.5, 0.5])
    pe, eh = bishop_phelps(A, p, [1, 0], 0.9)
    assert np.linalg.norm(p - pe) <= 0.5 / 0.9 + 1e-12
    assert A.support(eh) == pytest.approx(pe @ eh)


def test_bishop_phelps_ball_centre():
    A = regular_polygon(64)
    for ang in np.linspace(0, 2 * np.pi, 7):
        e = np.array([np.cos(ang), np.sin(ang)])
        pe, eh = bishop_phelps(A, [0, 0], e, 0.5)
        assert np.linalg.norm(e - eh) <= 1.0 + 1e-12
        assert np.linalg.norm(pe) == pytest.approx(1.0, abs=0.01)


@given(seeds, st.floats(0.05, 0.95))
def test_bishop_phelps_bounds(seed, rho):
    gen = rng(seed, 6)
    A = random_polytope(gen, int(gen.integers(2, 4)))
    p = gen.dirichlet(np.ones(len(A.vertices))) @ A.vertices
    e = gen.normal(size=A.dim)
    e /= np.linalg.norm(e)
    pe, eh = bishop_phelps(A, p, e, rho)
    d = A.support(e) - p @ e
    assert np.linalg.norm(p - pe) <= d / rho + 1e-9
    assert np.linalg.norm(e - eh) <= 2 * rho + 1e-9
    assert A.support(eh) - pe @ eh <= 1e-9


# ---------------------------------------------------------------- normal cones

def test_normal_cone_square_corner():
    A = box([0, 0], [1, 1])
    N = normal_cone(A, [0, 0])
    assert sorted(map(tuple, np.round(N.generators, 12).tolist())) == [(-1.0, 0.0), (0.0, -1.0)]
    assert N.contains_strict(np.array([-1, -1]) / np.sqrt(2))
    assert not N.contains(np.array([0.0, 1.0]))


def test_normal_cone_rejects_non_vertex():
    with pytest.raises(NotAVertex):
        normal_cone(box([0, 0], [1, 1]), [0.5, 0])


def test_inward_normal_square():
    e0, lam0 = inward_normal(box([0, 0], [1, 1]), [0, 0])
    assert np.allclose(e0, -np.ones(2) / np.sqrt(2))
    assert lam0 == pytest.approx(np.sqrt(2))


def test_inward_normal_triangle():
    e0, lam0 = inward_normal(TRIANGLE, [1, 0])
    others = np.array([[0, 0], [0, 1.0]]) - [1, 0]
    assert np.all(others @ e0 < 0)
    for t in np.linspace(0, lam0, 11)[1:]:
        assert TRIANGLE.contains(np.array([1, 0]) - t * e0, 1e-9)


def test_inward_normal_segment():
    S = convex_hull(np.array([[0, 0], [0, 1.0]]))
    e0, lam0 = inward_normal(S, [0, 1])
    assert np.allclose(e0, [0, 1]) and lam0 == pytest.approx(1.0)


@given(seeds, st.sampled_from([2, 3]))
def test_inward_normal_postconditions(seed, n):
    gen = rng(seed, 7)
    A = random_polytope(gen, n)
    k = int(gen.integers(len(A.vertices)))
    pe = A.vertices[k]
    e0, lam0 = inward_normal(A, pe)
    assert np.linalg.norm(e0) == pytest.approx(1.0)
    assert np.all((np.delete(A.vertices, k, axis=0) - pe) @ e0 < 0)
    for t in lam0 * np.linspace(0.1, 1.0, 10):
        assert A.max_violation(pe - t * e0) <= 1e-9


def test_battery_rows_are_deterministic():
    a = property_battery(5, 10, 2)
    b = property_battery(5, 10, 2)
    assert a == b and all(r["passed"] for r in a)
