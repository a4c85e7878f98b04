import numpy as np
import pytest

from cconvex.cfunc import CFunction, Grid, SemidiscretePotential, random_potential, sublevel_set
from cconvex.config import rng
from cconvex.cost import CostModel
from cconvex.errors import DegenerateBody, DilationEscapes
from cconvex.estimates import (aleksandrov_check, check_chopping, chopping_family, contact_set, dual_segment_family,
                               envelope_instance, estimate_sweep, estimates_csv, recompute, section_hull,
                               section_instance, sharp_growth_check, strict_convexity_cone, trapping_basis,
                               two_piece_instance)
from cconvex.geometry import box, convex_hull, plane_gap, random_polytope, regular_polygon, width_segment


@pytest.fixture(scope="module")
def env():
    return envelope_instance(64)


def test_envelope_sharp_growth_near_closed_form(env, oracles):
    rep = sharp_growth_check(env.u, env.m, env.A, 1.0, env.grid)
    assert rep.lhs == pytest.approx(0.25, rel=1e-2)
    assert rep.c_impl == pytest.approx(6.4, rel=0.05)
    assert rep.c_impl == pytest.approx(oracles["envelope"]["sharp_growth"]["64"], rel=1e-9)
    assert rep.extra["oriented_constant"] == pytest.approx(1 / rep.c_impl)


def test_envelope_aleksandrov_near_closed_form(env, oracles):
    rep = aleksandrov_check(env.u, env.m, env.x0, [1.0, 0.0], env.grid)
    assert rep.lhs == pytest.approx(0.25, rel=1e-2)
    assert rep.extra["width"] == pytest.approx(2.0, rel=0.05)
    assert rep.extra["plane_gap"] == pytest.approx(2.0, rel=0.05)
    assert rep.extra["d_plane"] == pytest.approx(1.0, rel=0.05)
    assert rep.c_impl == pytest.approx(0.101, rel=0.05)
    assert rep.c_impl == pytest.approx(oracles["envelope"]["aleksandrov"]["64"], rel=1e-9)


def test_grid_refinement_stability(oracles):
    for name in ("sharp_growth", "aleksandrov"):
        a, b = oracles["envelope"][name]["32"], oracles["envelope"][name]["64"]
        assert 0.5 <= a / b <= 2.0
    inst = envelope_instance(32)
    assert sharp_growth_check(inst.u, inst.m, inst.A, 1.0, inst.grid).c_impl == pytest.approx(
        oracles["envelope"]["sharp_growth"]["32"], rel=1e-9)


def test_halving_A_scales_rhs_by_sixteen(env):
    big = sharp_growth_check(env.u, env.m, env.A, 1.0, env.grid)
    small = sharp_growth_check(env.u, env.m, regular_polygon(64, 0.125), 1.0, env.grid)
    assert big.rhs / small.rhs == pytest.approx(16.0, rel=0.15)
    assert small.lhs == pytest.approx(big.lhs)


def test_degenerate_A_flagged(env):
    seg = convex_hull(np.array([[-0.1, 0.0], [0.1, 0.0]]))
    rep = sharp_growth_check(env.u, env.m, seg, 1.0, env.grid)
    assert rep.degenerate and rep.rhs == 0.0 and rep.c_impl == np.inf


def test_dilation_escape(env):
    with pytest.raises(DilationEscapes):
        sharp_growth_check(env.u, env.m, regular_polygon(32, 0.6), 1.0, env.grid)


def test_recompute_reproduces(env):
    for rep in (sharp_growth_check(env.u, env.m, env.A, 1.0, env.grid),
                aleksandrov_check(env.u, env.m, [0.2, 0.1], [0.6, 0.8], env.grid)):
        assert recompute(rep).c_impl == pytest.approx(rep.c_impl, rel=1e-9)


def test_aleksandrov_decays_towards_boundary(env):
    vals = [aleksandrov_check(env.u, env.m, [r, 0.0], [1.0, 0.0], env.grid).c_impl for r in (0.0, 0.6, 0.8, 0.9, 0.97)]
    assert all(a > b for a, b in zip(vals[1:], vals[2:]))
    assert vals[-1] < 0.3 * vals[0]


def test_aleksandrov_symmetric_in_v(env):
    for v in ([1.0, 0.0], [0.0, 1.0]):
        a = aleksandrov_check(env.u, env.m, env.x0, v, env.grid).c_impl
        b = aleksandrov_check(env.u, env.m, env.x0, -np.asarray(v), env.grid).c_impl
        assert a == pytest.approx(b, rel=1e-12)


def test_quadratic_matches_euclidean_computation(env):
    S = sublevel_set(env.u, env.m, env.grid)
    H = section_hull(S)
    E = convex_hull(S.boundary)
    v = np.array([0.6, 0.8])
    assert H.volume == pytest.approx(E.volume, abs=1e-6)
    assert plane_gap(H, v) == pytest.approx(plane_gap(E, v), abs=1e-6)
    assert width_segment(H, v)[0] == pytest.approx(width_segment(E, v)[0], abs=1e-6)


def test_quadratic_dual_segments_exact(env):
    S = sublevel_set(env.u, env.m, env.grid)
    for v in ([1.0, 0.0], [0.6, -0.8]):
        fam, rep = dual_segment_family(S, [0.1, 0.2], v, t_cap=0.5)
        np.testing.assert_allclose(rep.diffs, rep.ts * rep.d_plane, atol=1e-9)
        assert rep.lower == pytest.approx(1.0, abs=1e-9) and rep.constant == pytest.approx(1.0, abs=1e-9)
    _, rep0 = dual_segment_family(S, [0.1, 0.2], [1.0, 0.0], ts=[0.0, 0.1])
    assert rep0.diffs[0] == 0.0


def test_inverse_square_dual_segment_lower_bound(oracles):
    c = CostModel.make("inverse_square")
    M = oracles["inverse_square"]["M_hat"]
    for s in range(3):
        inst = section_instance(c, s, 32)
        S = sublevel_set(inst.u, inst.m, inst.grid)
        v = rng(s, 61).standard_normal(2)
        _, rep = dual_segment_family(S, inst.x0, v / np.linalg.norm(v), t_cap=0.2)
        assert rep.lower >= 0.9 / M


def test_trapping_square():
    tb = trapping_basis(box([-1, -1], [1, 1]), [1.0, 0.0])
    np.testing.assert_allclose(np.abs(tb.basis), np.eye(2), atol=1e-9)
    assert tb.report.c_impl == pytest.approx(2.0)
    assert tb.nondegenerate


def test_trapping_thin_box_alignment():
    tb = trapping_basis(box([-3, -0.1], [3, 0.1]), [1.0, 0.0])
    assert tb.alignment >= 0.5 and tb.nondegenerate
    with pytest.raises(DegenerateBody):
        trapping_basis(convex_hull(np.array([[0.0, 0.0], [1.0, 1.0]])), [1.0, 0.0])


def test_trapping_random_hulls_within_envelope(oracles):
    worst = 0.0
    for i in range(oracles["envelopes"]["n_hulls"]):
        gen = rng(0, 80, i)
        A = random_polytope(gen, 2)
        v = gen.standard_normal(2)
        tb = trapping_basis(A, v / np.linalg.norm(v))
        assert tb.nondegenerate and tb.report.c_impl > 0
        worst = max(worst, tb.report.c_impl)
    assert worst <= oracles["envelopes"]["trapping_max"] * (1 + 1e-9)


@pytest.mark.parametrize("kind", ["quadratic", "bilinear"])
def test_chopping_properties_below_t_star(kind):
    c = CostModel.make(kind)
    for s in range(3):
        u, m0, x_e, grid = two_piece_instance(c, s)
        fam, rep = chopping_family(u, m0, x_e, 0.1, grid)
        assert rep.t_star > 0 and not rep.flags and rep.eps0 > 0
        S0 = grid.points[contact_set(u, m0, grid, 1e-7)]
        for t in rep.t_star * rng(s, 99).random(5):
            ch = check_chopping(fam, u, grid, t, S0)
            assert ch.ball_ok and ch.exposed_inside
        m_0 = fam.member(0.0)
        assert m_0(c, x_e) == pytest.approx(m0(c, x_e), abs=1e-12)


def test_chopping_large_delta():
    c = CostModel.make("quadratic")
    u, m0, x_e, grid = two_piece_instance(c, 1)
    fam, rep = chopping_family(u, m0, x_e, 10.0, grid)
    assert rep.tau_star >= 0 and rep.t_star > 0


def test_two_piece_requires_flat_cost():
    with pytest.raises(ValueError):
        two_piece_instance(CostModel.make("inverse_square"), 0)


def test_cone_singleton_contact_is_trivial():
    c = CostModel.make("quadratic")
    grid = Grid.on_box(c.omega, 32)
    x0 = grid.points[grid.index_of([0.5, 0.5])[0]]
    foci = np.array([[0.3, 0.3], [0.7, 0.35], [0.5, 0.75]])
    ybar = foci.mean(axis=0)
    u = SemidiscretePotential(c, foci, c.value(x0, foci))
    m0 = CFunction(ybar, float(c.value(x0, ybar)))
    assert contact_set(u, m0, grid, 1e-7).sum() == 1
    assert strict_convexity_cone(u, m0, x0, [0.2, 0.1], grid).status == "trivial"


def test_cone_on_atomic_potential_flags_hypotheses():
    c = CostModel.make("quadratic")
    grid = Grid.on_box(c.omega, 32)
    u = random_potential(c, 6, 0)
    x0 = np.array([0.5, 0.5])
    _, j = u.evaluate(x0[None], return_index=True)
    m0 = CFunction(u.foci[j[0]], u.offsets[j[0]])
    rep = strict_convexity_cone(u, m0, x0, [0.4, 0.2, 0.1], grid)
    assert rep.status == "hypotheses_not_met" and rep.flags
    assert rep.mass_decreasing


@pytest.mark.parametrize("kind,p", [("quadratic", None), ("inverse_square", None), ("power", -1.0)])
def test_sweep_constants_positive(kind, p):
    rows = estimate_sweep(CostModel.make(kind, p=p), 4, 0)
    assert len(rows) == 8
    assert all(np.isfinite(r.c_impl) and r.c_impl > 0 for _, r in rows)


def test_sweep_csv_independent_of_thread_count(monkeypatch):
    c = CostModel.make("inverse_square")
    monkeypatch.setenv("CCX_THREADS", "1")
    a = estimates_csv(estimate_sweep(c, 3, 5))
    monkeypatch.setenv("CCX_THREADS", "4")
    b = estimates_csv(estimate_sweep(c, 3, 5))
    assert a == b and a.count("\n") >= 7
