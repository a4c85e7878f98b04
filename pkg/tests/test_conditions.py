import numpy as np
import pytest
from hypothesis import given, strategies as st

from cconvex.conditions import (MTWQuery, check_condition, check_glp, estimate_fpp_constant, estimate_qconv_M,
                                mtw_value, segment_samples)
from cconvex.config import rng
from cconvex.cost import CostModel

seeds = st.integers(0, 2**32 - 1)
CURVED = [("inverse_square", None), ("power", -1.0), ("power", 0.5), ("power", -1.5)]


def make(kind, p=None):
    return CostModel.make(kind, 2, p=p)


def query(c, seed, orthogonal=True):
    gen = rng(seed, 9)
    x, y = c.sample_pairs(gen, 1)
    return MTWQuery.make(x[0], y[0], gen.normal(size=2), gen.normal(size=2), orthogonal)


def test_query_is_orthogonalised():
    q = query(make("inverse_square"), 1)
    assert abs(q.eta @ q.V) <= 1e-12
    assert np.linalg.norm(q.V) == pytest.approx(1.0) and np.linalg.norm(q.eta) == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["bilinear", "quadratic"])
@given(seed=seeds)
def test_flat_mtw_vanishes(kind, seed):
    c = make(kind)
    assert abs(mtw_value(c, query(c, seed)).value) <= 1e-6
    assert abs(mtw_value(c, query(c, seed), method="nested").value) <= 1e-6


@pytest.mark.parametrize("kind,p", CURVED)
@given(seed=seeds)
def test_mtw_even_and_quadratic_in_each_argument(kind, p, seed):
    c = make(kind, p)
    q = query(c, seed)
    v = mtw_value(c, q).value
    flipped = mtw_value(c, MTWQuery(q.x, q.xbar, -q.V, -q.eta)).value
    doubled = mtw_value(c, MTWQuery(q.x, q.xbar, 2 * q.V, q.eta)).value
    scale = max(1.0, abs(v))
    assert abs(flipped - v) <= 1e-5 * scale
    assert abs(doubled - 4 * v) <= 4e-5 * scale


@pytest.mark.parametrize("kind,p", CURVED[:2])
def test_hessian_and_nested_methods_agree(kind, p):
    c = make(kind, p)
    for s in range(5):
        q = query(c, s)
        a = mtw_value(c, q).value
        b = mtw_value(c, q, method="nested").value
        assert abs(a - b) <= 1e-3 * max(1.0, abs(a))


def test_quadratic_a3w_extremal_zero():
    rep = check_condition(make("quadratic"), "A3w", 300, 0)
    assert rep.passed and abs(rep.extremal) <= 1e-6


@pytest.mark.parametrize("p", [-1.0])
def test_power_a3s_passes(p):
    assert check_condition(make("power", p), "A3s", 300, 0).passed


def test_inverse_square_classification(oracles):
    c = make("inverse_square")
    a3w = check_condition(c, "A3w", 2000, 0)
    nncc = check_condition(c, "NNCC", 2000, 0)
    assert a3w.passed and not check_condition(c, "A3s", 2000, 0).passed and not nncc.passed
    assert a3w.extremal == pytest.approx(oracles["inverse_square"]["A3w_min"], abs=1e-9)
    assert nncc.extremal == pytest.approx(oracles["inverse_square"]["NNCC_min"], rel=1e-6)


def test_condition_witness_reevaluates():
    c = make("power", -1.0)
    rep = check_condition(c, "A3w", 200, 3)
    w = rep.witness
    q = MTWQuery(np.asarray(w["x"]), np.asarray(w["xbar"]), np.asarray(w["V"]), np.asarray(w["eta"]))
    assert mtw_value(c, q).value == pytest.approx(w["raw"], rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("kind,p", CURVED[:2])
def test_implication_chain_a3s_nncc_imply_a3w(kind, p):
    c = make(kind, p)
    for k in ("A3s", "NNCC"):
        if check_condition(c, k, 200, 4).passed:
            assert check_condition(c, "A3w", 200, 4).passed


@pytest.mark.parametrize("kind", ["bilinear", "quadratic"])
def test_flat_qconv_and_fpp(kind):
    c = make(kind)
    M, rep = estimate_qconv_M(c, 200, 0)
    C, frep = estimate_fpp_constant(c, 200, 0, M_hat=M)
    assert M == pytest.approx(1.0, abs=1e-6) and rep.passed
    assert C <= 1e-6 and frep.passed
    assert check_glp(c, 200, 0).passed


def test_inverse_square_chain(oracles):
    c = make("inverse_square")
    o = oracles["inverse_square"]
    M, rep = estimate_qconv_M(c, o["samples"], 0)
    C, frep = estimate_fpp_constant(c, o["samples"], 0, M_hat=M)
    assert rep.passed and check_glp(c, o["samples"], 0).passed
    assert M == pytest.approx(o["M_hat"], rel=1e-9)
    assert C == pytest.approx(o["C_hat"], rel=1e-9)
    assert M <= np.exp(C) * 1.05


@pytest.mark.parametrize("kind,p", CURVED)
def test_quasiconvexity_along_segments(kind, p):
    # an interior value above f(0) forces f(1) > f(0)
    for s in segment_samples(make(kind, p), 100, 2, 21):
        if s is None:
            continue
        if np.max(s.f[1:-1]) > s.f[0] + 1e-9:
            assert s.f[-1] > s.f[0]


@pytest.mark.parametrize("kind,p", CURVED)
def test_qconv_without_violations_implies_glp(kind, p):
    c = make(kind, p)
    _, rep = estimate_qconv_M(c, 100, 7)
    if rep.extra["violations"] == 0:
        assert check_glp(c, 100, 7).passed
