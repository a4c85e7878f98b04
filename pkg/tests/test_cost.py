import numpy as np
import pytest
from hypothesis import given, strategies as st

from cconvex.config import rng
from cconvex.cost import KINDS, CostModel, audit_structure, derivatives, fd_derivatives, metric
from cconvex.errors import ConfigError, SingularPair

ALL = [("bilinear", None), ("quadratic", None), ("inverse_square", None),
       ("power", -1.5), ("power", -1.0), ("power", 0.5), ("power", 1.5)]
seeds = st.integers(0, 2**32 - 1)


def make(kind, p=None, n=2):
    return CostModel.make(kind, n, p=p)


def test_bilinear_derivatives():
    c = make("bilinear")
    x, y = np.array([0.2, 0.7]), np.array([0.4, 0.1])
    d = derivatives(c, x, y)
    assert d.value == pytest.approx(-x @ y)
    assert np.allclose(d.Dc, -y) and np.allclose(d.Dbarc, -x)
    assert np.array_equal(d.cross.matrix, np.eye(2)) and d.cross.det == 1.0


def test_quadratic_derivatives():
    c = make("quadratic")
    x, y = np.array([0.2, 0.7]), np.array([0.4, 0.1])
    d = derivatives(c, x, y)
    assert d.value == pytest.approx(0.5 * np.sum((x - y) ** 2))
    assert np.allclose(d.Dc, x - y)
    assert np.array_equal(d.cross.matrix, np.eye(2))


def test_inverse_square_symbolic_point():
    c = CostModel.make("inverse_square", 2, omega=[[-0.5, 0.5]] * 2, omega_bar=[[0.9, 1.9], [-0.5, 0.5]],
                       singular_separation=0.3)
    d = derivatives(c, [0.0, 0.0], [1.0, 0.0])
    assert d.value == pytest.approx(1.0)
    assert np.allclose(d.Dc, [2.0, 0.0])


def test_power_literal_and_normalized_forms():
    x, y = np.array([0.0, 0.0]), np.array([3.0, 4.0])
    lit = CostModel.make("power", 2, p=-1.0, power_form="literal", omega=[[-.5, .5]] * 2, omega_bar=[[2.5, 3.5], [3.5, 4.5]])
    nor = CostModel.make("power", 2, p=-1.0, omega=[[-.5, .5]] * 2, omega_bar=[[2.5, 3.5], [3.5, 4.5]])
    assert float(lit.value(x, y)) == pytest.approx(0.2)
    assert float(nor.value(x, y)) == pytest.approx(-(5.0 ** -1) / -1.0)


@pytest.mark.parametrize("kind,p", ALL)
def test_analytic_matches_richardson(kind, p):
    c = make(kind, p)
    gen = rng(11, KINDS.index(kind))
    X, Y = c.sample_pairs(gen, 500)
    worst = 0.0
    for x, y in zip(X, Y):
        d = derivatives(c, x, y)
        gx, gb, M = fd_derivatives(c, x, y)
        for a, b in ((d.Dc, gx), (d.Dbarc, gb), (d.cross.matrix, M)):
            worst = max(worst, np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))))
    assert worst <= 1e-6


@pytest.mark.parametrize("kind", ["bilinear", "quadratic"])
@given(seed=seeds)
def test_flat_cross_is_identity(kind, seed):
    c = make(kind)
    x, y = c.sample_pairs(rng(seed), 1)
    assert np.array_equal(c.cross_matrix(x[0], y[0]), np.eye(2))
    assert np.array_equal(metric(c, x[0], y[0]), np.eye(2))


@pytest.mark.parametrize("kind,p", [k for k in ALL if k[0] not in ("bilinear", "quadratic")])
@given(seed=seeds)
def test_metric_spd_with_singular_values(kind, p, seed):
    c = make(kind, p)
    x, y = c.sample_pairs(rng(seed), 1)
    G = metric(c, x[0], y[0])
    E = np.linalg.inv(c.cross_matrix(x[0], y[0]).T)
    assert np.allclose(G, G.T)
    ev = np.linalg.eigvalsh(G)
    assert np.all(ev > 0)
    assert np.allclose(np.sort(ev), np.sort(np.linalg.svd(E, compute_uv=False) ** 2), rtol=1e-9)


@pytest.mark.parametrize("kind", ["bilinear", "quadratic"])
def test_audit_flat(kind):
    rep = audit_structure(make(kind), 1000, 0)
    assert rep.passed and rep.extremal == 1.0


def test_audit_inverse_square_separated():
    rep = audit_structure(make("inverse_square"), 300, 0)
    assert rep.passed and rep.extremal > 0
    assert rep.extra["max_roundtrip_error"] <= 1e-8


def test_singular_pair_rejected():
    c = CostModel.make("inverse_square", 2, omega=[[0, 1]] * 2, omega_bar=[[1.5, 2.5]] * 2, singular_separation=0.5)
    with pytest.raises(SingularPair):
        c.value(np.array([1.0, 1.0]), np.array([1.2, 1.2]))


@pytest.mark.parametrize("bad", [
    {"kind": "sphere"},
    {"kind": "power"},
    {"kind": "power", "p": -2.5},
    {"kind": "quadratic", "p": 2.0},
    {"kind": "inverse_square", "omega_bar": [[0, 1], [0, 1]]},
    {"kind": "quadratic", "omega": [[1, 0], [0, 1]]},
    {"kind": "quadratic", "colour": "red"},
])
def test_bad_cost_configs(bad):
    with pytest.raises(ConfigError):
        CostModel.from_dict(bad)


def test_cost_dict_roundtrip():
    c = CostModel.from_dict({"kind": "power", "p": -1.0, "omega": [[0, 1], [0, 1]],
                             "omega_bar": [[3, 4], [3, 4]], "fd_step": 1e-4})
    c2 = CostModel.from_dict(c.to_dict())
    assert c2.to_dict() == c.to_dict()
