import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reconlab import germ as gm
from reconlab import sewing as sw
from reconlab.errors import HypothesisViolatedError
from reconlab.grid import DyadicGrid
from reconlab.mollifier import build_stack

unit = st.floats(0, 1)


@settings(max_examples=50, deadline=None)
@given(unit, unit, unit)
def test_cocycle(s, u, t):
    g = lambda y: np.sin(7 * y) + y**3
    assert abs(sw.delta2(sw.delta1(g))(s, u, t)) <= 1e-14


@settings(max_examples=50, deadline=None)
@given(unit, unit, unit)
def test_additive_increments_have_zero_delta(s, u, t):
    assert abs(sw.delta2(gm.additive_process())(s, u, t)) <= 1e-15


def test_young_delta_closed_form():
    A = gm.young_process()
    f, g = gm.cosine(1), gm.sine(1)
    s, u, t = np.random.default_rng(3).random((3, 100))
    expected = -(f(u) - f(s)) * (g(t) - g(u))
    np.testing.assert_allclose(sw.delta2(A)(s, u, t), expected, atol=1e-12, rtol=0)


@settings(max_examples=50, deadline=None)
@given(unit, unit)
def test_antisymmetrize(s, t):
    anti = sw.antisymmetrize(gm.young_process())
    assert anti(s, t) == -anti(t, s)


def test_b_norm_zero_and_linear():
    g = DyadicGrid(10)
    ks = range(1, 7)
    assert sw.b_norm(lambda s, t: 0.0 * (t - s), 1.5, 2, 2, ks, g) == 0.0
    eta = 1.5
    closed = math.sqrt(sum(2.0 ** (2 * (eta - 1) * k) for k in ks))
    assert sw.b_norm(lambda s, t: t - s, eta, 2, 2, ks, g) == pytest.approx(closed, rel=1e-10)
    closed_inf = 2.0 ** ((eta - 1) * 6)
    assert sw.b_norm(lambda s, t: t - s, eta, 1, math.inf, ks, g) == pytest.approx(closed_inf, rel=1e-10)


def test_bbar_norm_matches_dense_brute_force():
    dA = sw.delta2(gm.young_process())
    ks = range(5, 8)
    coarse = sw.bbar_norm(dA, 1.5, 2, math.inf, ks, DyadicGrid(9))
    dense = sw.bbar_norm(dA, 1.5, 2, math.inf, ks, DyadicGrid(10), max_points=None)
    assert coarse == pytest.approx(dense, rel=0.01)


def test_bbar_norm_of_additive_is_zero():
    assert sw.bbar_norm(sw.delta2(gm.additive_process()), 1.5, 2, 2, range(1, 5), DyadicGrid(9)) <= 1e-13


def test_additive_sewing_recovers_w():
    g = DyadicGrid(14)
    w = gm.sine(2)
    path = sw.sew(gm.additive_process(w), 1.5, 2, math.inf, 2.5, build_stack(g, 2.5), n_stop=10)
    assert np.abs(path.values - (w(g.points) - w(0.0))).max() <= 1e-8


def test_young_routes_and_oracle_agree():
    g = DyadicGrid(12)
    stack = build_stack(g, 2.5)
    A = gm.young_process()
    rec = sw.sew(A, 1.5, 2, math.inf, 2.5, stack)
    orc = sw.sew(A, 1.5, 2, math.inf, 2.5, stack, route=sw.ORACLE)
    rs = sw.riemann_stieltjes(gm.cosine(1), gm.sine(1), g)
    assert rec(0.0) == 0.0 and orc(0.0) == 0.0
    assert np.abs(rec.values - orc.values).max() <= 1e-5
    assert np.abs(rec.values - rs).max() <= 1e-4
    # closed form: ∫_0^x cos d(sin) = pi x + sin(4 pi x) / 4
    exact = np.pi * g.points + np.sin(4 * np.pi * g.points) / 4
    assert np.abs(orc.values - exact).max() <= 1e-12


def test_sewn_path_extends_with_drift():
    g = DyadicGrid(10)
    path = sw.sew(gm.additive_process(), 1.5, 2, 2, 2.5, build_stack(g, 2.5), route=sw.ORACLE)
    assert path.drift == pytest.approx(1.0)
    assert path(1.0) == pytest.approx(1.0) and path(-0.5) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        path(0.3 / g.size)


@pytest.mark.parametrize("eta,r,p", [(1.0, 2.5, 2), (1.5, 1.0, 2), (1.5, 2.5, 0.5)])
def test_sew_hypotheses(eta, r, p):
    g = DyadicGrid(9)
    with pytest.raises(HypothesisViolatedError):
        sw.sew(gm.young_process(), eta, p, 2, r, build_stack(g, 2.5))


G10 = DyadicGrid(10)
STACK10 = build_stack(G10, 2.5)


@settings(max_examples=8, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_sewing_is_linear(a, b):
    A, B = gm.young_process(), gm.square_process()
    combo = sw.sew(A.scaled(a) + B.scaled(b), 1.5, 2, 2, 2.5, STACK10).values
    parts = a * sw.sew(A, 1.5, 2, 2, 2.5, STACK10).values + b * sw.sew(B, 1.5, 2, 2, 2.5, STACK10).values
    np.testing.assert_allclose(combo, parts, atol=1e-10)


def test_young_sewing_bound():
    g = DyadicGrid(11)
    A = gm.young_process()
    path = sw.sew(A, 1.5, 2, math.inf, 2.5, build_stack(g, 2.5))
    norms = sw.sewing_bound(A, path, 1.5, 2, math.inf, range(1, 7))
    assert 0 < norms.ratio <= sw.C_SEW


def test_chi_forced_values():
    assert sw.chi_tilde(0.5) == pytest.approx(0.5, abs=1e-15)
    assert sw.chi_tilde(0.7) == 0.0 and sw.chi_tilde(0.3) == 1.0


def test_partition_of_unity():
    report = sw.chi_partition_check(n_samples=1024)
    assert report.max_residual <= 1e-10 and report.symmetry_residual <= 1e-12
    assert 0.2 <= report.support[0] and report.support[1] <= 0.6
