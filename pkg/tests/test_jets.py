from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexdiff import diffeo as D
from convexdiff import fields as F
from convexdiff import geometry as G
from convexdiff import jets as J
from convexdiff import samplers

X1 = (0, (1,))


def quad(a, k):
    return J.JetPoly(1, k, {X1: 1, (0, (2,)): Fraction(a)})


small = st.builds(Fraction, st.integers(-50, 50), st.integers(1, 20))


@given(small, small)
@settings(max_examples=50, deadline=None)
def test_compose_quadratics(a, b):
    assert J.jet_compose(quad(a, 2), quad(b, 2)) == J.JetPoly(1, 2, {X1: 1, (0, (2,)): a + b})
    want = J.JetPoly(1, 3, {X1: 1, (0, (2,)): a + b, (0, (3,)): 2 * a * b})
    assert J.jet_compose(quad(a, 3), quad(b, 3)) == want


@given(small)
@settings(max_examples=50, deadline=None)
def test_invert_quadratic(a):
    assert J.jet_invert(quad(a, 2)) == J.JetPoly(1, 2, {X1: 1, (0, (2,)): -a})
    assert J.jet_invert(quad(a, 3)) == J.JetPoly(1, 3, {X1: 1, (0, (2,)): -a, (0, (3,)): 2 * a * a})


def test_is_unit():
    assert J.jet_is_unit(J.jet_identity(3, 2))
    sing = J.JetPoly(2, 2, {(0, (1, 0)): 1})
    assert not J.jet_is_unit(sing)
    assert J.jet_is_unit(J.JetPoly(1, 3, {X1: 2, (0, (3,)): 5}))
    assert J.jet_invert(J.jet_identity(2, 3)) == J.jet_identity(2, 3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_group_laws_exact(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(1, 4)), int(rng.integers(1, 5))
    p, q, r = (samplers.random_unit_jet(rng, n, k, density=0.3) for _ in range(3))
    e = J.jet_identity(n, k)
    assert J.jet_compose(J.jet_compose(p, q), r) == J.jet_compose(p, J.jet_compose(q, r))
    assert J.jet_compose(p, e) == p == J.jet_compose(e, p)
    inv = J.jet_invert(p)
    assert J.jet_compose(inv, p) == e == J.jet_compose(p, inv)


def test_json_roundtrip_and_pretty():
    p = J.JetPoly(2, 2, {(0, (1, 0)): 1, (0, (0, 1)): Fraction(1, 2), (1, (0, 1)): 1, (1, (2, 0)): Fraction(-3, 4)})
    assert J.jet_from_json(p.to_json()) == p
    assert "x1" in J.pretty_jet(p)
    f = p.to_float()
    assert not f.exact and J.jet_from_json(f.to_json()) == f


def test_taylor_identity():
    sq = G.unit_cube(2)
    for x0 in ([0.5, 0.5], [0.0, 0.3], [1.0, 1.0]):
        tj = J.taylor_extract(D.identity(sq), np.array(x0), 2)
        np.testing.assert_allclose(np.array(tj.jet.linear_part(), dtype=float), np.eye(2), atol=1e-6)
        assert all(abs(float(c)) < 1e-6 for c in tj.jet.degree_part(2).coeffs.values())


def test_taylor_quadratic_element_at_boundary():
    # phi(x) = x + 0.2 x(1-x): at 0 the jet is 1.2 u - 0.2 u^2
    phi = D.from_field(F.make_field(G.interval(), ["0.2"]))
    tj = J.taylor_extract(phi, np.array([0.0]), 3)
    assert float(tj.jet.coeffs[X1]) == pytest.approx(1.2, abs=1e-6)
    assert float(tj.jet.coeffs[(0, (2,))]) == pytest.approx(-0.2, abs=1e-5)
    assert abs(float(tj.jet.coeffs.get((0, (3,)), 0.0))) < 1e-4
    assert tj.cone_angle == pytest.approx(90.0, abs=1.0)


def test_cone_angle_corner():
    assert J.cone_half_angle(G.unit_cube(2), np.array([0.0, 0.0])) == pytest.approx(45.0, abs=2.0)
    assert J.cone_half_angle(G.unit_cube(2), np.array([0.5, 0.5])) == 180.0


def test_membership():
    I = G.interval()
    pts = [[0.0], [1.0]]
    rep = J.diff_O_membership(D.identity(I), J.BoundaryOrderSpec.constant(pts, None))
    assert rep.passed
    slack = D.from_field(F.make_field(I, ["0.2"]))
    assert not J.diff_O_membership(slack, J.BoundaryOrderSpec.constant(pts, 2)).passed
