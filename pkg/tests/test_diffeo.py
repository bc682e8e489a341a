import math

import numpy as np
import pytest

from convexdiff import diffeo as D
from convexdiff import fields as F
from convexdiff import geometry as G
from convexdiff import samplers
from convexdiff.errors import CertificateError, DomainError

from conftest import logistic, sigma


def bump(c, body=None):
    return D.from_field(F.make_field(body or G.interval(), [repr(c)]))


def test_apply_example():
    assert D.apply(bump(0.2), [0.5])[0] == pytest.approx(0.55, abs=1e-15)


def test_compose_examples():
    a, b = bump(0.1), bump(0.2)
    # psi = x + 0.1 x(1-x) after phi = x + 0.2 x(1-x): 0.55 + 0.1*0.55*0.45
    assert D.compose(a, b)(np.array([[0.5]]))[0, 0] == pytest.approx(0.57475, abs=1e-12)
    assert D.compose(a, a)(np.array([[0.5]]))[0, 0] == pytest.approx(0.5499375, abs=1e-12)


def test_invert_at_quadratic_formula():
    th, y = 0.2, 0.55
    x = ((1 + th) - math.sqrt((1 + th) ** 2 - 4 * th * y)) / (2 * th)
    assert D.invert_at(bump(th), [y])[0] == pytest.approx(x, abs=1e-12)
    assert x == pytest.approx(0.5)


def test_invert_at_boundary_zero_iterations():
    out, it = D.invert_at(bump(0.2), np.array([[0.0], [1.0]]), return_iterations=True)
    np.testing.assert_array_equal(out[:, 0], [0.0, 1.0])
    assert it == 0


def test_inverse_jacobian():
    inv = D.invert(bump(0.2))
    assert 1 + inv.jacobian([[0.55]])[0, 0, 0] == pytest.approx(1.0, abs=1e-9)


def test_chart_examples(square):
    rep = D.chart_membership(D.identity(square))
    assert rep.passed and rep.injectivity_certificate == "LipschitzCertified"
    rep = D.chart_membership(bump(0.3))
    assert rep.passed and rep.lip_estimate < 1
    bad = D.from_callable(G.interval(), lambda X: -3 * X * (1 - X), lip=3.0)
    rep = D.chart_membership(bad)
    assert not rep.jacobian_ok and not rep.passed


def test_recertify_rejects_small_certificate():
    with pytest.raises(CertificateError):
        D.from_callable(G.interval(), lambda X: 0.3 * X * (1 - X), lip=0.1).recertify()


def test_body_mismatch():
    with pytest.raises(DomainError):
        D.compose(D.identity(G.interval()), D.identity(G.unit_cube(2)))


def test_group_laws_random_elements(square):
    rng = np.random.default_rng(3)
    els = [samplers.random_element(square, rng, 0.25) for _ in range(3)]
    X = G.sample_interior(square, 100, seed=8)
    for phi in els:
        np.testing.assert_allclose(D.compose(D.invert(phi), phi)(X), X, atol=1e-9)
    a, b, c = els
    np.testing.assert_allclose(D.compose(D.compose(a, b), c)(X), D.compose(a, D.compose(b, c))(X), atol=1e-12)
    B = G.sample_boundary(square, 200, seed=1)
    for g in (els[0], D.invert(els[1]), D.compose(*els[:2])):
        np.testing.assert_array_equal(g(B), B)


def test_flow_element_matches_logistic():
    phi = D.flow_element(F.LieAlgebraCurve(logistic(0.3)))
    assert phi(np.array([[0.5]]))[0, 0] == pytest.approx(sigma(0.3), abs=1e-9)
    assert phi.kind == "flow"
    assert phi.lip == pytest.approx(math.expm1(logistic(0.3).theta_bound))


def test_parametric_inverse():
    fam = D.DiffeoFamily(G.interval(), lambda z, X: z[0] * X * (1 - X), lip=0.3)
    assert D.parametric_inverse(fam, [0.0], [0.55])[0] == pytest.approx(0.55)
    assert D.parametric_inverse(fam, [0.2], [0.55])[0] == pytest.approx(0.5, abs=1e-12)
    Dz, Dy = D.parametric_inverse_sensitivity(fam, [0.2], [0.55])
    assert Dy[0, 0] == pytest.approx(1.0, abs=1e-9)
    # d/dz of the implicit root: -x(1-x) / (1 + z(1-2x)) at x=0.5
    assert Dz[0, 0] == pytest.approx(-0.25, abs=1e-7)


def test_jacobian_near_boundary_one_sided(square):
    phi = D.from_field(F.make_field(square, ["1", "0"]))
    X = np.array([[1e-9, 0.5], [0.5, 0.5]])
    J = phi.jacobian(X)
    # gamma_1 = x1(1-x1)x2(1-x2): d/dx1 at x1=0, x2=.5 is 0.25
    assert J[0, 0, 0] == pytest.approx(0.25, abs=1e-6)
    assert J[1, 0, 0] == pytest.approx(0.0, abs=1e-8)
