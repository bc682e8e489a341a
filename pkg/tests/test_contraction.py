import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexdiff import contraction as C
from convexdiff import fields as F
from convexdiff import geometry as G
from convexdiff.errors import CertificateError, DivergenceError

from conftest import logistic, sigma


def half_sin():
    return C.ContractionFamily(lambda p, x: 0.5 * np.sin(p) + 0.5 * x, 0.5, p_box=([0.0], [2.0]), x_box=([-1.0], [1.0]))


def test_fixed_point_examples():
    assert C.fixed_point(half_sin(), 0.7, [0.0])[0] == pytest.approx(0.644218, abs=1e-6)
    fam = C.ContractionFamily(lambda p, x: 0.9 * x + p, 0.9)
    assert C.fixed_point(fam, 1.0, [0.0])[0] == pytest.approx(10.0, abs=1e-11)
    const = C.ContractionFamily(lambda p, x: np.array([0.25]), 0.0)
    assert C.fixed_point(const, 0.0, [3.0])[0] == 0.25


def test_divergence_detected():
    with pytest.raises(DivergenceError):
        C.fixed_point(C.ContractionFamily(lambda p, x: 2 * x + 1, 0.5), 0.0, [1.0])


def test_certificate_range_and_validation():
    with pytest.raises(CertificateError):
        C.ContractionFamily(lambda p, x: x, 1.0)
    assert half_sin().validate() == pytest.approx(0.5)
    bad = C.ContractionFamily(lambda p, x: 0.9 * x, 0.5, p_box=([0.0], [1.0]), x_box=([0.0], [1.0]))
    with pytest.raises(CertificateError):
        bad.validate()


def test_fixed_point_sensitivity_examples():
    fam = half_sin()
    x = C.fixed_point(fam, 0.7, [0.0], tol=1e-14)
    assert C.fixed_point_sensitivity(fam, 0.7, x)[0, 0] == pytest.approx(0.764842, abs=1e-6)
    lin = C.ContractionFamily(lambda p, x: 0.9 * x + p, 0.9)
    assert C.fixed_point_sensitivity(lin, 1.0, [10.0])[0, 0] == pytest.approx(10.0, rel=1e-8)
    free = C.ContractionFamily(lambda p, x: 0.3 * x, 0.3)
    np.testing.assert_array_equal(C.fixed_point_sensitivity(free, 0.2, [0.0]), 0.0)


def test_linear_family_inverse_derivative():
    got = C.linear_family_inverse_derivative(lambda p: np.array([[1 + p[0]]]), [0.0], [1.0], [1.0])
    assert got[0] == pytest.approx(-1.0, abs=1e-8)
    got = C.linear_family_inverse_derivative(lambda p: np.diag([1 + p[0], 2.0]), [0.0], [1.0, 1.0], [1.0])
    np.testing.assert_allclose(got, [-1.0, 0.0], atol=1e-8)
    got = C.linear_family_inverse_derivative(lambda p: np.eye(2) * 3, [0.5], [1.0, 2.0], [1.0])
    np.testing.assert_array_equal(got, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-1, 1))
def test_linear_family_inverse_derivative_vs_fd(a, b, y):
    A = lambda p: np.array([[2 + a * p[0], b], [b * p[0] ** 2, 3 - p[0]]])
    z = np.array([1.0, -0.5])
    got = C.linear_family_inverse_derivative(A, [0.4], z, [y])
    h = 1e-6
    fd = (np.linalg.solve(A([0.4 + h * y]), z) - np.linalg.solve(A([0.4 - h * y]), z)) / (2 * h)
    np.testing.assert_allclose(got, fd, atol=1e-7)


def test_trapezoid_exact_for_linear():
    t = np.linspace(0, 1, 9)
    F_ = np.broadcast_to(t[:, None, None], (9, 1, 1))
    out = C.cumulative_trapezoid(F_, t[1] - t[0])
    np.testing.assert_allclose(out[:, 0, 0], t ** 2 / 2, atol=1e-15)


@pytest.mark.parametrize("c,t", [(0.1, 0.5), (0.3, 1.0), (0.3, 2.0)])
def test_logistic_oracle(c, t):
    f = logistic(c, time=(0.0, t))
    res = C.solve_curve(F.LieAlgebraCurve(f, check=False), np.array([[0.5]]))
    assert res.final[0, 0] == pytest.approx(sigma(c * t), abs=1e-6)
    assert res.confinement_ok


def test_zero_field_and_boundary_start(unit):
    f = F.make_field(unit, ["0"])
    res = C.solve_curve(F.LieAlgebraCurve(f), np.array([[0.3]]))
    assert res.iterations == 1
    np.testing.assert_array_equal(res.states[:, 0, 0], 0.3)
    res = C.solve_curve(F.LieAlgebraCurve(logistic(0.3)), np.array([[0.0], [1.0]]))
    np.testing.assert_array_equal(res.states[:, :, 0], np.tile([0.0, 1.0], (len(res.grid), 1)))


def test_picard_problem_radius():
    curve = F.LieAlgebraCurve(logistic(0.3))
    prob = C.PicardProblem.from_curve(curve, np.array([[0.2]]))
    assert prob.R[0] == pytest.approx(0.1)


def test_panels():
    assert C.panel_count(0.2) == 1
    assert C.panel_count(0.7) == 3
    f = logistic(0.3, time=(0.0, 3.0))
    res = C.solve_curve(F.LieAlgebraCurve(f, check=False), np.array([[0.5]]))
    assert res.panels >= 2
    assert res.final[0, 0] == pytest.approx(sigma(0.9), abs=1e-6)


def test_flow_result_csv_and_sidecar(tmp_path):
    res = C.solve_curve(F.LieAlgebraCurve(logistic(0.3)), np.array([[0.5]]))
    path = tmp_path / "y.csv"
    res.write(str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,y1"
    assert float(lines[-1].split(",")[1]) == pytest.approx(0.574443, abs=1e-6)
    assert (tmp_path / "y.csv.json").exists()


def test_confinement_disk():
    disk = G.ball([0.0, 0.0], 1.0)
    f = F.make_field(disk, ["0.3", "-0.2*x1"])
    f = f.scaled(0.33 / f.theta_bound)
    X = G.sample_interior(disk, 40, seed=3)
    res = C.solve_curve(F.LieAlgebraCurve(f), X)
    d0 = disk.boundary_distance(X)
    gap = np.max(np.linalg.norm(res.states - X[None], axis=-1), axis=0)
    assert np.all(gap <= 0.5 * d0 + 1e-9)
