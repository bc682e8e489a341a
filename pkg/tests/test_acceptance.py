"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (lines also appear under ``-q``).
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from convexdiff import contraction as C
from convexdiff import diffeo as D
from convexdiff import evolution as E
from convexdiff import fields as F
from convexdiff import geometry as G
from convexdiff import jets as J
from convexdiff import samplers, verify

from conftest import sigma


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}")
        assert ok, detail
    return emit


def test_01_logistic_oracle(report):
    worst_err, worst_time = 0.0, 0.0
    for c in (0.1, 0.3):
        for t in (0.5, 1.0, 2.0):
            start = time.perf_counter()
            f = F.make_field(G.interval(), [repr(c)], time=(0.0, t))
            res = C.solve_curve(F.LieAlgebraCurve(f, check=False), np.array([[0.5]]), N=2048)
            worst_time = max(worst_time, time.perf_counter() - start)
            worst_err = max(worst_err, abs(res.final[0, 0] - sigma(c * t)))
    report(1, "logistic flow", worst_err <= 1e-6 and worst_time < 1.0,
           f"max error {worst_err:.2e} (<=1e-6), slowest case {worst_time:.3f}s (<1s)")


def test_02_confinement(report):
    rng = np.random.default_rng(2)
    bodies = [G.unit_cube(2), G.ball([0.0, 0.0], 1.0)]
    violations, worst = 0, -math.inf
    for j in range(50):
        body = bodies[j % 2]
        f = samplers.random_field(body, rng, theta=1 / 3)
        X = np.concatenate([G.sample_interior(body, 16, seed=j), G.sample_boundary(body, 4, seed=j)])
        res = C.solve_curve(F.LieAlgebraCurve(f), X, N=1024)
        excess = np.max(np.linalg.norm(res.states - X[None], axis=-1), axis=0) - 0.5 * body.boundary_distance(X)
        violations += int(np.sum(excess > 1e-9))
        worst = max(worst, float(np.max(excess)))
    report(2, "confinement", violations == 0, f"{violations} violations, worst excess {worst:.2e} (<=1e-9)")


def test_03_boundary_fixing(report):
    rng = np.random.default_rng(3)
    moved = 0
    for body in (G.interval(), G.unit_cube(2), G.ball([0.0, 0.0], 1.0), G.simplex(2)):
        B = G.sample_boundary(body, 1000, seed=4)
        flow = D.flow_element(F.LieAlgebraCurve(samplers.random_field(body, rng, 0.3)), N=512)
        ana = samplers.random_element(body, rng, 0.3)
        for g in (flow, ana, D.compose(flow, ana), D.invert(flow), D.invert(ana), D.compose(D.invert(ana), flow)):
            moved += int(np.sum(np.any(g(B) != B, axis=1)))
    report(3, "boundary fixing", moved == 0, f"{moved} boundary samples moved (bitwise check, 1000 per body)")


def test_04_group_axioms(report):
    rng = np.random.default_rng(5)
    bodies = [G.interval(), G.unit_cube(2), G.ball([0.0, 0.0], 1.0)]
    els = [samplers.random_element(bodies[j % 3], rng, float(rng.uniform(0.05, 0.3))) for j in range(20)]
    inv_err, assoc_err = 0.0, 0.0
    for j, phi in enumerate(els):
        X = G.sample_interior(phi.body, 200, seed=100 + j)
        inv_err = max(inv_err, float(np.max(np.abs(D.compose(D.invert(phi), phi)(X) - X))))
        same = [e for e in els if e.body is phi.body]
        k = same.index(phi)
        b, c = same[(k + 1) % len(same)], same[(k + 2) % len(same)]
        lhs = D.compose(D.compose(phi, b), c)(X)
        rhs = D.compose(phi, D.compose(b, c))(X)
        assoc_err = max(assoc_err, float(np.max(np.abs(lhs - rhs))))
    report(4, "group axioms", inv_err <= 1e-8 and assoc_err <= 1e-8,
           f"inverse {inv_err:.2e}, associativity {assoc_err:.2e} (<=1e-8)")


def test_05_boundary_continuity(report):
    rng = np.random.default_rng(6)
    worst = -math.inf
    for body in (G.unit_cube(2), G.ball([0.0, 0.0], 1.0), G.interval()):
        curve = F.LieAlgebraCurve(samplers.random_field(body, rng, 1 / 3))
        for x0 in G.sample_boundary(body, 2, seed=7):
            X1 = x0 + rng.normal(scale=0.05, size=(400, body.dim))
            X1 = X1[body.boundary_distance(X1) >= 0][:100]
            r0 = C.solve_curve(curve, x0[None], N=1024)
            r1 = C.solve_curve(curve, X1, N=1024)
            gap = np.max(np.linalg.norm(r1.states - r0.states, axis=-1), axis=0)
            worst = max(worst, float(np.max(gap - 1.5 * np.linalg.norm(X1 - x0, axis=1))))
    report(5, "boundary continuity", worst <= 1e-8, f"max(gap - 1.5|x1-x0|) = {worst:.2e} (<=1e-8)")


def test_06_sensitivities(report):
    errs = {}
    fam = C.ContractionFamily(lambda p, x: 0.5 * np.sin(p) + 0.5 * x, 0.5)
    x = C.fixed_point(fam, 0.7, [0.0], tol=1e-14)
    h = 1e-5
    fd = (C.fixed_point(fam, 0.7 + h, x, tol=1e-15) - C.fixed_point(fam, 0.7 - h, x, tol=1e-15)) / (2 * h)
    errs["fixed_point"] = abs(C.fixed_point_sensitivity(fam, 0.7, x)[0, 0] - fd[0]) / abs(fd[0])
    lin = C.ContractionFamily(lambda p, x: 0.9 * x + p, 0.9)
    errs["fixed_point_linear"] = abs(C.fixed_point_sensitivity(lin, 1.0, [10.0])[0, 0] - 10.0) / 10.0
    worst = 0.0
    for A, p, z, y in ((lambda p: np.array([[1 + p[0]]]), [0.0], [1.0], [1.0]),
                       (lambda p: np.diag([1 + p[0], 2.0]), [0.0], [1.0, 1.0], [1.0])):
        got = C.linear_family_inverse_derivative(A, p, z, y)
        p_, y_ = np.array(p), np.array(y)
        fd = (np.linalg.solve(A(p_ + h * y_), z) - np.linalg.solve(A(p_ - h * y_), z)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(got - fd))) / float(np.max(np.abs(fd))))
    errs["linear_family_inverse"] = worst
    f = F.make_field(G.interval(), ["p"], time=(-3.0, 3.0), params={"p": 0.4})
    s = E.flow_sensitivity(E.ParametricFlowSpec(f, ([0.0], [1.0])), [0.4], 0.0, 2.0, [0.5])
    flow_err = abs(float(np.ravel(s.d_p)[0]) - 2 * sigma(0.8) * (1 - sigma(0.8)))
    rel_ok = max(errs.values()) < 1e-5
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f" (<1e-5 rel); D_p flow {flow_err:.1e} (<1e-4)"
    report(6, "sensitivities", rel_ok and flow_err < 1e-4, detail)


def test_07_jet_algebra(report):
    rng = np.random.default_rng(7)
    failures = 0
    for _ in range(500):
        n, k = int(rng.integers(1, 4)), int(rng.integers(1, 5))
        p, q, r = (samplers.random_unit_jet(rng, n, k, density=0.3) for _ in range(3))
        e = J.jet_identity(n, k)
        inv = J.jet_invert(p)
        ok = (J.jet_compose(J.jet_compose(p, q), r) == J.jet_compose(p, J.jet_compose(q, r))
              and J.jet_compose(p, e) == p and J.jet_compose(e, p) == p
              and J.jet_compose(inv, p) == e and J.jet_compose(p, inv) == e)
        failures += not ok
    a = Fraction(5, 3)
    x = (0, (1,))
    example = J.jet_invert(J.JetPoly(1, 3, {x: 1, (0, (2,)): a})) == J.JetPoly(1, 3, {x: 1, (0, (2,)): -a, (0, (3,)): 2 * a * a})
    report(7, "exact jet algebra", failures == 0 and example,
           f"{failures}/500 law failures, inverse example exact: {example}")


def test_08_jet_homomorphism(report):
    worst = 0.0
    pts = verify.HOMOMORPHISM_POINTS
    for j, (psi, phi) in enumerate(verify.homomorphism_pairs(10, 8)):
        x0 = np.array(pts[j % len(pts)])
        lhs = J.taylor_extract(D.compose(psi, phi), x0, 2).jet
        rhs = J.jet_compose(J.taylor_extract(psi, x0, 2).jet, J.taylor_extract(phi, x0, 2).jet)
        worst = max(worst, J.jet_distance(lhs, rhs))
    report(8, "jet/chart homomorphism", worst <= 1e-3, f"max coefficient gap {worst:.2e} over 10 pairs (<=1e-3)")


def test_09_log_derivative(report):
    curve = F.LieAlgebraCurve(F.make_field(G.interval(), ["0.3"]))
    r64 = E.evolve(curve, M=64, N=2048, samples=16).logderiv_residual
    r128 = E.evolve(curve, M=128, N=2048, samples=16).logderiv_residual
    ratio = r64 / r128
    report(9, "right logarithmic derivative", r64 < 1e-4 and 3.5 <= ratio <= 4.5,
           f"residual M=64 {r64:.2e} (<1e-4), ratio M64/M128 {ratio:.3f} (3.5-4.5)")


def test_10_reversibility(report):
    worst, backward = 0.0, 0
    for spec, t0, t, x0 in verify.reversal_cases(50, 10):
        y = E.flow_map(spec, [], t0, t, x0)
        back = E.flow_map(spec, [], t, t0, y)
        worst = max(worst, float(np.max(np.abs(back - x0))))
        backward += t < t0
    report(10, "reversibility", worst <= 1e-6, f"max round-trip error {worst:.2e} (<=1e-6), {backward}/50 with t<t0")


def test_11_flat_detection(report):
    I = G.interval()
    pts = [[0.0], [1.0]]
    flat = D.flow_element(F.LieAlgebraCurve(F.make_field(I, ["0.5"], weight="flat")))
    slack = D.from_field(F.make_field(I, ["0.2"]))
    slack_flow = D.flow_element(F.LieAlgebraCurve(F.make_field(I, ["0.2"])))
    a = J.diff_O_membership(flat, J.BoundaryOrderSpec.constant(pts, 3), tol=1e-3)
    b = J.diff_O_membership(slack, J.BoundaryOrderSpec.constant(pts, 1), tol=1e-3)
    c = J.diff_O_membership(slack_flow, J.BoundaryOrderSpec.constant(pts, 1), tol=1e-3)
    lin = float(J.taylor_extract(slack, np.array([0.0]), 1).jet.coeffs[(0, (1,))])
    ok = a.passed and not b.passed and not c.passed and abs(lin - 1.2) < 1e-6
    report(11, "flat detection", ok,
           f"flat passes order 3: {a.passed}; slack c=0.2 passes order 1: {b.passed} (linear part {lin:.6f}); "
           f"slack flow passes order 1: {c.passed}")


def test_12_verify_all(report):
    start = time.perf_counter()
    rep = verify.run_suite("all")
    elapsed = time.perf_counter() - start
    report(12, "verify all", rep["passed"] and elapsed < 300,
           f"{len(rep['checks']) - len(rep['failed'])}/{len(rep['checks'])} checks passed in {elapsed:.1f}s (<300s)"
           + (f"; failed: {rep['failed']}" if rep["failed"] else ""))
