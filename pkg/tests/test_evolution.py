import math

import numpy as np
import pytest

from convexdiff import evolution as E
from convexdiff import fields as F
from convexdiff import geometry as G
from convexdiff.errors import DomainError

from conftest import logistic, sigma


def logistic_spec():
    f = F.make_field(G.interval(), ["p"], time=(-5.0, 5.0), params={"p": 0.3})
    return E.ParametricFlowSpec(f, ([0.0], [1.0]))


def test_zero_curve_snapshots_identity(unit):
    res = E.evolve(F.LieAlgebraCurve(F.make_field(unit, ["0"])), M=4, N=256)
    assert res.logderiv_residual == 0.0
    assert res.identity_error == 0.0


def test_snapshot_logistic():
    res = E.evolve(F.LieAlgebraCurve(logistic(0.3)), M=8, N=512, samples=4)
    assert res.snapshots[-1](np.array([[0.5]]))[0, 0] == pytest.approx(sigma(0.3), abs=1e-6)
    assert res.times[0] == 0.0 and res.times[-1] == 1.0
    assert res.csv().splitlines()[0].startswith("t,")


def test_evol_r_endpoint():
    phi = E.evol_r(F.LieAlgebraCurve(logistic(0.1)))
    assert phi(np.array([[0.5]]))[0, 0] == pytest.approx(sigma(0.1), abs=1e-9)


@pytest.mark.parametrize("t0,t", [(0.0, 1.0), (1.0, -2.0), (0.5, 0.5)])
def test_flow_map_closed_form(t0, t):
    spec = logistic_spec()
    x0 = 0.3
    got = E.flow_map(spec, [0.4], t0, t, [x0])[0]
    want = sigma(0.4 * (t - t0) + math.log(x0 / (1 - x0)))
    assert got == pytest.approx(want, abs=1e-9)


def test_flow_map_parameter_box():
    with pytest.raises(DomainError):
        E.flow_map(logistic_spec(), [2.0], 0.0, 1.0, [0.5])


def test_flow_sensitivity_closed_form():
    spec = logistic_spec()
    p = 0.4
    s = E.flow_sensitivity(spec, [p], 0.0, 2.0, [0.5])
    sp = sigma(2 * p)
    assert np.ravel(s.d_p)[0] == pytest.approx(2 * sp * (1 - sp), abs=1e-6)
    assert np.ravel(s.d_t)[0] == pytest.approx(p * sp * (1 - sp), abs=1e-6)
    assert np.ravel(s.d_t0)[0] == pytest.approx(-p * sp * (1 - sp), abs=1e-6)
    assert np.ravel(s.d_x0)[0] == pytest.approx(sp * (1 - sp) / 0.25, abs=1e-6)


def test_reversal():
    spec = logistic_spec()
    X = np.array([[0.1], [0.5], [0.93]])
    fwd = E.flow_map(spec, [0.7], 0.0, 3.0, X)
    back = E.flow_map(spec, [0.7], 3.0, 0.0, fwd)
    np.testing.assert_allclose(back, X, atol=1e-9)


def test_group_flow_consistency(square):
    f = F.make_field(square, ["x2-0.5", "0.5-x1"])
    f = f.scaled(0.3 / f.theta_bound)
    out = E.group_flow_consistency(f, 0.4, 1.0, samples=8)
    assert out["discrepancy"] < 1e-8


def test_trajectory_boundary_start_fixed():
    res = E.flow_trajectory(logistic_spec(), [0.5], 0.0, 1.0, np.array([[0.0], [1.0]]))
    assert np.all(res.states[:, 0, 0] == 0.0) and np.all(res.states[:, 1, 0] == 1.0)
