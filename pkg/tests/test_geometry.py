import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from convexdiff import geometry as G
from convexdiff.errors import DomainError


def test_contains_examples(square):
    assert G.contains(square, [0.5, 0.5])
    assert G.contains(square, [1.0, 0.3])
    assert not G.contains(square, [1.1, 0.3])


def test_distance_examples(square, disk):
    assert G.distance_to_boundary(square, [0.3, 0.5]) == pytest.approx(0.3, abs=1e-15)
    assert G.distance_to_boundary(disk, [0.0, 0.0]) == 1.0
    tri = G.simplex(2)
    assert G.distance_to_boundary(tri, [0.25, 0.25]) == pytest.approx(0.25, abs=1e-15)
    # third facet slack (1 - 0.5) / sqrt(2)
    assert G.distance_to_boundary(tri, [0.1, 0.1]) == pytest.approx(0.1)
    assert G.distance_to_boundary(tri, [0.4, 0.4]) == pytest.approx(0.2 / math.sqrt(2))


def test_interval_boundary_is_endpoints(unit):
    pts = G.sample_boundary(unit, 2, seed=5)
    assert sorted(pts[:, 0].tolist()) == [0.0, 1.0]


@pytest.mark.parametrize("body", [G.unit_cube(2), G.simplex(3), G.ball([0.1, 0.2], 0.7), G.box([-1, 0, 2], [1, 3, 2.5])])
def test_boundary_samples_have_zero_distance(body):
    pts = G.sample_boundary(body, 200, seed=1)
    assert np.all(body.boundary_distance(pts) == 0.0)
    assert all(G.contains(body, p) for p in pts)


def test_ball_boundary_norm(disk):
    pts = G.sample_boundary(disk, 100, seed=2)
    assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) <= 4e-16


def test_sample_interior(square):
    first = G.sample_interior(square, 1, seed=9)
    np.testing.assert_array_equal(first[0], square.interior_point)
    pts = G.sample_interior(square, 100, seed=4)
    assert np.all(square.boundary_distance(pts) > 0)
    np.testing.assert_array_equal(pts, G.sample_interior(square, 100, seed=4))


def test_interior_grid_strict(disk):
    pts = G.interior_grid(disk, 9)
    assert len(pts) > 0 and np.all(disk.boundary_distance(pts) > 0)


def test_body_json_roundtrip():
    for body in (G.unit_cube(2), G.ball([0.0, 1.0], 2.0), G.simplex(2)):
        again = G.body_from_json(body.to_json())
        X = G.sample_interior(body, 20, seed=0)
        np.testing.assert_allclose(again.boundary_distance(X), body.boundary_distance(X))


def test_bad_bodies():
    with pytest.raises(DomainError):
        G.ball([0.0], -1.0)
    with pytest.raises(DomainError):
        G.box([0.0, 1.0], [1.0, 0.5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=2), st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_distance_is_1_lipschitz(a, b):
    sq = G.unit_cube(2)
    da, db = G.distance_to_boundary(sq, a), G.distance_to_boundary(sq, b)
    assert abs(da - db) <= np.linalg.norm(np.subtract(a, b)) + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), st.floats(0, 1))
def test_distance_concave_on_disk(u, v, lam):
    d = G.ball([0.0, 0.0], 1.0)
    a = np.array([u, 0.0])
    b = np.array([0.0, v])
    mid = lam * a + (1 - lam) * b
    assert G.distance_to_boundary(d, mid) >= lam * G.distance_to_boundary(d, a) + (1 - lam) * G.distance_to_boundary(d, b) - 1e-12
