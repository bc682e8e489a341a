"""Compact convex bodies: Euclidean balls and bounded H-polytopes.

Both families have a closed-form distance to the boundary and admit exact
boundary sampling, i.e. sampled boundary points have a slack that evaluates
to ``0.0`` exactly.  Every slack/norm is computed through the same
sequential helpers so that this property survives any later batching.
"""
from __future__ import annotations

import functools

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError

__all__ = [
    "Ball",
    "HPolytope",
    "ConvexBody",
    "ball",
    "box",
    "interval",
    "simplex",
    "unit_cube",
    "contains",
    "distance_to_boundary",
    "sample_boundary",
    "sample_interior",
    "interior_grid",
    "body_from_json",
]

_MAX_SNAP_TRIES = 8


def _rowdot(X, A):
    """``X @ A.T`` summed sequentially over the coordinate axis.

    ``X`` has shape ``(..., n)`` and ``A`` shape ``(m, n)``; the result has
    shape ``(..., m)``.  Elementwise ops only, so the rounding of each entry
    does not depend on how many points are evaluated together.
    """
    X = np.asarray(X, dtype=float)
    acc = X[..., None, 0] * A[:, 0]
    for j in range(1, A.shape[1]):
        acc = acc + X[..., None, j] * A[:, j]
    return acc


def _norm(V):
    V = np.asarray(V, dtype=float)
    acc = V[..., 0] * V[..., 0]
    for j in range(1, V.shape[-1]):
        acc = acc + V[..., j] * V[..., j]
    return np.sqrt(acc)


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        r = float(self.radius)
        if not (r > 0 and math.isfinite(r)):
            raise DomainError(f"ball radius must be positive and finite, got {r}")
        object.__setattr__(self, "radius", r)

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def interior_point(self):
        return self.center

    @property
    def bounding_radius(self):
        return self.radius

    def boundary_distance(self, X):
        """Signed distance to the sphere, positive inside; no membership check."""
        return self.radius - _norm(np.asarray(X, dtype=float) - self.center)

    def inside(self, X):
        return _norm(np.asarray(X, dtype=float) - self.center) <= self.radius

    def weight_slack(self, X):
        # smooth away from the sphere's center; exactly 0 where the
        # boundary distance is exactly 0
        return self.boundary_distance(X) / self.radius

    def to_json(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}

    def _boundary_point(self, rng):
        while True:
            u = rng.standard_normal(self.dim)
            x = self._snap(u)
            if x is not None:
                return x

    def _snap(self, u):
        """Scale direction ``u`` onto the sphere with boundary distance exactly 0."""
        c, r = self.center, self.radius
        nu = float(_norm(u))
        if nu < 1e-8:
            return None
        x = c + r * (u / nu)
        j = int(np.argmax(np.abs(x - c)))
        outward = np.sign(x[j] - c[j]) or 1.0
        for _ in range(4 * _MAX_SNAP_TRIES):
            gap = float(self.boundary_distance(x))
            if gap == 0.0:
                return x
            # move the dominant coordinate one ulp toward the sphere
            target = np.inf * outward if gap > 0 else -np.inf * outward
            x = x.copy()
            x[j] = np.nextafter(x[j], target)
        return None


@dataclass(frozen=True, eq=False)
class HPolytope:
    """``{x : A x <= b}`` with a strictly interior certificate point.

    ``bounding_radius`` certifies boundedness: every coordinate ray leaving
    ``interior_point`` must exit the polytope within that radius.
    """

    A: np.ndarray
    b: np.ndarray
    interior_point: np.ndarray
    bounding_radius: float
    row_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(-1, 1)
        b = np.array(self.b, dtype=float).reshape(-1)
        x0 = np.array(self.interior_point, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise DomainError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if A.shape[1] != x0.shape[0]:
            raise DomainError("interior_point dimension does not match A")
        norms = _norm(A)
        if np.any(norms == 0):
            raise DomainError("every halfspace normal must be nonzero")
        for arr in (A, b, x0, norms):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "interior_point", x0)
        object.__setattr__(self, "row_norms", norms)
        object.__setattr__(self, "bounding_radius", float(self.bounding_radius))
        slack = self.b - _rowdot(x0, A)
        if not np.all(slack > 0):
            raise DomainError("interior_point must satisfy every inequality strictly")
        self._check_bounded()

    def _check_bounded(self):
        x0, R = self.interior_point, self.bounding_radius
        slack = self.b - _rowdot(x0, self.A)
        for j in range(self.dim):
            for sgn in (1.0, -1.0):
                rate = sgn * self.A[:, j]
                hit = rate > 0
                if not np.any(hit):
                    raise DomainError(f"polytope is unbounded along {'+' if sgn > 0 else '-'}e{j + 1}")
                t_exit = float(np.min(slack[hit] / rate[hit]))
                if t_exit > R:
                    raise DomainError(
                        f"ray along {'+' if sgn > 0 else '-'}e{j + 1} exits at {t_exit:.6g} "
                        f"beyond bounding_radius {R:.6g}"
                    )

    @property
    def dim(self):
        return self.A.shape[1]

    def slacks(self, X):
        """Normalized facet slacks ``(b_i - a_i.x)/|a_i|``, shape ``(..., m)``."""
        return (self.b - _rowdot(X, self.A)) / self.row_norms

    def _facet_slacks(self, X):
        # one array per facet; avoids reductions over a short trailing axis,
        # which dominate the cost of large Picard batches
        X = np.asarray(X, dtype=float)
        cols = [X[..., j] for j in range(X.shape[-1])]
        out = []
        for a, b, r in zip(self.A, self.b, self.row_norms):
            acc = cols[0] * a[0]
            for j in range(1, len(cols)):
                acc = acc + cols[j] * a[j]
            out.append((b - acc) / r)
        return out

    def boundary_distance(self, X):
        return functools.reduce(np.minimum, self._facet_slacks(X))

    def inside(self, X):
        return np.all(self.b - _rowdot(X, self.A) >= 0, axis=-1)

    def weight_slack(self, X):
        return functools.reduce(np.multiply, self._facet_slacks(X))

    def to_json(self):
        return {
            "type": "hpolytope",
            "A": self.A.tolist(),
            "b": self.b.tolist(),
            "interior_point": self.interior_point.tolist(),
            "bounding_radius": self.bounding_radius,
        }

    def _boundary_point(self, rng):
        A, b = self.A, self.b
        while True:
            z = _rejection_interior(self, rng)
            d = rng.standard_normal(self.dim)
            rate = _rowdot(d, A)
            hit = rate > 0
            s = b - _rowdot(z, A)
            ts = np.where(hit, s / np.where(hit, rate, 1.0), np.inf)
            i = int(np.argmin(ts))
            x = z + ts[i] * d
            x = self._snap(x, i)
            if x is not None:
                return x

    def _snap(self, x, i):
        """Put ``x`` exactly on facet ``i`` (slack 0.0) while staying in K."""
        a, bi = self.A[i], self.b[i]
        j = int(np.argmax(np.abs(a)))
        x = x.copy()
        rest = 0.0
        for k in range(self.dim):
            if k != j:
                rest = rest + a[k] * x[k]
        x[j] = (bi - rest) / a[j]
        for _ in range(_MAX_SNAP_TRIES):
            raw = self.b - _rowdot(x, self.A)
            if raw[i] == 0.0:
                return x if np.all(raw >= 0) else None
            # slack positive means we are inside facet i: step toward it
            toward = np.sign(a[j]) if raw[i] > 0 else -np.sign(a[j])
            x[j] = np.nextafter(x[j], np.inf * toward)
        return None


ConvexBody = Union[Ball, HPolytope]


# -- builders ---------------------------------------------------------------

def ball(center, radius):
    return Ball(center, radius)


def box(lo, hi):
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise DomainError("box needs lo < hi componentwise")
    n = lo.shape[0]
    eye = np.eye(n)
    A = np.vstack([eye, -eye])
    b = np.concatenate([hi, -lo])
    center = 0.5 * (lo + hi)
    radius = float(_norm(hi - lo)) * 0.5 * (1 + 1e-9)
    return HPolytope(A, b, center, radius)


def interval(a=0.0, b=1.0):
    return box([a], [b])


def unit_cube(n):
    return box(np.zeros(n), np.ones(n))


def simplex(n):
    """Standard simplex ``{x >= 0, sum(x) <= 1}``."""
    A = np.vstack([-np.eye(n), np.ones((1, n))])
    b = np.concatenate([np.zeros(n), [1.0]])
    return HPolytope(A, b, np.full(n, 1.0 / (n + 1)), 1.0 + 1e-9)


def body_from_json(desc):
    kind = desc.get("type")
    if kind == "ball":
        return Ball(desc["center"], desc["radius"])
    if kind == "hpolytope":
        return HPolytope(desc["A"], desc["b"], desc["interior_point"], desc["bounding_radius"])
    if kind == "box":
        return box(desc["lo"], desc["hi"])
    if kind == "simplex":
        return simplex(int(desc["n"]))
    raise DomainError(f"unknown body type {kind!r}")


# -- operations ---------------------------------------------------------------

def _as_point(body, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (body.dim,):
        raise DomainError(f"expected a point of dimension {body.dim}, got shape {x.shape}")
    return x


def contains(body, x):
    """Exact (non-strict) membership test."""
    return bool(body.inside(_as_point(body, x)))


def distance_to_boundary(body, x):
    x = _as_point(body, x)
    if not body.inside(x):
        raise DomainError(f"point {x.tolist()} is not in K")
    return float(body.boundary_distance(x))


def _rejection_interior(body, rng):
    c, R = body.interior_point, body.bounding_radius
    while True:
        if isinstance(body, Ball):
            z = c + R * rng.uniform(-1.0, 1.0, body.dim)
        else:
            z = c + rng.uniform(-R, R, body.dim)
        if body.boundary_distance(z) > 0:
            return z


def sample_interior(body, m, seed=0):
    """``m`` points with positive boundary distance; the first is the certificate point."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = np.random.default_rng(seed)
    pts = [np.array(body.interior_point, dtype=float)]
    while len(pts) < m:
        pts.append(_rejection_interior(body, rng))
    return np.array(pts)


def sample_boundary(body, m, seed=0):
    """``m`` points whose boundary distance evaluates to exactly zero.

    In one dimension the boundary has two points and they are returned
    cyclically (``m=2`` gives both endpoints).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if body.dim == 1:
        if isinstance(body, Ball):
            ends = [body._snap(np.array([-1.0])), body._snap(np.array([1.0]))]
        else:
            lo = -body.b[body.A[:, 0] < 0] / -body.A[body.A[:, 0] < 0, 0]
            hi = body.b[body.A[:, 0] > 0] / body.A[body.A[:, 0] > 0, 0]
            ends = [np.array([np.max(lo)]), np.array([np.min(hi)])]
        ends = [np.asarray(e, dtype=float).reshape(1) for e in ends if e is not None]
        ends = [e for e in ends if body.boundary_distance(e) == 0.0]
        if not ends:
            raise DomainError("could not place an exact boundary point")
        return np.array([ends[i % len(ends)] for i in range(m)])
    rng = np.random.default_rng(seed)
    return np.array([body._boundary_point(rng) for _ in range(m)])


def interior_grid(body, density):
    """Regular lattice points (``density`` per axis over the bounding box) lying in K's interior."""
    c, R = body.interior_point, body.bounding_radius
    axes = [np.linspace(c[j] - R, c[j] + R, int(density)) for j in range(body.dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, body.dim)
    return mesh[body.boundary_distance(mesh) > 0]
