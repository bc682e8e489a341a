"""Truncated polynomial jets ``p: R^n -> R^n`` with ``p(0) = 0``.

A jet of order ``k`` stores sparse coefficients ``{(i, alpha): c}`` for the
``i``-th output component (0-based) and multi-indices ``1 <= |alpha| <= k``.
Coefficients are ``Fraction`` in exact mode and ``float`` otherwise.
``jet_compose(p, q)`` is the degree-``k`` truncation of ``p o q``; jets with
invertible linear part form a group under it.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError

__all__ = [
    "JetPoly",
    "multi_indices",
    "jet_identity",
    "jet_compose",
    "jet_is_unit",
    "jet_invert",
    "project",
    "jet_distance",
    "taylor_extract",
    "TaylorJet",
    "cone_half_angle",
    "BoundaryOrderSpec",
    "diff_O_membership",
    "MembershipReport",
    "jet_from_json",
]

DET_EPS = 1e-12
LOW_CONFIDENCE_DEG = 10.0


def multi_indices(n, degree):
    """All ``alpha`` in ``N^n`` with ``|alpha| = degree``, in lexicographic order (largest first)."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        a = [0] * n
        for j in combo:
            a[j] += 1
        out.append(tuple(a))
    return sorted(out, reverse=True)


def _convert(c, exact):
    if exact:
        if isinstance(c, float):
            raise TypeError("exact jets need rational coefficients, not floats")
        return Fraction(c)
    return float(c)


@dataclass(frozen=True, eq=False)
class JetPoly:
    n: int
    k: int
    coeffs: dict = field(default_factory=dict)
    exact: bool = True

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise DomainError("jets need n >= 1 and k >= 1")
        clean = {}
        for (i, alpha), c in self.coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if not 0 <= i < self.n or len(alpha) != self.n or min(alpha) < 0:
                raise DomainError(f"bad jet index {(i, alpha)} for n={self.n}")
            deg = sum(alpha)
            if deg == 0:
                raise DomainError("jets have no constant term")
            if deg > self.k:
                raise DomainError(f"term of degree {deg} exceeds order {self.k}")
            c = _convert(c, self.exact)
            if c != 0:
                clean[(int(i), alpha)] = clean.get((int(i), alpha), 0) + c
        object.__setattr__(self, "coeffs", {key: c for key, c in clean.items() if c != 0})

    def __getitem__(self, key):
        i, alpha = key
        return self.coeffs.get((i, tuple(alpha)), Fraction(0) if self.exact else 0.0)

    def __eq__(self, other):
        if not isinstance(other, JetPoly):
            return NotImplemented
        return (self.n, self.k) == (other.n, other.k) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.n, self.k, frozenset(self.coeffs.items())))

    def linear_part(self):
        zero = Fraction(0) if self.exact else 0.0
        A = [[zero] * self.n for _ in range(self.n)]
        for j in range(self.n):
            e = tuple(1 if m == j else 0 for m in range(self.n))
            for i in range(self.n):
                A[i][j] = self[i, e]
        return A

    def degree_part(self, j):
        return JetPoly(self.n, self.k, {key: c for key, c in self.coeffs.items() if sum(key[1]) == j}, self.exact)

    def to_float(self):
        return JetPoly(self.n, self.k, {key: float(c) for key, c in self.coeffs.items()}, False)

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros_like(X)
        for (i, alpha), c in self.coeffs.items():
            out[:, i] += float(c) * np.prod(X ** np.array(alpha), axis=1)
        return out

    def to_json(self):
        terms = []
        for (i, alpha), c in sorted(self.coeffs.items(), key=lambda kv: (sum(kv[0][1]), kv[0][0], [-a for a in kv[0][1]])):
            if self.exact:
                terms.append({"i": i, "alpha": list(alpha), "num": c.numerator, "den": c.denominator})
            else:
                terms.append({"i": i, "alpha": list(alpha), "value": float(c)})
        return {"n": self.n, "k": self.k, "mode": "exact" if self.exact else "double", "terms": terms}

    def __repr__(self):
        return f"JetPoly(n={self.n}, k={self.k}, {pretty_jet(self)})"


def pretty_jet(p):
    names = [f"x{j + 1}" for j in range(p.n)] if p.n > 1 else ["x"]
    comps = []
    for i in range(p.n):
        terms = sorted(((a, c) for (ii, a), c in p.coeffs.items() if ii == i), key=lambda t: (sum(t[0]), [-x for x in t[0]]))
        parts = []
        for alpha, c in terms:
            mono = "*".join(names[j] + (f"^{a}" if a > 1 else "") for j, a in enumerate(alpha) if a)
            parts.append(f"({c})*{mono}" if c != 1 else mono)
        comps.append(" + ".join(parts) if parts else "0")
    return comps[0] if p.n == 1 else "(" + ", ".join(comps) + ")"


def jet_from_json(desc):
    exact = desc.get("mode", "exact") == "exact"
    coeffs = {}
    for t in desc["terms"]:
        key = (int(t["i"]), tuple(t["alpha"]))
        if "value" in t:
            if exact:
                raise DomainError("double-valued term in an exact jet")
            coeffs[key] = float(t["value"])
        else:
            coeffs[key] = Fraction(int(t["num"]), int(t.get("den", 1)))
    return JetPoly(int(desc["n"]), int(desc["k"]), coeffs, exact)


def jet_identity(n, k, exact=True):
    one = Fraction(1) if exact else 1.0
    return JetPoly(n, k, {(i, tuple(int(m == i) for m in range(n))): one for i in range(n)}, exact)


def _check_pair(p, q):
    if (p.n, p.k) != (q.n, q.k):
        raise DomainError(f"jet shapes differ: (n={p.n}, k={p.k}) vs (n={q.n}, k={q.k})")
    if p.exact != q.exact:
        raise DomainError("cannot mix exact and double jets")


def _poly_mul(a, b, k):
    """Product of scalar polynomials ``{beta: c}`` keeping degrees ``<= k``."""
    out = {}
    for ba, ca in a.items():
        da = sum(ba)
        for bb, cb in b.items():
            if da + sum(bb) > k:
                continue
            key = tuple(x + y for x, y in zip(ba, bb))
            out[key] = out.get(key, 0) + ca * cb
    return out


def _components(q):
    comps = [{} for _ in range(q.n)]
    for (i, alpha), c in q.coeffs.items():
        comps[i][alpha] = c
    return comps


def _compose(p, q, k):
    comps = _components(q)
    powers = {}

    def power(alpha):
        if alpha in powers:
            return powers[alpha]
        j = next(m for m, a in enumerate(alpha) if a)
        rest = tuple(a - (m == j) for m, a in enumerate(alpha))
        res = comps[j] if sum(rest) == 0 else _poly_mul(power(rest), comps[j], k)
        powers[alpha] = res
        return res

    out = {}
    for (i, alpha), c in p.coeffs.items():
        if sum(alpha) > k:
            continue
        for beta, v in power(alpha).items():
            key = (i, beta)
            out[key] = out.get(key, 0) + c * v
    return out


def jet_compose(p, q):
    """Degree-``k`` truncation of ``p o q``."""
    _check_pair(p, q)
    return JetPoly(p.n, p.k, _compose(p, q, p.k), p.exact)


def _det_exact(A):
    M = [row[:] for row in A]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            if f:
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return det


def _inv_exact(A):
    n = len(A)
    M = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    for c in range(n):
        piv = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [row[n:] for row in M]


def jet_is_unit(p):
    A = p.linear_part()
    if p.exact:
        return _det_exact(A) != 0
    return abs(float(np.linalg.det(np.array(A, dtype=float)))) > DET_EPS


def _apply_matrix(Ainv, part, n, exact):
    """Coefficients of ``x -> Ainv . part(x)`` for a homogeneous part ``{(i, beta): c}``."""
    out = {}
    for (i, beta), c in part.items():
        for r in range(n):
            v = Ainv[r][i] * c
            if v != 0:
                out[(r, beta)] = out.get((r, beta), 0) + v
    return out


def jet_invert(p):
    """Two-sided inverse under ``jet_compose``, built one degree at a time.

    ``q_1 = A^{-1}``; for ``j >= 2`` the degree-``j`` part of ``p o q`` is
    ``A q_j + r_j`` where ``r_j`` depends only on lower parts of ``q``, so
    ``q_j = -A^{-1} r_j``.
    """
    if not jet_is_unit(p):
        raise DomainError("jet has a singular linear part and is not invertible")
    n, k, exact = p.n, p.k, p.exact
    A = p.linear_part()
    Ainv = _inv_exact(A) if exact else np.linalg.inv(np.array(A, dtype=float)).tolist()
    q = {(i, tuple(int(m == j) for m in range(n))): Ainv[i][j] for i in range(n) for j in range(n)}
    q = {key: c for key, c in q.items() if c != 0}
    for j in range(2, k + 1):
        lower = JetPoly(n, k, q, exact)
        comp = _compose(p, lower, j)
        r = {key: c for key, c in comp.items() if sum(key[1]) == j}
        for key, c in _apply_matrix(Ainv, r, n, exact).items():
            q[key] = q.get(key, 0) - c
    return JetPoly(n, k, q, exact)


def project(p, k):
    """Truncate to order ``k <= p.k``."""
    if not 1 <= k <= p.k:
        raise DomainError(f"cannot project an order-{p.k} jet to order {k}")
    return JetPoly(p.n, k, {key: c for key, c in p.coeffs.items() if sum(key[1]) <= k}, p.exact)


def jet_distance(p, q):
    """Max coefficient-wise absolute difference (as float)."""
    if (p.n, p.k) != (q.n, q.k):
        raise DomainError("jet shapes differ")
    keys = set(p.coeffs) | set(q.coeffs)
    return max((abs(float(p[key]) - float(q[key])) for key in keys), default=0.0)


# ---------------------------------------------------------------------------
# Taylor extraction from group elements

def cone_half_angle(body, x0, h=1e-6, samples=4000, seed=0):
    """Estimated half-angle (degrees) of the inward cone of K at ``x0``.

    Directions are sampled on the sphere; the axis is the mean inward
    direction and the half-angle is the smallest angle between the axis
    and a sampled direction that leaves K.
    """
    x0 = np.asarray(x0, dtype=float)
    n = body.dim
    if n == 1:
        inside = [body.inside(x0 + h * np.array([s])) for s in (1.0, -1.0)]
        return 180.0 if all(inside) else 90.0 if any(inside) else 0.0
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(samples, n))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    ok = body.boundary_distance(x0[None] + h * U) >= 0
    if not np.any(ok):
        return 0.0
    if np.all(ok):
        return 180.0
    axis = U[ok].mean(axis=0)
    norm = np.linalg.norm(axis)
    if norm == 0:
        return 180.0
    axis /= norm
    ang = np.degrees(np.arccos(np.clip(U[~ok] @ axis, -1, 1)))
    return float(np.min(ang))


@dataclass
class TaylorJet:
    jet: JetPoly
    accuracy: dict          # order -> max coefficient change between h and h/2
    cone_angle: float
    low_confidence: bool
    points_used: int

    def to_json(self):
        return {"jet": self.jet.to_json(), "accuracy": {str(k): v for k, v in self.accuracy.items()},
                "cone_half_angle_deg": self.cone_angle, "low_confidence": self.low_confidence,
                "points_used": self.points_used}


def _lattice(n, m):
    rng = range(-m, m + 1)
    pts = np.array([s for s in itertools.product(rng, repeat=n) if sum(abs(v) for v in s) <= m], dtype=float)
    return pts


def _fit(phi, x0, degree, k, h):
    body = phi.body
    n = body.dim
    anchor = phi(x0[None])[0]
    S = _lattice(n, degree + 2)
    P = x0[None] + h * S
    keep = body.boundary_distance(P) >= 0
    S, P = S[keep], P[keep]
    monos = [a for d in range(degree + 1) for a in multi_indices(n, d)]
    if len(S) < len(monos) + 2:
        raise DomainError(f"stencil around {x0.tolist()} has only {len(S)} points inside K; retry with a smaller h")
    V = np.stack([np.prod(S ** np.array(a), axis=1) for a in monos], axis=1)
    Y = phi(P) - anchor[None]
    coef, *_ = np.linalg.lstsq(V, Y, rcond=None)
    if np.linalg.matrix_rank(V) < len(monos):
        raise DomainError(f"stencil around {x0.tolist()} is degenerate; retry with a smaller h")
    coeffs = {}
    for r, a in enumerate(monos):
        d = sum(a)
        if 1 <= d <= k:
            for i in range(n):
                coeffs[(i, a)] = coef[r, i] / h ** d
    return JetPoly(n, k, coeffs, exact=False), len(S)


def taylor_extract(phi, x0, k, h=0.005):
    """Order-``k`` jet of ``u -> phi(x0 + u) - phi(x0)`` (equal to ``phi(x0 + u) - x0`` on the boundary).

    Least-squares fit of a degree ``k + 2`` polynomial on a lattice stencil
    of spacing ``h`` restricted to K, so boundary points automatically get
    one-sided stencils.  Repeating with ``h/2`` gives the per-order
    accuracy estimate.
    """
    if not 1 <= k <= 4:
        raise DomainError("double-mode extraction supports 1 <= k <= 4")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if not phi.body.inside(x0):
        raise DomainError("expansion point is not in K")
    jet, used = _fit(phi, x0, k + 2, k, h)
    half, _ = _fit(phi, x0, k + 2, k, h / 2)
    acc = {}
    for d in range(1, k + 1):
        acc[d] = jet_distance(jet.degree_part(d), half.degree_part(d))
    angle = cone_half_angle(phi.body, x0)
    return TaylorJet(half, acc, angle, angle < LOW_CONFIDENCE_DEG, used)


@dataclass(frozen=True)
class BoundaryOrderSpec:
    """Pairs ``(x0, order)`` with ``order`` an int or ``None`` for infinity."""

    assignments: tuple

    @classmethod
    def constant(cls, points, order):
        return cls(tuple((np.asarray(p, dtype=float), order) for p in points))


@dataclass
class MembershipReport:
    points: list
    passed: bool

    def to_json(self):
        return {"passed": self.passed, "points": self.points}


def diff_O_membership(phi, spec, k_cap=3, tol=1e-3, h=0.005):
    """Check that the jet of ``phi`` at each ``x0`` agrees with the identity to the prescribed order."""
    rows = []
    for x0, order in spec.assignments:
        x0 = np.asarray(x0, dtype=float)
        if phi.body.boundary_distance(x0[None])[0] != 0:
            raise DomainError(f"{x0.tolist()} is not a boundary point")
        infinite = order is None or (isinstance(order, float) and math.isinf(order))
        k = k_cap if infinite else min(int(order), k_cap)
        row = {"x0": x0.tolist(), "order": "inf" if infinite else int(order), "checked_order": k}
        if infinite or (int(order) > k_cap):
            row["note"] = f"verified to order {k_cap} only"
        if k == 0:
            row.update(passed=True, distance=0.0)
        else:
            tj = taylor_extract(phi, x0, k, h)
            dist = jet_distance(tj.jet, jet_identity(phi.body.dim, k, exact=False))
            row.update(passed=bool(dist <= tol), distance=dist, low_confidence=tj.low_confidence,
                       accuracy={str(d): v for d, v in tj.accuracy.items()})
        rows.append(row)
    return MembershipReport(rows, all(r["passed"] for r in rows))
