"""Time-dependent vector fields on K that vanish on the boundary.

A field is ``f(t, x) = g(t, x) * w(x)`` where ``g`` is a vector of user
expressions and ``w`` a weight that is exactly zero on the boundary:

* ``slack``: product of normalized facet slacks (polytope) or
  ``(r - |x - c|)/r`` (ball); vanishes on the boundary but is not flat.
* ``flat``:  ``exp(-alpha / d(x))`` with the value 0 hard-set where the
  boundary distance is 0; all derivatives vanish on the boundary.
* ``none``:  ``w = 1``; the base itself must vanish on the boundary, which
  is checked on boundary samples at construction.

Lipschitz constants are certified by sampling Jacobians (central
differences) and inflating the observed maximum by 5%.  Everything
downstream is only as good as that certificate.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import expr as E
from .errors import CertificateError, DomainError
from .finite_diff import jacobian_fd, op_norm
from .geometry import sample_boundary, sample_interior

__all__ = [
    "Weight",
    "BoundaryVanishingField",
    "LieAlgebraCurve",
    "make_field",
    "field_from_json",
    "eval_field",
    "fd_step",
    "field_jacobian",
    "lipschitz_seminorm",
    "verify_pointwise_bound",
    "PointwiseBoundReport",
    "THETA_MAX",
    "LIP_INFLATION",
]

THETA_MAX = 1.0 / 3.0
LIP_INFLATION = 1.05
_SPACE_VAR = re.compile(r"x(\d+)$")


@dataclass(frozen=True)
class Weight:
    kind: str = "slack"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("slack", "flat", "none"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "flat" and not self.alpha > 0:
            raise ValueError("flat weight needs alpha > 0")

    def __call__(self, body, X):
        if self.kind == "none":
            return np.ones(np.shape(X)[:-1])
        if self.kind == "slack":
            return body.weight_slack(X)
        d = body.boundary_distance(X)
        pos = d > 0
        return np.where(pos, np.exp(-self.alpha / np.where(pos, d, 1.0)), 0.0)

    def to_json(self):
        if self.kind == "none":
            return None
        if self.kind == "flat":
            return {"kind": "flat", "alpha": self.alpha}
        return {"kind": "slack"}

    @classmethod
    def from_json(cls, desc):
        if desc is None:
            return cls("none")
        return cls(desc["kind"], float(desc.get("alpha", 1.0)))


def fd_step(body, X):
    """Spatial difference step ``max(1e-6, 1e-3 d(x))``."""
    d = np.maximum(body.boundary_distance(X), 0.0)
    return np.maximum(1e-6, 1e-3 * d)


@dataclass(frozen=True, eq=False)
class BoundaryVanishingField:
    body: object
    base: tuple
    weight: Weight = Weight("slack")
    time_interval: tuple = (0.0, 1.0)
    params: dict = field(default_factory=dict)
    sources: tuple = ()

    def __post_init__(self):
        if len(self.base) != self.body.dim:
            raise DomainError(f"field has {len(self.base)} components on a {self.body.dim}-dimensional body")
        ta, tb = (float(v) for v in self.time_interval)
        if not ta < tb:
            raise DomainError("time interval must be non-degenerate")
        object.__setattr__(self, "time_interval", (ta, tb))
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if self.weight.kind == "none":
            self._check_boundary_vanishing()

    # -- evaluation ------------------------------------------------------
    @property
    def dim(self):
        return self.body.dim

    @property
    def param_names(self):
        return tuple(self.params)

    def _env(self, t, X, params):
        env = dict(self.params)
        if params is not None:
            env.update(params)
        env["t"] = t
        for j in range(self.dim):
            env[f"x{j + 1}"] = X[..., j]
        return env

    def base_values(self, t, X, params=None):
        X = np.asarray(X, dtype=float)
        shape = X.shape[:-1]
        t = np.broadcast_to(np.asarray(t, dtype=float), shape) if shape else float(t)
        env = self._env(t, X, params)
        comps = [np.broadcast_to(np.asarray(E.evaluate(g, env), dtype=float), shape) for g in self.base]
        return np.stack(comps, axis=-1)

    def evaluate(self, t, X, params=None):
        """Unchecked batch evaluation; ``X`` has shape ``(..., n)``.

        Also defined slightly outside K (the weights extend smoothly), which
        finite-difference stencils at boundary points rely on.
        """
        X = np.asarray(X, dtype=float)
        w = self.weight(self.body, X)
        return self.base_values(t, X, params) * w[..., None]

    __call__ = evaluate

    # -- derived fields ----------------------------------------------------
    def bind(self, params):
        """Same field with parameter values replaced (by name or in declaration order)."""
        if not isinstance(params, dict):
            vals = np.atleast_1d(np.asarray(params, dtype=float))
            if vals.shape[0] != len(self.params):
                raise DomainError(f"expected {len(self.params)} parameters, got {vals.shape[0]}")
            params = dict(zip(self.params, vals.tolist()))
        unknown = set(params) - set(self.params)
        if unknown:
            raise DomainError(f"unknown parameters {sorted(unknown)}")
        return replace(self, params={**self.params, **params})

    def scaled(self, factor):
        base = tuple(E.Mul(E.Const(float(factor)), g) for g in self.base)
        return replace(self, base=base, sources=tuple(E.pretty(g) for g in base))

    def with_interval(self, ta, tb):
        return replace(self, time_interval=(ta, tb))

    @property
    def is_autonomous(self):
        return all("t" not in E.free_variables(g) for g in self.base)

    # -- certificates ------------------------------------------------------
    @cached_property
    def theta_bound(self):
        return lipschitz_seminorm(self)

    def _check_boundary_vanishing(self):
        pts = sample_boundary(self.body, 256, seed=12345)
        for t in np.linspace(*self.time_interval, 5):
            vals = self.evaluate(t, pts)
            if np.any(vals != 0):
                worst = float(np.max(np.abs(vals)))
                raise DomainError(f"unweighted field does not vanish on the boundary (|f| up to {worst:.3g} at t={t:g})")

    def to_json(self):
        desc = {
            "base": list(self.sources) if self.sources else [E.pretty(g) for g in self.base],
            "weight": self.weight.to_json(),
            "time": list(self.time_interval),
        }
        if self.params:
            desc["params"] = dict(self.params)
        return desc


def make_field(body, base, weight="slack", time=(0.0, 1.0), params=None, alpha=1.0):
    """Build a field from expression strings (or already parsed trees)."""
    params = dict(params or {})
    if isinstance(base, str):
        base = [base]
    names = {"t", *params} | {f"x{j + 1}" for j in range(body.dim)}
    clash = [p for p in params if p == "t" or _SPACE_VAR.match(p) or p in E.FUNCTIONS]
    if clash:
        raise DomainError(f"parameter names clash with reserved identifiers: {clash}")
    trees, sources = [], []
    for g in base:
        if isinstance(g, E.Expr):
            trees.append(g)
            sources.append(E.pretty(g))
        else:
            trees.append(E.parse_expr(str(g), names))
            sources.append(str(g))
    if not isinstance(weight, Weight):
        weight = Weight("none") if weight is None else Weight(weight, alpha)
    return BoundaryVanishingField(body, tuple(trees), weight, tuple(time), params, tuple(sources))


def field_from_json(desc, body):
    w = Weight.from_json(desc.get("weight", {"kind": "slack"}))
    return make_field(body, desc["base"], w, tuple(desc.get("time", (0.0, 1.0))), desc.get("params"))


def eval_field(f, t, x):
    """Checked single-point evaluation of ``f(t, x)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (f.dim,):
        raise DomainError(f"expected a point of dimension {f.dim}")
    ta, tb = f.time_interval
    if not ta <= t <= tb:
        raise DomainError(f"t={t} outside the field's time interval [{ta}, {tb}]")
    if not f.body.inside(x):
        raise DomainError(f"point {x.tolist()} is not in K")
    return f.evaluate(t, x)


def field_jacobian(f, t, X, h=None, params=None):
    """Spatial Jacobians ``(B, n, n)`` of ``f(t, .)`` by central differences."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if h is None:
        h = fd_step(f.body, X)
    t = np.asarray(t, dtype=float)
    n = f.dim
    if t.ndim:
        # per-point times: the stencil layout of jacobian_fd is (2n, B)
        tt = np.broadcast_to(t, (2 * n, X.shape[0])).reshape(-1)
        return jacobian_fd(lambda P: f.evaluate(tt, P, params), X, h)
    return jacobian_fd(lambda P: f.evaluate(float(t), P, params), X, h)


def _lip_sample_points(body, x_samples, seed):
    n_bd = max(1, x_samples // 4)
    n_in = max(1, x_samples - n_bd)
    return np.concatenate([sample_interior(body, n_in, seed), sample_boundary(body, n_bd, seed + 1)])


def lipschitz_seminorm(f, t_samples=9, x_samples=256, seed=0):
    """Certified bound on ``sup_t Lip(f(t, .))``: sampled max operator norm times 1.05."""
    if t_samples < 2 or x_samples < 2:
        raise ValueError("need at least two time and two space samples")
    X = _lip_sample_points(f.body, x_samples, seed)
    if f.is_autonomous:
        times = np.array([f.time_interval[0]])
    else:
        times = np.linspace(*f.time_interval, t_samples)
    best = 0.0
    for t in times:
        J = field_jacobian(f, t, X)
        best = max(best, float(np.max(op_norm(J))))
    return LIP_INFLATION * best


@dataclass(frozen=True)
class PointwiseBoundReport:
    t: float
    theta: float
    max_ratio: float
    samples: int

    @property
    def passed(self):
        return self.max_ratio <= 1.0

    def to_json(self):
        return {"t": self.t, "theta": self.theta, "max_ratio": self.max_ratio,
                "samples": self.samples, "passed": self.passed}


def verify_pointwise_bound(f, t, samples=512, seed=0):
    """Check ``|f(t, x)| <= theta * d(x)`` on interior samples; ratio 0 where f vanishes."""
    X = sample_interior(f.body, samples, seed)
    vals = np.sqrt(np.sum(f.evaluate(t, X) ** 2, axis=-1))
    theta = f.theta_bound
    d = f.body.boundary_distance(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(vals == 0, 0.0, vals / (theta * d))
    return PointwiseBoundReport(float(t), float(theta), float(np.max(ratio)), len(X))


class LieAlgebraCurve:
    """``g(tau, x) = (b - a) f(a + tau (b - a), x)`` on ``tau in [0, 1]``.

    The rescaled field must have Lipschitz certificate at most 1/3; that is
    the regime in which flows stay inside ``B(x0, d(x0)/2)``.
    """

    def __init__(self, field, a=None, b=None, theta=None, check=True):
        ta, tb = field.time_interval
        self.field = field
        self.a = ta if a is None else float(a)
        self.b = tb if b is None else float(b)
        scale = abs(self.b - self.a)
        self.theta = scale * field.theta_bound if theta is None else float(theta)
        if check and self.theta > THETA_MAX * (1 + 1e-12):
            raise CertificateError(
                f"rescaled Lipschitz certificate {self.theta:.4g} exceeds 1/3; subdivide the time interval"
            )

    @property
    def body(self):
        return self.field.body

    @property
    def span(self):
        return self.b - self.a

    def __call__(self, tau, X):
        return self.span * self.field.evaluate(self.a + np.asarray(tau) * self.span, X)

    def restrict(self, s0, s1):
        """The curve over ``tau in [s0, s1]``, rescaled back to [0, 1]."""
        a = self.a + s0 * self.span
        b = self.a + s1 * self.span
        theta = abs(s1 - s0) * self.theta
        return LieAlgebraCurve(self.field, a, b, theta=theta, check=False)

    def __repr__(self):
        return f"LieAlgebraCurve(a={self.a:g}, b={self.b:g}, theta={self.theta:.4g})"
