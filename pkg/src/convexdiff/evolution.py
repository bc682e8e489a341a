"""Evolution of Lie-algebra curves and parametric flow maps.

``evolve`` turns a curve ``gamma: [0, 1] -> fields`` into the curve of
diffeomorphisms ``eta(t)`` with ``d/dt eta(t)(x) = gamma(t)(eta(t)(x))``.
Each snapshot is an independent flow element; nothing is integrated
incrementally, so every snapshot carries its own Picard certificate.

``flow_map`` realizes ``Phi(p, t0, t, x0)`` by rescaling
``g(tau, x) = (t - t0) f(p, t0 + tau (t - t0), x)`` onto ``[0, 1]``.
Backward time needs no special handling: the factor ``t - t0`` is negative.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import contraction as C
from .diffeo import flow_element, identity
from .errors import DomainError
from .fields import BoundaryVanishingField, LieAlgebraCurve
from .geometry import sample_boundary, sample_interior
from .io import csv_text

__all__ = [
    "EvolutionResult",
    "evolve",
    "evol_r",
    "ParametricFlowSpec",
    "flow_map",
    "flow_trajectory",
    "FlowSensitivity",
    "flow_sensitivity",
    "group_flow_consistency",
]

DEFAULT_TOL = 1e-13


@dataclass
class EvolutionResult:
    times: np.ndarray
    snapshots: list
    logderiv_residual: float
    samples: np.ndarray
    identity_error: float

    def snapshot_values(self):
        """``(M+1, S, n)`` positions of the sample points at every snapshot."""
        return np.stack([eta(self.samples) for eta in self.snapshots])

    def csv(self, values=None):
        values = self.snapshot_values() if values is None else values
        n = self.samples.shape[1]
        header = ["t", "sample"] + [f"x{j + 1}" for j in range(n)] + [f"y{j + 1}" for j in range(n)]
        rows = []
        for j, t in enumerate(self.times):
            for s, x in enumerate(self.samples):
                rows.append([t, s, *x, *values[j, s]])
        return csv_text(header, rows)

    def diagnostics(self):
        return {"snapshots": len(self.snapshots), "logderiv_residual": self.logderiv_residual,
                "identity_error": self.identity_error, "samples": int(len(self.samples))}


def _evolution_samples(body, count, seed):
    nb = max(1, count // 4)
    return np.concatenate([sample_interior(body, count - nb, seed), sample_boundary(body, nb, seed + 1)])


def evolve(curve, M=64, N=2048, tol=DEFAULT_TOL, samples=24, seed=0):
    """Snapshots ``eta(t_j)``, ``t_j = j / M``, and the log-derivative residual.

    The residual is ``max |(eta(t_{j+1}) - eta(t_{j-1}))(x) / (2 dt) - gamma(t_j)(eta(t_j)(x))|``
    over interior snapshot times and the sample set.
    """
    if M < 2:
        raise DomainError("need at least two snapshot intervals")
    times = np.linspace(0.0, 1.0, M + 1)
    snaps = [identity(curve.body)] + [flow_element(curve, t, N=N, tol=tol) for t in times[1:]]
    X = _evolution_samples(curve.body, samples, seed)
    Y = np.stack([eta(X) for eta in snaps])
    dt = times[1] - times[0]
    lhs = (Y[2:] - Y[:-2]) / (2 * dt)
    rhs = np.stack([curve(times[j], Y[j]) for j in range(1, M)])
    resid = float(np.max(np.abs(lhs - rhs)))
    id_err = float(np.max(np.abs(Y[0] - X)))
    return EvolutionResult(times, snaps, resid, X, id_err)


def evol_r(curve, N=2048, tol=DEFAULT_TOL):
    """Time-one element of the evolution; certificate ``e^theta - 1``."""
    return flow_element(curve, 1.0, N=N, tol=tol)


@dataclass(frozen=True, eq=False)
class ParametricFlowSpec:
    """A parametrized field ``f(p, t, x)`` over the box ``P`` and interval ``J``."""

    field: BoundaryVanishingField
    p_box: tuple = None
    N: int = 2048
    tol: float = DEFAULT_TOL

    @property
    def J(self):
        return self.field.time_interval

    @property
    def m(self):
        return len(self.field.params)

    def check_p(self, p):
        p = np.atleast_1d(np.asarray(p, dtype=float)) if self.m else np.zeros(0)
        if p.shape != (self.m,):
            raise DomainError(f"expected {self.m} parameters, got shape {p.shape}")
        if self.p_box is not None and self.m:
            lo, hi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in self.p_box)
            if np.any(p < lo) or np.any(p > hi):
                raise DomainError(f"parameter {p.tolist()} outside the box [{lo.tolist()}, {hi.tolist()}]")
        return p

    def curve(self, p, t0, t):
        p = self.check_p(p)
        ja, jb = self.J
        for s in (t0, t):
            if not ja <= s <= jb:
                raise DomainError(f"time {s} outside J = [{ja}, {jb}]")
        f = self.field.bind(p) if self.m else self.field
        return LieAlgebraCurve(f, a=t0, b=t, check=False)


def _as_batch(spec, x0):
    X = np.atleast_2d(np.asarray(x0, dtype=float))
    if X.shape[-1] != spec.field.dim:
        raise DomainError("initial point has the wrong dimension")
    if np.any(spec.field.body.boundary_distance(X) < 0):
        raise DomainError("initial point lies outside K")
    return X


def flow_trajectory(spec, p, t0, t, x0, panels=None):
    """Full ``FlowResult`` with the grid mapped back to physical time."""
    t0, t = float(t0), float(t)
    X = _as_batch(spec, x0)
    if t == t0:
        spec.check_p(p)
        grid = np.array([t0])
        return C.FlowResult(grid, X[None].copy(), 0, 0.0, 0.0, True, 0.0, panels=0)
    res = C.solve_curve(spec.curve(p, t0, t), X, N=spec.N, tol=spec.tol, panels=panels)
    res.grid = t0 + res.grid * (t - t0)
    return res


def flow_map(spec, p, t0, t, x0, panels=None):
    """``Phi(p, t0, t, x0)``; ``x0`` may be a batch."""
    X = _as_batch(spec, x0)
    if float(t) == float(t0):
        spec.check_p(p)
        out = X.copy()
    else:
        out = C.solve_curve(spec.curve(p, t0, t), X, N=spec.N, tol=spec.tol, panels=panels).final
    return out if np.ndim(x0) > 1 else out[0]


@dataclass
class FlowSensitivity:
    d_p: np.ndarray
    d_x0: np.ndarray
    d_t0: np.ndarray
    d_t: np.ndarray
    richardson: dict = field(default_factory=dict)
    panels: int = 1
    h: float = 0.0

    def to_json(self):
        return {"d_p": self.d_p, "d_x0": self.d_x0, "d_t0": self.d_t0, "d_t": self.d_t,
                "richardson": self.richardson, "panels": self.panels, "h": self.h}


def _central(fun, v, h):
    """Central differences of ``fun`` along each coordinate of ``v`` (columns)."""
    cols = []
    for j in range(len(v)):
        e = np.zeros_like(v)
        e[j] = h
        cols.append((fun(v + e) - fun(v - e)) / (2 * h))
    return np.stack(cols, axis=-1) if cols else np.zeros((0, 0))


def _ratio(D1, D2, D3):
    a = float(np.max(np.abs(D1 - D2)))
    b = float(np.max(np.abs(D2 - D3)))
    if b == 0 or a == 0:
        return None
    return a / b


def flow_sensitivity(spec, p, t0, t, x0, h=1e-4, h_richardson=1e-2):
    """Finite-difference derivatives of ``Phi`` in ``p``, ``x0``, ``t0`` and ``t``.

    The panel count is fixed at the base point so that all perturbed
    solves share one discretization and the differences are smooth.
    Richardson ratios compare steps ``h_r``, ``h_r/2``, ``h_r/4``; second-order
    differences give ratios near 4.
    """
    p = spec.check_p(p)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    t0, t = float(t0), float(t)
    base = spec.curve(p, t0, t) if t != t0 else None
    panels = 1 if base is None else C.panel_count(base.theta * 1.1)
    n = x0.shape[0]

    def run(pp, tt0, tt, xx):
        return flow_map(spec, pp, tt0, tt, xx, panels=panels)

    def derivs(step):
        hp = step * (1 + float(np.linalg.norm(p)))
        hx = step * (1 + float(np.linalg.norm(x0)))
        ht = step * (1 + max(abs(t0), abs(t)))
        if np.any(spec.field.body.boundary_distance(x0[None] + hx * np.eye(n)) < 0) or \
                np.any(spec.field.body.boundary_distance(x0[None] - hx * np.eye(n)) < 0):
            raise DomainError("x0 perturbation leaves K; move x0 inward or reduce h")
        dp = _central(lambda q: run(q, t0, t, x0), p, hp) if len(p) else np.zeros((n, 0))
        dx = _central(lambda y: run(p, t0, t, y), x0, hx)
        dt0 = (run(p, t0 + ht, t, x0) - run(p, t0 - ht, t, x0)) / (2 * ht)
        dt = (run(p, t0, t + ht, x0) - run(p, t0, t - ht, x0)) / (2 * ht)
        return dp, dx, dt0, dt

    main = derivs(h)
    rich = [derivs(h_richardson / 2 ** j) for j in range(3)]
    names = ("p", "x0", "t0", "t")
    ratios = {nm: _ratio(rich[0][k], rich[1][k], rich[2][k]) for k, nm in enumerate(names)}
    return FlowSensitivity(*main, richardson=ratios, panels=panels, h=h)


def group_flow_consistency(f, s, t, samples=32, seed=0, N=2048, tol=DEFAULT_TOL):
    """Compare ``Phi(0, s+t)`` with ``Phi(s, s+t) o Phi(0, s)`` for an autonomous field.

    For autonomous fields this is the one-parameter group law
    ``Phi_{s+t} = Phi_t o Phi_s``.  Returns the max discrepancy.
    """
    if not f.is_autonomous:
        raise DomainError("group law check needs an autonomous field")
    s, t = float(s), float(t)
    lo, hi = min(0.0, s, t, s + t), max(0.0, s, t, s + t)
    X = np.concatenate([sample_interior(f.body, samples, seed), sample_boundary(f.body, max(1, samples // 4), seed + 1)])
    if lo == hi:
        return {"s": s, "t": t, "discrepancy": 0.0, "samples": len(X)}
    spec = ParametricFlowSpec(f.with_interval(lo, hi), N=N, tol=tol)
    whole = flow_map(spec, [], 0.0, s + t, X)
    first = flow_map(spec, [], 0.0, s, X)
    second = flow_map(spec, [], 0.0, t, first)
    return {"s": s, "t": t, "discrepancy": float(np.max(np.abs(whole - second))), "samples": len(X)}
