"""Boundary-fixing diffeomorphisms ``phi = id + gamma`` of a convex body.

Elements are extensional: a displacement evaluator, a Jacobian evaluator
and a certificate ``lip >= Lip(gamma)``.  When ``lip < 1`` the element is
injective and ``x -> y - gamma(x)`` is a contraction, which is how
inverses are computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contraction as C
from .errors import CertificateError, ConvergenceError, DomainError
from .fields import BoundaryVanishingField, LieAlgebraCurve, fd_step
from .finite_diff import derivative_fd, op_norm
from .geometry import interior_grid, sample_boundary, sample_interior

__all__ = [
    "Diffeo",
    "identity",
    "from_field",
    "from_callable",
    "flow_element",
    "apply",
    "chart_membership",
    "ChartReport",
    "compose",
    "invert_at",
    "invert",
    "DiffeoFamily",
    "parametric_inverse",
    "parametric_inverse_sensitivity",
    "body_jacobian",
    "ANALYTIC_TOL",
    "FLOW_TOL",
]

ANALYTIC_TOL = 1e-12
FLOW_TOL = 1e-9
FLOW_FD_STEP = 1e-4
FLOW_PICARD_TOL = 1e-14


def _batch(body, X):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != body.dim:
        raise DomainError(f"expected points of dimension {body.dim}, got shape {X.shape}")
    return np.atleast_2d(X)


def _inward_directions(body, x):
    """``n`` unit directions from ``x`` towards points near the interior point."""
    n = body.dim
    c = np.asarray(body.interior_point, dtype=float)
    delta = 0.5 * float(body.boundary_distance(c))
    targets = c[None] + delta * np.eye(n)
    U = targets - x[None]
    lengths = np.sqrt(np.sum(U * U, axis=1))
    return U / lengths[:, None], float(np.min(lengths))


def body_jacobian(fun, body, X, h):
    """Jacobians ``(B, n, n)`` of a map defined only on K.

    Points with ``d(x) >= h`` get central differences along coordinates;
    the rest get second-order one-sided differences along ``n`` inward
    directions ``u_j``, and ``J = D U^{-1}`` recovers the coordinate form.
    """
    X = _batch(body, X)
    B, n = X.shape
    h = np.broadcast_to(np.asarray(h, dtype=float), (B,)).copy()
    d = body.boundary_distance(X)
    central = d >= h
    J = np.empty((B, n, n))
    if np.any(central):
        Xc, hc = X[central], h[central]
        shift = hc[None, :, None] * np.eye(n)[:, None, :]
        pts = np.concatenate([Xc[None] + shift, Xc[None] - shift]).reshape(-1, n)
        F = np.asarray(fun(pts), dtype=float).reshape(2, n, len(Xc), n)
        J[central] = np.transpose((F[0] - F[1]) / (2 * hc[None, :, None]), (1, 2, 0))
    idx = np.flatnonzero(~central)
    if idx.size:
        stencil, frames = [], []
        for b in idx:
            U, reach = _inward_directions(body, X[b])
            hb = min(h[b], 0.5 * reach)
            h[b] = hb
            frames.append(U)
            stencil.append(np.concatenate([X[b][None], X[b][None] + hb * U, X[b][None] + 2 * hb * U]))
        F = np.asarray(fun(np.concatenate(stencil)), dtype=float).reshape(len(idx), 2 * n + 1, n)
        for k, b in enumerate(idx):
            f0, f1, f2 = F[k, 0], F[k, 1:n + 1], F[k, n + 1:]
            D = (-3 * f0[None] + 4 * f1 - f2) / (2 * h[b])     # rows: derivative along u_j
            J[b] = np.linalg.solve(frames[k], D).T
    return J


@dataclass(frozen=True, eq=False)
class Diffeo:
    """``phi(x) = x + gamma(x)`` on ``body``.

    ``gamma`` and ``jac`` take batches ``(B, n)``.  ``kind`` is one of
    ``analytic``, ``flow``, ``composite``, ``inverse`` and decides the
    tolerance used when checking that images stay in K.
    """

    body: object
    gamma: object
    jac: object
    lip: float
    kind: str = "analytic"
    provenance: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.body.dim

    @property
    def apply_tol(self):
        return ANALYTIC_TOL if self.kind == "analytic" else FLOW_TOL

    def displacement(self, X):
        X = _batch(self.body, X)
        return np.asarray(self.gamma(X), dtype=float).reshape(X.shape)

    def __call__(self, X):
        X = _batch(self.body, X)
        return X + self.displacement(X)

    def jacobian(self, X):
        """Jacobian of ``gamma`` (not of ``phi``), shape ``(B, n, n)``."""
        return np.asarray(self.jac(_batch(self.body, X)), dtype=float)

    def jacobian_margin(self, samples=256, seed=0):
        """``min |det(I + gamma'(x))|`` over interior samples."""
        X = sample_interior(self.body, samples, seed)
        return float(np.min(np.abs(np.linalg.det(np.eye(self.dim) + self.jacobian(X)))))

    def sampled_lip(self, samples=256, seed=0):
        X = np.concatenate([sample_interior(self.body, samples, seed),
                            sample_boundary(self.body, max(1, samples // 4), seed + 1)])
        return float(np.max(op_norm(self.jacobian(X))))

    def recertify(self, samples=256, seed=0):
        """Check the stored certificate against sampled Jacobians."""
        seen = self.sampled_lip(samples, seed)
        if seen > self.lip * (1 + 1e-6):
            raise CertificateError(f"sampled Lip(gamma) {seen:.4g} exceeds the certificate {self.lip:.4g}")
        return seen

    def to_json(self):
        return dict(self.provenance)


# ---------------------------------------------------------------------------
# constructors

def identity(body):
    zero = lambda X: np.zeros_like(X)
    zjac = lambda X: np.zeros(X.shape + (X.shape[-1],))
    return Diffeo(body, zero, zjac, 0.0, "analytic", {"identity": True})


def from_field(f, t=None, lip=None):
    """Element with displacement ``gamma(x) = f(t, x)`` for a boundary-vanishing field."""
    if not isinstance(f, BoundaryVanishingField):
        raise TypeError("expected a BoundaryVanishingField")
    t = f.time_interval[0] if t is None else float(t)
    gamma = lambda X: f.evaluate(t, X)
    jac = lambda X: body_jacobian(gamma, f.body, X, fd_step(f.body, X))
    lip = f.theta_bound if lip is None else float(lip)
    return Diffeo(f.body, gamma, jac, lip, "analytic", {"gamma": f.to_json()})


def from_callable(body, gamma, jac=None, lip=None, samples=256, seed=0):
    """Wrap a user displacement; boundary vanishing is checked on samples."""
    if jac is None:
        jac = lambda X: body_jacobian(gamma, body, X, fd_step(body, X))
    pts = sample_boundary(body, samples, seed)
    if np.any(np.asarray(gamma(pts)) != 0):
        raise DomainError("displacement does not vanish on the boundary")
    el = Diffeo(body, gamma, jac, math.inf, "analytic", {"callable": True})
    if lip is None:
        lip = 1.05 * el.sampled_lip(samples, seed)
    return Diffeo(body, gamma, jac, float(lip), "analytic", {"callable": True})


def flow_element(curve, t=1.0, N=2048, tol=FLOW_PICARD_TOL, panels=None):
    """Time-``t`` map ``x0 -> y(t)`` of the flow of ``curve`` (``t`` in curve time [0, 1]).

    Evaluation re-solves the Picard problem for each batch; nothing is
    cached.  The certificate ``e^theta - 1`` is the Gronwall bound and is
    heuristic (see ``Diffeo.recertify``).
    """
    if not isinstance(curve, LieAlgebraCurve):
        raise TypeError("expected a LieAlgebraCurve")
    t = float(t)
    if t == 0.0:
        return identity(curve.body)
    piece = curve.restrict(0.0, t)

    def gamma(X):
        return C.solve_curve(piece, X, N=N, tol=tol, panels=panels).final - X

    jac = lambda X: body_jacobian(gamma, curve.body, X, FLOW_FD_STEP)
    prov = {"flow": curve.field.to_json(), "a": curve.a, "b": curve.b, "t": t}
    return Diffeo(curve.body, gamma, jac, math.expm1(piece.theta), "flow", prov)


# ---------------------------------------------------------------------------
# group operations

def apply(phi, x):
    """``x + gamma(x)`` with membership checks on input and output."""
    X = _batch(phi.body, x)
    if np.any(phi.body.boundary_distance(X) < 0):
        raise DomainError("point is not in K")
    Y = phi(X)
    worst = float(np.min(phi.body.boundary_distance(Y)))
    if worst < -phi.apply_tol:
        raise CertificateError(f"image leaves K by {-worst:.3g}; the element is broken")
    return Y if np.ndim(x) > 1 else Y[0]


def _same_body(a, b):
    return a is b or a.to_json() == b.to_json()


def compose(psi, phi):
    """``psi o phi``: ``gamma(x) = gamma_psi(x + gamma_phi(x)) + gamma_phi(x)``."""
    if not _same_body(psi.body, phi.body):
        raise DomainError("cannot compose elements on different bodies")

    def gamma(X):
        g = phi.displacement(X)
        return psi.displacement(X + g) + g

    def jac(X):
        Jphi = phi.jacobian(X)
        Jpsi = psi.jacobian(X + phi.displacement(X))
        return Jpsi @ (np.eye(phi.dim) + Jphi) + Jphi

    lip = psi.lip * (1 + phi.lip) + phi.lip
    kind = "analytic" if psi.kind == phi.kind == "analytic" else "composite"
    return Diffeo(phi.body, gamma, jac, lip, kind, {"compose": [psi.to_json(), phi.to_json()]})


def invert_at(phi, y, tol=1e-12, max_iter=500, return_iterations=False):
    """Solve ``x + gamma(x) = y`` by ``x <- y - gamma(x)`` starting at ``x = y``.

    Boundary points are returned unchanged without iterating.
    """
    if not phi.lip < 1:
        raise CertificateError(f"inversion needs Lip(gamma) < 1, certificate is {phi.lip:.4g}")
    Y = _batch(phi.body, y)
    d = phi.body.boundary_distance(Y)
    if np.any(d < 0):
        raise DomainError("point is not in K")
    X = Y.copy()
    live = d > 0
    iters = 0
    while True:
        Xl = X[live]
        if len(Xl) == 0:
            break
        r = Xl + phi.displacement(Xl) - Y[live]
        done = np.max(np.abs(r), axis=1) <= tol
        live[np.flatnonzero(live)[done]] = False
        if np.all(done):
            break
        if iters >= max_iter:
            raise ConvergenceError(f"inversion did not converge in {max_iter} steps",
                                   iterations=iters, ratio=phi.lip)
        X[live] = (Xl - r)[~done]
        iters += 1
    out = X if np.ndim(y) > 1 else X[0]
    return (out, iters) if return_iterations else out


def invert(phi, tol=1e-12):
    """Lazy inverse; ``(phi^{-1})'(y) = (phi'(phi^{-1}(y)))^{-1}``."""
    if not phi.lip < 1:
        raise CertificateError(f"inversion needs Lip(gamma) < 1, certificate is {phi.lip:.4g}")
    eye = np.eye(phi.dim)

    def gamma(Y):
        return invert_at(phi, Y, tol) - Y

    def jac(Y):
        X = invert_at(phi, Y, tol)
        return np.linalg.inv(eye + phi.jacobian(X)) - eye

    lip = phi.lip / (1 - phi.lip)
    kind = "inverse" if phi.kind != "analytic" else "analytic"
    return Diffeo(phi.body, gamma, jac, lip, kind, {"invert": phi.to_json()})


# ---------------------------------------------------------------------------
# chart test

@dataclass
class ChartReport:
    boundary_ok: bool
    jacobian_ok: bool
    jacobian_margin: float
    interior_point_ok: bool
    injectivity_certificate: str
    lip_estimate: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return (self.boundary_ok and self.jacobian_ok and self.interior_point_ok
                and self.injectivity_certificate != "Failed")

    def to_json(self):
        return {
            "passed": self.passed,
            "boundary_ok": self.boundary_ok,
            "jacobian_ok": self.jacobian_ok,
            "jacobian_margin": self.jacobian_margin,
            "interior_point_ok": self.interior_point_ok,
            "injectivity_certificate": self.injectivity_certificate,
            "lip_estimate": self.lip_estimate,
            "details": self.details,
        }


def _pairwise_injective(Y, X):
    diff = Y[:, None, :] - Y[None, :, :]
    gaps = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(gaps, np.inf)
    return bool(np.all(gaps > 0)), float(np.min(gaps)) if len(X) > 1 else math.inf


def chart_membership(phi, density=21, x0=None, seed=0):
    """Test the three chart conditions for the displacement of ``phi``.

    ``density`` is the number of grid points per axis.  Injectivity is
    certified when the sampled ``Lip(gamma)`` (times 1.05) is below 1 and
    otherwise only checked pairwise on the grid.
    """
    body = phi.body
    bpts = sample_boundary(body, 256, seed)
    bmax = float(np.max(np.abs(phi.displacement(bpts))))
    if bmax != 0:
        return ChartReport(False, False, 0.0, False, "Failed", math.inf,
                           {"boundary_max_displacement": bmax})
    X = interior_grid(body, density)
    J = phi.jacobian(X)
    dets = np.linalg.det(np.eye(body.dim) + J)
    signs = np.sign(dets)
    margin = float(np.min(np.abs(dets)))
    jac_ok = bool(margin > 0 and np.all(signs == signs[0]))
    x0 = np.asarray(body.interior_point if x0 is None else x0, dtype=float)
    img = phi(x0[None])
    int_ok = bool(body.boundary_distance(img)[0] > 0)
    lip_est = 1.05 * float(np.max(op_norm(J)))
    details = {"grid_points": int(len(X)), "det_min": float(np.min(dets)), "det_max": float(np.max(dets)),
               "image_of_x0": img[0].tolist()}
    if lip_est < 1:
        cert = "LipschitzCertified"
    else:
        ok, gap = _pairwise_injective(phi(X), X)
        details["min_image_gap"] = gap
        cert = "GridHeuristic" if ok and jac_ok else "Failed"
    return ChartReport(True, jac_ok, margin, int_ok, cert, lip_est, details)


# ---------------------------------------------------------------------------
# parametric inversion

@dataclass(frozen=True, eq=False)
class DiffeoFamily:
    """``f(z, x) = x + gamma(z, x)``, each ``f_z`` boundary-fixing with ``Lip <= lip``."""

    body: object
    gamma: object      # (z, X) -> displacement batch
    lip: float
    jac: object = None  # optional (z, X) -> (B, n, n)

    def at(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        g = lambda X: self.gamma(z, X)
        if self.jac is not None:
            j = lambda X: self.jac(z, X)
        else:
            j = lambda X: body_jacobian(g, self.body, X, fd_step(self.body, X))
        return Diffeo(self.body, g, j, self.lip, "analytic", {"family_at": z.tolist()})


def parametric_inverse(family, z, y, tol=1e-12):
    """``g(z, y) = f_z^{-1}(y)``."""
    return invert_at(family.at(z), y, tol)


def parametric_inverse_sensitivity(family, z, y, tol=1e-13, h=None):
    """``(D_z g, D_y g)`` at a single point.

    ``D_y g = A^{-1}`` and ``D_z g = -A^{-1} D_z f(z, x)`` with ``x = g(z, y)``
    and ``A = I + gamma_z'(x)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    phi = family.at(z)
    x = np.atleast_1d(invert_at(phi, np.asarray(y, dtype=float), tol))
    A = np.eye(family.body.dim) + phi.jacobian(x[None])[0]
    h = 1e-5 * (1 + float(np.linalg.norm(z))) if h is None else h
    Dz = derivative_fd(lambda zz: np.asarray(family.gamma(zz, x[None]), dtype=float)[0], z, h)
    Ainv = np.linalg.inv(A)
    return -Ainv @ Dz, Ainv
