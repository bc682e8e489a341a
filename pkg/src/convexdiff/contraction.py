"""Fixed-point machinery: Banach iteration for contraction families,
implicit sensitivities, and a batched Picard solver for flows.

The Picard solver works on a uniform grid ``tau_0 = 0 < ... < tau_N = 1``
and replaces the integral by the cumulative trapezoid rule.  The discrete
map is still a contraction with the same constant as the continuous one
(the trapezoid weights are positive and sum to ``tau_i <= 1``), so the
error bound ``d(x_{k+1}, x_k) L / (1 - L)`` carries over to the discrete
fixed point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, ConvergenceError, DivergenceError, DomainError
from .fields import THETA_MAX
from .finite_diff import derivative_fd
from .io import csv_text, json_text, write_atomic

__all__ = [
    "ContractionFamily",
    "fixed_point",
    "fixed_point_sensitivity",
    "linear_family_inverse_derivative",
    "PicardProblem",
    "FlowResult",
    "picard_solve",
    "picard_residual",
    "cumulative_trapezoid",
    "solve_curve",
    "panel_count",
    "PANEL_THETA",
    "CONFINEMENT_TOL",
]

PANEL_THETA = 0.3
CONFINEMENT_TOL = 1e-9
_DIVERGENCE_RUN = 5


def _fd_step(v):
    return 1e-5 * (1.0 + float(np.linalg.norm(v)))


# ---------------------------------------------------------------------------
# contraction families

@dataclass(frozen=True)
class ContractionFamily:
    """``f(p, x)`` with ``Lip(f(p, .)) <= theta < 1`` for admissible ``p``.

    ``p_box`` and ``x_box`` are ``(lo, hi)`` pairs used for validation
    sampling; either may be ``None`` when no box is known.
    """

    f: object
    theta: float
    p_box: tuple = None
    x_box: tuple = None

    def __post_init__(self):
        if not 0 <= self.theta < 1:
            raise CertificateError(f"contraction certificate must lie in [0, 1), got {self.theta}")

    def __call__(self, p, x):
        return np.atleast_1d(np.asarray(self.f(np.atleast_1d(p), np.atleast_1d(x)), dtype=float))

    def validate(self, samples=64, seed=0):
        """Sampled check of the certificate; returns the worst observed ratio."""
        if self.p_box is None or self.x_box is None:
            raise DomainError("validation needs both a parameter box and a state box")
        rng = np.random.default_rng(seed)
        plo, phi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in self.p_box)
        xlo, xhi = (np.atleast_1d(np.asarray(v, dtype=float)) for v in self.x_box)
        worst = 0.0
        for _ in range(samples):
            p = rng.uniform(plo, phi)
            x, y = rng.uniform(xlo, xhi), rng.uniform(xlo, xhi)
            gap = np.linalg.norm(x - y)
            if gap == 0:
                continue
            worst = max(worst, float(np.linalg.norm(self(p, x) - self(p, y)) / gap))
        if worst > self.theta * (1 + 1e-9):
            raise CertificateError(f"observed ratio {worst:.4g} exceeds the certificate {self.theta:.4g}")
        return worst


def fixed_point(family, p, x_init, tol=1e-12, max_iter=10_000):
    """Banach iteration ``x <- f(p, x)``.

    Stops once ``|f(p, x) - x| <= tol (1 - theta)``, which bounds the
    distance to the true fixed point by ``tol``.  Five consecutive
    expansions are taken as proof that the certificate is wrong.
    """
    x = np.atleast_1d(np.asarray(x_init, dtype=float))
    target = tol * (1.0 - family.theta)
    prev, growing = math.inf, 0
    for it in range(1, max_iter + 1):
        nxt = family(p, x)
        step = float(np.linalg.norm(nxt - x))
        x = nxt
        if step <= target:
            return x
        growing = growing + 1 if step > prev else 0
        if growing >= _DIVERGENCE_RUN:
            raise DivergenceError(
                f"iterates expanded {_DIVERGENCE_RUN} times in a row; contraction certificate invalid",
                iterations=it, ratio=step / prev,
            )
        prev = step
    raise ConvergenceError(f"no convergence in {max_iter} iterations (last step {step:.3g})",
                           iterations=max_iter, ratio=None)


def fixed_point_sensitivity(family, p, x_p, h=None):
    """``D phi(p) = (I - D_x f)^{-1} D_p f`` at a certified fixed point."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    x_p = np.atleast_1d(np.asarray(x_p, dtype=float))
    hp = _fd_step(p) if h is None else h
    hx = _fd_step(x_p) if h is None else h
    Dp = derivative_fd(lambda q: family(q, x_p), p, hp)
    Dx = derivative_fd(lambda y: family(p, y), x_p, hx)
    try:
        return np.linalg.solve(np.eye(len(x_p)) - Dx, Dp)
    except np.linalg.LinAlgError as exc:
        raise CertificateError("I - D_x f is singular; the contraction certificate is broken") from exc


def linear_family_inverse_derivative(A, p, z, y, h=None):
    """Directional derivative of ``p -> A(p)^{-1} z`` along ``y``.

    Equals ``-A(p)^{-1} (D_p A . y) A(p)^{-1} z`` with ``D_p A . y`` taken by
    a central difference along ``y``.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    h = _fd_step(p) if h is None else h
    A0 = np.atleast_2d(np.asarray(A(p), dtype=float))
    dA = (np.atleast_2d(np.asarray(A(p + h * y), dtype=float))
          - np.atleast_2d(np.asarray(A(p - h * y), dtype=float))) / (2 * h)
    try:
        w = np.linalg.solve(A0, z)
        return -np.linalg.solve(A0, dA @ w)
    except np.linalg.LinAlgError as exc:
        raise DomainError("A(p) is singular") from exc


# ---------------------------------------------------------------------------
# Picard iteration

def cumulative_trapezoid(F, dt):
    """``I[i] = int_0^{tau_i} F`` along axis 0, with ``I[0] = 0``."""
    inc = 0.5 * dt * (F[1:] + F[:-1])
    out = np.zeros_like(F)
    np.cumsum(inc, axis=0, out=out[1:])
    return out


@dataclass
class PicardProblem:
    """Data for ``y' = g(tau, y)``, ``y(0) = x0`` on ``tau in [0, 1]``.

    ``g`` maps ``(tau, X)`` with ``tau`` broadcastable against ``X[..., 0]``.
    ``x0`` is a batch ``(B, n)``; ``R`` the per-point confinement radius.
    """

    g: object
    x0: np.ndarray
    R: np.ndarray
    L: float
    M: np.ndarray

    def __post_init__(self):
        self.x0 = np.atleast_2d(np.asarray(self.x0, dtype=float))
        B = self.x0.shape[0]
        self.R = np.broadcast_to(np.asarray(self.R, dtype=float), (B,)).copy()
        self.M = np.broadcast_to(np.asarray(self.M, dtype=float), (B,)).copy()
        if not self.L < 1:
            raise CertificateError(f"Picard iteration needs L < 1, got {self.L:.4g}")
        if np.any(self.M > self.R * (1 + 1e-12)):
            raise CertificateError("sup-norm certificate exceeds the confinement radius")

    @classmethod
    def from_curve(cls, curve, x0):
        """Problem on ``B(x0, d(x0)/2)`` for a curve with ``theta <= 1/3``.

        On that ball ``|g| <= theta d <= theta (3/2) d(x0) <= R``.
        """
        if curve.theta > THETA_MAX * (1 + 1e-12):
            raise CertificateError(f"curve certificate {curve.theta:.4g} exceeds 1/3")
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        if x0.shape[-1] != curve.body.dim:
            raise DomainError("initial point has the wrong dimension")
        d = curve.body.boundary_distance(x0)
        if np.any(d < 0):
            raise DomainError("initial point lies outside K")
        return cls(curve, x0, 0.5 * d, curve.theta, 1.5 * curve.theta * d)


@dataclass
class FlowResult:
    grid: np.ndarray
    states: np.ndarray            # (N+1, B, n)
    iterations: int
    residual: float
    contraction_ratio: float
    confinement_ok: bool
    max_excursion: float = 0.0    # max |y - x0| / R over points with R > 0
    panels: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.states[-1]

    def trajectory(self, b=0):
        return self.states[:, b, :]

    def csv(self, b=0):
        n = self.states.shape[-1]
        header = ["t"] + [f"y{j + 1}" for j in range(n)]
        rows = np.column_stack([self.grid, self.trajectory(b)])
        return csv_text(header, rows)

    def diagnostics(self):
        return {
            "iterations": int(self.iterations),
            "residual": float(self.residual),
            "contraction_ratio": float(self.contraction_ratio),
            "confinement_ok": bool(self.confinement_ok),
            "panels": int(self.panels),
        }

    def write(self, path, b=0):
        write_atomic(path, self.csv(b))
        write_atomic(str(path) + ".json", json_text(self.diagnostics()))


def _sweep(g, grid, Y, x0):
    F = np.asarray(g(grid[:, None], Y), dtype=float)
    return x0[None] + cumulative_trapezoid(F, grid[1] - grid[0])


def picard_residual(g, grid, Y, x0):
    """``max_i |y_i - x0 - trapz int_0^{tau_i} g(s, y(s)) ds|`` over the batch."""
    return float(np.max(np.abs(Y - _sweep(g, grid, Y, x0))))


def picard_solve(problem, N=2048, tol=1e-12, max_iter=200):
    """Picard sweeps from the constant curve ``x0`` for a whole batch at once."""
    if N < 8:
        raise DomainError("Picard grid needs N >= 8")
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    g, x0, L = problem.g, problem.x0, problem.L
    grid = np.linspace(0.0, 1.0, N + 1)
    Y = np.broadcast_to(x0, (N + 1,) + x0.shape).copy()
    target = tol * (1.0 - L)
    floor = 64 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(x0))))
    prev, ratio = None, 0.0
    for it in range(1, max_iter + 1):
        Ynew = _sweep(g, grid, Y, x0)
        dist = float(np.max(np.abs(Ynew - Y)))
        Y = Ynew
        if prev is not None and prev > floor and dist > floor:
            ratio = max(ratio, dist / prev)
        if dist <= target:
            break
        prev = dist
    else:
        raise ConvergenceError(
            f"Picard iteration did not reach {tol:g} in {max_iter} sweeps (observed ratio {ratio:.3g})",
            iterations=max_iter, ratio=ratio,
        )
    residual = picard_residual(g, grid, Y, x0)
    excursion = np.max(np.sqrt(np.sum((Y - x0[None]) ** 2, axis=-1)), axis=0)
    R = problem.R
    ok = bool(np.all(excursion <= R + CONFINEMENT_TOL))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(R > 0, excursion / np.where(R > 0, R, 1.0), 0.0)
    return FlowResult(grid, Y, it, residual, ratio, ok, float(np.max(rel)) if rel.size else 0.0)


def panel_count(theta):
    """Panels needed so that each rescaled piece has certificate <= 0.3."""
    if theta <= THETA_MAX:
        return 1
    return math.ceil(theta / PANEL_THETA)


def solve_curve(curve, x0, N=2048, tol=1e-12, max_iter=200, panels=None):
    """Flow of a (possibly large) curve over ``tau in [0, 1]``.

    Curves with ``theta > 1/3`` are cut into equal panels, each rescaled to
    [0, 1] and solved from the previous panel's endpoint.  ``panels`` can be
    fixed by the caller so that nearby problems share one discretization.
    """
    k = panel_count(curve.theta) if panels is None else int(panels)
    if k < 1:
        raise DomainError("panel count must be positive")
    if k == 1 and curve.theta <= THETA_MAX * (1 + 1e-12):
        return picard_solve(PicardProblem.from_curve(curve, x0), N, tol, max_iter)
    x = np.atleast_2d(np.asarray(x0, dtype=float))
    grids, states = [], []
    its, res, ratio, ok, exc = 0, 0.0, 0.0, True, 0.0
    for j in range(k):
        piece = curve.restrict(j / k, (j + 1) / k)
        if piece.theta > THETA_MAX * (1 + 1e-12):
            raise CertificateError(f"panel certificate {piece.theta:.4g} exceeds 1/3; use more panels")
        r = picard_solve(PicardProblem.from_curve(piece, x), N, tol, max_iter)
        sl = slice(None) if j == 0 else slice(1, None)
        grids.append((j + r.grid[sl]) / k)
        states.append(r.states[sl])
        its += r.iterations
        res = max(res, r.residual)
        ratio = max(ratio, r.contraction_ratio)
        ok = ok and r.confinement_ok
        exc = max(exc, r.max_excursion)
        x = r.final
    return FlowResult(np.concatenate(grids), np.concatenate(states), its, res, ratio, ok, exc, panels=k)
