"""Central finite differences on batches of points."""
from __future__ import annotations

import numpy as np


def jacobian_fd(fun, X, h):
    """Central-difference Jacobians of a batch map.

    ``fun`` sends an ``(M, n)`` array to ``(M, k)``; ``X`` is ``(B, n)`` and
    ``h`` a scalar or ``(B,)`` step.  Returns ``(B, k, n)`` with
    ``J[b, i, j] = d fun_i / d x_j`` at ``X[b]``.  All ``2 n B`` stencil
    points go through ``fun`` in a single call.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    B, n = X.shape
    h = np.broadcast_to(np.asarray(h, dtype=float), (B,))
    shift = h[None, :, None] * np.eye(n)[:, None, :]          # (n, B, n)
    pts = np.concatenate([X[None] + shift, X[None] - shift])   # (2n, B, n)
    F = np.asarray(fun(pts.reshape(-1, n)), dtype=float)
    F = F.reshape(2, n, B, -1)
    D = (F[0] - F[1]) / (2.0 * h[None, :, None])                # (n, B, k)
    return np.transpose(D, (1, 2, 0))


def derivative_fd(fun, x, h):
    """Central difference of ``fun`` along each coordinate of a parameter vector.

    Works for any array-valued ``fun``; returns ``d fun / d x`` with the
    parameter axis last.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cols = []
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(fun(x + e), dtype=float) - np.asarray(fun(x - e), dtype=float)) / (2 * h))
    return np.stack(cols, axis=-1)


def op_norm(J):
    """Spectral norm of each matrix in a stack ``(..., k, n)``."""
    J = np.asarray(J, dtype=float)
    if J.shape[-1] == 1 or J.shape[-2] == 1:
        return np.sqrt(np.sum(J * J, axis=(-2, -1)))
    return np.linalg.norm(J, ord=2, axis=(-2, -1))
