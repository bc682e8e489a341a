"""Numerics for boundary-fixing diffeomorphism groups of compact convex bodies."""
from . import contraction, diffeo, evolution, expr, fields, geometry, jets
from .errors import (
    CertificateError,
    ConvergenceError,
    ConvexDiffError,
    DivergenceError,
    DomainError,
    EvaluationError,
    ParseError,
    WorkspaceError,
)

__version__ = "0.1.0"

__all__ = [
    "contraction", "diffeo", "evolution", "expr", "fields", "geometry", "jets",
    "CertificateError", "ConvergenceError", "ConvexDiffError", "DivergenceError",
    "DomainError", "EvaluationError", "ParseError", "WorkspaceError",
]
