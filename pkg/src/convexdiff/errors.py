"""Exception hierarchy shared by all modules."""


class ConvexDiffError(Exception):
    """Base class for domain errors raised by this package."""


class DomainError(ConvexDiffError, ValueError):
    """A point, time or parameter lies outside the admissible domain."""


class ParseError(ConvexDiffError, ValueError):
    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position
        self.message = message


class EvaluationError(ConvexDiffError, ArithmeticError):
    """Division by zero or an undefined power inside a user expression."""


class CertificateError(ConvexDiffError):
    """A Lipschitz/contraction certificate is missing or was observed to fail."""


class ConvergenceError(ConvexDiffError):
    def __init__(self, message, iterations=None, ratio=None):
        super().__init__(message)
        self.iterations = iterations
        self.ratio = ratio


class DivergenceError(ConvergenceError):
    """Iterates moved apart for several consecutive steps."""


class WorkspaceError(ConvexDiffError):
    def __init__(self, message, location=""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location
