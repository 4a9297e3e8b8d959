"""Exception hierarchy shared across the package."""


class ProxMklError(Exception):
    """Base class for all package errors."""


class InputError(ProxMklError):
    """Bad user-supplied data (non-finite entries, bad labels, empty files)."""


class ParseError(InputError):
    """Malformed dataset file; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ProxMklError):
    """Invalid kernel / solver configuration."""


class ContractError(ProxMklError):
    """Caller violated an interface contract (dimension mismatch etc.)."""


class NumericalError(ProxMklError):
    """Numerical breakdown (indefinite Gram matrix, factorization failure,
    line-search stall)."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ConvergenceError(ProxMklError):
    """Iteration limit exceeded; carries the last iterate for inspection."""

    def __init__(self, message, last_iterate=None, grad_norm=None):
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
        super().__init__(message)


class ConjugateDomainError(ProxMklError):
    """A point outside the open domain of a loss conjugate was evaluated.

    The line search of the inner solver is expected to catch this and
    backtrack; ``indices`` lists the violating sample positions.
    """

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(f"conjugate domain violated at indices {self.indices[:8]}"
                         + ("..." if len(self.indices) > 8 else ""))
