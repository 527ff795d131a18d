"""Exception hierarchy shared across the package."""


class CstarError(Exception):
    """Base class for all package errors."""


class SignatureMismatchError(CstarError):
    """Operands live in algebras with different block signatures."""


class NormalityError(CstarError):
    """Functional calculus applied to an element that is not normal."""


class DomainError(CstarError):
    """Spectrum of the argument leaves the declared domain of a function."""


class SortError(CstarError):
    """A variable or value violates its declared sort."""


class ModulusError(CstarError):
    """A Lipschitz bound cannot be produced on the reachable range."""


class ParseError(CstarError):
    """Lexical or syntactic error in the formula DSL."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)


class SpectralGapError(CstarError):
    """Rounding is impossible: the input has no usable spectral gap."""


class EvalError(CstarError):
    """Evaluation failed (bad budget, missing assignment, missing witness)."""
