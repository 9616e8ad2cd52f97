"""Exception hierarchy for declab."""


class DeclabError(Exception):
    """Base class for all declab errors."""


class InvalidAmplitudes(DeclabError, ValueError):
    pass


class InvalidModel(DeclabError, ValueError):
    pass


class InvalidDecomposition(DeclabError, ValueError):
    pass


class ModelMismatch(DeclabError, ValueError):
    pass


class DuplicateSite(DeclabError, ValueError):
    pass


class UnknownSite(DeclabError, ValueError):
    pass


class NotHermitian(DeclabError, ValueError):
    pass


class InvalidDensityMatrix(DeclabError, ValueError):
    pass


class TooManySites(DeclabError, ValueError):
    pass


class EmptySubsystem(DeclabError, ValueError):
    pass


class NonHermitianResult(DeclabError, ArithmeticError):
    pass


class InvalidBasis(DeclabError, ValueError):
    pass


class NotDiagonal(DeclabError, ValueError):
    pass


class UnsupportedSupport(DeclabError, ValueError):
    pass


class NoCrossing(DeclabError, RuntimeError):
    pass


class InsufficientData(DeclabError, ValueError):
    pass


class OutOfDomain(DeclabError, ValueError):
    pass


class IntegrationFailure(DeclabError, RuntimeError):
    pass


class InvalidSampleCount(DeclabError, ValueError):
    pass


class ConfigError(DeclabError, ValueError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        msg = super().__str__()
        if self.line is not None:
            return f"line {self.line}, column {self.column}: {msg}"
        return msg
