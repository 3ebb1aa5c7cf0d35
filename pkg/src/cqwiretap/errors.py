"""Exception hierarchy shared by every module.

All failures raised by this package derive from :class:`CqwiretapError`, so
callers (and the CLI exit-code mapping) can distinguish our diagnostics from
genuine bugs.
"""


class CqwiretapError(Exception):
    """Base class for all package errors."""


class InvalidStateError(CqwiretapError):
    """An operator, channel, or code failed a validity check."""


class DimensionMismatchError(InvalidStateError):
    """Operands live on incompatible spaces or alphabets."""


class PsdOrderingError(InvalidStateError):
    """A required positive-semidefinite ordering between operators fails.

    Carries ``min_eigenvalue``, the most negative eigenvalue of the
    difference that was supposed to be PSD.
    """

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = float(min_eigenvalue)


class VerificationError(CqwiretapError):
    """A combinatorial verification (biregularity) failed.

    Carries the failure ``report`` produced by the verifier.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ConstructionUnverifiedError(CqwiretapError):
    """A constructed candidate did not pass its certification gate.

    Carries ``measured_lambda2``, the measured spectral value that broke
    the gate (None when biregularity itself failed).
    """

    def __init__(self, message: str, measured_lambda2=None, report=None):
        super().__init__(message)
        self.measured_lambda2 = measured_lambda2
        self.report = report


class ResourceCapError(CqwiretapError):
    """A configured resource cap (dimension, enumeration, search) was hit.

    Carries ``requested`` and ``cap`` when meaningful, plus optional
    ``progress`` text for long searches.
    """

    def __init__(self, message: str, requested=None, cap=None, progress=None):
        super().__init__(message)
        self.requested = requested
        self.cap = cap
        self.progress = progress


class ConvergenceWarning(UserWarning):
    """An iterative optimizer stopped on its iteration cap, not on gain."""
