"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation problems exit with 2,
numeric and regime problems with 3, and budget overruns with 4.
"""


class GFQError(Exception):
    """Base class for all package errors."""

    code = "error"


class DomainError(GFQError, ValueError):
    """An argument lies outside the domain of the operation."""

    code = "domain"


class ParameterError(GFQError, ValueError):
    """A model, family or configuration parameter is invalid."""

    code = "parameter"


class NumericError(GFQError, ArithmeticError):
    """A numerical procedure failed (bracket lost, overflow, ...)."""

    code = "numeric"


class EmbeddingError(NumericError):
    """Circulant embedding produced a negative eigenvalue."""

    code = "embedding"


class RegimeBoundaryError(GFQError):
    """The horizon family sits on a boundary no regime covers."""

    code = "boundary-regime"


class T3ViolationError(GFQError):
    """The horizon grows too fast for the supremum probability to vanish."""

    code = "T3-violation"


class UnsupportedBranchError(GFQError):
    """The requested formula or simulation branch is not available."""

    code = "unsupported-branch"


class ConstantRequiredError(GFQError):
    """A Pickands or Piterbarg constant is needed but has no closed form
    and is missing from the cache.  ``query`` describes what to estimate."""

    code = "constant-required"

    def __init__(self, message, query=None):
        super().__init__(message)
        self.query = query


class ResourceBudgetError(GFQError):
    """The requested Monte Carlo work exceeds the configured cap."""

    code = "resource-budget"
