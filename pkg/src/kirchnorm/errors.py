"""Exception hierarchy shared by every module of the package."""


class KirchnormError(Exception):
    """Base class for all package errors."""


class InvalidParams(KirchnormError, ValueError):
    """A parameter tuple violates a hard validity bound."""


class RegimeError(KirchnormError):
    """The requested quantity is undefined for the given parameter regime."""


class NoRootFound(KirchnormError):
    """No sign change was detected on the bracket.

    This is a legitimate outcome for several landscapes (for example the
    pure-critical Pohozaev function above the upper Kirchhoff threshold).
    """

    def __init__(self, message, min_value=None):
        super().__init__(message)
        self.min_value = min_value


class TooManyRoots(KirchnormError):
    """More sign changes than the landscape can have."""


class SupportOverflow(KirchnormError):
    """A dilation pushed the support of a field past the end of the grid."""


class ZeroField(KirchnormError):
    """Mass projection of an identically zero field."""


class ConvergenceError(KirchnormError):
    """An iterative procedure stalled before meeting its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class Stalled(ConvergenceError):
    """Line search hit its step floor."""


class RegionExit(ConvergenceError):
    """A constrained flow left its gradient-norm region."""


class MassMismatch(KirchnormError):
    """A path point failed to keep the prescribed mass."""


class SaturationError(KirchnormError, OverflowError):
    """Fiber evaluation requested at a dilation that overflows doubles."""


class DomainError(KirchnormError, ValueError):
    """A landscape function was evaluated outside its domain t > 0."""


class MissingConstant(KirchnormError):
    """A quantity needs the Gagliardo-Nirenberg constant, which is not cached."""


class ConditioningWarning(UserWarning):
    """Two reported roots are nearly merged and individually ill-conditioned."""
