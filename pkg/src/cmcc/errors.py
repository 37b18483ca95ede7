"""Exception hierarchy shared by every module of the package."""


class CMCCError(Exception):
    """Base class for all errors raised by :mod:`cmcc`."""


class DimensionError(CMCCError, ValueError):
    """Array shapes do not agree."""


class ConstraintRankError(CMCCError, ValueError):
    """The constraint matrix (or its weighted Gram matrix) is rank deficient."""


class ConfigurationError(CMCCError, ValueError):
    """Invalid hyper-parameters, noise parameters or scenario configuration."""


class InputError(CMCCError, ValueError):
    """Non-finite input sample fed to a filter step."""


class TheoryInapplicableError(CMCCError):
    """The steady-state analysis does not apply (e.g. infinite noise variance)."""


class InfiniteMomentError(TheoryInapplicableError):
    """A requested noise moment is infinite."""


class InstabilityError(TheoryInapplicableError):
    """Step-size at or beyond the mean-square stability edge."""
