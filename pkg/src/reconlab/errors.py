"""Exception hierarchy shared by all modules."""


class ReconError(Exception):
    """Base class for every error raised by reconlab."""


class ScaleTooFineError(ReconError, ValueError):
    """A requested dyadic scale is not resolved by the grid."""


class GridMismatchError(ReconError, ValueError):
    pass


class ResolutionError(ReconError, ValueError):
    """An averaging radius or stencil is below the grid resolution."""


class SingularSystemError(ReconError, ArithmeticError):
    pass


class MomentResidualError(ReconError, ArithmeticError):
    """Moment cancellation left residuals above tolerance."""


class DisagreementError(ReconError, ArithmeticError):
    """Two evaluation routes that must agree did not."""


class ScaleBudgetError(ReconError, ValueError):
    """k_max + L (or k_max + l) exceeds what the grid can resolve."""


class HypothesisViolatedError(ReconError, ValueError):
    pass


class PartitionResidualError(ReconError, ArithmeticError):
    pass


class NonPositiveValueError(ReconError, ValueError):
    pass


class ConfigError(ReconError, ValueError):
    """Invalid experiment configuration; message names the offending field."""
