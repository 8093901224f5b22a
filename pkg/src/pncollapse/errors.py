"""Exception hierarchy shared by all modules."""


class PNCollapseError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"


class InvalidParameterError(PNCollapseError, ValueError):
    code = "invalid-parameter"


class InvalidInputError(PNCollapseError, ValueError):
    code = "invalid-input"


class UnsupportedKernelError(PNCollapseError, ValueError):
    code = "unsupported-kernel"


class RankDeficiencyError(PNCollapseError, ArithmeticError):
    code = "rank-deficiency"


class KernelError(PNCollapseError, ArithmeticError):
    code = "kernel-error"


class StepSizeError(PNCollapseError, ValueError):
    """Raised when an integrator guard is violated.

    ``suggested_dt`` carries the largest step that satisfies the guard.
    """

    code = "step-size"

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class SingularInputError(PNCollapseError, ValueError):
    code = "singular-input"


class ConfigError(PNCollapseError, ValueError):
    code = "config-error"
