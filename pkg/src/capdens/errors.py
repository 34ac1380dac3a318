"""Exception types. Every error carries a short machine-readable ``code``."""


class CapacityLabError(Exception):
    code = "error"

    def __init__(self, message=None):
        super().__init__(message or self.code)


class InputError(CapacityLabError, ValueError):
    code = "invalid-input"


class NumericalError(CapacityLabError, ArithmeticError):
    code = "numerical-failure"


class EmptyDomainError(InputError):
    code = "empty-domain"


class ResolutionTooCoarseError(InputError):
    code = "resolution-too-coarse"


class EmptySourceError(InputError):
    code = "empty-source"


class MismatchedGraphError(InputError):
    code = "mismatched-graph"


class InvalidFieldError(InputError):
    code = "invalid-field"


class InadmissibleCondenserError(InputError):
    code = "inadmissible-condenser"


class EmptyInnerPlateError(InputError):
    code = "empty-inner-plate"


class NoBoundaryError(InputError):
    code = "no-boundary"


class InvalidLevelError(InputError):
    code = "invalid-level"


class BallOutOfBoxError(InputError):
    code = "ball-out-of-box"


class InvalidCollectionMemberError(InputError):
    code = "invalid-collection-member"


class ConfigError(InputError):
    code = "config-error"


class ConvergenceError(NumericalError):
    code = "no-convergence"
