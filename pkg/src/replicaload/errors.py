"""Exception types raised across the package."""


class ReplicaError(Exception):
    """Base class for every error raised by replicaload."""


class ParameterMismatch(ReplicaError, ValueError):
    pass


class NoBlockDesign(ReplicaError, ValueError):
    pass


class InfeasibleConstraint(ReplicaError, RuntimeError):
    pass


class IndexOutOfRange(ReplicaError, IndexError):
    pass


class BudgetExceeded(ReplicaError, OverflowError):
    """Exact enumeration would visit more subsets than the configured budget."""


class NotStored(ReplicaError, ValueError):
    pass


class AlreadyStored(ReplicaError, ValueError):
    pass


class LengthMismatch(ReplicaError, ValueError):
    pass


class NonpositiveThreshold(ReplicaError, ValueError):
    pass


class TooLarge(ReplicaError, ValueError):
    pass


class Diverges(ReplicaError, ArithmeticError):
    pass


class WindowTooLarge(ReplicaError, ValueError):
    pass


class TooShort(ReplicaError, ValueError):
    pass


class BadMode(ReplicaError, ValueError):
    pass


class NonpositiveDemandModel(ReplicaError, ValueError):
    pass


class BadPartition(ReplicaError, ValueError):
    pass


class BadWindow(ReplicaError, ValueError):
    pass
