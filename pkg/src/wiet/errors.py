"""Exception types shared across the package."""


class WietError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(WietError):
    """Operands have incompatible shapes."""


class NonHermitianError(WietError):
    """Matrix deviates from Hermitian symmetry beyond tolerance."""


class DegenerateParallel(WietError):
    """Two vectors are (numerically) parallel where independence is required."""


class EmptyInterval(WietError):
    """Requested feasible interval is empty."""


class NonPositiveEnergy(WietError):
    """An energy requirement that must be positive is zero or negative."""


class AssumptionViolated(WietError):
    """A closed-form path's channel assumption failed; caller should fall back."""


class SlotInfeasible(WietError):
    """A single TDMA time slot cannot meet its energy floor."""


class InstanceInfeasible(WietError):
    """The whole problem instance cannot meet its energy requirements."""


class UnsupportedConfiguration(WietError):
    """A scheme was requested for a configuration it does not support."""


class SubsolverFailure(WietError):
    """The embedded convex solver failed on a subproblem."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConfigError(WietError):
    """An experiment or CLI configuration is invalid; names the bad field."""
