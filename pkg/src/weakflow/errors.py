"""Exception types shared across the simulator."""


class WeakflowError(Exception):
    """Base class for simulator errors."""


class DomainError(WeakflowError):
    """A field evaluation produced a non-finite value (outside the supported range)."""


class NodeError(WeakflowError):
    """An interference null was hit: the weak value diverges there."""

    def __init__(self, message, x=None, z=None):
        super().__init__(message)
        self.x = x
        self.z = z


class StepFailure(WeakflowError):
    """The adaptive integrator could not proceed (step underflow or step budget exhausted)."""


class BranchError(WeakflowError):
    """An inversion formula was driven outside its principal branch."""


class ConfigError(WeakflowError):
    """A scenario configuration failed validation."""
