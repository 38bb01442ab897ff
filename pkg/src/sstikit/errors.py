"""Exception hierarchy shared by all modules."""


class SSTIError(Exception):
    """Base class for every error raised by sstikit."""


class InvalidModelError(SSTIError, ValueError):
    """A physical model violates one of its invariants."""


class NumericError(SSTIError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class NormalizationError(NumericError):
    """A mode shape cannot be normalized at the generator mass."""


class PairingError(NumericError):
    """Mode shapes could not be matched unambiguously to eigenvalues."""


class InitializationError(SSTIError):
    """Steady-state initialization (power flow) failed."""


class TopologyError(SSTIError):
    """A bus is isolated from every source after exclusions."""


class InvalidWindowError(SSTIError, ValueError):
    """A measurement window is too short for the requested frequency."""


class NoComponentError(SSTIError):
    """A signal has no detectable component at the requested frequency."""


class SettleError(SSTIError):
    """The simulated plant was not at equilibrium before injection."""


class CoverageError(SSTIError):
    """A damping curve does not cover the required frequencies."""


class UnrealizablePhaseError(SSTIError, ValueError):
    """A lead-lag phase shift cannot be realized (|phase| >= 90 degrees)."""


class TuningError(SSTIError):
    """SSDC tuning found no acceptable candidate."""


class ScenarioError(SSTIError, ValueError):
    """A scenario file could not be parsed or failed validation."""
