"""
Exception hierarchy for the atom-light simulator.
"""


class SimulatorError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidInputError(SimulatorError, ValueError):
    """Numeric input outside the domain of an operation."""


class ResonancePoleError(InvalidInputError):
    """Detuning sits on a pole of the excited-state detuning factors."""


class InvalidOperationError(SimulatorError):
    """Operation is structurally invalid for the given state."""


class DoubleDetectionError(InvalidOperationError):
    """A light segment was handed to the detector twice."""


class TimeStepTooLargeError(SimulatorError):
    """A per-step probability left its valid range; shrink tau."""


class DegenerateMeasurementError(SimulatorError):
    """The measured observable has (numerically) zero variance."""


class UndefinedObservableError(SimulatorError):
    """Observable is undefined for the current state (e.g. Jx = 0)."""


class PhysicalityError(SimulatorError):
    """Covariance matrix is no longer positive semidefinite."""


class GCPViolationError(SimulatorError):
    """A Gaussian map adds less noise than its commutators require."""


class NoConvergenceError(SimulatorError):
    """Time-step search did not converge."""


class ConfigError(SimulatorError):
    """Configuration file could not be parsed or validated."""


class OutputError(SimulatorError):
    """Result file could not be written."""


class ConsistencyError(SimulatorError):
    """A scenario self-check failed."""
