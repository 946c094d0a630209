"""Exception hierarchy shared across the toolbox.

Domain errors (things a user can trigger with valid syntax but impossible
physics or data) derive from PhkitError so the CLI can map them to exit
code 1. Programming/internal errors raise the stdlib types directly.
"""


class PhkitError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigurationError(PhkitError):
    """Bad species database entry, calibration file, or scenario config."""


class InternalConsistencyError(PhkitError):
    """A mathematical precondition the code guarantees was violated."""


class InsufficientVolumeError(PhkitError):
    """A mix draw requested more volume than a reservoir holds."""


class UnreachableSetpointError(PhkitError):
    """Target pH outside what the two reservoirs can produce."""

    def __init__(self, target: float, ph_min: float, ph_max: float):
        self.target = target
        self.ph_min = ph_min
        self.ph_max = ph_max
        super().__init__(
            f"target pH {target:.4f} outside achievable range "
            f"[{ph_min:.4f}, {ph_max:.4f}]"
        )


class OutOfCalibrationError(PhkitError):
    """pH outside the range covered by the calibration curves."""


class InvalidCompositeError(PhkitError):
    """Composite construction rejected (too many parts, duplicate kinds)."""


class StabilityError(PhkitError):
    """Explicit diffusion step requested with dt above the stable bound."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(
            f"dt={dt:g} s violates the explicit-scheme stability bound; "
            f"maximum admissible dt is {dt_max:g} s"
        )


class ScenarioError(PhkitError):
    """Scenario document failed validation; message carries the path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class DepositGuardError(PhkitError):
    """Deposit requested from a non-converged controller trace."""


class UnderDeterminedFitError(PhkitError):
    """Fewer measurement rows than free parameters."""


class DataError(PhkitError):
    """Non-finite or malformed measurement data."""

    def __init__(self, row: int, message: str):
        self.row = row
        super().__init__(f"row {row}: {message}")
