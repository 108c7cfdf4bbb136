"""Exception types shared across the solver."""


class PElasticaError(Exception):
    """Base class for all solver errors."""


class GridMismatch(PElasticaError):
    """Two fields that must share a grid do not."""


class NonDescent(PElasticaError):
    """The inner minimizer could not certify descent on the step functional."""


class DeterminantCollapse(PElasticaError):
    """det A_T fell below its proven floor; the integration is corrupted."""


class ClosureViolatedAtStart(PElasticaError):
    """Initial data does not satisfy the closure constraint to tolerance."""


class HorizonExceeded(PElasticaError):
    """Requested time span exceeds the certified horizon and no override was set."""


class StepFailed(PElasticaError):
    """A time step failed; wraps the inner-solver failure."""


class MonitorViolation(PElasticaError):
    """A proven a-priori bound was violated during a run."""

    def __init__(self, name: str, step: int, detail: str = ""):
        self.name = name
        self.step = step
        super().__init__(f"monitor '{name}' violated at step {step}" + (f": {detail}" if detail else ""))


class NotP2(PElasticaError):
    """Horizon-restart continuation is only available for p = 2."""


class OutOfRange(PElasticaError):
    """Sample time outside the trajectory's span."""


class StrideTooCoarse(PElasticaError):
    """Interpolant sampling needs every step stored (stride 1)."""


class NewtonDiverged(PElasticaError):
    """Closure projection did not converge."""


class SingularJacobian(PElasticaError):
    """Closure projection hit a (near-)singular moment Jacobian."""


class NotClosed(PElasticaError):
    """Operation requires a closed curve."""


class ParseError(PElasticaError):
    """Config file or flag could not be parsed."""


class ValidationError(PElasticaError):
    """Config parsed but a field value is invalid."""


class FileError(PElasticaError):
    """A samples file is missing or malformed."""
