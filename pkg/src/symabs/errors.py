"""Exception types shared across the toolkit.

Three broad families matter for the CLI exit-code contract: configuration
problems, verification failures (a check ran and the answer was "no"), and
runtime violations (a monitor tripped during simulation).
"""


class SymabsError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SymabsError):
    """Malformed or inconsistent configuration input."""


class VerificationFailure(SymabsError):
    """A certificate, bound, or plan check ran and did not hold."""


class RuntimeViolation(SymabsError):
    """A runtime monitor tripped during a simulation."""


# numerics

class NonFiniteError(RuntimeViolation):
    """NaN/Inf encountered, or a trajectory left the finite range."""


class NonSymmetricError(SymabsError):
    """Matrix asymmetry exceeds the symmetric-eigensolve tolerance."""


class NoConvergenceError(SymabsError):
    """An iterative solve stalled before reaching its residual target."""


class NotStabilizableError(SymabsError):
    """No stabilizing initial gain was found for the Riccati iteration."""


class DimensionMismatchError(SymabsError):
    """Matrix or vector dimensions are inconsistent."""


# signals and simulation monitors

class InputViolationError(RuntimeViolation):
    """A sampled control input left the declared input set."""

    def __init__(self, t: float, value):
        self.t = t
        self.value = value
        super().__init__(f"input left its constraint set at t={t}: {value}")


class InputMapViolationError(RuntimeViolation):
    """A sampled abstract input left the admissible input map."""

    def __init__(self, t: float, value, detail: str = ""):
        self.t = t
        self.value = value
        super().__init__(
            f"abstract input outside the input map at t={t}: {value}"
            + (f" ({detail})" if detail else "")
        )


class AdmissibilityViolationError(RuntimeViolation):
    """The interfaced concrete input left the input set U.

    Signals that the interface/input-map pairing is wrong; the run is
    aborted rather than clipped, because clipping would silently void the
    closeness guarantee.
    """

    def __init__(self, t: float, u):
        self.t = t
        self.u = u
        super().__init__(f"interfaced input left U at t={t}: u={u}")


# certificate bounds

class DisturbanceTooLargeError(VerificationFailure):
    """The disturbance level leaves no feasible discretization parameter."""


class EmptyInputMapError(VerificationFailure):
    """Shrinking the input set by the interface-error margin left nothing."""


# planning

class EmptyTargetError(VerificationFailure):
    """A shrunk target region contains no grid vertex."""


class DisconnectedError(VerificationFailure):
    """The grid graph does not connect the start and every target."""


class TrackingFailureError(RuntimeViolation):
    """The refined abstract trajectory missed a waypoint tolerance."""

    def __init__(self, waypoint, error: float, tol: float):
        self.waypoint = waypoint
        self.error = error
        self.tol = tol
        super().__init__(
            f"waypoint {waypoint} missed: segment-end error {error:.6g} > {tol:.6g}"
        )
