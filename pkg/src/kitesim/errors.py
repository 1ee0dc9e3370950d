"""Domain errors raised by the simulator.

Every error carries a message and an optional machine-readable code so that
callers (CLI, telemetry server, tests) can react without parsing text.
"""


class KiteSimError(Exception):
    """Base class for all simulator errors."""

    code = "kitesim_error"

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self):
        if self.context:
            detail = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
            return f"{self.message} ({detail})"
        return self.message


class ConfigError(KiteSimError):
    """Invalid, unknown or out-of-range configuration input."""

    code = "config_error"


class SingularGeometryError(KiteSimError):
    """Two particles coincide or a direction vector degenerates to zero."""

    code = "singular_geometry"


class DegenerateFlowError(KiteSimError):
    """Apparent wind too small or aligned so that no aero frame exists."""

    code = "degenerate_flow"


class InstabilityError(KiteSimError):
    """Model left the physically meaningful region (held frame expired, NaN)."""

    code = "instability"


class SolverFailure(KiteSimError):
    """Implicit stepper could not complete a control interval."""

    code = "solver_failure"


class UnidentifiableError(KiteSimError):
    """Regression input does not excite one of the fitted parameters."""

    code = "unidentifiable"


class InsufficientDataError(KiteSimError):
    """Not enough samples or cycles for the requested analysis."""

    code = "insufficient_data"


class FitFailureError(KiteSimError):
    """Parameter fit did not converge to the requested quality."""

    code = "fit_failure"
