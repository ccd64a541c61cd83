"""Exception types raised by the toolkit.

Every failure mode named by an operation maps to one class here so callers
(and the pipeline driver) can gate dependent stages on the exception type.
"""


class KSPulseError(Exception):
    """Base class; ``code`` is the short machine-readable failure tag."""

    code = "error"


class ModelValidationError(KSPulseError):
    code = "model-violation"


class NoPulseRegime(KSPulseError):
    code = "no-pulse-regime"


class BracketFailure(KSPulseError):
    code = "bracket-failure"


class ManifoldSingularity(KSPulseError):
    code = "manifold-singularity"


class DegenerateEquilibrium(KSPulseError):
    code = "degenerate-equilibrium"


class QuadratureError(KSPulseError):
    code = "quadrature-non-convergence"


class EmptyWindow(KSPulseError):
    code = "empty-window"


class ConstantsInfeasible(KSPulseError):
    code = "constants-infeasible"


class GeometryMismatch(KSPulseError):
    code = "geometry-mismatch"


class StepUnderflow(KSPulseError):
    code = "step-underflow"

    def __init__(self, msg: str, xi: float = float("nan")):
        super().__init__(msg)
        self.xi = xi


class Escape(KSPulseError):
    code = "escape"


class NoCapture(KSPulseError):
    code = "no-capture"


class DomainTooShort(KSPulseError):
    code = "domain-too-short"


class PeakLost(KSPulseError):
    code = "peak-lost"


class NoLinearWindow(KSPulseError):
    code = "no-linear-window"


class ConfigError(KSPulseError):
    code = "config-error"
