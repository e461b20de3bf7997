"""Exception types shared across the package."""


class FlowregError(Exception):
    """Base class for all flowreg errors."""


class OutOfDomain(FlowregError):
    """Evaluation requested outside the valid (t, x) domain, e.g. at zero noise."""


class NonFinite(FlowregError):
    """A state, derivative, or iterate became NaN/Inf."""


class QuadratureNoConvergence(FlowregError):
    """Adaptive quadrature refinement stalled above the requested tolerance."""


class UnsupportedMethod(FlowregError):
    """The requested evaluation method is not available for this target."""


class SecondDerivativeUnavailable(FlowregError):
    """The schedule does not provide the second derivatives needed here."""


class DegenerateFit(FlowregError):
    """Not enough usable points for a least-squares fit."""


class LengthMismatch(FlowregError):
    """Paired sample inputs have different lengths."""


class TooLarge(FlowregError):
    """Input size exceeds the documented cap for an exact method."""


class InvalidParameters(FlowregError):
    """Structurally invalid numeric parameters (grid, law, ...)."""


class NTooSmall(FlowregError):
    """Step count too small for the requested stopping-time rule."""


class InvalidDimension(FlowregError):
    """Dimension outside the supported range."""


class Overflow(FlowregError):
    """Argument too large for stable evaluation."""


class ConfigInvalid(FlowregError):
    """Experiment configuration failed validation (CLI exit code 2)."""


class NumericalFailure(FlowregError):
    """A numerical criterion failed during an experiment run (CLI exit code 3)."""
