"""Exception types shared across the package."""


class MagloopError(Exception):
    """Base class for all package-specific errors."""


class BasePointMismatchError(MagloopError):
    """Two tangent vectors were combined at different base points."""


class DegenerateCurveError(MagloopError):
    """A curve operation hit a (near-)vanishing velocity."""


class ChartSingularityError(MagloopError):
    """A stereographic chart was evaluated too close to its pole."""


class NonconvergenceError(MagloopError):
    """Newton iteration did not reach the residual target."""

    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class CollapseError(MagloopError):
    """A loop degenerated (collapsing speed) during a solve."""


class LinearSolveError(MagloopError):
    """The frame-coordinate linear system was too ill-conditioned."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SectionError(MagloopError):
    """The flow became tangent to the shooting section."""


class SearchFailureError(MagloopError):
    """Fewer distinct certified orbits were found than required."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class UnsupportedLoopError(MagloopError):
    """An operation requiring a simple loop received a non-simple one."""


class ConfigError(MagloopError):
    """Invalid run configuration."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
