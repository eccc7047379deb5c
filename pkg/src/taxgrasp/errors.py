"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Input dimensions disagree with the hand description or layout."""


class FrameError(ValueError):
    """A point cloud arrived in the wrong reference frame."""


class TemplateError(ValueError):
    """A grasp template or template file violates its invariants."""


class ConfigError(ValueError):
    """A run configuration failed validation."""


class SimulationError(RuntimeError):
    """The simulator produced a non-finite or otherwise invalid state."""


class PlannerProtocolError(RuntimeError):
    """The external selector returned something unusable."""


class SelectorTimeout(PlannerProtocolError):
    """The external selector did not answer within its deadline."""
