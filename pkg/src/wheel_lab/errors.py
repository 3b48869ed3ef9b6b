"""Exception hierarchy shared by every wheel_lab module."""


class WheelLabError(Exception):
    """Base class; ``module`` names the pipeline stage that raised."""

    module = "wheel_lab"


class InvalidSizeError(WheelLabError, ValueError):
    module = "field"


class ConfigurationError(WheelLabError, ValueError):
    pass


class ParameterError(WheelLabError, ValueError):
    pass


class OracleInfeasibleError(WheelLabError, ValueError):
    module = "field"


class AmbiguityError(WheelLabError, RuntimeError):
    """Two or more shortest paths tie exactly; rebuild with tie_eps > 0."""

    module = "metric"


class DegeneratePathError(WheelLabError, ValueError):
    module = "metric"


class EmptyAnnulusError(WheelLabError, ValueError):
    module = "tree"


class InputError(WheelLabError, ValueError):
    pass


class EmbeddingError(WheelLabError, ValueError):
    module = "wheel"


class StructuralError(WheelLabError, ValueError):
    module = "wheel"


class DecodeError(WheelLabError, ValueError):
    module = "wheel"


class DegenerateMergeError(WheelLabError, ValueError):
    module = "wheel"


class DependencyError(WheelLabError, RuntimeError):
    module = "cli_report"


class VertexIndexError(WheelLabError, IndexError):
    module = "metric"
