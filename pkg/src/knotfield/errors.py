"""Exception hierarchy shared across the package."""


class KnotFieldError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(KnotFieldError, ValueError):
    """A construction or configuration parameter is out of range."""


class DegenerateGeometryError(KnotFieldError):
    """Geometry too degenerate to operate on (e.g. collinear loop)."""


class SingularityError(KnotFieldError):
    """Query point too close to the conductor polyline."""


class DegenerateDirectionError(KnotFieldError):
    """Field magnitude too small to define a direction."""


class NoInsertionError(KnotFieldError):
    """Trajectory never crossed the loop plane."""


class IllConditionedError(KnotFieldError):
    """Curves too close together for a reliable linking number."""


class OverstretchError(KnotFieldError):
    """Bound rope points demanded farther apart than the rope allows."""


class NoLoopError(KnotFieldError):
    """Rope contains no projected crossing to extract a loop from."""
