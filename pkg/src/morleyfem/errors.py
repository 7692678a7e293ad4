"""Exception types raised across the package."""


class MorleyError(Exception):
    """Base class for all package errors."""


class DegenerateSimplex(MorleyError):
    pass


class NonConformalMesh(MorleyError):
    pass


class InvalidSpec(MorleyError):
    """Bad mesh-generator or run parameters."""


class QuadratureInsufficient(MorleyError):
    """Requested polynomial exactness exceeds the available rules."""


class NotPositiveDefinite(MorleyError):
    pass


class NoConvergence(MorleyError):
    pass


class InsufficientLevels(MorleyError):
    pass
