"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameter, grid, or experiment configuration."""


class UnsupportedOrderError(ConfigurationError):
    """Requested derivative/norm order exceeds the stencil depth."""


class UnsupportedDimensionError(ConfigurationError):
    """Operation is only defined for a specific spatial dimension."""


class DegenerateFieldError(ValueError):
    """Operation undefined on a (near-)zero field or vector."""


class TangencyError(ValueError):
    """Input vector violates a tangency constraint beyond tolerance."""


class OrientationError(ValueError):
    """Frames to be aligned do not share an orientation."""


class StabilityError(RuntimeError):
    """Requested time step violates the scheme's stability bound."""


class DivergenceError(RuntimeError):
    """Evolution produced NaN or blew up.

    ``last_good`` carries the index of the last valid level/sample,
    ``partial`` the data accumulated up to that point (may be None).
    """

    def __init__(self, message, last_good=None, partial=None):
        super().__init__(message)
        self.last_good = last_good
        self.partial = partial


class TransportError(RuntimeError):
    """Frame transport drifted beyond the hard tolerance."""


class AdmissibilityError(ConfigurationError):
    """Strichartz exponent triple violates an admissibility relation."""
