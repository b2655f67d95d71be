"""hypwave: a numerical laboratory for wave maps on hyperbolic space.

Radial discretization of H^d, harmonic map heat flow into the sphere, the
heat-time parallel frame gauge with its structural identities, wave map
evolution with explicit soliton families, and the linear dispersive and
heat-semigroup machinery tying them together.
"""

from . import (  # noqa: F401
    caloric_gauge,
    errors,
    experiments,
    geometry,
    heat_flow,
    linear_dispersion,
    targets,
    wave_dynamics,
)
from .geometry import RadialGrid, ScalarField, build_radial_grid  # noqa: F401
from .targets import HarmonicProfile, PolarTarget, SphereTarget  # noqa: F401

__version__ = "0.1.0"
