"""Target-manifold data: the round sphere and polar-metric targets.

The sphere S^n sits in R^{n+1}; with outward normal u the second
fundamental form of the embedding is S(u)(X, Y) = -<X, Y> u (second
derivative of the great circle through u), and the curvature operator is
R(X, Y)Z = <Y, Z> X - <X, Z> Y (constant curvature +1).

Polar targets carry the metric dpsi^2 + g(psi)^2 dtheta^2 with
g = sin(psi) (sphere) or g = sinh(psi) (hyperbolic plane). The explicit
1-equivariant harmonic map profiles from the hyperbolic plane are

    P_lam(r) = 2 artanh(lam tanh(r/2)),   0 <= lam < 1   (hyperbolic),
    Q_lam(r) = 2 arctan(lam tanh(r/2)),   lam >= 0       (sphere),

with static energies 4 pi lam^2/(1 - lam^2) and 4 pi lam^2/(1 + lam^2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateFieldError, TangencyError
from .geometry import RadialGrid

__all__ = [
    "SphereTarget",
    "PolarTarget",
    "HarmonicProfile",
    "project_to_sphere",
    "second_fundamental_form",
    "riemann_curvature",
    "harmonic_profile",
    "harmonic_profile_derivative",
    "profile_energy",
    "profile_energy_closed_form",
    "TruncationWarning",
]

_TANGENCY_TOL = 1e-8


class TruncationWarning(UserWarning):
    """Grid extent too small for the requested tail accuracy."""


@dataclass(frozen=True)
class SphereTarget:
    """Unit sphere S^n embedded in R^{n+1}."""

    n: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"sphere dimension must be >= 1, got {self.n}")

    @property
    def ambient_dim(self) -> int:
        return self.n + 1


@dataclass(frozen=True)
class PolarTarget:
    """Surface of revolution with metric dpsi^2 + g(psi)^2 dtheta^2."""

    kind: str = "sphere"

    def __post_init__(self):
        if self.kind not in ("sphere", "hyperbolic"):
            raise ConfigurationError(f"unknown polar target kind {self.kind!r}")

    def g(self, psi):
        return np.sin(psi) if self.kind == "sphere" else np.sinh(psi)

    def g_prime(self, psi):
        return np.cos(psi) if self.kind == "sphere" else np.cosh(psi)

    def gg_prime(self, psi):
        """g(psi) g'(psi), the equivariant potential derivative."""
        if self.kind == "sphere":
            return 0.5 * np.sin(2.0 * psi)
        return 0.5 * np.sinh(2.0 * psi)


@dataclass(frozen=True)
class HarmonicProfile:
    """Member of the P (hyperbolic target) or Q (sphere target) soliton family."""

    family: str
    lam: float

    def __post_init__(self):
        if self.family not in ("P", "Q"):
            raise ConfigurationError(f"family must be 'P' or 'Q', got {self.family!r}")
        if self.family == "P" and not 0.0 <= self.lam < 1.0:
            raise ConfigurationError(f"P family needs 0 <= lambda < 1, got {self.lam}")
        if self.family == "Q" and self.lam < 0.0:
            raise ConfigurationError(f"Q family needs lambda >= 0, got {self.lam}")

    @property
    def target(self) -> PolarTarget:
        return PolarTarget("hyperbolic" if self.family == "P" else "sphere")

    @property
    def boundary_value(self) -> float:
        """Limit of the profile as r -> infinity."""
        if self.family == "P":
            return 2.0 * math.atanh(self.lam)
        return 2.0 * math.atan(self.lam)


def project_to_sphere(v: np.ndarray) -> np.ndarray:
    """Closest-point projection v / |v|; idempotent on unit vectors."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm < 1e-14):
        raise DegenerateFieldError("cannot project a (near-)zero vector to the sphere")
    return v / norm


def _check_tangent(u, X, label):
    if abs(float(np.dot(X, u))) > _TANGENCY_TOL * max(1.0, float(np.linalg.norm(X))):
        raise TangencyError(f"{label} is not tangent at u")


def second_fundamental_form(target: SphereTarget, u, X, Y) -> np.ndarray:
    """S(u)(X, Y) = -<X, Y> u for tangent X, Y (great-circle curvature convention)."""
    u, X, Y = (np.asarray(a, dtype=float) for a in (u, X, Y))
    _check_tangent(u, X, "X")
    _check_tangent(u, Y, "Y")
    return -float(np.dot(X, Y)) * u


def riemann_curvature(target: SphereTarget, u, X, Y, Z) -> np.ndarray:
    """R(X, Y)Z = <Y, Z> X - <X, Z> Y on the unit sphere."""
    u, X, Y, Z = (np.asarray(a, dtype=float) for a in (u, X, Y, Z))
    for vec, label in ((X, "X"), (Y, "Y"), (Z, "Z")):
        _check_tangent(u, vec, label)
    return float(np.dot(Y, Z)) * X - float(np.dot(X, Z)) * Y


def harmonic_profile(p: HarmonicProfile, r) -> np.ndarray:
    """Evaluate the profile angle psi(r) (array-friendly)."""
    r = np.asarray(r, dtype=float)
    inner = p.lam * np.tanh(r / 2.0)
    if p.family == "P":
        return 2.0 * np.arctanh(inner)
    return 2.0 * np.arctan(inner)


def harmonic_profile_derivative(p: HarmonicProfile, r) -> np.ndarray:
    """Closed-form d psi / dr.

    With tau = tanh(r/2): psi' = lam (1 - tau^2) / (1 -+ lam^2 tau^2)
    (minus for P, plus for Q).
    """
    r = np.asarray(r, dtype=float)
    tau = np.tanh(r / 2.0)
    if p.family == "P":
        return p.lam * (1.0 - tau**2) / (1.0 - (p.lam * tau) ** 2)
    return p.lam * (1.0 - tau**2) / (1.0 + (p.lam * tau) ** 2)


def profile_energy_closed_form(p: HarmonicProfile) -> float:
    if p.family == "P":
        return 4.0 * math.pi * p.lam**2 / (1.0 - p.lam**2)
    return 4.0 * math.pi * p.lam**2 / (1.0 + p.lam**2)


def static_energy_density(target: PolarTarget, r, psi, psi_r) -> np.ndarray:
    """pi (psi_r^2 + g(psi)^2 / sinh^2 r) sinh r, the equivariant Dirichlet density."""
    sinh = np.sinh(r)
    return math.pi * (psi_r**2 + target.g(psi) ** 2 / sinh**2) * sinh


def profile_energy(grid: RadialGrid, p: HarmonicProfile) -> float:
    """Static equivariant energy of the profile on a d=2 grid.

    Uses the closed-form derivative and trapezoidal quadrature on the grid;
    the prefactor pi matches the 4 pi normalized closed forms. Flags (via
    TruncationWarning) when the estimated tail beyond r_max is significant.
    """
    if grid.d != 2:
        raise ConfigurationError(f"profile energy is defined on a d=2 grid, got d={grid.d}")
    r = grid.nodes
    density = static_energy_density(p.target, r, harmonic_profile(p, r),
                                    harmonic_profile_derivative(p, r))
    energy = float(np.trapezoid(np.concatenate([[0.0], density]),
                                np.concatenate([[0.0], r])))
    # exterior density decays like e^{-r}: tail ~ density(r_max)
    tail = float(density[-1])
    if energy > 0 and tail > 1e-6 * energy:
        warnings.warn(
            f"r_max={grid.r_max} truncates an estimated energy tail of {tail:.3e}",
            TruncationWarning,
        )
    return energy
