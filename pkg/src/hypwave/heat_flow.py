"""Harmonic map heat flow on radial hyperbolic space.

Two formulations:

* extrinsic, for sphere targets S^m in R^{m+1}:

      du/ds = Lap u + |grad u|^2 u,

  where the quadratic term is the trace of the second fundamental form
  and keeps |u| = 1. Radial maps have even components; 1-equivariant
  maps into S^2 are carried in corotational components (v(r), 0, w(r))
  whose first pair is odd and picks up a -1/sinh^2(r) angular penalty.

* equivariant, for polar targets:

      dpsi/ds = psi'' + (d-1) coth(r) psi' - g(psi) g'(psi) / sinh^2 r.

The heat-time ladder is geometric, s_k = s_min rho^k, matching the ds/s
measure of the smoothing estimates; each main level can carry a pair of
bracket levels s_k / mu, s_k mu used for centered s-derivatives later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError, DivergenceError, StabilityError
from .geometry import (
    NormReport,
    RadialGrid,
    derivative_values,
    interface_dirichlet_form,
    laplacian_banded,
    laplacian_dynamics,
    laplacian_pointwise,
    weighted_l2,
)
from .targets import PolarTarget

__all__ = [
    "ExtrinsicMapState",
    "EquivariantProfile",
    "HeatResolution",
    "heat_rhs_extrinsic",
    "heat_rhs_equivariant",
    "step_heat",
    "run_heat_resolution",
    "smoothing_report",
    "constraint_violation",
    "rk4_stability_limit",
]


@dataclass
class ExtrinsicMapState:
    """Map into the unit sphere, one ambient vector per radial node.

    ``equivariance`` = 0 for plain radial maps (all components even) or 1
    for corotational 1-equivariant maps whose components 0, 1 rotate with
    the domain angle (odd parity, angular Laplacian penalty).
    """

    grid: RadialGrid
    values: np.ndarray
    u_infty: np.ndarray
    equivariance: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.u_infty = np.asarray(self.u_infty, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.n:
            raise ConfigurationError(
                f"values must be (n, ambient), got {self.values.shape} for n={self.grid.n}"
            )
        if self.u_infty.shape != (self.values.shape[1],):
            raise ConfigurationError("u_infty must match the ambient dimension")
        if self.equivariance not in (0, 1):
            raise ConfigurationError("equivariance must be 0 or 1")

    @property
    def ambient_dim(self) -> int:
        return self.values.shape[1]

    @property
    def target_dim(self) -> int:
        return self.values.shape[1] - 1

    def copy(self) -> "ExtrinsicMapState":
        return ExtrinsicMapState(self.grid, self.values.copy(), self.u_infty.copy(),
                                 self.equivariance)

    def component_parities(self) -> list[str]:
        if self.equivariance == 0:
            return ["even"] * self.ambient_dim
        return ["odd", "odd"] + ["even"] * (self.ambient_dim - 2)

    def validate(self, buffer: float = 0.0, tol: float = 1e-8) -> None:
        """Check the unit constraint and, optionally, the outer buffer."""
        drift = constraint_violation(self)
        if drift > tol:
            raise ConfigurationError(f"unit constraint violated by {drift:.2e}")
        if buffer > 0.0:
            outer = self.grid.nodes >= self.grid.r_max - buffer
            gap = np.max(np.abs(self.values[outer] - self.u_infty[None, :]))
            if gap > tol:
                raise ConfigurationError(f"map differs from u_infty by {gap:.2e} in the buffer")


@dataclass
class EquivariantProfile:
    """Polar-angle profile psi(r) of a 1-equivariant map (odd at r = 0)."""

    grid: RadialGrid
    psi: np.ndarray
    psi_infty: float = 0.0
    target: PolarTarget = field(default_factory=PolarTarget)

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        if self.psi.shape != (self.grid.n,):
            raise ConfigurationError("psi must have one value per grid node")

    def copy(self) -> "EquivariantProfile":
        return EquivariantProfile(self.grid, self.psi.copy(), self.psi_infty, self.target)


def map_derivative(state: ExtrinsicMapState) -> np.ndarray:
    """Componentwise radial derivative of the map."""
    out = np.empty_like(state.values)
    for k, parity in enumerate(state.component_parities()):
        out[:, k] = derivative_values(state.grid, state.values[:, k], parity,
                                      state.u_infty[k])
    return out


def map_laplacian(state: ExtrinsicMapState, values: np.ndarray | None = None) -> np.ndarray:
    """Componentwise force Laplacian, with the corotational penalty."""
    vals = state.values if values is None else values
    out = np.empty_like(vals)
    for k, parity in enumerate(state.component_parities()):
        angular = 1.0 if (state.equivariance and k < 2) else 0.0
        out[:, k] = laplacian_dynamics(state.grid, vals[:, k], parity,
                                       state.u_infty[k], angular=angular)
    return out


def gradient_energy_density(state: ExtrinsicMapState) -> np.ndarray:
    """|grad u|^2 per node, including the angular part of equivariant maps."""
    du = map_derivative(state)
    dens = np.sum(du**2, axis=1)
    if state.equivariance:
        dens = dens + state.grid.csch2 * np.sum(state.values[:, :2] ** 2, axis=1)
    return dens


def heat_rhs_extrinsic(state: ExtrinsicMapState) -> np.ndarray:
    """Tension field Lap u + |grad u|^2 u (tangent to the sphere up to O(h^2))."""
    return map_laplacian(state) + gradient_energy_density(state)[:, None] * state.values


def heat_rhs_equivariant(p: EquivariantProfile, d: int, target: PolarTarget) -> np.ndarray:
    """psi'' + (d-1) coth(r) psi' - g(psi) g'(psi)/sinh^2 r on the profile grid."""
    if d != p.grid.d:
        raise ConfigurationError(f"profile grid has d={p.grid.d}, operator asked for d={d}")
    lap = laplacian_dynamics(p.grid, p.psi, "odd", p.psi_infty)
    return lap - target.gg_prime(p.psi) * p.grid.csch2


def constraint_violation(state: ExtrinsicMapState) -> float:
    """max_i | |u_i| - 1 |."""
    return float(np.max(np.abs(np.linalg.norm(state.values, axis=1) - 1.0)))


def rk4_stability_limit(grid: RadialGrid) -> float:
    """Conservative explicit step bound for the radial heat operator."""
    return 2.5 * grid.h**2 / (4.0 + 2.0 * (grid.d - 1))


def _project(values: np.ndarray) -> np.ndarray:
    return values / np.linalg.norm(values, axis=1, keepdims=True)


def _check_finite(values: np.ndarray, context: str):
    if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > 1e6:
        raise DivergenceError(f"{context}: field diverged")


def step_heat(state, ds: float, scheme: str = "explicit-rk4"):
    """Advance one heat step; extrinsic states are re-projected to the sphere.

    Explicit RK4 requires ds <= rk4_stability_limit(grid); the IMEX path
    (backward Euler on the Laplacian, explicit nonlinearity) has no step
    restriction and is first order in ds.
    """
    if ds <= 0:
        raise ConfigurationError("ds must be positive")
    if scheme == "explicit-rk4":
        return _step_rk4(state, ds)
    if scheme == "imex":
        return _step_imex(state, ds)
    raise ConfigurationError(f"unknown scheme {scheme!r}")


def _rhs_of(state):
    if isinstance(state, ExtrinsicMapState):
        return heat_rhs_extrinsic(state)
    return heat_rhs_equivariant(state, state.grid.d, state.target)


def _with_values(state, values):
    new = state.copy()
    if isinstance(state, ExtrinsicMapState):
        new.values = values
    else:
        new.psi = values
    return new


def _values_of(state):
    return state.values if isinstance(state, ExtrinsicMapState) else state.psi


def _step_rk4(state, ds: float):
    limit = rk4_stability_limit(state.grid)
    if ds > limit * (1.0 + 1e-12):
        raise StabilityError(f"ds={ds:.3e} exceeds the explicit limit {limit:.3e}")
    y0 = _values_of(state)
    k1 = _rhs_of(state)
    k2 = _rhs_of(_with_values(state, y0 + 0.5 * ds * k1))
    k3 = _rhs_of(_with_values(state, y0 + 0.5 * ds * k2))
    k4 = _rhs_of(_with_values(state, y0 + ds * k3))
    y1 = y0 + (ds / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(y1, "step_heat")
    if isinstance(state, ExtrinsicMapState):
        y1 = _project(y1)
    return _with_values(state, y1)


def _step_imex(state, ds: float):
    grid = state.grid
    if isinstance(state, ExtrinsicMapState):
        nonlinear = gradient_energy_density(state)[:, None] * state.values
        new_vals = np.empty_like(state.values)
        for k, parity in enumerate(state.component_parities()):
            ab = laplacian_banded(grid, parity).copy()
            if state.equivariance and k < 2:
                ab[1] -= grid.csch2
                source = -grid.csch2 * state.u_infty[k]
            else:
                source = 0.0
            w = state.values[:, k] - state.u_infty[k]
            rhs = w + ds * (nonlinear[:, k] + source)
            system = -ds * ab
            system[1] += 1.0
            new_vals[:, k] = solve_banded((1, 1), system, rhs) + state.u_infty[k]
        _check_finite(new_vals, "step_heat")
        return _with_values(state, _project(new_vals))
    # equivariant profile: implicit SBP Laplacian, explicit potential
    target = getattr(state, "target", PolarTarget("sphere"))
    ab = laplacian_banded(grid, "odd")
    w = state.psi - state.psi_infty
    rhs = w + ds * (-target.gg_prime(state.psi) * grid.csch2)
    system = -ds * ab
    system[1] += 1.0
    new_psi = solve_banded((1, 1), system, rhs) + state.psi_infty
    _check_finite(new_psi, "step_heat")
    return _with_values(state, new_psi)


@dataclass
class HeatResolution:
    """Heat flow sampled on a geometric ladder, with the tension per level.

    ``s_levels[0] = 0`` holds the initial map itself. ``main`` flags the
    levels s_k = s_min rho^k of the geometric ladder proper; when a
    bracket factor mu > 1 is used, each main level is accompanied by
    levels s_k/mu and s_k mu for centered s-derivatives.
    """

    grid: RadialGrid
    s_levels: np.ndarray
    states: list
    tensions: list
    main: np.ndarray
    scheme: str = "explicit-rk4"
    meta: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.s_levels)

    def main_indices(self) -> np.ndarray:
        return np.nonzero(self.main)[0]

    def level_state(self, k: int):
        return self.states[k]


def _ladder(s_min: float, s_max: float, rho: float, bracket: float) -> tuple[np.ndarray, np.ndarray]:
    ks = int(math.floor(math.log(s_max / s_min) / math.log(rho) + 1e-12)) + 1
    mains = s_min * rho ** np.arange(ks)
    levels = [0.0]
    flags = [True]
    for s in mains:
        if bracket > 1.0:
            levels.extend([s / bracket, s, s * bracket])
            flags.extend([False, True, False])
        else:
            levels.append(s)
            flags.append(True)
    arr = np.array(levels)
    if np.any(np.diff(arr) <= 0):
        raise ConfigurationError("ladder levels not increasing; bracket^2 must be < rho")
    return arr, np.array(flags, dtype=bool)


def run_heat_resolution(initial, s_min: float, s_max: float, rho: float,
                        scheme: str = "explicit-rk4", bracket: float = 1.0,
                        substep_safety: float = 1.0) -> HeatResolution:
    """Integrate the heat flow and snapshot it on the geometric ladder.

    Requires s_min <= h^2 (resolve the parabolic scale) and rho in (1, 2].
    Substeps between levels respect the explicit stability bound; on
    divergence the error carries the index of the last completed level.
    """
    grid = initial.grid
    if s_min > grid.h**2 * (1.0 + 1e-12):
        raise ConfigurationError(f"s_min={s_min:.3e} must resolve the parabolic scale h^2")
    if not 1.0 < rho <= 2.0:
        raise ConfigurationError(f"rho must be in (1, 2], got {rho}")
    s_levels, main = _ladder(s_min, s_max, rho, bracket)

    limit = rk4_stability_limit(grid) * substep_safety
    states = [initial.copy()]
    tensions = [_rhs_of(initial)]
    state = initial.copy()
    for k in range(1, len(s_levels)):
        gap = s_levels[k] - s_levels[k - 1]
        if scheme == "explicit-rk4":
            nsub = max(1, int(math.ceil(gap / limit)))
        else:
            # backward Euler: step limited for accuracy, growing with s
            nsub = max(1, int(math.ceil(gap / max(limit, 0.05 * s_levels[k]))))
        ds = gap / nsub
        try:
            for _ in range(nsub):
                state = step_heat(state, ds, scheme)
        except DivergenceError as err:
            raise DivergenceError(f"heat flow diverged before s={s_levels[k]:.3e}",
                                  last_good=k - 1,
                                  partial=HeatResolution(grid, s_levels[:k], states,
                                                         tensions, main[:k], scheme)) from err
        states.append(state.copy())
        tensions.append(_rhs_of(state))
    return HeatResolution(grid, s_levels, states, tensions, main, scheme,
                          meta={"s_min": s_min, "s_max": s_max, "rho": rho,
                                "bracket": bracket})


def smoothing_report(res: HeatResolution) -> NormReport:
    """Weighted parabolic-smoothing norms over the ladder.

    Sup and L^2(ds/s) of s^{1/2} ||grad du/ds||_L2 and s ||Lap du/ds||_L2,
    plus sup_s ||Lap u||_L2. The contract is finiteness, not constants.
    """
    if res.n_levels < 3:
        raise ConfigurationError("resolution needs at least 3 levels")
    grid = res.grid
    idx = [k for k in res.main_indices() if res.s_levels[k] > 0]
    log_w = math.log(res.meta.get("rho", 2 ** 0.25))
    sup_grad = sup_lap_t = sup_lap_u = 0.0
    sum_grad = sum_lap_t = 0.0
    for k in idx:
        s = res.s_levels[k]
        state = res.states[k]
        tension = res.tensions[k]
        parities = (state.component_parities()
                    if isinstance(state, ExtrinsicMapState) else ["odd"])
        vals = tension if tension.ndim == 2 else tension[:, None]
        grad = np.column_stack([
            derivative_values(grid, vals[:, c], parities[min(c, len(parities) - 1)])
            for c in range(vals.shape[1])])
        lap_t = np.column_stack([
            laplacian_pointwise(grid, vals[:, c], parities[min(c, len(parities) - 1)])
            for c in range(vals.shape[1])])
        if isinstance(state, ExtrinsicMapState):
            lap_u = map_laplacian(state)
        else:
            lap_u = laplacian_pointwise(grid, state.psi, "odd", state.psi_infty)[:, None]
        g_norm = math.sqrt(s) * weighted_l2(grid, grad)
        l_norm = s * weighted_l2(grid, lap_t)
        sup_grad = max(sup_grad, g_norm)
        sup_lap_t = max(sup_lap_t, l_norm)
        sup_lap_u = max(sup_lap_u, weighted_l2(grid, lap_u))
        sum_grad += g_norm**2 * log_w
        sum_lap_t += l_norm**2 * log_w
    report = NormReport()
    report["sup_sqrt_s_grad_tension_L2"] = sup_grad
    report["sup_s_lap_tension_L2"] = sup_lap_t
    report["sup_lap_u_L2"] = sup_lap_u
    report["l2dss_sqrt_s_grad_tension_L2"] = math.sqrt(sum_grad)
    report["l2dss_s_lap_tension_L2"] = math.sqrt(sum_lap_t)
    return report


def dirichlet_energy(state) -> float:
    """Dirichlet part of the wave-map energy, (1/2) int |du|^2 dvol.

    Uses the interface form matched to the flux Laplacian, so the value is
    the exact potential of the discrete force in the bulk; the angular and
    target-potential parts are pointwise and exact gradients as well.
    """
    grid = state.grid
    if isinstance(state, ExtrinsicMapState):
        total = 0.0
        for k, parity in enumerate(state.component_parities()):
            total += interface_dirichlet_form(grid, state.values[:, k], parity,
                                              state.u_infty[k])
        if state.equivariance:
            total += 0.5 * float(np.sum(
                grid.weights * grid.csch2 * np.sum(state.values[:, :2] ** 2, axis=1)))
        return total
    total = interface_dirichlet_form(grid, state.psi, "odd", state.psi_infty)
    total += 0.5 * float(np.sum(grid.weights * state.target.g(state.psi) ** 2 * grid.csch2))
    return total
