"""Caloric gauge construction and verification along a heat resolution.

A frame e = (e_1 ... e_n) of the pullback tangent bundle is transported in
heat time by the parallel-transport ODE

    d e_j / ds = -<e_j, du/ds> u            (sphere target),

whose solution keeps <e_i, e_j> and <e_j, u> exactly; the connection
component A_s vanishes along it. A single s-independent rotation per node
then aligns the frame at the top of the ladder with a fixed limiting
frame at u_infty (orthogonal Procrustes, exact for orthonormal frames).

From the gauged frames we extract the frame coefficients psi of du, the
connection 1-form A (antisymmetric), and the curvature 2-form
F_{ab} = psi_a psi_b^T - psi_b psi_a^T (sphere curvature in the frame),
and numerically verify the structural identities the gauge satisfies:
reconstruction of A and psi from heat-time integrals of F and psi_s,
torsion-freeness, curvature consistency, the covariant heat equations in
s (with the dimension shift d-1 on the tensorial component), and the
covariant wave identity tying psi_s to the wave tension field w.

Time derivatives use centered second-order differences over a three-slice
stencil of resolutions that share a grid, ladder, and limiting frame,
expanded by the product rule so only centered stencils of u, e, and the
tension enter. Heat-time derivatives use the ladder's bracket levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateFieldError,
    OrientationError,
    TransportError,
)
from .geometry import RadialGrid, derivative_values, laplacian_dynamics, weighted_l2
from .heat_flow import (
    ExtrinsicMapState,
    HeatResolution,
    heat_rhs_extrinsic,
    rk4_stability_limit,
)

__all__ = [
    "FrameField",
    "GaugeData",
    "ResidualEntry",
    "ResidualReport",
    "TimeStencil",
    "initial_frame",
    "default_limiting_frame",
    "transport_frame",
    "apply_limiting_gauge",
    "compute_gauge_data",
    "verify_reconstruction",
    "verify_structure",
    "wave_tension",
    "dynamic_residuals",
    "frame_drift",
]

_DRIFT_SOFT = 1e-8
_DRIFT_HARD = 1e-4


@dataclass
class FrameField:
    """Orthonormal tangent frames per ladder level and node: (K, N, n, n+1).

    ``e_infty`` is the limiting frame the field was gauged to (set by
    apply_limiting_gauge); it provides the far-field ghost values for
    radial derivatives of the frame.
    """

    grid: RadialGrid
    levels: np.ndarray
    reorthonormalizations: int = 0
    e_infty: np.ndarray | None = None

    @property
    def n_frame(self) -> int:
        return self.levels.shape[2]

    def copy(self) -> "FrameField":
        return FrameField(self.grid, self.levels.copy(), self.reorthonormalizations,
                          None if self.e_infty is None else self.e_infty.copy())


@dataclass
class ResidualEntry:
    l2: float
    linf: float
    scale_l2: float
    scale_linf: float
    params: dict = field(default_factory=dict)

    @property
    def rel_l2(self) -> float:
        return self.l2 / self.scale_l2 if self.scale_l2 > 0 else 0.0

    @property
    def rel_linf(self) -> float:
        return self.linf / self.scale_linf if self.scale_linf > 0 else 0.0


class ResidualReport(dict):
    """identity label -> ResidualEntry."""


@dataclass
class TimeStencil:
    """Resolutions and gauged frames at t - dt and t + dt."""

    minus: tuple
    plus: tuple
    dt: float


def frame_drift(u_values: np.ndarray, frame: np.ndarray) -> float:
    """Max deviation from orthonormality and tangency at one level."""
    gram = np.einsum("xim,xjm->xij", frame, frame)
    gram -= np.eye(frame.shape[1])[None, :, :]
    tang = np.einsum("xim,xm->xi", frame, u_values)
    return max(float(np.max(np.abs(gram))), float(np.max(np.abs(tang))))


def _gram_schmidt(u: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Orthonormalize seed vectors against u and each other, per node."""
    out = []
    for j in range(seeds.shape[1]):
        v = seeds[:, j, :].copy()
        v -= np.sum(v * u, axis=1, keepdims=True) * u
        for w in out:
            v -= np.sum(v * w, axis=1, keepdims=True) * w
        norms = np.linalg.norm(v, axis=1, keepdims=True)
        if np.any(norms < 1e-6):
            raise DegenerateFieldError("degenerate frame seed")
        out.append(v / norms)
    return np.stack(out, axis=1)


def initial_frame(state: ExtrinsicMapState) -> np.ndarray:
    """Tangent frame at s = 0 by Gram-Schmidt of ambient axes projected to T_u.

    Axes nearly parallel to u are skipped (seed fallback); raises only if
    fewer than n independent seeds survive, which cannot happen for n+1
    ambient axes against a single unit vector.
    """
    if state.equivariance != 0:
        raise ConfigurationError("frames are built for plain radial maps only")
    u = state.values
    n_frame = state.target_dim
    conditioning = []
    for axis in range(state.ambient_dim):
        seed = np.zeros_like(u)
        seed[:, axis] = 1.0
        tangential = seed - np.sum(seed * u, axis=1, keepdims=True) * u
        conditioning.append(float(np.min(np.linalg.norm(tangential, axis=1))))
    # best-conditioned axes first; ties keep the natural axis order
    ranked = sorted(range(state.ambient_dim), key=lambda a: (-conditioning[a], a))
    chosen = [a for a in ranked[:n_frame] if conditioning[a] >= 1e-6]
    if len(chosen) < n_frame:
        raise DegenerateFieldError("could not seed an orthonormal frame")
    seeds = np.zeros((state.grid.n, n_frame, state.ambient_dim))
    for j, axis in enumerate(sorted(chosen)):
        seeds[:, j, axis] = 1.0
    return _gram_schmidt(u, seeds)


def default_limiting_frame(u_infty: np.ndarray) -> np.ndarray:
    """Fixed orthonormal frame of the tangent plane at u_infty."""
    u_infty = np.asarray(u_infty, dtype=float)
    m = u_infty.shape[0]
    state_like = np.tile(u_infty, (1, 1))
    seeds = []
    for axis in range(m):
        seed = np.zeros((1, m))
        seed[0, axis] = 1.0
        t = seed - (seed @ u_infty)[:, None] * u_infty[None, :]
        if np.linalg.norm(t) < 1e-6:
            continue
        seeds.append(seed)
        if len(seeds) == m - 1:
            break
    frame = _gram_schmidt(state_like, np.stack(seeds, axis=1))
    return frame[0]


def _transport_rhs(u, e, tension):
    coef = np.einsum("xjm,xm->xj", e, tension)
    return -coef[:, :, None] * u[:, None, :]


def transport_frame(res: HeatResolution, frame0: np.ndarray,
                    substep_safety: float = 1.0) -> FrameField:
    """Parallel-transport the s=0 frame up the ladder (RK4, joint with u).

    The map is re-integrated between stored levels with the same explicit
    substeps, so the frame follows the resolution's own trajectory. The
    exact flow preserves orthonormality; the frame is re-orthonormalized
    only if the measured drift exceeds 1e-8 (counted on the result), and
    drift beyond 1e-4 raises TransportError.
    """
    grid = res.grid
    state0 = res.states[0]
    if not isinstance(state0, ExtrinsicMapState):
        raise ConfigurationError("frame transport needs an extrinsic resolution")
    if frame0.shape != (grid.n, state0.target_dim, state0.ambient_dim):
        raise ConfigurationError(f"frame0 has shape {frame0.shape}")
    limit = rk4_stability_limit(grid) * substep_safety
    levels = np.empty((res.n_levels,) + frame0.shape)
    levels[0] = frame0
    e = frame0.copy()
    events = 0
    for k in range(1, res.n_levels):
        state = res.states[k - 1].copy()
        gap = res.s_levels[k] - res.s_levels[k - 1]
        nsub = max(1, int(math.ceil(gap / limit)))
        ds = gap / nsub
        for _ in range(nsub):
            u0 = state.values
            f1 = heat_rhs_extrinsic(state)
            g1 = _transport_rhs(u0, e, f1)
            s2 = _with_u(state, u0 + 0.5 * ds * f1)
            f2 = heat_rhs_extrinsic(s2)
            g2 = _transport_rhs(s2.values, e + 0.5 * ds * g1, f2)
            s3 = _with_u(state, u0 + 0.5 * ds * f2)
            f3 = heat_rhs_extrinsic(s3)
            g3 = _transport_rhs(s3.values, e + 0.5 * ds * g2, f3)
            s4 = _with_u(state, u0 + ds * f3)
            f4 = heat_rhs_extrinsic(s4)
            g4 = _transport_rhs(s4.values, e + ds * g3, f4)
            unew = u0 + (ds / 6.0) * (f1 + 2 * f2 + 2 * f3 + f4)
            unew /= np.linalg.norm(unew, axis=1, keepdims=True)
            state = _with_u(state, unew)
            e = e + (ds / 6.0) * (g1 + 2 * g2 + 2 * g3 + g4)
            # continuous machine-size correction: threshold-triggered snaps
            # would put O(tol) jumps into the s-derivatives downstream
            e = _gram_schmidt(state.values, e)
        drift = frame_drift(res.states[k].values, e)
        if drift > _DRIFT_HARD:
            raise TransportError(f"frame drift {drift:.2e} at s={res.s_levels[k]:.3e}")
        if drift > _DRIFT_SOFT:
            e = _gram_schmidt(res.states[k].values, e)
            events += 1
        levels[k] = e
    return FrameField(grid, levels, events)


def _with_u(state: ExtrinsicMapState, values: np.ndarray) -> ExtrinsicMapState:
    new = state.copy()
    new.values = values
    return new


def _sphere_transport(v: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Parallel transport of tangent v along the great circle from a to b."""
    dot = np.sum(a * b, axis=-1, keepdims=True)
    ab = a + b
    return v - np.sum(v * ab, axis=-1, keepdims=True) / (1.0 + dot) * ab \
        + 2.0 * np.sum(v * a, axis=-1, keepdims=True) * b


def apply_limiting_gauge(res: HeatResolution, frames: FrameField,
                         e_infty: np.ndarray) -> FrameField:
    """Rotate the transported frames so e(s_max) matches e_infty per node.

    Where u(s_max) differs from u_infty, e_infty is first parallel
    transported along the connecting great circle (an O(|u - u_infty|)
    correction for converged resolutions). The per-node rotation is the
    orthogonal Procrustes alignment, applied at every level (independent
    of s). Frames of opposite orientation raise OrientationError.
    """
    top_state = res.states[-1]
    u_top = top_state.values
    gap = np.max(np.linalg.norm(u_top - top_state.u_infty[None, :], axis=1))
    if gap > 0.5:
        raise ConfigurationError(
            f"u(s_max) is {gap:.2e} from u_infty; extend the ladder before gauging")
    target = _sphere_transport(e_infty[None, :, :],
                               top_state.u_infty[None, None, :], u_top[:, None, :])
    e_top = frames.levels[-1]
    m = np.einsum("xjm,xim->xji", e_top, target)  # E^T T per node
    uu, _, vt = np.linalg.svd(m)
    dets = np.linalg.det(uu @ vt)
    if np.any(dets < 0):
        raise OrientationError("limiting frame has opposite orientation to the transport")
    rot = uu @ vt
    gauged = np.einsum("kxjm,xji->kxim", frames.levels, rot)
    return FrameField(frames.grid, gauged, frames.reorthonormalizations,
                      np.asarray(e_infty, dtype=float))


@dataclass
class GaugeData:
    """Per-level gauge variables on the ladder (center time slice).

    Arrays are indexed (level, node, frame...) with n the target
    dimension. Entries that need the time stencil are None without one.
    """

    grid: RadialGrid
    s_levels: np.ndarray
    main: np.ndarray
    psi_s: np.ndarray
    psi_r: np.ndarray
    A_r: np.ndarray
    A_s: np.ndarray
    F_sr: np.ndarray
    sym_defect: float
    dt: float | None = None
    psi_t: np.ndarray | None = None
    A_t: np.ndarray | None = None
    F_tr: np.ndarray | None = None
    F_st: np.ndarray | None = None
    dt_psi_s: np.ndarray | None = None
    dtt_psi_s: np.ndarray | None = None
    dt_psi_t: np.ndarray | None = None
    dt_psi_r: np.ndarray | None = None
    dt_A_r: np.ndarray | None = None
    dt_A_t: np.ndarray | None = None

    def main_indices(self) -> np.ndarray:
        return np.nonzero(self.main)[0]

    def require_stencil(self):
        if self.dt is None:
            raise ConfigurationError("this operation needs gauge data with a time stencil")


def _frame_coeff(vec: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Coefficients <vec, e_j>: (K, N, m) x (K, N, n, m) -> (K, N, n)."""
    return np.einsum("kxm,kxjm->kxj", vec, e)


def _antisym(raw: np.ndarray) -> tuple[np.ndarray, float]:
    sym = 0.5 * (raw + np.swapaxes(raw, -1, -2))
    return raw - sym, float(np.max(np.abs(sym)))


def _radial_derivative(grid, arr: np.ndarray, parity: str, far=0.0) -> np.ndarray:
    """d/dr level by level of (K, N, ...) data."""
    return np.stack([derivative_values(grid, arr[k], parity, far)
                     for k in range(arr.shape[0])])


def curvature_in_frame(psi_a: np.ndarray, psi_b: np.ndarray) -> np.ndarray:
    """F_{ab} = psi_a psi_b^T - psi_b psi_a^T (unit-sphere curvature)."""
    outer = np.einsum("...i,...j->...ij", psi_a, psi_b)
    return outer - np.swapaxes(outer, -1, -2)


def compute_gauge_data(res: HeatResolution, frames: FrameField,
                       t_stencil: TimeStencil | None = None) -> GaugeData:
    """Extract psi, A, F (and their centered t-derivatives) from gauged frames."""
    grid = res.grid
    state0 = res.states[0]
    u_inf = state0.u_infty
    K = res.n_levels
    u = np.stack([st.values for st in res.states])            # (K, N, m)
    tension = np.stack(res.tensions)                          # (K, N, m)
    e = frames.levels                                         # (K, N, n, m)
    if e.shape[0] != K:
        raise ConfigurationError("frames and resolution have different ladders")

    e_far = frames.e_infty
    if e_far is None:
        e_far = e[-1, -1]  # gauged frames approach the limiting frame
    psi_s = _frame_coeff(tension, e)
    du = np.stack([
        np.column_stack([derivative_values(grid, u[k][:, c], "even", u_inf[c])
                         for c in range(u.shape[2])]) for k in range(K)])
    psi_r = _frame_coeff(du, e)
    de_r = np.stack([
        np.stack([np.column_stack([
            derivative_values(grid, e[k][:, j, c], "even", e_far[j, c])
            for c in range(e.shape[3])]) for j in range(e.shape[2])], axis=1)
        for k in range(K)])                                   # (K, N, n, m)
    raw_A_r = np.einsum("kxjm,kxim->kxij", de_r, e)
    A_r, sym_defect = _antisym(raw_A_r)
    # A_s from the transport ODE right-hand side (zero up to tangency drift)
    ode = -np.einsum("kxjm,kxm->kxj", e, tension)[:, :, :, None] * u[:, :, None, :]
    A_s = np.einsum("kxjm,kxim->kxij", ode, e)
    F_sr = curvature_in_frame(psi_s, psi_r)

    gd = GaugeData(grid, res.s_levels.copy(), res.main.copy(), psi_s, psi_r,
                   A_r, A_s, F_sr, sym_defect)
    if t_stencil is None:
        return gd

    res_m, frames_m = t_stencil.minus
    res_p, frames_p = t_stencil.plus
    dt = t_stencil.dt
    for other in (res_m, res_p):
        if other.n_levels != K or not other.grid.same_as(grid):
            raise ConfigurationError("stencil resolutions must share grid and ladder")
    u_m = np.stack([st.values for st in res_m.states])
    u_p = np.stack([st.values for st in res_p.states])
    e_m, e_p = frames_m.levels, frames_p.levels
    T_m = np.stack(res_m.tensions)
    T_p = np.stack(res_p.tensions)

    du_t = (u_p - u_m) / (2 * dt)
    dtt_u = (u_p - 2 * u + u_m) / dt**2
    de_t = (e_p - e_m) / (2 * dt)
    dtt_e = (e_p - 2 * e + e_m) / dt**2
    dT_t = (T_p - T_m) / (2 * dt)
    dtt_T = (T_p - 2 * tension + T_m) / dt**2

    gd.dt = dt
    gd.psi_t = _frame_coeff(du_t, e)
    raw_A_t = np.einsum("kxjm,kxim->kxij", de_t, e)
    gd.A_t, sym_t = _antisym(raw_A_t)
    gd.sym_defect = max(gd.sym_defect, sym_t)
    gd.F_tr = curvature_in_frame(gd.psi_t, psi_r)
    gd.F_st = curvature_in_frame(psi_s, gd.psi_t)
    # product-rule t-derivatives built from centered stencils only
    gd.dt_psi_s = _frame_coeff(dT_t, e) + np.einsum("kxm,kxjm->kxj", tension, de_t)
    gd.dtt_psi_s = (_frame_coeff(dtt_T, e)
                    + 2.0 * np.einsum("kxm,kxjm->kxj", dT_t, de_t)
                    + np.einsum("kxm,kxjm->kxj", tension, dtt_e))
    gd.dt_psi_t = _frame_coeff(dtt_u, e) + np.einsum("kxm,kxjm->kxj", du_t, de_t)
    ddu_t = np.stack([
        np.column_stack([derivative_values(grid, du_t[k][:, c], "even", 0.0)
                         for c in range(u.shape[2])]) for k in range(K)])
    gd.dt_psi_r = (_frame_coeff(ddu_t, e)
                   + np.einsum("kxm,kxjm->kxj", du, de_t))
    de_tr = np.stack([
        np.stack([np.column_stack([
            derivative_values(grid, de_t[k][:, j, c], "even", 0.0)
            for c in range(e.shape[3])]) for j in range(e.shape[2])], axis=1)
        for k in range(K)])
    gd.dt_A_r, _ = _antisym(np.einsum("kxjm,kxim->kxij", de_tr, e)
                            + np.einsum("kxjm,kxim->kxij", de_r, de_t))
    gd.dt_A_t, _ = _antisym(np.einsum("kxjm,kxim->kxij", dtt_e, e)
                            + np.einsum("kxjm,kxim->kxij", de_t, de_t))
    return gd


def _ds_centered(y: np.ndarray, s: np.ndarray, k: int) -> np.ndarray:
    """Nonuniform centered d/ds at level k from levels k-1, k, k+1."""
    hm = s[k] - s[k - 1]
    hp = s[k + 1] - s[k]
    return (hm**2 * y[k + 1] - hp**2 * y[k - 1] + (hp**2 - hm**2) * y[k]) / (
        hm * hp * (hm + hp))


def _interior_main(gd: GaugeData) -> list[int]:
    """Main levels with s > 0 that have neighbors for centered d/ds."""
    return [int(k) for k in gd.main_indices()
            if 0 < k < len(gd.s_levels) - 1 and gd.s_levels[k] > 0]


def _norms(grid: RadialGrid, arr: np.ndarray) -> tuple[float, float]:
    flat_sq = np.sum(arr.reshape(arr.shape[0], -1) ** 2, axis=1)
    l2 = math.sqrt(float(np.sum(grid.weights * flat_sq)))
    return l2, float(np.max(np.abs(arr)))


def _entry(grid, residual_levels, scale_levels, params=None) -> ResidualEntry:
    res_l2 = res_inf = sc_l2 = sc_inf = 0.0
    for resid, scale in zip(residual_levels, scale_levels):
        l2, linf = _norms(grid, resid)
        s2, sinf = _norms(grid, scale)
        res_l2, res_inf = max(res_l2, l2), max(res_inf, linf)
        sc_l2, sc_inf = max(sc_l2, s2), max(sc_inf, sinf)
    return ResidualEntry(res_l2, res_inf, sc_l2, sc_inf, params or {})


def _trapezoid_tail(y: np.ndarray, s: np.ndarray, k0: int) -> np.ndarray:
    """int_{s_k0}^{s_max} y ds by trapezoid over the (nonuniform) ladder."""
    seg = 0.5 * (y[k0:-1] + y[k0 + 1:])
    ds = np.diff(s[k0:])
    return np.tensordot(ds, seg, axes=(0, 0))


def verify_reconstruction(gd: GaugeData, tail_tol: float = 1e-6) -> ResidualReport:
    """Residuals of A = -int F_s. ds and psi = -int (grad psi_s + A psi_s) ds.

    Evaluated at the three lowest positive ladder levels; the report also
    carries the measured |A(s_max)| truncation tail.
    """
    grid = gd.grid
    report = ResidualReport()
    pos = [int(k) for k in range(len(gd.s_levels)) if gd.s_levels[k] > 0]
    base_levels = pos[:3]
    directions = [("r", gd.A_r, gd.psi_r, gd.F_sr)]
    if gd.dt is not None:
        directions.append(("t", gd.A_t, gd.psi_t, gd.F_st))
    for name, A, psi, F_s in directions:
        a_res, a_scale, p_res, p_scale = [], [], [], []
        if name == "r":
            grad_psi_s = np.stack([
                np.column_stack([derivative_values(grid, gd.psi_s[k][:, j], "even", 0.0)
                                 for j in range(gd.psi_s.shape[2])])
                for k in range(gd.psi_s.shape[0])])
        else:
            grad_psi_s = gd.dt_psi_s
        integrand = grad_psi_s + np.einsum("kxij,kxj->kxi", A, gd.psi_s)
        for k0 in base_levels:
            a_res.append(A[k0] + _trapezoid_tail(F_s, gd.s_levels, k0))
            a_scale.append(A[k0])
            p_res.append(psi[k0] + _trapezoid_tail(integrand, gd.s_levels, k0))
            p_scale.append(psi[k0])
        report[f"A_{name}_reconstruction"] = _entry(grid, a_res, a_scale,
                                                    {"levels": base_levels})
        report[f"psi_{name}_reconstruction"] = _entry(grid, p_res, p_scale,
                                                      {"levels": base_levels})
    tail = float(np.max(np.abs(gd.A_r[-1]))) if gd.dt is None else float(
        max(np.max(np.abs(gd.A_r[-1])), np.max(np.abs(gd.A_t[-1]))))
    report["truncation_tail_A"] = ResidualEntry(tail, tail, 1.0, 1.0,
                                                {"tolerance": tail_tol})
    return report


def _div_radial(grid, arr: np.ndarray, parity: str) -> np.ndarray:
    """Covariant divergence d/dr + (d-1) coth r of (K, N, ...) radial components."""
    der = np.stack([_component_derivative(grid, arr[k], parity)
                    for k in range(arr.shape[0])])
    coth = grid.coth.reshape((1, -1) + (1,) * (arr.ndim - 2))
    return der + (grid.d - 1) * coth * arr


def verify_structure(gd: GaugeData) -> ResidualReport:
    """Torsion, curvature-vs-connection, d/ds psi = D psi_s, and div F identities."""
    gd.require_stencil()
    grid = gd.grid
    report = ResidualReport()
    ks = _interior_main(gd)

    # F_tr from the connection form vs the algebraic curvature
    dA_t_r = np.stack([_component_derivative(grid, gd.A_t[k]) for k in range(len(gd.s_levels))])
    comm = np.einsum("kxab,kxbc->kxac", gd.A_t, gd.A_r) - np.einsum(
        "kxab,kxbc->kxac", gd.A_r, gd.A_t)
    F_conn = gd.dt_A_r - dA_t_r + comm
    report["curvature_vs_connection"] = _entry(
        grid, [F_conn[k] - gd.F_tr[k] for k in ks], [gd.F_tr[k] for k in ks])

    # torsion: D_t psi_r = D_r psi_t
    dpsi_t_r = np.stack([_component_derivative(grid, gd.psi_t[k]) for k in range(len(gd.s_levels))])
    lhs = gd.dt_psi_r + np.einsum("kxij,kxj->kxi", gd.A_t, gd.psi_r)
    rhs = dpsi_t_r + np.einsum("kxij,kxj->kxi", gd.A_r, gd.psi_t)
    report["torsion_free"] = _entry(grid, [lhs[k] - rhs[k] for k in ks],
                                    [rhs[k] for k in ks])

    # d/ds psi_r = D_r psi_s
    dpsi_s_r = np.stack([_component_derivative(grid, gd.psi_s[k]) for k in range(len(gd.s_levels))])
    D_r_psi_s = dpsi_s_r + np.einsum("kxij,kxj->kxi", gd.A_r, gd.psi_s)
    resids, scales = [], []
    for k in ks:
        ds_psi_r = _ds_centered(gd.psi_r, gd.s_levels, k)
        resids.append(ds_psi_r - D_r_psi_s[k])
        scales.append(D_r_psi_s[k])
    report["ds_psi_eq_D_psi_s"] = _entry(grid, resids, scales)

    # spatial divergence of F_{s.}: D^b F_sb = R(D^b psi_s, psi_b)
    div_F = _div_radial(grid, gd.F_sr, "odd") + (
        np.einsum("kxab,kxbc->kxac", gd.A_r, gd.F_sr)
        - np.einsum("kxab,kxbc->kxac", gd.F_sr, gd.A_r))
    rhs_div = curvature_in_frame(D_r_psi_s, gd.psi_r)
    report["space_divergence_F"] = _entry(grid, [div_F[k] - rhs_div[k] for k in ks],
                                          [rhs_div[k] for k in ks])

    # the heat tension against the covariant divergence of psi (definition check)
    div_psi = _div_radial(grid, gd.psi_r, "odd") + np.einsum(
        "kxij,kxj->kxi", gd.A_r, gd.psi_r)
    report["heat_tension_identity"] = _entry(
        grid, [gd.psi_s[k] - div_psi[k] for k in ks], [gd.psi_s[k] for k in ks])
    return report


def _component_derivative(grid, arr: np.ndarray, parity: str = "even") -> np.ndarray:
    """Radial derivative of (N, ...) data, componentwise."""
    flat = arr.reshape(arr.shape[0], -1)
    out = np.column_stack([derivative_values(grid, flat[:, c], parity, 0.0)
                           for c in range(flat.shape[1])])
    return out.reshape(arr.shape)


def wave_tension(gd: GaugeData) -> np.ndarray:
    """w = D^alpha psi_alpha = -D_t psi_t + D^a psi_a per level (K, N, n).

    The spatial part D^a psi_a is the heat tension psi_s by definition
    (the stored tension's frame coefficients), so the only discretization
    entering is the centered time stencil. Vanishes at s = 0 exactly when
    the underlying slice data is a wave map.
    """
    gd.require_stencil()
    D_t_psi_t = gd.dt_psi_t + np.einsum("kxij,kxj->kxi", gd.A_t, gd.psi_t)
    return -D_t_psi_t + gd.psi_s


def _cov_laplacian_scalar(grid, psi: np.ndarray, A_r: np.ndarray, parity: str) -> np.ndarray:
    """D^b D_b on R^n-valued functions: Lap + 2 A dr + (div A) + A^2, per level.

    Uses the dynamics Laplacian (the heat flow's own generator), so the
    residuals of the covariant heat equations measure the gauge structure
    rather than the difference between two spatial discretizations.
    """
    K = psi.shape[0]
    lap = np.stack([np.column_stack([
        laplacian_dynamics(grid, psi[k][:, j], parity, 0.0)
        for j in range(psi.shape[2])]) for k in range(K)])
    dpsi = np.stack([_component_derivative(grid, psi[k], parity) for k in range(K)])
    divA = _div_radial(grid, A_r, "odd")
    return (lap + 2.0 * np.einsum("kxij,kxj->kxi", A_r, dpsi)
            + np.einsum("kxij,kxj->kxi", divA, psi)
            + np.einsum("kxij,kxjl,kxl->kxi", A_r, A_r, psi))


def dynamic_residuals(gd: GaugeData, shift_coefficient: float | None = None) -> ResidualReport:
    """Residuals of the covariant heat and wave equations for psi.

    ``shift_coefficient`` overrides the curvature shift (default d - 1) in
    the tensorial heat equation for psi_r, for discrimination sweeps.
    """
    gd.require_stencil()
    grid = gd.grid
    d = grid.d
    shift = float(d - 1) if shift_coefficient is None else float(shift_coefficient)
    report = ResidualReport()
    ks = _interior_main(gd)

    cov_psi_s = _cov_laplacian_scalar(grid, gd.psi_s, gd.A_r, "even")
    cov_psi_t = _cov_laplacian_scalar(grid, gd.psi_t, gd.A_r, "even")
    F_sr_psi_r = np.einsum("kxij,kxj->kxi", gd.F_sr, gd.psi_r)
    F_tr_psi_r = np.einsum("kxij,kxj->kxi", gd.F_tr, gd.psi_r)

    resids, scales = [], []
    for k in ks:
        ds_psi_s = _ds_centered(gd.psi_s, gd.s_levels, k)
        resids.append(ds_psi_s - cov_psi_s[k] - F_sr_psi_r[k])
        scales.append(cov_psi_s[k])
    report["heat_psi_s"] = _entry(grid, resids, scales)

    resids, scales = [], []
    for k in ks:
        ds_psi_t = _ds_centered(gd.psi_t, gd.s_levels, k)
        resids.append(ds_psi_t - cov_psi_t[k] - F_tr_psi_r[k])
        scales.append(cov_psi_t[k])
    report["heat_psi_t"] = _entry(grid, resids, scales)

    # tensorial component: Bochner Laplacian on the radial 1-form piece
    K = gd.psi_r.shape[0]
    lap_r = np.stack([np.column_stack([
        laplacian_dynamics(grid, gd.psi_r[k][:, j], "odd", 0.0)
        for j in range(gd.psi_r.shape[2])]) for k in range(K)])
    coth2 = (grid.coth**2)[None, :, None]
    dpsi_r = np.stack([_component_derivative(grid, gd.psi_r[k], "odd") for k in range(K)])
    divA = _div_radial(grid, gd.A_r, "odd")
    bochner = (lap_r - (d - 1) * coth2 * gd.psi_r
               + 2.0 * np.einsum("kxij,kxj->kxi", gd.A_r, dpsi_r)
               + np.einsum("kxij,kxj->kxi", divA, gd.psi_r)
               + np.einsum("kxij,kxjl,kxl->kxi", gd.A_r, gd.A_r, gd.psi_r))
    resids, scales = [], []
    for k in ks:
        ds_psi_r = _ds_centered(gd.psi_r, gd.s_levels, k)
        resids.append(ds_psi_r - bochner[k] - shift * gd.psi_r[k])
        scales.append(bochner[k] + shift * gd.psi_r[k])
    report["heat_psi_a"] = _entry(grid, resids, scales,
                                  {"shift_coefficient": shift})

    # covariant wave identity: D^al D_al psi_s = ds w - F_s^al psi_al
    w = wave_tension(gd)
    D_tt_psi_s = (gd.dtt_psi_s
                  + np.einsum("kxij,kxj->kxi", gd.dt_A_t, gd.psi_s)
                  + 2.0 * np.einsum("kxij,kxj->kxi", gd.A_t, gd.dt_psi_s)
                  + np.einsum("kxij,kxjl,kxl->kxi", gd.A_t, gd.A_t, gd.psi_s))
    F_st_psi_t = np.einsum("kxij,kxj->kxi", gd.F_st, gd.psi_t)
    resids, scales = [], []
    for k in ks:
        ds_w = _ds_centered(w, gd.s_levels, k)
        box = -D_tt_psi_s[k] + cov_psi_s[k]
        resids.append(box - ds_w + (-F_st_psi_t[k] + F_sr_psi_r[k]))
        # the d'Alembertian cancels on near-solutions: scale by its parts
        scales.append(np.maximum(np.abs(D_tt_psi_s[k]), np.abs(cov_psi_s[k])))
    report["wave_psi_s"] = _entry(grid, resids, scales)
    return report
