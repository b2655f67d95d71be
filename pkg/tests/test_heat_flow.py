import math

import numpy as np
import pytest

from hypwave import heat_flow as hf
from hypwave import wave_dynamics as wd
from hypwave.errors import ConfigurationError, StabilityError
from hypwave.geometry import build_radial_grid, derivative_values, weighted_l2
from hypwave.targets import HarmonicProfile, PolarTarget, harmonic_profile


@pytest.fixture(scope="module")
def h4_small():
    return build_radial_grid(4, 12.0, 120)


@pytest.fixture(scope="module")
def bump_state(h4_small):
    return wd.small_bump_wave_data(h4_small, 0.2).position


@pytest.fixture(scope="module")
def bump_resolution(h4_small, bump_state):
    return hf.run_heat_resolution(bump_state, h4_small.h**2 / 4, 4.0, 2**0.125,
                                  bracket=1.02)


def constant_state(grid):
    u_inf = np.array([0.0, 0.0, 1.0])
    return hf.ExtrinsicMapState(grid, np.tile(u_inf, (grid.n, 1)), u_inf)


class TestExtrinsicRhs:
    def test_constant_map(self, h4_small):
        assert np.max(np.abs(hf.heat_rhs_extrinsic(constant_state(h4_small)))) == 0.0

    def test_corotational_profile_stationary(self):
        # 1-equivariant Q_1 map is harmonic: tangential tension is O(h^2)
        sups = []
        for n in (1000, 2000):
            grid = build_radial_grid(2, 20.0, n)
            p = HarmonicProfile("Q", 1.0)
            psi = harmonic_profile(p, grid.nodes)
            vals = np.column_stack([np.sin(psi), np.zeros(grid.n), np.cos(psi)])
            psi_inf = float(harmonic_profile(p, grid.r_max + grid.h))
            u_inf = np.array([math.sin(psi_inf), 0.0, math.cos(psi_inf)])
            state = hf.ExtrinsicMapState(grid, vals, u_inf, equivariance=1)
            rhs = hf.heat_rhs_extrinsic(state)
            tang = rhs - np.sum(rhs * vals, axis=1, keepdims=True) * vals
            sups.append(np.max(np.abs(tang)))
        assert sups[0] <= 10 * (20.0 / 1000) ** 2
        assert sups[0] / sups[1] > 3.0

    def test_tangency_residual_scales_like_h2(self):
        ratios = []
        for n in (240, 480):
            grid = build_radial_grid(4, 12.0, n)
            state = wd.small_bump_wave_data(grid, 0.2).position
            rhs = hf.heat_rhs_extrinsic(state)
            normal = np.max(np.abs(np.sum(rhs * state.values, axis=1)))
            ratios.append(normal / np.max(hf.gradient_energy_density(state)))
        assert ratios[0] <= 4.0 * (12.0 / 240) ** 2
        assert ratios[0] / ratios[1] > 3.0


class TestEquivariantRhs:
    def test_zero_profile(self):
        grid = build_radial_grid(2, 10.0, 100)
        p = hf.EquivariantProfile(grid, np.zeros(grid.n), 0.0, PolarTarget("sphere"))
        assert np.max(np.abs(hf.heat_rhs_equivariant(p, 2, p.target))) == 0.0

    def test_p_profile_stationary(self):
        grid = build_radial_grid(2, 20.0, 2000)
        prof = HarmonicProfile("P", 0.5)
        psi = harmonic_profile(prof, grid.nodes)
        p = hf.EquivariantProfile(grid, psi,
                                  float(harmonic_profile(prof, grid.r_max + grid.h)),
                                  PolarTarget("hyperbolic"))
        rhs = hf.heat_rhs_equivariant(p, 2, p.target)
        assert np.max(np.abs(rhs[grid.nodes <= 19.0])) <= 20 * grid.h**2

    def test_dimension_mismatch(self):
        grid = build_radial_grid(2, 10.0, 100)
        p = hf.EquivariantProfile(grid, np.zeros(grid.n))
        with pytest.raises(ConfigurationError):
            hf.heat_rhs_equivariant(p, 4, p.target)

    def test_matches_corotational_extrinsic(self):
        # tangential projection of the corotational tension equals the scalar
        # equivariant operator up to O(h^2)
        grid = build_radial_grid(2, 20.0, 2000)
        psi = 0.3 * np.sin(grid.nodes) * np.exp(-((grid.nodes - 3.0) ** 2))
        p = hf.EquivariantProfile(grid, psi, 0.0, PolarTarget("sphere"))
        rhs_eq = hf.heat_rhs_equivariant(p, 2, p.target)
        vals = np.column_stack([np.sin(psi), np.zeros(grid.n), np.cos(psi)])
        state = hf.ExtrinsicMapState(grid, vals, np.array([0.0, 0.0, 1.0]),
                                     equivariance=1)
        rhs_ex = hf.heat_rhs_extrinsic(state)
        tau = np.column_stack([np.cos(psi), np.zeros(grid.n), -np.sin(psi)])
        assert np.max(np.abs(np.sum(rhs_ex * tau, axis=1) - rhs_eq)) <= 50 * grid.h**2


class TestStepHeat:
    def test_constant_fixed_point(self, h4_small):
        state = constant_state(h4_small)
        ds = hf.rk4_stability_limit(h4_small)
        for scheme in ("explicit-rk4", "imex"):
            out = hf.step_heat(state, ds, scheme)
            assert np.max(np.abs(out.values - state.values)) < 1e-14

    def test_cfl_refused(self, h4_small, bump_state):
        with pytest.raises(StabilityError):
            hf.step_heat(bump_state, 10 * hf.rk4_stability_limit(h4_small))

    def test_profile_fixed_point_100_steps(self):
        grid = build_radial_grid(2, 12.0, 600)
        prof = HarmonicProfile("P", 0.5)
        psi = harmonic_profile(prof, grid.nodes)
        state = hf.EquivariantProfile(
            grid, psi, float(harmonic_profile(prof, grid.r_max + grid.h)),
            PolarTarget("hyperbolic"))
        cur = state
        for _ in range(100):
            cur = hf.step_heat(cur, 0.8 * hf.rk4_stability_limit(grid))
        assert np.max(np.abs(cur.psi - psi)) <= 1e-6

    def test_post_step_constraint(self, bump_state, h4_small):
        out = hf.step_heat(bump_state, hf.rk4_stability_limit(h4_small))
        assert hf.constraint_violation(out) <= 1e-8

    def test_unprojected_drift_accumulation(self, h4_small, bump_state):
        # RK4 keeps |u| = 1 to ~1e-10 even over 1e4 steps without projection
        y = bump_state.values.copy()
        ds = 0.2 * hf.rk4_stability_limit(h4_small)
        u_inf = bump_state.u_infty

        def rhs(vals):
            return hf.heat_rhs_extrinsic(hf.ExtrinsicMapState(h4_small, vals, u_inf))

        for _ in range(10_000):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * ds * k1)
            k3 = rhs(y + 0.5 * ds * k2)
            k4 = rhs(y + ds * k3)
            y = y + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert np.max(np.abs(np.linalg.norm(y, axis=1) - 1.0)) <= 1e-6

    def test_rk4_order_in_ds_frozen_coefficient(self):
        # linear heat equation: the scheme converges at fourth order in ds
        grid = build_radial_grid(2, 10.0, 100)
        from hypwave.geometry import bump_field, laplacian_dynamics
        f0 = bump_field(grid, 3.0, 1.0, 1.0).values
        limit = hf.rk4_stability_limit(grid)

        def advance(ds, steps):
            y = f0.copy()
            for _ in range(steps):
                k1 = laplacian_dynamics(grid, y, "even")
                k2 = laplacian_dynamics(grid, y + 0.5 * ds * k1, "even")
                k3 = laplacian_dynamics(grid, y + 0.5 * ds * k2, "even")
                k4 = laplacian_dynamics(grid, y + ds * k3, "even")
                y = y + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            return y

        total = 0.64 * limit * 64
        ref = advance(0.01 * limit, int(round(total / (0.01 * limit))))
        errs = [np.max(np.abs(advance(f * limit, int(round(total / (f * limit)))) - ref))
                for f in (0.64, 0.32)]
        assert 3.7 <= math.log2(errs[0] / errs[1]) <= 4.3

    def test_global_h_order(self):
        outs = {}
        for n in (60, 120, 240):
            grid = build_radial_grid(4, 12.0, n)
            state = wd.small_bump_wave_data(grid, 0.2).position
            limit = hf.rk4_stability_limit(grid)
            steps = int(math.ceil(0.5 / limit))
            ds = 0.5 / steps
            cur = state
            for _ in range(steps):
                cur = hf.step_heat(cur, ds)
            outs[n] = cur.values
        e1 = np.max(np.abs(outs[60] - outs[120][1::2]))
        e2 = np.max(np.abs(outs[120] - outs[240][1::2]))
        assert math.log2(e1 / e2) >= 1.8

    def test_imex_matches_rk4_first_order(self, bump_state):
        a = hf.step_heat(bump_state, 1e-3, "imex")
        b = hf.step_heat(bump_state, 1e-3, "explicit-rk4")
        assert np.max(np.abs(a.values - b.values)) <= 1e-4
        with pytest.raises(ConfigurationError):
            hf.step_heat(bump_state, 1e-3, "sympletic")


class TestHeatResolution:
    def test_constant_data(self, h4_small):
        res = hf.run_heat_resolution(constant_state(h4_small), h4_small.h**2 / 4,
                                     1.0, 2**0.25)
        assert all(np.max(np.abs(t)) == 0.0 for t in res.tensions)
        assert all(np.max(np.abs(s.values - res.states[0].values)) < 1e-14
                   for s in res.states)

    def test_ladder_structure(self, bump_resolution, h4_small):
        res = bump_resolution
        assert res.s_levels[0] == 0.0
        assert np.all(np.diff(res.s_levels) > 0)
        mains = res.s_levels[res.main_indices()]
        ratios = mains[2:] / mains[1:-1]
        assert np.allclose(ratios, 2**0.125, rtol=1e-9)

    def test_preconditions(self, h4_small, bump_state):
        with pytest.raises(ConfigurationError):
            hf.run_heat_resolution(bump_state, 10 * h4_small.h**2, 1.0, 2**0.25)
        with pytest.raises(ConfigurationError):
            hf.run_heat_resolution(bump_state, h4_small.h**2 / 4, 1.0, 2.5)
        with pytest.raises(ConfigurationError):
            hf.run_heat_resolution(bump_state, h4_small.h**2 / 4, 1.0, 2**0.25,
                                   bracket=1.3)

    def test_energy_dissipation(self, bump_resolution):
        energies = [hf.dirichlet_energy(s) for s in bump_resolution.states]
        for e0, e1 in zip(energies, energies[1:]):
            assert e1 <= e0 + 1e-8 * max(1.0, e0)

    def test_decay_to_constant(self, bump_resolution):
        final = bump_resolution.states[-1]
        assert np.max(np.abs(final.values - final.u_infty[None, :])) <= 1e-3

    def test_constraint_all_levels(self, bump_resolution):
        assert max(hf.constraint_violation(s) for s in bump_resolution.states) <= 1e-8


class TestSmoothingReport:
    def test_constant_data_zero(self, h4_small):
        res = hf.run_heat_resolution(constant_state(h4_small), h4_small.h**2 / 4,
                                     1.0, 2**0.25)
        report = hf.smoothing_report(res)
        assert all(v == 0.0 for v in report.values())

    def test_bounded_by_data_norm(self, bump_resolution, h4_small, bump_state):
        report = hf.smoothing_report(bump_resolution)
        du = hf.map_derivative(bump_state)
        h1 = math.sqrt(weighted_l2(h4_small, du) ** 2 + weighted_l2(
            h4_small, np.column_stack([
                derivative_values(h4_small, du[:, c], "odd") for c in range(3)])) ** 2)
        assert all(math.isfinite(v) for v in report.values())
        assert all(v <= 10.0 * h1 for v in report.values())

    def test_amplitude_near_linearity(self, h4_small):
        def report_for(amplitude):
            state = wd.small_bump_wave_data(h4_small, amplitude).position
            res = hf.run_heat_resolution(state, h4_small.h**2 / 4, 2.0, 2**0.25)
            return hf.smoothing_report(res)

        full = report_for(0.2)
        half = report_for(0.1)
        for key in full:
            assert full[key] / half[key] == pytest.approx(2.0, rel=0.2)

    def test_needs_three_levels(self, h4_small, bump_state):
        res = hf.run_heat_resolution(bump_state, h4_small.h**2 / 4, 4.0, 2**0.125)
        res.s_levels = res.s_levels[:2]
        res.states = res.states[:2]
        res.tensions = res.tensions[:2]
        res.main = res.main[:2]
        with pytest.raises(ConfigurationError):
            hf.smoothing_report(res)


def test_constraint_violation_fresh_projection(h4_small, rng):
    raw = rng.normal(size=(h4_small.n, 3)) + np.array([0, 0, 2.0])
    vals = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    state = hf.ExtrinsicMapState(h4_small, vals, np.array([0.0, 0.0, 1.0]))
    assert hf.constraint_violation(state) <= 1e-15


def test_state_validation(h4_small):
    state = wd.small_bump_wave_data(h4_small, 0.2).position
    state.validate(buffer=1.0)
    bad = state.copy()
    bad.values[0] *= 1.5
    with pytest.raises(ConfigurationError):
        bad.validate()
