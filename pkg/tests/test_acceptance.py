"""Acceptance suite: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion. The coupled-pipeline criteria share two session
fixtures (baseline and jointly refined) so the whole suite stays inside
its runtime budget.
"""

import math
import time

import numpy as np
import pytest

from hypwave import caloric_gauge as cg
from hypwave import linear_dispersion as ld
from hypwave import wave_dynamics as wd
from hypwave.errors import AdmissibilityError
from hypwave.geometry import (
    ScalarField,
    build_radial_grid,
    bump_field,
    gap_adapted_bump,
    lp_norm,
    rayleigh_quotient,
    spectral_gap,
)
from hypwave.heat_flow import run_heat_resolution, smoothing_report
from hypwave.targets import HarmonicProfile, profile_energy


def _report(number: int, description: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number:2d} [{status}] {description} {detail}")
    assert ok, f"criterion {number}: {description} {detail}"


# criterion 5's identity-to-report dictionary
GATE_IDENTITIES = (
    "A_r_reconstruction",
    "A_t_reconstruction",
    "psi_r_reconstruction",
    "psi_t_reconstruction",
    "curvature_vs_connection",
    "torsion_free",
    "ds_psi_eq_D_psi_s",
    "wave_tension_initial",
)


@pytest.fixture(scope="module")
def pipeline_baseline():
    start = time.monotonic()
    report, norms = wd.run_coupled_pipeline(wd.PipelineConfig())
    return report, norms, time.monotonic() - start


@pytest.fixture(scope="module")
def pipeline_refined():
    start = time.monotonic()
    report, norms = wd.run_coupled_pipeline(wd.PipelineConfig(refine=1))
    return report, norms, time.monotonic() - start


def test_criterion_1_soliton_energies():
    start = time.monotonic()
    grid = build_radial_grid(2, 25.0, 2500)
    e_p = profile_energy(grid, HarmonicProfile("P", 1.0 / math.sqrt(2.0)))
    e_q = profile_energy(grid, HarmonicProfile("Q", 1.0))
    elapsed = time.monotonic() - start
    ok = (abs(e_p - 4 * math.pi) <= 1e-3 * 4 * math.pi
          and abs(e_q - 2 * math.pi) <= 1e-3 * 2 * math.pi
          and elapsed < 1.0)
    _report(1, "soliton energies match closed forms to 1e-3", ok,
            f"(E_P={e_p:.6f}, E_Q={e_q:.6f}, {elapsed:.2f}s)")


def test_criterion_2_spectral_gap():
    start = time.monotonic()
    rng = np.random.default_rng(2)
    ok = True
    detail = []
    for d in (2, 3, 4):
        grid = build_radial_grid(d, 30.0, 1500)
        gap = spectral_gap(d)
        worst = min(
            rayleigh_quotient(grid, bump_field(
                grid, rng.uniform(1.0, 15.0), rng.uniform(0.3, 2.0),
                rng.uniform(0.5, 2.0), parity=("even", "odd")[rng.integers(2)]))
            for _ in range(50))
        r_bb = 150.0 / (d - 1)
        grid_bb = build_radial_grid(d, r_bb, int(r_bb / 0.04))
        broad = rayleigh_quotient(grid_bb, gap_adapted_bump(grid_bb, 0.8 * r_bb))
        ok = ok and worst >= gap - 0.05 and broad <= 1.05 * gap
        detail.append(f"d={d}: min={worst:.3f}/{gap}, broad={broad:.3f}")
    elapsed = time.monotonic() - start
    ok = ok and elapsed < 5.0
    _report(2, "Rayleigh quotients respect the spectral gap", ok,
            f"({'; '.join(detail)}, {elapsed:.1f}s)")


def test_criterion_3_soliton_stationarity():
    start = time.monotonic()
    drifts = {}
    for n in (1200, 2400):  # h = 0.01, 0.005
        grid = build_radial_grid(2, 12.0, n)
        state = wd.soliton_state(grid, HarmonicProfile("P", 0.5))
        traj = wd.evolve(state, 10.0, 0.4 * grid.h, 2)
        drifts[grid.h] = float(np.max(np.abs(
            traj.states[-1].position.psi - state.position.psi)))
    elapsed = time.monotonic() - start
    bound = 5.0 * 0.005**2
    order = math.log2(drifts[0.01] / drifts[0.005])
    ok = drifts[0.005] <= bound and order >= 1.9 and elapsed < 60.0
    _report(3, "evolved soliton drift <= 5 h^2 with order >= 1.9", ok,
            f"(drift={drifts[0.005]:.2e} vs {bound:.2e}, order={order:.2f}, "
            f"{elapsed:.1f}s)")


def test_criterion_4_energy_conservation():
    from hypwave.heat_flow import EquivariantProfile
    from hypwave.targets import PolarTarget
    start = time.monotonic()
    drifts = {}
    for n in (1300, 2600):  # h = 0.02, 0.01
        grid = build_radial_grid(2, 26.0, n)
        x1 = (grid.nodes - 2.0)
        psi0 = 0.3 * np.where(np.abs(x1) < 1, (1 - x1**2) ** 3, 0.0)
        x2 = grid.nodes - 1.5
        vel0 = 0.2 * np.where(np.abs(x2) < 1, (1 - x2**2) ** 3, 0.0)
        state = wd.WaveState(
            EquivariantProfile(grid, psi0, 0.0, PolarTarget("sphere")), vel0)
        traj = wd.evolve(state, 20.0, 0.25 * grid.h, 20)
        energies = traj.metric("energy")
        drifts[grid.h] = float(np.max(np.abs(energies - energies[0])) / energies[0])
    elapsed = time.monotonic() - start
    order = math.log2(drifts[0.02] / drifts[0.01])
    ok = drifts[0.01] <= 1e-4 and order >= 1.5
    _report(4, "energy drift <= 1e-4 over T=20 at h=0.01, improving at order 2",
            ok, f"(drift={drifts[0.01]:.2e}, order={order:.2f}, {elapsed:.1f}s)")


def test_criterion_5_gauge_identity_suite(pipeline_baseline, pipeline_refined):
    base, _, t_base = pipeline_baseline
    fine, _, t_fine = pipeline_refined
    ok = True
    details = []
    for name in GATE_IDENTITIES:
        rel = base[name].rel_l2
        order = math.log2(max(rel, 1e-300) / max(fine[name].rel_l2, 1e-300))
        good = rel <= 1e-2 and order >= 1.0
        ok = ok and good
        details.append(f"{name}={rel:.1e}/o{order:.1f}")
    ok = ok and t_base < 300.0
    _report(5, "gauge identity residuals <= 1e-2 at baseline, order >= 1", ok,
            f"({'; '.join(details)}; baseline {t_base:.0f}s, refined {t_fine:.0f}s)")


def test_criterion_6_heat_temporal_condition(pipeline_baseline):
    _, norms, _ = pipeline_baseline
    ok = norms["A_s_max"] <= 1e-7 and norms["frame_drift"] <= 1e-8
    _report(6, "A_s <= 1e-7 and frame orthonormality drift <= 1e-8", ok,
            f"(A_s={norms['A_s_max']:.1e}, drift={norms['frame_drift']:.1e})")


def test_criterion_7_curvature_shift_discrimination(pipeline_baseline):
    report, _, _ = pipeline_baseline
    base = report["heat_psi_a"].l2
    r2 = report["heat_psi_a_shift_2"].l2 / base
    r4 = report["heat_psi_a_shift_4"].l2 / base
    ok = r2 >= 10.0 and r4 >= 10.0
    _report(7, "shift coefficient d-1=3 minimizes the tensorial heat residual",
            ok, f"(coefficient 2: {r2:.0f}x, coefficient 4: {r4:.0f}x)")


def test_criterion_8_dispersive_decay():
    start = time.monotonic()
    slopes = {}
    for d, q, method in ((3, 4.0, "kg-reduction"), (4, 8.0, "radial")):
        grid = build_radial_grid(d, 58.0, 2900)
        state = ld.LinearWaveState(grid, bump_field(grid, 3.0, 1.0, 1.0),
                                   ScalarField(grid, np.zeros(grid.n), "even"))
        traj = ld.solve_linear_wave(d, state, 50.0, n_samples=120, method=method)
        slopes[d] = ld.dispersive_fit(traj, q)
    elapsed = time.monotonic() - start
    ok = slopes[3] <= -1.3 and slopes[4] <= -1.3 and elapsed < 120.0
    _report(8, "fitted decay exponents <= -3/2 + 0.2", ok,
            f"(d=3 L4: {slopes[3]:.2f}, d=4 L8: {slopes[4]:.2f}, {elapsed:.1f}s)")


def test_criterion_9_strichartz_endpoints():
    start = time.monotonic()
    rng = np.random.default_rng(9)
    grid = build_radial_grid(4, 26.0, 1300)
    energy_ratios, ratios_28 = [], []
    for _ in range(20):
        v0 = bump_field(grid, rng.uniform(2.0, 5.0), rng.uniform(0.6, 1.5),
                        rng.uniform(0.5, 2.0))
        state = ld.LinearWaveState(grid, v0, ScalarField(grid, np.zeros(grid.n), "even"))
        traj = ld.solve_linear_wave(4, state, 16.0, n_samples=60)
        energy_ratios.append(
            ld.strichartz_sample(traj, ld.AdmissibleTriple(math.inf, 2, 0)))
        ratios_28.append(ld.strichartz_sample(traj, ld.AdmissibleTriple(2, 8, 1)))
    rejected = False
    try:
        ld.AdmissibleTriple(2, math.inf, 1).validate(3)
    except AdmissibilityError:
        rejected = True
    elapsed = time.monotonic() - start
    ok = (max(abs(r - 1.0) for r in energy_ratios) <= 1e-3
          and max(ratios_28) <= 1.0  # frozen first-release envelope
          and rejected)
    _report(9, "energy endpoint ratio 1, (2,8,1) corpus bounded, endpoint rejected",
            ok, f"(|ratio-1|max={max(abs(r - 1) for r in energy_ratios):.1e}, "
            f"(2,8,1)max={max(ratios_28):.3f}, {elapsed:.0f}s)")


def test_criterion_10_littlewood_paley_reconstruction():
    rng = np.random.default_rng(10)
    grid = build_radial_grid(4, 10.0, 400)
    worst = max(
        ld.lp_reconstruction(
            bump_field(grid, rng.uniform(2.0, 4.0), rng.uniform(0.5, 1.5),
                       rng.uniform(0.5, 2.0)), k=1)
        for _ in range(8))
    _report(10, "heat-flow reconstruction residual <= 1e-3 (k=1 corpus)",
            worst <= 1e-3, f"(worst={worst:.1e})")


def test_criterion_11_heat_smoothing_boundedness():
    grid = build_radial_grid(4, 12.0, 120)
    reports = {}
    for amplitude in (0.2, 0.1):
        state = wd.small_bump_wave_data(grid, amplitude).position
        res = run_heat_resolution(state, grid.h**2 / 4, 4.0, 2**0.25)
        reports[amplitude] = smoothing_report(res)
    finite = all(math.isfinite(v) for v in reports[0.2].values())
    linear = all(reports[0.2][k] / reports[0.1][k] == pytest.approx(2.0, rel=0.2)
                 for k in reports[0.2])
    _report(11, "smoothing norms finite and amplitude-linear within 20%",
            finite and linear,
            f"(ratios={[round(reports[0.2][k] / reports[0.1][k], 3) for k in reports[0.2]]})")


def test_criterion_12_gauge_covariance():
    # rotating the limiting frame must leave every gauge residual invariant
    config = wd.PipelineConfig(n=120, r_max=12.0, s_max=3.0)
    theta = 0.6
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    grid = config.grid()
    state = wd.small_bump_wave_data(grid, config.amplitude)
    e_inf = cg.default_limiting_frame(state.position.u_infty)
    rep0, _ = wd.run_coupled_pipeline(config, e_infty=e_inf)
    rep1, _ = wd.run_coupled_pipeline(config, e_infty=rot.T @ e_inf)
    worst = 0.0
    for key in GATE_IDENTITIES:
        denom = max(rep0[key].l2, 1e-6 * rep0[key].scale_l2, 1e-300)
        worst = max(worst, abs(rep0[key].l2 - rep1[key].l2) / denom)
    _report(12, "residual suite invariant under rotation of e_infty", worst <= 1e-9,
            f"(max relative change {worst:.1e})")
