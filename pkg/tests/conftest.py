import numpy as np
import pytest

from hypwave import caloric_gauge as cg
from hypwave import heat_flow as hf
from hypwave import wave_dynamics as wd
from hypwave.geometry import build_radial_grid


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def small_pipeline():
    """A light coupled run (coarse grid, short ladder) shared by gauge tests."""
    config = wd.PipelineConfig(n=120, r_max=12.0, s_max=3.0)
    grid = config.grid()
    state = wd.small_bump_wave_data(grid, config.amplitude)
    gap = config.slice_factor * grid.h
    slices = [state.copy()]
    cur = state.copy()
    for _ in range(2):
        for _ in range(2):
            cur = wd.step_wave(cur, gap / 2)
        slices.append(cur.copy())
    e_inf = cg.default_limiting_frame(state.position.u_infty)
    gauged = []
    for sl in slices:
        res = hf.run_heat_resolution(sl.position, grid.h**2 / 4, config.s_max,
                                     config.rho, bracket=1.0 + 0.2 * grid.h)
        frames = cg.transport_frame(res, cg.initial_frame(res.states[0]))
        frames = cg.apply_limiting_gauge(res, frames, e_inf)
        gauged.append((res, frames))
    stencil = cg.TimeStencil(gauged[0], gauged[2], gap)
    gd = cg.compute_gauge_data(gauged[1][0], gauged[1][1], stencil)
    return {"config": config, "grid": grid, "slices": slices, "gauged": gauged,
            "gd": gd, "e_inf": e_inf, "gap": gap}


@pytest.fixture(scope="session")
def h4_grid():
    return build_radial_grid(4, 8.0, 400)


@pytest.fixture(scope="session")
def h2_grid():
    return build_radial_grid(2, 25.0, 2500)
