import math

import numpy as np
import pytest

from dhasymp.kernels import field_of_gaussian_closed, heat_kernel
from dhasymp.solver import (BlowUpError, CFLError, ConfigurationError, FieldState, GridSpec, SolverConfig,
                            in_valid_window, init_density, poisson_field, run, step, valid_window_end)

G32 = GridSpec(32, 16.0)
G64 = GridSpec(64, 32.0)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        GridSpec(48, 16.0)
    with pytest.raises(ConfigurationError):
        GridSpec(16, 8.0)
    with pytest.raises(ConfigurationError):
        GridSpec(32, 32.0)  # spacing must stay below 1
    g = GridSpec(64, 32.0)
    assert g.spacing == 0.5
    assert g.axis()[32] == 0.0
    assert g.coordinates().shape == (64, 64, 64, 3)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(G32, dt=0.0, t_end=1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(G32, dt=0.1, t_end=1.0, interaction_sign=2)
    with pytest.raises(ConfigurationError):
        SolverConfig(G32, dt=0.1, t_end=1.0, poisson_mode="multigrid")
    with pytest.raises(ConfigurationError):
        SolverConfig(G32, dt=0.1, t_end=1.0, snapshot_times=(0.5, 0.2))


@pytest.mark.parametrize("preset", ["centered_gaussian", "offset_gaussian", "skewed_blob"])
def test_presets_have_requested_mass(preset):
    s = init_density(G64, preset, mass=0.3, width=1.0, offset=(0.5, 0.0, 0.0))
    assert s.mass == pytest.approx(0.3, rel=1e-10)
    assert s.clock_offset == 1.0


def test_preset_errors():
    with pytest.raises(ConfigurationError):
        init_density(G32, "centered_gaussian", mass=-1.0)
    with pytest.raises(ConfigurationError):
        init_density(G64, "donut")
    with pytest.raises(ConfigurationError):
        init_density(G64, "centered_gaussian", width=0.5)  # under-resolved
    with pytest.raises(ConfigurationError):
        init_density(G64, "offset_gaussian", offset=(5.0, 0, 0))  # too close to the boundary
    with pytest.raises(ConfigurationError):
        init_density(G32, "centered_gaussian")  # no width fits a 32-point box


def test_free_space_field_matches_gauss_law():
    # pointwise relative agreement at radii in [1, L/4]
    g = GridSpec(128, 32.0)
    s = init_density(g, "centered_gaussian", mass=1.0, width=1.0)
    E = poisson_field(s)
    exact = field_of_gaussian_closed(1.0, g.coordinates())
    r = g.radius()
    band = (r >= 1.0) & (r <= 8.0)
    rel = np.linalg.norm(E - exact, axis=-1)[band] / np.linalg.norm(exact, axis=-1)[band]
    assert rel.max() < 1e-4


def test_torus_field_is_periodic_and_neutral():
    s = init_density(G64, "centered_gaussian", mass=1.0, width=1.0)
    E = poisson_field(s, "torus_neutralized")
    # the torus field of a centred Gaussian is odd and sums to zero
    assert abs(E[..., 0].sum()) < 1e-12
    exact = field_of_gaussian_closed(1.0, G64.coordinates())
    assert np.max(np.abs(E - exact)) < 0.2 * np.max(np.abs(exact))
    with pytest.raises(ConfigurationError):
        poisson_field(s, "bogus")


def test_heat_only_semigroup_on_grid():
    # G(t0) evolved by t equals G(t0 + t), up to periodic images
    s = init_density(G64, "centered_gaussian", mass=1.0, width=1.0)
    cfg = SolverConfig(G64, dt=0.1, t_end=0.5, interaction_sign=0)
    out = run(cfg, s).snapshots[-1]
    exact = heat_kernel(1.5, G64.coordinates())
    assert np.max(np.abs(out.density - exact)) < 1e-8
    assert out.time == pytest.approx(0.5)
    assert out.clock == pytest.approx(1.5)


@pytest.mark.parametrize("mode", ["free_space_padded", "torus_neutralized"])
@pytest.mark.parametrize("sign", [1, -1])
def test_mass_conserved(mode, sign):
    s = init_density(G64, "skewed_blob", mass=1.0, width=1.0)
    cfg = SolverConfig(G64, dt=0.05, t_end=0.1, interaction_sign=sign, poisson_mode=mode)
    res = run(cfg, s)
    trace = np.array(res.manifest["mass_trace"])
    assert np.max(np.abs(trace - trace[0])) < 1e-13


def test_repulsion_spreads_attraction_concentrates():
    s = init_density(G64, "centered_gaussian", mass=20.0, width=1.0)
    peaks = {}
    for sign in (-1, 0, 1):
        cfg = SolverConfig(G64, dt=0.02, t_end=0.1, interaction_sign=sign, poisson_mode="torus_neutralized")
        peaks[sign] = run(cfg, s).snapshots[-1].density.max()
    assert peaks[1] < peaks[0] < peaks[-1]


def test_run_is_deterministic():
    s = init_density(G64, "offset_gaussian", mass=0.5, width=1.0, offset=(1.0, 0.5, 0.0))
    cfg = SolverConfig(G64, dt=0.05, t_end=0.1)
    a = run(cfg, s).snapshots[-1].density
    b = run(cfg, s).snapshots[-1].density
    assert a.tobytes() == b.tobytes()


def test_step_matches_run():
    s = init_density(G64, "offset_gaussian", mass=0.5, width=1.0, offset=(1.0, 0.0, 0.0))
    cfg = SolverConfig(G64, dt=0.05, t_end=0.1)
    manual = step(step(s, cfg), cfg)
    np.testing.assert_allclose(manual.density, run(cfg, s).snapshots[-1].density, atol=1e-15)


def test_snapshot_times_snap_to_steps():
    s = init_density(G64, "centered_gaussian", mass=0.1, width=1.0)
    cfg = SolverConfig(G64, dt=0.1, t_end=0.5, interaction_sign=0, snapshot_times=(0.18, 0.3, 0.9))
    res = run(cfg, s)
    times = [round(x.time, 12) for x in res.snapshots]
    assert times == [0.0, 0.2, 0.3, 0.5]
    assert res.manifest["steps"] == 5


def test_final_time_hit_exactly():
    s = init_density(G64, "centered_gaussian", mass=0.1, width=1.0)
    res = run(SolverConfig(G64, dt=0.3, t_end=1.0, interaction_sign=0), s)
    assert res.manifest["steps"] == 4
    assert res.snapshots[-1].time == pytest.approx(1.0, abs=1e-14)


def test_cfl_violation():
    s = init_density(G64, "centered_gaussian", mass=2000.0, width=1.0)
    with pytest.raises(CFLError):
        run(SolverConfig(G64, dt=0.5, t_end=1.0, poisson_mode="torus_neutralized"), s)


def test_blow_up_reports_partial_result():
    s = init_density(G64, "centered_gaussian", mass=1.0, width=1.0)
    bad = FieldState(0.0, s.density.copy(), G64, clock_offset=1.0)
    bad.density[3, 3, 3] = np.nan
    with pytest.raises(BlowUpError) as info:
        run(SolverConfig(G64, dt=0.1, t_end=0.3, poisson_mode="torus_neutralized"), bad)
    assert info.value.step_index == 1
    assert len(info.value.partial.snapshots) == 1


def test_initial_grid_mismatch():
    s = init_density(GridSpec(64, 32.0), "centered_gaussian")
    with pytest.raises(ConfigurationError):
        run(SolverConfig(G32, dt=0.1, t_end=0.1), s)


def test_valid_window():
    g = GridSpec(64, 32.0)
    end = valid_window_end(g, 1.0)
    assert end == pytest.approx((32 / 24) ** 2 - 1)
    inside = FieldState(end - 1e-9, np.zeros((64,) * 3), g, clock_offset=1.0)
    outside = FieldState(end + 1e-9, np.zeros((64,) * 3), g, clock_offset=1.0)
    assert in_valid_window(inside) and not in_valid_window(outside)
    assert 6 * math.sqrt(end + 1.0) == pytest.approx(8.0)
