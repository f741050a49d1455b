import math

import numpy as np
import pandas as pd
import pytest

from dynamics_engine import (
    IntegratorSettings,
    Pulse,
    TimeGrid,
    evolve_driven,
    evolve_emission,
    evolve_full,
    trajectory_to_frame,
)
from errors import ConfigValidationError, DataFileError
from metrics import gaussian_pulse, success_rate
from node_model import NodeConfig
from spectral_engine import analytic_emission
from validation import direction_symmetry_defect


def test_emission_conserves_probability(optimal_n3, default_grid):
    traj = evolve_emission(optimal_n3, default_grid)
    assert traj.balance_defect(1.0) < 1e-8
    assert traj.waveguide_cumulative[-1] == pytest.approx(1.0, abs=1e-6)
    assert traj.warnings == ()


def test_lossy_emission_balance_includes_leaks(optimal_n3, default_grid):
    traj = evolve_emission(optimal_n3.replace(gamma0=0.05, gamma_c=0.02), default_grid)
    assert traj.balance_defect(1.0) < 1e-8
    assert traj.leak_integrals["gamma0"][-1] > 0
    assert traj.leak_integrals["gamma_c"][-1] > 0
    assert traj.waveguide_cumulative[-1] < 0.99


@pytest.mark.parametrize("ratios", [(2.0,), (1.2, 3.5), (1.88, 2.94, 7.92)])
def test_ode_matches_eigenmode_pulse(ratios, default_grid):
    config = NodeConfig.from_ratios(ratios)
    ode = evolve_emission(config, default_grid).emitted.samples
    analytic = analytic_emission(config, default_grid).pulse.samples
    assert np.max(np.abs(ode - analytic)) < 1e-6


def test_bad_cavity_limit_decay_rate():
    kappa = 100.0
    traj = evolve_emission(NodeConfig.from_ratios((kappa,)), TimeGrid(0.0, 20.0, 2048))
    window = traj.times > 2.0
    slope = np.polyfit(traj.times[window], np.log(traj.p_tls[window]), 1)[0]
    assert -slope == pytest.approx(8.0 / kappa, rel=0.05)


def test_short_window_warns(optimal_n3):
    traj = evolve_emission(optimal_n3, TimeGrid(0.0, 2.0, 256))
    assert traj.warnings
    assert "window too short" in traj.warnings[0]


def test_rk45_is_selectable(optimal_n3, coarse_grid):
    dop = evolve_emission(optimal_n3, coarse_grid)
    rk = evolve_emission(optimal_n3, coarse_grid, IntegratorSettings(method="RK45"))
    assert np.max(np.abs(dop.c0 - rk.c0)) < 1e-6


def test_driven_response_is_linear(optimal_n3):
    pulse = gaussian_pulse(TimeGrid(0.0, 20.0, 2048), width=1.5)
    full = evolve_driven(optimal_n3, pulse)
    half = evolve_driven(optimal_n3, pulse.scaled(0.5))
    assert np.max(np.abs(half.amplitudes - 0.5 * full.amplitudes)) < 1e-8


def test_driven_balance_and_default_window(optimal_n3):
    pulse = gaussian_pulse(TimeGrid(0.0, 20.0, 2048), width=1.5)
    traj = evolve_driven(optimal_n3, pulse)
    assert traj.grid.t_end == pytest.approx(40.0)
    assert traj.grid.dt == pytest.approx(pulse.grid.dt)
    assert traj.balance_defect(0.0) < 1e-8
    assert traj.input_cumulative[-1] == pytest.approx(pulse.norm, abs=1e-6)
    # parabolic refinement may sit slightly above the largest sample
    assert traj.p_tls.max() <= traj.peak_population <= traj.p_tls.max() + 1e-5


def test_time_reversed_emission_is_absorbed(optimal_n3):
    grid = TimeGrid(0.0, 30.0, 4096)
    emitted = analytic_emission(optimal_n3, grid).pulse
    received = evolve_driven(optimal_n3, emitted.time_reversed_conjugate())
    F, t_peak = success_rate(received)
    assert F >= 0.999
    assert t_peak == pytest.approx(30.0, abs=0.5)


def test_oversized_pulse_is_rejected(optimal_n3):
    pulse = gaussian_pulse(TimeGrid(0.0, 20.0, 512)).scaled(1.1)
    with pytest.raises(ConfigValidationError):
        evolve_driven(optimal_n3, pulse)


def test_full_model_reduces_without_backscatter(optimal_n3, default_grid):
    reduced = evolve_emission(optimal_n3, default_grid)
    full = evolve_full(optimal_n3, default_grid)
    assert np.max(np.abs(full.c0 - reduced.c0)) < 1e-8
    assert np.allclose(full.emitted.samples, full.emitted_minus.samples, atol=1e-10)
    total = np.abs(full.emitted.samples) ** 2 + np.abs(full.emitted_minus.samples) ** 2
    assert np.max(np.abs(total - np.abs(reduced.emitted.samples) ** 2)) < 1e-8

    a_rings, b_rings = full.amplitudes[1:4], full.amplitudes[4:]
    assert np.max(np.abs(a_rings - b_rings)) < 1e-10
    assert np.max(np.abs(math.sqrt(2.0) * a_rings - reduced.rings)) < 1e-8
    assert direction_symmetry_defect(full, reduced) < 1e-8


def test_uniform_backscatter_acts_as_detuning(optimal_n3, default_grid):
    h = 0.4
    full = evolve_full(optimal_n3.replace(backscatter=[h] * 3), default_grid)
    detuned = evolve_emission(optimal_n3.replace(deltas=[h] * 3), default_grid)
    assert np.max(np.abs(full.c0 - detuned.c0)) < 1e-8
    assert full.balance_defect(1.0) < 1e-8


def test_full_model_directional_drive(optimal_n3):
    pulse = gaussian_pulse(TimeGrid(0.0, 20.0, 1024), width=1.5)
    plus = evolve_full(optimal_n3, drive_direction="plus", incoming=pulse)
    minus = evolve_full(optimal_n3, drive_direction="minus", incoming=pulse)
    assert np.allclose(plus.p_tls, minus.p_tls, atol=1e-9)
    assert plus.balance_defect(0.0) < 1e-8
    with pytest.raises(ConfigValidationError):
        evolve_full(optimal_n3, drive_direction="sideways", incoming=pulse)
    with pytest.raises(ConfigValidationError):
        evolve_full(optimal_n3, drive_direction="plus")


def test_pulse_helpers():
    grid = TimeGrid(0.0, 10.0, 101)
    pulse = gaussian_pulse(grid, width=1.0, center=3.0)
    shifted = pulse.shifted(2.5)
    assert shifted.grid.t_start == 2.5
    assert np.array_equal(shifted.samples, pulse.samples)
    assert np.array_equal(pulse.time_reversed_conjugate().time_reversed_conjugate().samples, pulse.samples)
    assert pulse.phase_rotated(0.7).norm == pytest.approx(pulse.norm)
    assert pulse.scaled(2.0).normalized().norm == pytest.approx(1.0)

    absolute = pulse.to_absolute(1e9)
    assert absolute.grid.t_end == pytest.approx(1e-8)
    assert absolute.norm == pytest.approx(pulse.norm)


def test_pulse_from_frame():
    frame = pd.DataFrame({"t": [0.0, 0.5, 1.0], "re_e": [0.0, 1.0, 0.0], "im_e": [0.0, 0.5, 0.0]})
    pulse = Pulse.from_frame(frame)
    assert pulse.samples[1] == 1.0 + 0.5j
    with pytest.raises(DataFileError):
        Pulse.from_frame(frame.drop(columns=["im_e"]))
    with pytest.raises(DataFileError):
        Pulse.from_frame(frame.assign(t=[0.0, 0.2, 1.0]))


def test_time_grid_validation():
    with pytest.raises(ConfigValidationError):
        TimeGrid(0.0, -1.0, 10)
    with pytest.raises(ConfigValidationError):
        TimeGrid(0.0, 1.0, 1)
    extended = TimeGrid(0.0, 20.0, 4096).extended(2)
    assert extended.n_samples == 8191
    assert extended.dt == pytest.approx(TimeGrid().dt)


def test_trajectory_frame_columns(optimal_n3, coarse_grid):
    frame = trajectory_to_frame(evolve_emission(optimal_n3, coarse_grid))
    assert list(frame.columns[:3]) == ["t", "re_c0", "im_c0"]
    assert {"re_c3", "im_c3", "re_e", "im_e", "p_tls", "p_waveguide_cum"} <= set(frame.columns)

    full = trajectory_to_frame(evolve_full(optimal_n3, coarse_grid))
    assert {"re_a1", "im_b3", "re_e_plus", "im_e_minus"} <= set(full.columns)
    assert math.isclose(full["p_tls"].iloc[0], 1.0)
