import os
import tempfile

import numpy as np

from cmdnls.errors import ConfigError
from cmdnls.evolution import (Equation, Etdrk4Stepper, EvolveConfig, Scheme, Trajectory,
                              detect_blowup_window, evolve, gauge_cross_check, monitor, step_gauged)
from cmdnls.grid import SpectralField, dealias_mask, make_grid
from cmdnls.operators import q_field
from cmdnls.profiles import free_evolution
from harness import expect_close, expect_raises, run_tests


def small_gaussian(grid, amplitude=0.5):
    return SpectralField.from_function(grid, lambda x: amplitude * np.exp(-x * x) + 0j)


def test_config_validation():
    EvolveConfig().validate()
    bad = [
        dict(dt=0.0),
        dict(t_end=-1.0),
        dict(dealias=0.4),
        dict(monitor_stride=0),
        dict(equation="original", scheme="strang_split"),
    ]
    for kwargs in bad:
        expect_raises(f'EvolveConfig({kwargs})', ConfigError, EvolveConfig(**kwargs).validate)
    expect_raises('unknown scheme', ValueError, EvolveConfig, scheme="leapfrog")
    cfg = EvolveConfig(equation="original", scheme="etdrk4", dt=1e-3, t_end=0.1)
    if cfg.n_steps() != 100 or cfg.to_dict()["scheme"] != "etdrk4":
        raise Exception('EvolveConfig error on', cfg.to_dict())


def test_strang_step_keeps_soliton():
    grid = make_grid(4096, 100)
    q = q_field(grid)
    dt = 1e-3
    moved = step_gauged(q, dt)
    gap = (moved - q).sup()
    if gap > dt * 10.0 / grid.half_length:
        raise Exception('soliton step error on', gap)


def test_strang_step_dealiases_rotated_field():
    grid = make_grid(256, 20)
    high = np.argmax(np.abs(grid.k) > 0.9 * grid.k_max)
    coefficients = small_gaussian(grid).fourier.copy()
    coefficients[high] += 0.05 * coefficients[0]
    v = SpectralField.from_fourier(grid, coefficients)
    outside = dealias_mask(grid, 2.0 / 3.0) == 0.0
    stepped = step_gauged(v, 1e-3, dealias=2.0 / 3.0)
    scale = np.max(np.abs(coefficients))
    leak = np.max(np.abs(stepped.fourier[outside]))
    if leak > 1e-13 * scale:
        raise Exception('dealias error on', leak)
    raw = step_gauged(v, 1e-3, dealias=1.0)
    if not np.max(np.abs(raw.fourier[outside])) > 1e-4 * scale:
        raise Exception('undealiased step lost its high modes')


def test_strang_split_conserves_mass():
    grid = make_grid(512, 20)
    cfg = EvolveConfig(dt=1e-4, t_end=0.01, monitor_stride=50, hierarchy_depth=1)
    traj = evolve(small_gaussian(grid), cfg)
    if len(traj.times) != 3 or abs(traj.times[-1] - 0.01) > 1e-12:
        raise Exception('trajectory sampling error on', traj.times)
    mass = traj.series("M")
    expect_close('mass drift', mass - mass[0], 0.0, 1e-12 * mass[0])
    energy = traj.series("E")
    expect_close('energy drift', energy - energy[0], 0.0, 1e-5 * (mass[0] + abs(energy[0])))
    if len(traj.invariants[0]["I"]) != 2:
        raise Exception('ladder depth error on', traj.invariants[0]["I"])


def test_etdrk4_linear_part_is_exact():
    grid = make_grid(256, 20)
    f = small_gaussian(grid, 1.0)
    stepper = Etdrk4Stepper(grid, 1e-2, lambda u: SpectralField.zeros(u.grid))
    expect_close('ETDRK4 free step', stepper.step(f).values, free_evolution(f, 1e-2).values, 1e-13)


def test_gauge_cross_check():
    grid = make_grid(1024, 50)
    gap = gauge_cross_check(small_gaussian(grid), 5e-4, 0.2, window=10.0)
    if gap > 1e-4:
        raise Exception('gauged vs original evolution error on', gap)


def test_monitor_fields():
    grid = make_grid(256, 20)
    entry = monitor(small_gaussian(grid), 2)
    for key in ("M", "E", "E_D", "P", "H1", "I"):
        if key not in entry:
            raise Exception('monitor error: missing', key)
    expect_close('mass', entry["M"], 0.25 * np.sqrt(np.pi / 2.0), 1e-12)
    expect_close('momentum of a real field', entry["P"], 0.0, 1e-12)
    original = monitor(small_gaussian(grid), 2, Equation.original)
    expect_close('mass is gauge invariant', original["M"], entry["M"], 1e-14)


def test_trajectory_save_and_load():
    grid = make_grid(64, 10)
    traj = evolve(small_gaussian(grid), EvolveConfig(dt=1e-3, t_end=0.004, monitor_stride=2,
                                                      hierarchy_depth=0))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "traj")
        traj.save(path)
        loaded = Trajectory.load(path)
    if loaded.times != traj.times or loaded.config["scheme"] != Scheme.strang_split.value:
        raise Exception('trajectory load error on', loaded.times, loaded.config)
    for a, b in zip(loaded.snapshots, traj.snapshots):
        if not np.array_equal(a.values, b.values):
            raise Exception('trajectory snapshot error')
    expect_raises('times must increase', ConfigError, traj.append, 0.0, traj.snapshots[0],
                  traj.invariants[0])


def test_detect_blowup_window():
    traj = Trajectory(grid=None)
    for t in np.linspace(0.0, 0.9, 40):
        traj.append(t, None, {"H1": (1.0 - t) ** -1.0})
    window = detect_blowup_window(traj)
    if window is None:
        raise Exception('blow-up window error: none found')
    expect_close('T estimate', window["T_estimate"], 1.0, 1e-3)
    expect_close('rate', window["rho"], 1.0, 1e-2)
    flat = Trajectory(grid=None)
    for t in np.linspace(0.0, 0.9, 40):
        flat.append(t, None, {"H1": 1.0})
    if detect_blowup_window(flat) is not None:
        raise Exception('blow-up window error on a flat series')

def _strang_run(v, dt, t_end):
    for _ in range(int(round(t_end / dt))):
        v = step_gauged(v, dt)
    return v


def test_strang_split_is_second_order():
    grid = make_grid(512, 20)
    v0 = SpectralField.from_function(grid, lambda x: np.exp(-x * x) * (1.0 + 0.3j * x))
    coarse, middle, fine = (_strang_run(v0, dt, 0.1) for dt in (4e-3, 2e-3, 1e-3))
    factor = (coarse - middle).norm() / (middle - fine).norm()
    if abs(factor - 4.0) > 0.5:
        raise Exception('Strang convergence factor error on', factor, ', correct: 4')


def test_strang_split_is_time_reversible():
    grid = make_grid(512, 20)
    v0 = SpectralField.from_function(grid, lambda x: np.exp(-x * x) * (1.0 + 0.3j * x))
    forward = _strang_run(v0, 1e-3, 0.05)
    back = _strang_run(forward.conj(), 1e-3, 0.05).conj()
    gap = (back - v0).sup(grid.half_length)
    if gap > 1e-10:
        raise Exception('time reversal error on', gap)


def test_ladder_is_conserved():
    grid = make_grid(1024, 30)
    cfg = EvolveConfig(dt=1e-4, t_end=0.5, monitor_stride=500, hierarchy_depth=3)
    traj = evolve(small_gaussian(grid), cfg)
    ladder = np.array([entry["I"] for entry in traj.invariants])
    scale = abs(ladder[0, 2])
    expect_close('I_2 drift', ladder[:, 2] - ladder[0, 2], 0.0, 1e-4 * scale)
    expect_close('I_3 drift', ladder[:, 3] - ladder[0, 3], 0.0, 1e-4 * scale)
    # D_v is skew, so I_2 = -2 E_D
    expect_close('I_2 against E_D', ladder[0, 2], -2.0 * traj.invariants[0]["E_D"], 1e-6 * scale)


def test_soliton_perturbation_conserves_mass_and_energy():
    grid = make_grid(4096, 100)
    x = grid.x
    v0 = q_field(grid) + SpectralField(grid, 0.01 * np.exp(-x * x))
    cfg = EvolveConfig(dt=1e-4, t_end=0.5, monitor_stride=1000, hierarchy_depth=0)
    traj = evolve(v0, cfg)
    if abs(traj.times[-1] - 0.5) > 1e-12:
        raise Exception('final time error on', traj.times[-1])
    mass = traj.series("M")
    energy = traj.series("E")
    expect_close('mass drift', mass - mass[0], 0.0, 1e-6 * mass[0])
    expect_close('energy drift', energy - energy[0], 0.0, 1e-6 * (mass[0] + abs(energy[0])))



if __name__ == "__main__":
    run_tests([
        test_config_validation,
        test_strang_step_keeps_soliton,
        test_strang_step_dealiases_rotated_field,
        test_strang_split_conserves_mass,
        test_etdrk4_linear_part_is_exact,
        test_gauge_cross_check,
        test_monitor_fields,
        test_trajectory_save_and_load,
        test_detect_blowup_window,
        test_strang_split_is_second_order,
        test_strang_split_is_time_reversible,
        test_ladder_is_conserved,
        test_soliton_perturbation_conserves_mass_and_energy,
    ])
