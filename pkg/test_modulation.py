import json

import numpy as np

from cmdnls import soliton
from cmdnls.errors import ConfigError, HierarchyDepthError, NonPositiveScaleError, SmallnessError
from cmdnls.evolution import Trajectory
from cmdnls.grid import SpectralField, inner, make_grid
from cmdnls.modulation import (_test_fields, decompose, extract_parameters, proximity_gap,
                               refined_beta, rescaled_time, residual_report, time_derivative)
from cmdnls.operators import q_field
from cmdnls.profiles import render_q
from harness import expect_close, expect_raises, make_rng, run_tests


TRUE_PARAMS = (1.3, 0.4, 2.5)


def tapered_soliton(grid, lam, gamma, x0):
    # smooth and periodic on the box, exact near the center
    taper = soliton.chi_r(grid.x, 45.0)
    return render_q(grid, lam, gamma, x0) * taper


def test_decompose_recovers_modulation():
    grid = make_grid(4096, 100)
    v = tapered_soliton(grid, *TRUE_PARAMS)
    frame = decompose(v, init=(1.25, 0.35, 2.4))
    expect_close('lambda', frame.lam, TRUE_PARAMS[0], 1e-8)
    expect_close('gamma', frame.gamma, TRUE_PARAMS[1], 1e-8)
    expect_close('x', frame.x_center, TRUE_PARAMS[2], 1e-8)
    fields = _test_fields(grid)
    for k in (1, 2, 3):
        expect_close(f'(eps, Z{k})', inner(frame.eps_tilde, fields[f"Z{k}"], "real"), 0.0, 1e-10)
    if frame.to_dict()["iterations"] != frame.iterations:
        raise Exception('frame dict error on', frame.to_dict())


def test_decompose_failures():
    grid = make_grid(4096, 100)
    v = tapered_soliton(grid, *TRUE_PARAMS)
    expect_raises('negative lambda', NonPositiveScaleError, decompose, v, (-1.0, 0.0, 0.0))
    bump = SpectralField.from_function(grid, lambda x: 2.0 * np.exp(-(x - 20.0) ** 2))
    try:
        decompose(v + bump, init=TRUE_PARAMS)
    except SmallnessError as error:
        if error.params is None or len(error.params) != 3:
            raise Exception('smallness error carries no parameters')
        return
    raise Exception('decompose error: remainder of size ~2 accepted')


def test_soliton_has_vanishing_parameters():
    grid = make_grid(1024, 50)
    frame = decompose(q_field(grid), init=(1.0, 0.0, 0.0))
    if frame.iterations != 0 or frame.residual != 0.0:
        raise Exception('soliton decomposition error on', frame.to_dict())
    params = extract_parameters(frame, 1)
    if len(params.c) != 3 or len(params.beta) != 2 or params.frak_c.shape != (3, 3):
        raise Exception('parameter shape error on', len(params.c), len(params.beta), params.frak_c.shape)
    expect_close('c', np.abs(params.c), 0.0, 0.0)
    expect_close('beta', np.abs(params.beta), 0.0, 0.0)
    expect_close('b1, eta1, nu0, mu0', [params.b1, params.eta1, params.nu0, params.mu0], 0.0, 0.0)
    expect_close('frak_c', np.abs(params.frak_c), 0.0, 1e-12)
    expect_close('proximity gap', proximity_gap(params), 0.0, 1e-12)
    json.dumps(params.to_dict())
    expect_close('refined beta', abs(refined_beta(frame, 1, 1.0, 0.0)), 0.0, 0.0)
    expect_raises('t >= T', ConfigError, refined_beta, frame, 1, 1.0, 1.0)
    expect_raises('L = 0', ConfigError, extract_parameters, frame, 0)
    expect_raises('hierarchy cap', HierarchyDepthError, frame.hierarchy, 8)


def test_time_derivative_and_rescaled_time():
    times = np.linspace(0.0, 1.0, 101)
    derived = time_derivative(np.sin(times), times)
    expect_close('interior derivative', derived[2:-2], np.cos(times[2:-2]), 1e-8)
    expect_close('end derivative', derived[[0, -1]], np.cos(times[[0, -1]]), 1e-3)
    expect_close('s with lambda = 1', rescaled_time(times, np.ones_like(times)), times, 1e-14)
    expect_close('s with lambda = 2', rescaled_time(times, np.full_like(times, 2.0)), times / 4.0, 1e-14)


def test_residual_report_on_stationary_soliton():
    grid = make_grid(1024, 50)
    q = q_field(grid)
    times = [0.0, 0.1, 0.2, 0.3, 0.4]
    traj = Trajectory(grid, times, [q] * 5, [{} for _ in times])
    report = residual_report(traj, 1).to_dict()
    for name, value in report["max_ratios"].items():
        if not value <= 1e-10:
            raise Exception('residual error on', name, ':', value)
    if report["lambda"] != [1.0] * 5:
        raise Exception('report lambda error on', report["lambda"])
    for name, values in report["radiation_gaps"].items():
        expect_close(name, values, 0.0, 1e-12)
    sparse = Trajectory(grid, times[:3], [q] * 3, [{} for _ in range(3)])
    expect_raises('sparse trajectory', ConfigError, residual_report, sparse, 1)


def _boosted_field(grid, theta, x0):
    # exp(i theta x) Q(x - x0), periodic when theta is a multiple of pi / half_length
    return SpectralField.from_function(grid, lambda x: np.exp(1j * theta * x) * soliton.q(x - x0))


def test_check_nu0_reads_boost_direction():
    grid = make_grid(4096, 100)
    q = q_field(grid)
    for a in (0.01, 0.001):
        v = q + SpectralField.from_function(grid, lambda x: 0.5j * a * x * soliton.q(x))
        frame = decompose(v, init=(1.0, 0.0, 0.0))
        params = extract_parameters(frame, 1)
        expect_close(f'nu0 check at a = {a}', params.nu0_check, a, 1e-6 * a)
        expect_close(f'b1 check at a = {a}', params.b1_check, 0.0, 1e-6 * a)
        expect_close(f'eta1 check at a = {a}', params.eta1_check, 0.0, 1e-6 * a)


def test_proximity_gap_is_quadratic():
    grid = make_grid(4096, 100)
    q = q_field(grid)
    gaps = []
    for delta in (0.02, 0.01):
        v = q + SpectralField.from_function(grid, lambda x: 0.5j * delta * x * soliton.q(x))
        frame = decompose(v, init=(1.0, 0.0, 0.0))
        gaps.append(proximity_gap(extract_parameters(frame, 1)))
    if not gaps[0] <= 0.02:
        raise Exception('proximity gap error on', gaps)
    ratio = gaps[0] / gaps[1]
    if not 3.0 <= ratio <= 5.0:
        raise Exception('proximity scaling error on', gaps, ':', ratio)


def test_refined_beta_recovers_beta():
    grid = make_grid(2048, 60)
    q = q_field(grid)
    beta = 0.03 - 0.02j
    frame = decompose(q, init=(1.0, 0.0, 0.0))
    # first hierarchy field pinned to beta y Q
    frame.w_hierarchy = [q, beta * SpectralField.from_function(grid, lambda x: x * soliton.q(x))]
    for radius in (2.0, 5.0, 10.0):
        value = refined_beta(frame, 1, radius ** 2, 0.0)
        expect_close(f'refined beta at R = {radius}', value, beta, 1e-6)


def test_frak_c_is_hermitian():
    grid = make_grid(1024, 50)
    rng = make_rng()
    bump = SpectralField.from_function(
        grid, lambda x: (rng.normal() + 1j * rng.normal()) * 0.01 * np.exp(-(x - 0.3) ** 2))
    frame = decompose(q_field(grid) + bump, init=(1.0, 0.0, 0.0))
    frak = extract_parameters(frame, 1).frak_c
    expect_close('frak_c Hermitian', frak, frak.conj().T, 1e-14)


def test_residual_report_on_boosted_soliton():
    grid = make_grid(4096, 100)
    theta = np.pi / grid.half_length
    times = np.linspace(0.0, 0.8, 9)
    # exact solution exp(i(theta x - theta^2 t)) Q(x - 2 theta t)
    snapshots = [_boosted_field(grid, theta, 2.0 * theta * t) * np.exp(-1j * theta * theta * t)
                 for t in times]
    traj = Trajectory(grid, times.tolist(), snapshots, [{} for _ in times])
    report = residual_report(traj, 1, eta=1.0)
    for name in ("mod0_lambda", "mod0_gamma", "mod0_x"):
        worst = float(np.max(report.residuals[name]))
        if not worst <= 1e-3:
            raise Exception('modulation law error on', name, ':', worst)
    gaps = report.to_dict()["radiation_gaps"]
    if sorted(gaps) != ["radiation_1", "radiation_2"] or any(len(v) != 9 for v in gaps.values()):
        raise Exception('radiation gap layout error on', gaps)


if __name__ == "__main__":
    run_tests([
        test_decompose_recovers_modulation,
        test_decompose_failures,
        test_soliton_has_vanishing_parameters,
        test_time_derivative_and_rescaled_time,
        test_residual_report_on_stationary_soliton,
        test_check_nu0_reads_boost_direction,
        test_proximity_gap_is_quadratic,
        test_refined_beta_recovers_beta,
        test_frak_c_is_hermitian,
        test_residual_report_on_boosted_soliton,
    ])
