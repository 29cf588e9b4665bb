import numpy as np

from cmdnls import soliton
from cmdnls.errors import ConfigError
from cmdnls.grid import SpectralField, inner, make_grid
from cmdnls.operators import q_field
from cmdnls.profiles import (ProfileName, ProfileTag, SymmetryKind, SymmetrySpec, apply_symmetry,
                             gauge_forward, gauge_inverse, gauge_phase, modulate,
                             pseudo_conformal_residual, render, render_q, stationary_residual,
                             transversality_matrix, z_constants)
from harness import expect_close, expect_raises, run_tests


def gaussian(grid):
    return SpectralField.from_function(grid, lambda x: np.exp(-x * x) + 0j)


def test_render_modulated_soliton():
    grid = make_grid(256, 20)
    v = render_q(grid, lam=2.0, gamma=0.5, x0=1.0)
    x = grid.x
    correct = np.exp(0.5j) * 2.0 ** -0.5 * np.sqrt(2.0) / np.sqrt(1.0 + ((x - 1.0) / 2.0) ** 2)
    expect_close('modulated Q', v.values, correct, 1e-14)
    expect_raises('lam <= 0', ConfigError, render_q, grid, 0.0)
    expect_raises('S_explicit at t = 0', ConfigError, render, ProfileTag(ProfileName.S_explicit), grid)


def test_render_profiles_with_params():
    grid = make_grid(256, 20)
    x = grid.x
    t = render(ProfileTag(ProfileName.T, params=(0.2, 0.3, 0.4)), grid)
    q = soliton.q(x)
    correct = 0.1j * x * q - 0.075j * x * x * q - 0.1 * (1.0 + x * x) * q
    expect_close('T profile', t.values, correct, 1e-14)
    p = render(ProfileTag(ProfileName.P, index=1, params=(0.5, 2.0)), grid)
    expect_close('P profile', p.values, 0.5 * q + 2.0 * x * q, 1e-14)
    s = render(ProfileTag(ProfileName.S_explicit, params=(1.0,)), grid)
    expect_close('S(1) modulus', np.abs(s.values), q, 1e-14)


def test_modulate_gaussian():
    grid = make_grid(512, 20)
    moved = modulate(gaussian(grid), 1.3, 0.4, 0.5)
    x = grid.x
    correct = np.exp(0.4j) * 1.3 ** -0.5 * np.exp(-((x - 0.5) / 1.3) ** 2)
    expect_close('modulate', moved.values, correct, 1e-10)
    expect_raises('lam <= 0', ConfigError, modulate, gaussian(grid), -1.0, 0.0, 0.0)


def test_symmetries():
    grid = make_grid(512, 20)
    f = gaussian(grid)
    x = grid.x
    phased = apply_symmetry(f, SymmetrySpec(SymmetryKind.phase, 0.7))
    expect_close('phase', phased.values, np.exp(0.7j) * f.values, 1e-15)
    boosted = apply_symmetry(f, SymmetrySpec(SymmetryKind.galilean, 0.5), t=0.2)
    correct = np.exp(-(x - 0.2) ** 2) * np.exp(0.5j * x - 0.05j)
    expect_close('galilean', boosted.values, correct, 1e-10)
    scaled = apply_symmetry(f, SymmetrySpec(SymmetryKind.scale, 2.0))
    expect_close('scale', scaled.values, 2.0 ** -0.5 * np.exp(-(x / 2.0) ** 2), 1e-10)
    expect_raises('pseudo-conformal at t = 0', ConfigError, apply_symmetry, f,
                  SymmetrySpec(SymmetryKind.pseudo_conformal))


def test_gauge_round_trip():
    grid = make_grid(512, 20)
    f = SpectralField.from_function(grid, lambda x: 0.8 * np.exp(-x * x) * (1.0 + 0.3j * x))
    back = gauge_inverse(gauge_forward(f))
    expect_close('gauge round trip', back.values, f.values, 1e-13)
    g = gaussian(grid)
    phase = gauge_phase(g)
    # half the mass of e^{-x^2} is sqrt(pi / 2) / 2
    expect_close('gauge phase at the right edge', phase[-1], 0.5 * np.sqrt(np.pi / 2.0), 1e-10)
    if not np.allclose(np.abs(gauge_forward(f).values), np.abs(f.values), atol=1e-15):
        raise Exception('gauge modulus error')


def test_soliton_is_stationary():
    grid = make_grid(4096, 100)
    residual = stationary_residual(q_field(grid), 0.5 * grid.half_length)
    if residual > 10.0 / grid.half_length:
        raise Exception('stationary residual error on', residual)


def test_pseudo_conformal_solution():
    grid = make_grid(4096, 100)
    residual = pseudo_conformal_residual(1.0, grid, 10.0)
    if residual > 1e-3:
        raise Exception('pseudo-conformal residual error on', residual)
    expect_raises('window too wide', ConfigError, pseudo_conformal_residual, 1.0, grid, 60.0)
    expect_raises('t <= 0', ConfigError, pseudo_conformal_residual, 0.0, grid, 10.0)


def test_transversality_parity_zeros():
    grid = make_grid(2048, 50)
    matrix, q_products = transversality_matrix(grid)
    if matrix.shape != (6, 6) or q_products.shape != (6,):
        raise Exception('transversality shape error on', matrix.shape, q_products.shape)
    # real/imaginary and even/odd mismatches vanish identically
    for j, k in [(1, 0), (2, 0), (0, 2), (1, 2), (0, 1), (2, 1)]:
        expect_close(f'(K{j + 1}, Z{k + 1})', matrix[j, k], 0.0, 1e-12)
    off_diagonal = matrix - np.diag(np.diag(matrix))
    if not np.max(np.abs(off_diagonal)) <= 1e-8 * np.max(np.abs(matrix)):
        raise Exception('transversality off-diagonal error on', matrix)
    expect_close('(Q, Z_k)', q_products, 0.0, 1e-8)
    expect_raises('box below the test support', ConfigError, transversality_matrix, make_grid(64, 1.5))
    if not np.all(np.isfinite(z_constants())):
        raise Exception('z constants error on', z_constants())


def test_radiation_cutoff_normalization():
    grid = make_grid(4096, 50)
    q = q_field(grid)
    z_c = render(ProfileTag(ProfileName.Z_c), grid)
    weighted = SpectralField(grid, (1.0 + grid.x ** 2) * q.values)
    expect_close('(Q, Z_c)', inner(q, z_c, "real"), 1.0, 1e-6)
    expect_close('((1+y^2)Q, Z_c)', inner(weighted, z_c, "real"), 0.0, 1e-6)
    z_c2 = render(ProfileTag(ProfileName.Z_c2), grid)
    expect_close('(Q, Z_c2)', inner(q, z_c2, "real"), 0.0, 1e-6)
    expect_close('((1+y^2)Q, Z_c2)', inner(weighted, z_c2, "real"), 1.0, 1e-6)


if __name__ == "__main__":
    run_tests([
        test_render_modulated_soliton,
        test_render_profiles_with_params,
        test_modulate_gaussian,
        test_symmetries,
        test_gauge_round_trip,
        test_soliton_is_stationary,
        test_pseudo_conformal_solution,
        test_transversality_parity_zeros,
        test_radiation_cutoff_normalization,
    ])
