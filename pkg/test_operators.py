import numpy as np

from cmdnls.errors import ConfigError
from cmdnls.grid import SpectralField, derivative, hilbert, inner, make_grid
from cmdnls.operators import (LINE, PERIODIC, Identity, OperatorName, OperatorTag, apply, b_q, cal_b,
                              cal_l, commutator_deviation, commutator_direct, compose_identity_check,
                              conserved_ladder, density_hilbert, hierarchy, hilbert_commutator,
                              identity_report, q_field, tail_closed_integral)
from cmdnls.profiles import check_kernel, growing_kernel_members, kernel_elements
from harness import expect_close, expect_raises, run_tests


def test_apply_dispatch():
    grid = make_grid(256, 20)
    f = SpectralField.from_function(grid, lambda x: np.exp(-x * x) + 0j)
    direct = cal_l(2, f)
    dispatched = apply(OperatorTag(OperatorName.calL, j=2), f)
    expect_close('apply calL', dispatched.values, direct.values, 0.0)
    expect_raises('based operator without base', ConfigError, apply, OperatorTag(OperatorName.L_v), f)
    expect_raises('ordered operator without j', ConfigError, apply, OperatorTag(OperatorName.calB), f)
    expect_raises('order zero', ConfigError, cal_b, 0, f)
    expect_raises('unknown operator', ValueError, apply, OperatorTag("nothing"), f)


def test_density_hilbert_closed_form():
    grid = make_grid(4096, 100)
    q = q_field(grid)
    closed = density_hilbert(q)
    spectral = hilbert(q.abs2())
    gap = (closed - spectral).sup()
    if gap > 10.0 / grid.half_length:
        raise Exception('H(Q^2) error on', gap, ', tol:', 10.0 / grid.half_length)


def test_tail_closed_integral():
    grid = make_grid(1024, 50)
    q = q_field(grid)
    expect_close('int Q^2', tail_closed_integral(q * q), 2.0 * np.pi, 1e-4)


def test_kernel_of_linearized_operators():
    grid = make_grid(4096, 100)
    for j in (1, 2, 3):
        report = check_kernel(j, grid)
        residuals = report["residuals"]
        expected = {"iQ", "LambdaQ", "Q_y", "iyQ"} | set(growing_kernel_members(j))
        if set(residuals) != expected:
            raise Exception('kernel members error on', j, ':', sorted(residuals))
        for name, residual in residuals.items():
            if residual > 1e-5:
                raise Exception('L_j kernel error on', j, name, ':', residual)
        if report["filtered"] != (j >= 2):
            raise Exception('filter flag error on', j)
    if report["window"] != 50.0:
        raise Exception('kernel window error on', report["window"])
    expect_raises('order zero', ConfigError, check_kernel, 0, grid)


def test_growing_kernel_members():
    if growing_kernel_members(1):
        raise Exception('growing members error on j = 1')
    members = growing_kernel_members(3)
    if sorted(members) != ["iy^2Q", "iy^3Q", "y^0(1+y^2)Q", "y^1(1+y^2)Q"]:
        raise Exception('growing members error on', sorted(members))
    y = np.array([-3.0, 0.5, 2.0])
    expect_close('y(1+y^2)Q', members["y^1(1+y^2)Q"](y), np.sqrt(2.0) * y * np.sqrt(1.0 + y * y), 1e-12)
    expect_close('iy^3Q', members["iy^3Q"](y), 1j * np.sqrt(2.0) * y ** 3 / np.sqrt(1.0 + y * y), 1e-12)


def test_kernel_elements_names():
    grid = make_grid(64, 10)
    elements = kernel_elements(grid)
    for name in ("K1", "K6", "Kring3", "iQ", "LambdaQ", "Q_y", "iyQ"):
        if name not in elements:
            raise Exception('kernel element error: missing', name)
    expect_close('iQ is K2', elements["iQ"].values, elements["K2"].values, 0.0)


def test_hierarchy_and_ladder():
    grid = make_grid(256, 20)
    v = SpectralField.from_function(grid, lambda x: np.exp(-x * x) * (1.0 + 0.2j * x))
    fields = hierarchy(v, 3)
    if len(fields) != 4 or fields[0] is not v:
        raise Exception('hierarchy length error on', len(fields))
    ladder = conserved_ladder(v, 2)
    expect_close('I_0', ladder.I[0], inner(v, v, "real"), 1e-14)
    expect_close('E_1', ladder.E[1], inner(fields[1], fields[1], "real"), 1e-12)
    expect_raises('negative depth', ConfigError, hierarchy, v, -1)


def test_identity_report_layout():
    grid = make_grid(256, 20)
    f = SpectralField.from_function(grid, lambda x: np.exp(-x * x) + 0j)
    report = identity_report(Identity.BQ_BQstar, f)
    if report["identity"] != "BQ_BQstar" or report["window"] != 10.0:
        raise Exception('identity report error on', report)
    if not np.isfinite(report["residual"]):
        raise Exception('identity residual error on', report["residual"])
    expect_raises('unknown identity', ValueError, identity_report, "nothing", f)

def _test_field(grid):
    x = grid.x
    return SpectralField(grid, np.exp(-x * x) * (1.0 + 0.5j * x))


def test_conjugation_identities():
    grid = make_grid(4096, 100)
    f = _test_field(grid)
    for which in Identity:
        residual = compose_identity_check(which, f, 0.5 * grid.half_length)
        if residual > 1e-5:
            raise Exception('conjugation identity error on', which.value, ':', residual)


def test_commutator_with_x():
    grid = make_grid(4096, 100)
    window = 0.5 * grid.half_length
    q = q_field(grid)
    density = q * q
    gap = (commutator_direct(density, LINE) - 2.0).sup(window)
    if gap > 1e-10:
        raise Exception('[x, H] Q^2 error on', gap)
    mixed = density * (1.0 + np.exp(-grid.x ** 2))
    deviation = commutator_deviation(mixed, window)
    if deviation > 1e-5:
        raise Exception('[x, H] closed form error on', deviation)
    expect_close('closed form on Q^2', hilbert_commutator(density).values, 2.0, 1e-5)


def test_cal_b_is_derivative_of_b_q():
    grid = make_grid(512, 20)
    f = SpectralField.from_function(grid, lambda x: np.exp(-x * x) * (1.0 + 0.3j * x))
    for j in (1, 2, 3):
        gap = (cal_b(j, f) - derivative(b_q(f), j)).sup(grid.half_length)
        if gap > 1e-9:
            raise Exception('B_j error on', j, ':', gap)


def test_line_tag_dispatch():
    grid = make_grid(256, 20)
    f = SpectralField.from_function(grid, lambda x: np.exp(-x * x) + 0j)
    direct = b_q(f, LINE)
    dispatched = apply(OperatorTag(OperatorName.B_Q, line=True), f)
    expect_close('apply B_Q on the line', dispatched.values, direct.values, 0.0)
    periodic = apply(OperatorTag(OperatorName.B_Q), f)
    expect_close('apply B_Q on the torus', periodic.values, b_q(f, PERIODIC).values, 0.0)



if __name__ == "__main__":
    run_tests([
        test_apply_dispatch,
        test_density_hilbert_closed_form,
        test_tail_closed_integral,
        test_kernel_of_linearized_operators,
        test_growing_kernel_members,
        test_kernel_elements_names,
        test_hierarchy_and_ladder,
        test_identity_report_layout,
        test_conjugation_identities,
        test_commutator_with_x,
        test_cal_b_is_derivative_of_b_q,
        test_line_tag_dispatch,
    ])
