"""
Closed-form profiles on a grid: solitons, kernel elements, test functions,
profiles T and P_j, weights, the explicit pseudo-conformal blow-up solution,
and the symmetry and gauge maps
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy import fft

from cmdnls import soliton
from cmdnls.config import CUTOFF_RADIUS_C, INTERIOR_FRACTION, TIME_DIFF_STEP
from cmdnls.errors import ConfigError
from cmdnls.grid import (SpectralField, Symbol, derivative, fourier_multiplier,
                         gauss_legendre, resample)
from cmdnls.operators import LINE, abs_deriv, cal_l

logger = logging.getLogger(__name__)


class ProfileName(str, Enum):
    Q = "Q"
    R_soliton = "R_soliton"
    K = "K"
    Kring = "Kring"
    Z = "Z"
    Z_c = "Z_c"
    Z_h = "Z_h"
    Z_c2 = "Z_c2"
    T = "T"
    P = "P"
    weight_varphi = "weight_varphi"
    weight_Phi = "weight_Phi"
    weight_phi = "weight_phi"
    S_explicit = "S_explicit"


@dataclass(frozen=True)
class ProfileTag:
    """
    index: j for K/Kring/Z/P
    params: T -> (nu0, b1, eta1); P -> (c_j, beta_j); S_explicit -> (t,)
    """
    name: ProfileName
    index: int = None
    params: tuple = field(default_factory=tuple)


# Jets (f, f', f'') of the building blocks

def _jet_mul(a, b):
    return (a[0] * b[0],
            a[1] * b[0] + a[0] * b[1],
            a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2])


def _step_jet(t):
    t = np.asarray(t, dtype=float)
    s = np.zeros_like(t)
    d1 = np.zeros_like(t)
    d2 = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    s[pos] = np.exp(-1.0 / tp)
    d1[pos] = s[pos] / tp ** 2
    d2[pos] = s[pos] * (1.0 - 2.0 * tp) / tp ** 4
    return s, d1, d2


def chi_jet(y):
    y = np.asarray(y, dtype=float)
    sigma = np.sign(y)
    ay = np.abs(y)
    su, su1, su2 = _step_jet(2.0 - ay)
    sd, sd1, sd2 = _step_jet(ay - 1.0)
    u = (su, -sigma * su1, su2)
    d = (sd, sigma * sd1, sd2)
    h = (u[0] + d[0], u[1] + d[1], u[2] + d[2])
    inv = (1.0 / h[0], -h[1] / h[0] ** 2, (2.0 * h[1] ** 2 - h[0] * h[2]) / h[0] ** 3)
    return _jet_mul(u, inv)


def q_jet(y):
    return soliton.q(y), soliton.q_x(y), soliton.q_xx(y)


def y_jet(y):
    return y, np.ones_like(y), np.zeros_like(y)


def _dq_adjoint(h, y):
    """D_Q^* h = -h' + (1/2) y Q^2 h, from (h, h')"""
    return -h[1] + 0.5 * y * soliton.q_squared(y) * h[0]


def _d_adjoint(g, y):
    """
    Adjoint of D = y d/dy - 1 + 5y^2/(1+y^2) applied to the jet g,
    returned as (value, derivative)
    """
    m = 5.0 * y * y / (1.0 + y * y)
    m1 = 10.0 * y / (1.0 + y * y) ** 2
    value = -y * g[1] - 2.0 * g[0] + m * g[0]
    slope = -g[1] - y * g[2] - 2.0 * g[1] + m1 * g[0] + m * g[1]
    return value, slope


def _split_quadrature(func, radius=1.0):
    """Gauss-Legendre over |y| < 2R, split where chi_R stops being analytic"""
    breaks = (-2.0 * radius, -radius, radius, 2.0 * radius)
    return sum(gauss_legendre(func, a, b) for a, b in zip(breaks[:-1], breaks[1:]))


def _chi_integral(func, radius=1.0):
    return _split_quadrature(lambda y: func(y) * soliton.chi_r(y, radius), radius)


@lru_cache(maxsize=None)
def z_constants():
    """Ratios entering Z_1 and Z_2"""
    q2 = soliton.q_squared
    c1 = (_chi_integral(lambda y: y * soliton.q(y) * soliton.q_x(y))
          / _chi_integral(lambda y: 2.0 * y ** 4 * q2(y) ** 2))
    c2 = (_chi_integral(lambda y: y * y * (1.0 + y * y) * q2(y))
          / (2.0 * _chi_integral(lambda y: y * y * q2(y))))
    return c1, c2


def z_function(k, y):
    y = np.asarray(y, dtype=float)
    c1, c2 = z_constants()
    chi = chi_jet(y)
    q = q_jet(y)
    yqchi = _jet_mul(_jet_mul(y_jet(y), q), chi)
    if k == 1:
        qx_chi = (soliton.q_x(y) * chi[0], soliton.q_xx(y) * chi[0] + soliton.q_x(y) * chi[1])
        dstar = _d_adjoint(yqchi, y)
        inner_jet = (qx_chi[0] - c1 * dstar[0], qx_chi[1] - c1 * dstar[1])
        return _dq_adjoint(inner_jet, y).astype(complex)
    if k == 2:
        return 1j * (1.0 + y * y) * q[0] * chi[0] - c2 * z_function(4, y)
    if k == 3:
        return yqchi[0].astype(complex)
    if k == 4:
        return 1j * _dq_adjoint(yqchi, y)
    if k == 5:
        return _dq_adjoint(_d_adjoint(yqchi, y), y).astype(complex)
    if k == 6:
        return 1j * yqchi[0]
    raise ConfigError(f"test function index must be 1..6, got {k}")


def kernel_element(j, y):
    """K_1..K_6: generalized kernel of the linearized flow around Q"""
    y = np.asarray(y, dtype=float)
    q = soliton.q(y)
    if j == 1:
        return soliton.lambda_q(y).astype(complex)
    if j == 2:
        return 1j * q
    if j == 3:
        return soliton.q_x(y).astype(complex)
    if j == 4:
        return -1j * y * y * q
    if j == 5:
        return -(1.0 + y * y) * q + 0j
    if j == 6:
        return 1j * y * q
    raise ConfigError(f"kernel index must be 1..6, got {j}")


def kernel_ring(i, y):
    y = np.asarray(y, dtype=float)
    q = soliton.q(y)
    if i == 1:
        return q + 0j
    if i == 2:
        return y * q + 0j
    if i == 3:
        return (1.0 + y * y) * q + 0j
    raise ConfigError(f"index must be 1..3, got {i}")


@lru_cache(maxsize=None)
def radiation_cutoff_coefficients(radius=CUTOFF_RADIUS_C):
    """
    (alpha, beta) for Z_c and Z_c2 = (alpha + beta y^2) Q chi_R.
    Z_c: (Q, Z_c) = 1, ((1+y^2)Q, Z_c) = 0; Z_c2 with the constraints swapped.
    """
    q2 = soliton.q_squared
    m00 = _chi_integral(q2, radius)
    m01 = _chi_integral(lambda y: y * y * q2(y), radius)
    m10 = _chi_integral(lambda y: (1.0 + y * y) * q2(y), radius)
    m11 = _chi_integral(lambda y: y * y * (1.0 + y * y) * q2(y), radius)
    system = np.array([[m00, m01], [m10, m11]])
    z_c = np.linalg.solve(system, [1.0, 0.0])
    z_c2 = np.linalg.solve(system, [0.0, 1.0])
    return tuple(z_c), tuple(z_c2)


def radiation_cutoff(y, second=False, radius=CUTOFF_RADIUS_C):
    coefficients = radiation_cutoff_coefficients(radius)[1 if second else 0]
    alpha, beta = coefficients
    return (alpha + beta * y * y) * soliton.q(y) * soliton.chi_r(y, radius) + 0j


def t_profile(y, nu0, b1, eta1):
    q = soliton.q(y)
    return 1j * nu0 * 0.5 * y * q - 1j * b1 * 0.25 * y * y * q - eta1 * 0.25 * (1.0 + y * y) * q


def p_profile(y, c_j, beta_j):
    q = soliton.q(y)
    return c_j * q + beta_j * y * q


def s_explicit(x, t):
    if not t > 0:
        raise ConfigError("S_explicit needs t > 0")
    return t ** -0.5 * np.exp(1j * x * x / (4.0 * t)) * soliton.r_soliton(x / t)


def closed_form(tag):
    """Pointwise function y -> samples for a tag"""
    name = ProfileName(tag.name)
    if name is ProfileName.Q:
        return lambda y: soliton.q(y) + 0j
    if name is ProfileName.R_soliton:
        return soliton.r_soliton
    if name is ProfileName.K:
        return lambda y: kernel_element(tag.index, y)
    if name is ProfileName.Kring:
        return lambda y: kernel_ring(tag.index, y)
    if name is ProfileName.Z:
        return lambda y: z_function(tag.index, y)
    if name is ProfileName.Z_c:
        return lambda y: radiation_cutoff(y)
    if name is ProfileName.Z_c2:
        return lambda y: radiation_cutoff(y, second=True)
    if name is ProfileName.Z_h:
        return lambda y: y * soliton.q(y) * soliton.chi(y) + 0j
    if name is ProfileName.T:
        return lambda y: t_profile(y, *tag.params)
    if name is ProfileName.P:
        return lambda y: p_profile(y, *tag.params)
    if name is ProfileName.weight_varphi:
        return lambda y: soliton.weight_varphi(y) + 0j
    if name is ProfileName.weight_Phi:
        return lambda y: soliton.weight_big_phi(y) + 0j
    if name is ProfileName.weight_phi:
        return lambda y: soliton.weight_small_phi(y) + 0j
    t = tag.params[0] if tag.params else 0.0
    if not t > 0:
        raise ConfigError("S_explicit needs t > 0")
    return lambda x: s_explicit(x, t)


def render(tag, grid, lam=1.0, gamma=0.0, x0=0.0):
    """
    Samples of the closed form, optionally modulated as
    e^{i gamma} lam^{-1/2} F((x - x0) / lam)
    """
    if not lam > 0:
        raise ConfigError("lam must be positive")
    func = closed_form(tag)
    values = func((grid.x - x0) / lam)
    if lam != 1.0 or gamma != 0.0:
        values = np.exp(1j * gamma) * lam ** -0.5 * values
    return SpectralField(grid, values)


def render_q(grid, lam=1.0, gamma=0.0, x0=0.0):
    return render(ProfileTag(ProfileName.Q), grid, lam, gamma, x0)


def transversality_matrix(grid):
    """
    M[j, k] = (K_{j+1}, Z_{k+1})_r and the vector (Q, Z_k)_r, integrated from
    the closed forms over the support |y| < 2 of the test functions. The grid
    only has to hold that support.
    """
    if grid.half_length < 2.0:
        raise ConfigError("the box must contain the support |y| < 2 of Z_1..Z_6")

    def pairing(f, k):
        return _split_quadrature(lambda y: np.real(f(y) * np.conj(z_function(k, y))))

    kernels = [lambda y, j=j: kernel_element(j, y) for j in range(1, 7)]
    matrix = np.array([[pairing(kern, k) for k in range(1, 7)] for kern in kernels])
    q_products = np.array([pairing(soliton.q, k) for k in range(1, 7)])
    return matrix, q_products


# decaying members of ker L_j, for every j >= 1
KERNEL_MEMBERS = {
    "iQ": ProfileTag(ProfileName.K, 2),
    "LambdaQ": ProfileTag(ProfileName.K, 1),
    "Q_y": ProfileTag(ProfileName.K, 3),
    "iyQ": ProfileTag(ProfileName.K, 6),
}


def growing_kernel_members(j):
    """
    Polynomially growing members of ker L_j: i y^{l+1} Q and y^{l-1}(1+y^2) Q
    for 1 <= l <= j-1, keyed by name
    """
    members = {}
    for power in range(1, j):
        members[f"iy^{power + 1}Q"] = lambda y, p=power: 1j * y ** (p + 1) * soliton.q(y)
        members[f"y^{power - 1}(1+y^2)Q"] = (
            lambda y, p=power: y ** (p - 1) * (1.0 + y * y) * soliton.q(y) + 0j)
    return members


def kernel_elements(grid):
    """K_1..K_6, Kring_1..Kring_3 and the decaying members of ker L_j, keyed by name"""
    out = {f"K{j}": render(ProfileTag(ProfileName.K, j), grid) for j in range(1, 7)}
    out.update({f"Kring{i}": render(ProfileTag(ProfileName.Kring, i), grid) for i in range(1, 4)})
    out.update({name: render(tag, grid) for name, tag in KERNEL_MEMBERS.items()})
    return out


def check_kernel(j, grid, window=None):
    """
    Interior residuals of L_j on its kernel: the decaying members and, for
    j >= 2, the growing ones. The growing members are not periodic on the box,
    so the line calculus is used throughout. Orders j >= 2 go through the
    smoothing filter on the outer derivatives.
    """
    if j < 1:
        raise ConfigError(f"operator order must be >= 1, got {j}")
    filtered = j >= 2
    if filtered:
        logger.warning("check_kernel: high-order filter engaged for L_%d", j)
    members = {name: render(tag, grid) for name, tag in KERNEL_MEMBERS.items()}
    members.update({name: SpectralField.from_function(grid, func)
                    for name, func in growing_kernel_members(j).items()})
    residuals = {name: float(cal_l(j, members[name], filtered, LINE).sup(window))
                 for name in sorted(members)}
    return {"j": j, "filtered": filtered, "residuals": residuals,
            "window": INTERIOR_FRACTION * grid.half_length if window is None else window}


def modulate(f, lam, gamma, x0):
    """[f]_{lam,gamma,x0} = e^{i gamma} lam^{-1/2} f((. - x0) / lam)"""
    if not lam > 0:
        raise ConfigError("lam must be positive")
    if lam == 1.0 and x0 == 0.0:
        return f * np.exp(1j * gamma) if gamma else f
    moved, n_outside = resample(f, 1.0 / lam, -x0 / lam)
    if n_outside:
        logger.warning("modulate: %d samples left the box and were zero-filled", n_outside)
    return moved * (np.exp(1j * gamma) * lam ** -0.5)


class SymmetryKind(str, Enum):
    scale = "scale"
    phase = "phase"
    translate = "translate"
    galilean = "galilean"
    pseudo_conformal = "pseudo_conformal"
    gauge_forward = "gauge_forward"
    gauge_inverse = "gauge_inverse"


@dataclass(frozen=True)
class SymmetrySpec:
    kind: SymmetryKind
    value: float = 0.0


def running_integral(g):
    """
    int_{x_0}^{x} g on the grid: exact for band-limited periodic g
    (mean part integrated linearly, the rest through its Fourier antiderivative)
    """
    grid = g.grid
    coefficients = np.array(g.fourier)
    mean = coefficients[0] / grid.n_points
    coefficients[0] = 0.0
    k = grid.k
    nonzero = k != 0
    coefficients[nonzero] /= 1j * k[nonzero]
    coefficients[grid.n_points // 2] = 0.0
    periodic = fft.ifft(coefficients)
    return mean * (grid.x - grid.x[0]) + periodic - periodic[0]


def gauge_tail(f):
    """Mass left of the box, closed with a c/x^2 tail"""
    return f.grid.half_length * abs(f.values[0]) ** 2


def gauge_phase(f):
    density = f.abs2()
    return 0.5 * (running_integral(density).real + gauge_tail(f))


def gauge_forward(f):
    """G(f) = f exp(-(i/2) int_{-inf}^x |f|^2)"""
    tail_phase = 0.5 * gauge_tail(f)
    if tail_phase > 1e-8:
        logger.warning("gauge: tail phase %.3e closed from the box edge", tail_phase)
    return f * np.exp(-1j * gauge_phase(f))


def gauge_inverse(f):
    return f * np.exp(1j * gauge_phase(f))


def apply_symmetry(f, spec, t=0.0):
    kind = SymmetryKind(spec.kind)
    if kind is SymmetryKind.scale:
        return modulate(f, spec.value, 0.0, 0.0)
    if kind is SymmetryKind.phase:
        return f * np.exp(1j * spec.value)
    if kind is SymmetryKind.translate:
        return modulate(f, 1.0, 0.0, spec.value)
    if kind is SymmetryKind.galilean:
        nu = spec.value
        moved, _ = resample(f, 1.0, -2.0 * nu * t)
        return moved * np.exp(1j * nu * f.grid.x - 1j * nu * nu * t)
    if kind is SymmetryKind.pseudo_conformal:
        if t == 0:
            raise ConfigError("pseudo-conformal transform is undefined at t = 0")
        moved, n_outside = resample(f, 1.0 / t, 0.0)
        if n_outside:
            logger.warning("pseudo-conformal: %d samples zero-filled", n_outside)
        x = f.grid.x
        return moved * (abs(t) ** -0.5 * np.exp(1j * x * x / (4.0 * t)))
    if kind is SymmetryKind.gauge_forward:
        return gauge_forward(f)
    return gauge_inverse(f)


def d_plus(f):
    """D_+ = -i d/dx Pi_+, Fourier symbol k 1_{k>0}"""
    k = f.grid.k
    return SpectralField.from_fourier(f.grid, f.fourier * np.where(k > 0, k, 0.0))


def cm_residual(u_dot, u):
    """i u_t + u_xx + 2 D_+(|u|^2) u"""
    return 1j * u_dot + derivative(u, 2) + 2.0 * d_plus(u.abs2()) * u


def _windowed_s(grid, t, taper):
    return SpectralField(grid, s_explicit(grid.x, t) * taper)


def pseudo_conformal_residual(t, grid, window):
    """
    Sup over |x| <= window of the CM-DNLS residual of the explicit solution S(t).
    S is tapered by a smooth cutoff at 0.4 L_dom so the box sees a periodic field.
    """
    if not t > 0:
        raise ConfigError("t must be positive")
    if not window < 0.5 * grid.half_length:
        raise ConfigError("window must be below L_dom / 2")
    taper = soliton.chi_r(grid.x, 0.4 * grid.half_length)
    delta = TIME_DIFF_STEP * t
    s_plus = _windowed_s(grid, t + delta, taper)
    s_minus = _windowed_s(grid, t - delta, taper)
    s_now = _windowed_s(grid, t, taper)
    s_dot = (s_plus - s_minus) / (2.0 * delta)
    return float(cm_residual(s_dot, s_now).sup(window))


def stationary_residual(v, window=None):
    """Residual of v'' + |D|(|v|^2) v - |v|^4 v / 4 = 0"""
    density = v.abs2()
    residual = derivative(v, 2) + abs_deriv(density) * v - 0.25 * density * density * v
    return float(residual.sup(window))


def free_evolution(f, t):
    return fourier_multiplier(f, Symbol.free_propagator, t)
