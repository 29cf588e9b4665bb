"""
Operator calculus on spectral fields

Two calculi act on the same samples. PERIODIC treats the box as a torus:
Hilbert transforms and derivatives are plain Fourier multipliers and x is the
sawtooth coordinate; the flows use it. LINE removes the torus artifacts that
matter for the soliton's slow tails (see hilbert_line and derivative_line);
the operator identities are checked with it. Either way, identities are only
meaningful on the interior window |x| <= L_dom/2.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from cmdnls import soliton
from cmdnls.config import FILTER_ORDER, FILTER_STRENGTH
from cmdnls.errors import ConfigError
from cmdnls.grid import (SpectralField, Symbol, derivative, derivative_line, fourier_multiplier,
                         hilbert, hilbert_line, inner, spectral_filter)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Calculus:
    name: str
    hilbert: object
    derivative: object

    def abs_deriv(self, f):
        return self.hilbert(self.derivative(f))


PERIODIC = Calculus("periodic", hilbert, derivative)
LINE = Calculus("line", hilbert_line, derivative_line)


@lru_cache(maxsize=16)
def q_field(grid):
    return SpectralField.from_function(grid, soliton.q)


@lru_cache(maxsize=16)
def _japanese(grid):
    return soliton.japanese(grid.x)


def _x(grid):
    return grid.x


def abs_deriv(f):
    return fourier_multiplier(f, Symbol.abs_deriv)


def density_hilbert(v, calc=PERIODIC):
    """H(|v|^2). The soliton's density has the closed form H(Q^2) = xQ^2."""
    if v is q_field(v.grid):
        return SpectralField(v.grid, v.grid.x * soliton.q_squared(v.grid.x))
    return calc.hilbert(v.abs2())


def bogomolnyi(v, f, calc=PERIODIC):
    """D_v f = f' + (1/2) v H(conj(v) f)"""
    return calc.derivative(f) + 0.5 * v * calc.hilbert(v.conj() * f)


def big_d(v, f, calc=PERIODIC):
    return calc.derivative(f) + 0.5 * density_hilbert(v, calc) * f


def l_v(v, f, calc=PERIODIC):
    return (calc.derivative(f) + 0.5 * density_hilbert(v, calc) * f
            + v * calc.hilbert((v.conj() * f).real))


def l_v_star(v, f, calc=PERIODIC):
    return (-calc.derivative(f) + 0.5 * density_hilbert(v, calc) * f
            - v * calc.hilbert((v.conj() * f).real))


def h_v(v, f, calc=PERIODIC):
    """Linearized Hamiltonian -f'' + |v|^4 f / 4 - v |D|(conj(v) f)"""
    density = v.abs2()
    return (-calc.derivative(f, 2) + 0.25 * density * density * f
            - v * calc.abs_deriv(v.conj() * f))


def l_tilde_q(f, calc=PERIODIC):
    grid = f.grid
    q = q_field(grid)
    return (calc.derivative(f) + 0.5 * density_hilbert(q) * f
            + calc.hilbert((q * q * q * f).real) / q)


def a_q(f, calc=PERIODIC):
    g = f / _japanese(f.grid)
    return calc.derivative(_x(f.grid) * g - calc.hilbert(g))


def a_q_star(f, calc=PERIODIC):
    g = calc.derivative(f)
    return -(_x(f.grid) * g + calc.hilbert(g)) / _japanese(f.grid)


def b_q(f, calc=PERIODIC):
    g = f / _japanese(f.grid)
    return _x(f.grid) * g - calc.hilbert(g)


def b_q_star(f, calc=PERIODIC):
    return (_x(f.grid) * f + calc.hilbert(f)) / _japanese(f.grid)


def _smoothing(grid, filtered):
    if not filtered:
        return None
    return spectral_filter(grid, FILTER_STRENGTH, FILTER_ORDER)


def cal_b(j, f, filtered=False, calc=PERIODIC):
    """B_j f = d^j(x f / <x>) - H d^j(f / <x>)"""
    _check_order(j)
    grid = f.grid
    smoothing = _smoothing(grid, filtered)
    g = f / _japanese(grid)
    return (calc.derivative(_x(grid) * g, j, smoothing)
            - calc.hilbert(calc.derivative(g, j, smoothing)))


def cal_l1(j, f, filtered=False, calc=PERIODIC):
    _check_order(j)
    grid = f.grid
    smoothing = _smoothing(grid, filtered)
    g = f / _japanese(grid)
    local = g + calc.derivative(_x(grid) * g)
    return (calc.derivative(local, j - 1, smoothing)
            - calc.hilbert(calc.derivative(g, j, smoothing)))


def cal_l2(j, f, filtered=False, calc=PERIODIC):
    _check_order(j)
    grid = f.grid
    smoothing = _smoothing(grid, filtered)
    jap = _japanese(grid)
    g = calc.derivative(jap * f)
    first = calc.derivative(_x(grid) / jap ** 2 * g, j - 1, smoothing)
    return first - calc.hilbert(calc.derivative(g / jap ** 2, j - 1, smoothing))


def cal_l(j, f, filtered=False, calc=PERIODIC):
    """L_j = L_j^1 Re + L_j^2 i Im"""
    return cal_l1(j, f.real, filtered, calc) + 1j * cal_l2(j, f.imag, filtered, calc)

def _check_order(j):
    if j < 1:
        raise ConfigError(f"operator order must be >= 1, got {j}")


class OperatorName(str, Enum):
    bogomolnyi = "bogomolnyi"
    big_D = "big_D"
    L_v = "L_v"
    L_v_star = "L_v_star"
    H_v = "H_v"
    L_tilde_Q = "L_tilde_Q"
    A_Q = "A_Q"
    A_Q_star = "A_Q_star"
    B_Q = "B_Q"
    B_Q_star = "B_Q_star"
    calB = "calB"
    calL1 = "calL1"
    calL2 = "calL2"
    calL = "calL"


_BASED = {
    OperatorName.bogomolnyi: bogomolnyi,
    OperatorName.big_D: big_d,
    OperatorName.L_v: l_v,
    OperatorName.L_v_star: l_v_star,
    OperatorName.H_v: h_v,
}
_FIXED = {
    OperatorName.L_tilde_Q: l_tilde_q,
    OperatorName.A_Q: a_q,
    OperatorName.A_Q_star: a_q_star,
    OperatorName.B_Q: b_q,
    OperatorName.B_Q_star: b_q_star,
}
_ORDERED = {
    OperatorName.calB: cal_b,
    OperatorName.calL1: cal_l1,
    OperatorName.calL2: cal_l2,
    OperatorName.calL: cal_l,
}


@dataclass(frozen=True)
class OperatorTag:
    name: OperatorName
    base: SpectralField = None
    j: int = None
    filtered: bool = False
    line: bool = False


def apply(tag, f):
    name = OperatorName(tag.name)
    calc = LINE if tag.line else PERIODIC
    if name in _BASED:
        if tag.base is None:
            raise ConfigError(f"{name.value} needs a base field")
        f.grid.check_same(tag.base.grid)
        return _BASED[name](tag.base, f, calc)
    if name in _FIXED:
        return _FIXED[name](f, calc)
    if tag.j is None:
        raise ConfigError(f"{name.value} needs an order j")
    return _ORDERED[name](tag.j, f, tag.filtered, calc)


class Identity(str, Enum):
    BQstar_BQ = "BQstar_BQ"
    BQ_BQstar = "BQ_BQstar"
    AQ_AQstar = "AQ_AQstar"
    conj_HQ = "conj_HQ"
    DQ_factorization = "DQ_factorization"


def identity_difference(which, f, calc=LINE):
    """Field whose vanishing expresses the named conjugation identity"""
    which = Identity(which)
    q = q_field(f.grid)
    if which is Identity.BQstar_BQ:
        projection = q * (inner(f, q, "complex") / (2.0 * np.pi))
        return b_q_star(b_q(f, calc), calc) - (f - projection)
    if which is Identity.BQ_BQstar:
        return b_q(b_q_star(f, calc), calc) - f
    if which is Identity.AQ_AQstar:
        return a_q(a_q_star(f, calc), calc) + calc.derivative(f, 2)
    if which is Identity.conj_HQ:
        return l_v(q, 1j * l_v_star(q, f, calc), calc) - 1j * a_q_star(a_q(f, calc), calc)
    return bogomolnyi(q, f, calc) - b_q_star(a_q(f, calc), calc)


def compose_identity_check(which, f, window=None, calc=LINE):
    return float(identity_difference(which, f, calc).sup(window))


def identity_report(which, f, window=None):
    if window is None:
        window = 0.5 * f.grid.half_length
    return {
        "identity": Identity(which).value,
        "grid": [f.grid.n_points, f.grid.half_length],
        "residual": compose_identity_check(which, f, window),
        "window": window,
    }


def hierarchy(v, j_max, background=None, calc=PERIODIC):
    """
    [v, D_v v, ..., D_v^j_max v]

    background: a field whose D_b b vanishes on the line (the soliton). Its
    discrete residual is subtracted from the first step, which removes the
    box-truncation error of the background part.
    """
    if j_max < 0:
        raise ConfigError("j_max must be nonnegative")
    fields = [v]
    for j in range(j_max):
        nxt = bogomolnyi(v, fields[-1], calc)
        if j == 0 and background is not None:
            nxt = nxt - bogomolnyi(background, background, calc)
        fields.append(nxt)
    return fields


@dataclass
class Ladder:
    I: list
    E: list


def conserved_ladder(v, j_max, background=None, calc=PERIODIC):
    """
    I_j = (D_v^j v, v)_r for j <= j_max and E_j = ||D_v^j v||^2
    """
    fields = hierarchy(v, j_max, background, calc)
    values = [inner(field, v, "real") for field in fields]
    energies = [inner(field, field, "real") for field in fields]
    return Ladder(values, energies)


def bogomolnyi_energy(v, calc=PERIODIC):
    slope = bogomolnyi(v, v, calc)
    return 0.5 * inner(slope, slope, "real")


def tail_closed_integral(f):
    """
    Riemann sum over the symmetric samples |x| <= L - dx plus c/x^2 tails
    fitted to the outermost pair. Odd integrands cancel exactly.
    """
    grid = f.grid
    dx = grid.spacing
    edge = grid.half_length - dx
    values = f.values
    tails = edge ** 2 / (grid.half_length - 0.5 * dx) * (values[1] + values[-1])
    return dx * values[1:].sum() + tails


def hilbert_commutator(f):
    """
    [x, H] f = (1/pi) int f, returned as a constant field
    """
    return SpectralField(f.grid, np.full(f.grid.n_points, tail_closed_integral(f) / np.pi))


def commutator_direct(f, calc=PERIODIC):
    x = f.grid.x
    return x * calc.hilbert(f) - calc.hilbert(x * f)


def commutator_deviation(f, window=None, calc=LINE):
    """Distance between [x, H] f applied directly and its closed form (1/pi) int f"""
    return float((commutator_direct(f, calc) - hilbert_commutator(f)).sup(window))
