"""
Uniform periodic grid, spectral fields, Fourier multipliers, inner products
and the moment quadrature oracle
"""
import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy import fft, signal, special

from cmdnls.config import GAUSS_ORDER, INTERIOR_FRACTION, JUMP_ORDER, JUMP_STENCIL, MIN_POINTS
from cmdnls.errors import ConfigError, GridMismatchError
from cmdnls import soliton

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    n_points: int
    half_length: float

    @property
    def spacing(self):
        return 2.0 * self.half_length / self.n_points

    @cached_property
    def x(self):
        return -self.half_length + self.spacing * np.arange(self.n_points)

    @cached_property
    def k(self):
        # k_m = pi m / L_dom, ordered as numpy's fft output
        return 2.0 * np.pi * fft.fftfreq(self.n_points, d=self.spacing)

    @property
    def k_max(self):
        return np.pi / self.spacing

    def interior(self, window=None):
        """Boolean mask of |x| <= window (default half of the box)"""
        if window is None:
            window = INTERIOR_FRACTION * self.half_length
        return np.abs(self.x) <= window

    def check_same(self, other):
        if self != other:
            raise GridMismatchError(f"grid mismatch: {self} vs {other}")


def make_grid(n_points, half_length):
    if int(n_points) != n_points or n_points % 2:
        raise ConfigError("n_points must be even")
    n_points = int(n_points)
    if n_points < MIN_POINTS:
        raise ConfigError(f"n_points must be at least {MIN_POINTS}")
    if n_points & (n_points - 1):
        raise ConfigError("n_points must be a power of two")
    if not half_length > 0:
        raise ConfigError("half_length must be positive")
    return Grid(n_points, float(half_length))


class SpectralField:
    """
    Complex samples on a Grid. Values are frozen after construction, so the
    Fourier image is computed once and cached.
    """

    # keep numpy from broadcasting over fields in mixed expressions
    __array_ufunc__ = None

    def __init__(self, grid, values):
        values = np.array(values, dtype=complex)
        if values.shape == ():
            values = np.full(grid.n_points, values, dtype=complex)
        if values.shape != (grid.n_points,):
            raise ConfigError(f"expected {grid.n_points} samples, got {values.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.x))

    @classmethod
    def from_fourier(cls, grid, coefficients):
        return cls(grid, fft.ifft(coefficients))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_points, dtype=complex))

    @cached_property
    def fourier(self):
        coefficients = fft.fft(self.values)
        coefficients.setflags(write=False)
        return coefficients

    def _other_values(self, other):
        if isinstance(other, SpectralField):
            self.grid.check_same(other.grid)
            return other.values
        return other

    def __add__(self, other):
        return SpectralField(self.grid, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SpectralField(self.grid, self.values - self._other_values(other))

    def __rsub__(self, other):
        return SpectralField(self.grid, self._other_values(other) - self.values)

    def __mul__(self, other):
        return SpectralField(self.grid, self.values * self._other_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return SpectralField(self.grid, self.values / self._other_values(other))

    def __neg__(self):
        return SpectralField(self.grid, -self.values)

    def conj(self):
        return SpectralField(self.grid, np.conj(self.values))

    @property
    def real(self):
        return SpectralField(self.grid, self.values.real)

    @property
    def imag(self):
        return SpectralField(self.grid, self.values.imag)

    def abs2(self):
        return SpectralField(self.grid, np.abs(self.values) ** 2)

    def mean(self):
        return self.values.mean()

    def integral(self):
        return self.grid.spacing * self.values.sum()

    def norm(self):
        return np.sqrt(inner(self, self, "real"))

    def h1_norm(self):
        """Homogeneous H^1 norm from the Fourier image"""
        energy = np.sum(self.grid.k ** 2 * np.abs(self.fourier) ** 2)
        return np.sqrt(self.grid.spacing * energy / self.grid.n_points)

    def sup(self, window=None):
        return np.max(np.abs(self.values[self.grid.interior(window)]))

    def __repr__(self):
        return f"SpectralField(n={self.grid.n_points}, L={self.grid.half_length})"


class Symbol(str, Enum):
    hilbert = "hilbert"
    abs_deriv = "abs_deriv"
    proj_plus = "proj_plus"
    deriv = "deriv"
    laplacian = "laplacian"
    free_propagator = "free_propagator"


def symbol_values(grid, symbol, t=None):
    k = grid.k
    symbol = Symbol(symbol)
    if symbol is Symbol.hilbert:
        return -1j * np.sign(k)
    if symbol is Symbol.abs_deriv:
        return np.abs(k)
    if symbol is Symbol.proj_plus:
        return np.where(k > 0, 1.0, 0.0) + np.where(k == 0, 0.5, 0.0)
    if symbol is Symbol.deriv:
        return 1j * k
    if symbol is Symbol.laplacian:
        return -k * k
    if t is None:
        raise ConfigError("free_propagator needs a time t")
    return np.exp(-1j * k * k * t)


def apply_multiplier(f, multiplier):
    return SpectralField.from_fourier(f.grid, f.fourier * multiplier)


def fourier_multiplier(f, symbol, t=None):
    return apply_multiplier(f, symbol_values(f.grid, symbol, t))


def hilbert(f):
    return fourier_multiplier(f, Symbol.hilbert)


def derivative(f, order=1, smoothing=None):
    """
    d^order/dx^order in Fourier space, optionally damped by a spectral filter
    array (see spectral_filter)
    """
    multiplier = (1j * f.grid.k) ** order
    if smoothing is not None:
        multiplier = multiplier * smoothing
    return apply_multiplier(f, multiplier)


# Taylor coefficients of 1/u - cot(u) in odd powers of u
_COT_SERIES = (1.0 / 3.0, 1.0 / 45.0, 2.0 / 945.0, 1.0 / 4725.0, 2.0 / 93555.0,
               1382.0 / 638512875.0)


def _torus_kernel_correction(g):
    """
    (1/pi) int g(y) [1/(x-y) - (pi/2L) cot(pi (x-y)/2L)] dy, expanded in
    moments of g; accurate where g lives well inside the box
    """
    grid = g.grid
    x = grid.x
    scale = np.pi / (2.0 * grid.half_length)
    powers = np.vander(x, 2 * len(_COT_SERIES), increasing=True)
    moments = grid.spacing * (powers.T @ g.values)
    out = np.zeros(grid.n_points, dtype=complex)
    for n, coefficient in enumerate(_COT_SERIES):
        p = 2 * n + 1
        weight = coefficient * scale ** (p + 1) / np.pi
        for m in range(p + 1):
            out += weight * special.binom(p, m) * (-1) ** m * moments[m] * powers[:, p - m]
    return out


def hilbert_line(f):
    """
    Hilbert transform of the line restricted to the box: the 1/x and 1/x^2
    tails are peeled off as a x/(1+x^2) + b/(1+x^2) and transformed in closed
    form, the remainder goes through the periodic multiplier plus the
    difference between the line and torus kernels.
    """
    grid = f.grid
    x = grid.x
    r1 = 1.0 / (1.0 + x * x)
    edges = [0, -1]
    system = np.array([[x[i] * r1[i], r1[i]] for i in edges])
    a, b = np.linalg.solve(system, f.values[edges].astype(complex))
    g = SpectralField(grid, f.values - (a * x + b) * r1)
    values = hilbert(g).values + _torus_kernel_correction(g) + (b * x - a) * r1
    return SpectralField(grid, values)


def _edge_derivatives(values, spacing, right):
    """f, f', ..., f^(JUMP_ORDER) at the box edge from a one-sided polynomial fit"""
    if right:
        local = np.arange(-JUMP_STENCIL, 0, dtype=float)
        samples = values[-JUMP_STENCIL:]
    else:
        local = np.arange(JUMP_STENCIL, dtype=float)
        samples = values[:JUMP_STENCIL]
    coefficients = np.polynomial.polynomial.polyfit(local, samples, JUMP_ORDER + 1)
    return np.array([coefficients[m] * special.factorial(m) / spacing ** m
                     for m in range(JUMP_ORDER + 1)])


def jump_polynomial(f):
    """
    Polynomial p whose derivatives 0..JUMP_ORDER jump across the box edge
    exactly as those of f do, so f - p has a periodic extension of class
    C^JUMP_ORDER
    """
    grid = f.grid
    half = grid.half_length
    values = np.asarray(f.values, dtype=complex)
    jumps = (_edge_derivatives(values, grid.spacing, right=True)
             - _edge_derivatives(values, grid.spacing, right=False))
    size = JUMP_ORDER + 1
    system = np.zeros((size, size))
    for m in range(size):
        for n in range(max(m, 1), size + 1):
            if (n - m) % 2:
                system[m, n - 1] = 2.0 * special.factorial(n) / special.factorial(n - m) / half ** m
    coefficients = np.linalg.solve(system, jumps)
    return np.polynomial.Polynomial(np.concatenate([[0.0], coefficients]))


def derivative_line(f, order=1, smoothing=None):
    """
    Derivative of a field that is not periodic on the box: the jump
    polynomial is differentiated in closed form, the C^JUMP_ORDER remainder
    spectrally. Exact on polynomials of degree up to JUMP_ORDER + 1.
    """
    if order == 0:
        return f
    grid = f.grid
    half = grid.half_length
    poly = jump_polynomial(f)
    remainder = SpectralField(grid, f.values - poly(grid.x / half))
    values = (derivative(remainder, order, smoothing).values
              + poly.deriv(order)(grid.x / half) / half ** order)
    return SpectralField(grid, values)

def spectral_filter(grid, strength, order):
    return np.exp(-strength * (np.abs(grid.k) / grid.k_max) ** order)


def dealias_mask(grid, fraction):
    return (np.abs(grid.k) <= fraction * grid.k_max).astype(float)


def inner(f, g, kind="real"):
    """Riemann sum of f * conj(g); real part for kind='real'"""
    f.grid.check_same(g.grid)
    value = f.grid.spacing * np.vdot(g.values, f.values)
    if kind == "real":
        return float(value.real)
    if kind == "complex":
        return complex(value)
    raise ConfigError(f"unknown inner product kind {kind!r}")


@dataclass(frozen=True)
class MomentSpec:
    """
    Integrand y^power_y * Q^power_q * weight(y) over the real line
    """
    power_y: int
    power_q: int
    weight: str = None

    def degree(self):
        extra = soliton.WEIGHTS[self.weight][1] if self.weight else 0
        return self.power_y + extra - self.power_q

    def validate(self):
        if self.power_y < 0 or self.power_q < 0 or self.power_q % 2:
            raise ConfigError(f"invalid moment powers in {self}")
        if self.power_q == 0 and self.weight is None:
            raise ConfigError("power_q must be positive without a weight")
        if self.weight is not None and self.weight not in soliton.WEIGHTS:
            raise ConfigError(f"unknown weight {self.weight!r}")
        if self.degree() > -2:
            raise ConfigError(f"non-integrable moment {self}")

    def integrand(self, y):
        values = y ** self.power_y * soliton.q_squared(y) ** (self.power_q // 2)
        if self.weight:
            values = values * soliton.WEIGHTS[self.weight][0](y)
        return values


def gauss_legendre(func, a, b, order=GAUSS_ORDER):
    nodes, weights = special.roots_legendre(order)
    half = 0.5 * (b - a)
    points = half * nodes + 0.5 * (a + b)
    return half * np.dot(weights, func(points))


def moment_integral(spec, order=GAUSS_ORDER):
    """
    Integral over the line through y = tan(theta); the integrand turns into a
    trigonometric polynomial on (-pi/2, pi/2), so Gauss-Legendre converges fast.
    """
    spec.validate()

    def mapped(theta):
        y = np.tan(theta)
        return spec.integrand(y) / np.cos(theta) ** 2

    return float(gauss_legendre(mapped, -0.5 * np.pi, 0.5 * np.pi, order))


def moment_closed_form(power_y, power_q):
    """int y^p Q^(2n) dy = 2^n B((p+1)/2, n-(p+1)/2) for even p"""
    if power_y % 2:
        return 0.0
    n = power_q // 2
    a = 0.5 * (power_y + 1)
    if n - a <= 0:
        raise ConfigError(f"non-integrable moment y^{power_y} Q^{power_q}")
    return float(2.0 ** n * special.beta(a, n - a))


def resample(f, scale, shift):
    """
    Band-limited interpolation of f at scale * x_j + shift for every grid point
    x_j. Points that land outside the box are set to zero.

    Returns (SpectralField, number of zero-filled points)
    """
    grid = f.grid
    n = grid.n_points
    dx = grid.spacing
    x0 = grid.x[0]
    dk = 2.0 * np.pi / (n * dx)

    # c_m = F_{m - n/2} for m = 0..n, Nyquist split between both ends
    coefficients = np.empty(n + 1, dtype=complex)
    shifted = np.fft.fftshift(f.fourier)
    coefficients[:n] = shifted
    coefficients[n] = shifted[0]
    coefficients[0] *= 0.5
    coefficients[n] *= 0.5

    offset = scale * x0 + shift - x0
    weighted = coefficients * np.exp(1j * dk * np.arange(n + 1) * offset)
    w = np.exp(1j * dk * scale * dx)
    values = signal.czt(weighted, m=n, w=w, a=1.0)
    positions = offset + scale * dx * np.arange(n)
    values = values * np.exp(-1j * dk * (n // 2) * positions) / n

    targets = scale * grid.x + shift
    outside = (targets < -grid.half_length) | (targets >= grid.half_length)
    n_outside = int(outside.sum())
    if n_outside:
        values[outside] = 0.0
        logger.debug("resample: %d points outside the box zero-filled", n_outside)
    return SpectralField(grid, values), n_outside
