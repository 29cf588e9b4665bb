"""
Closed-form profiles evaluated pointwise on numpy arrays

Everything here is a plain function of the coordinate (x or y). Grid-aware
rendering lives in cmdnls.profiles.
"""
import numpy as np

SQRT2 = np.sqrt(2.0)


def q(x):
    return SQRT2 / np.sqrt(1.0 + x * x)


def q_squared(x):
    return 2.0 / (1.0 + x * x)


def q_x(x):
    # -x Q^3 / 2
    return -SQRT2 * x * (1.0 + x * x) ** -1.5


def q_xx(x):
    return -SQRT2 * (1.0 - 2.0 * x * x) * (1.0 + x * x) ** -2.5


def lambda_q(x):
    """Generator of L2 scaling applied to Q: (1/2 + x d/dx) Q"""
    return q(x) * (1.0 - x * x) / (2.0 * (1.0 + x * x))


def r_soliton(x):
    """Soliton of the original (chiral) equation, sqrt(2)/(x + i)"""
    return SQRT2 / (x + 1j)


def japanese(x):
    return np.sqrt(1.0 + x * x)


def _smooth_step(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    positive = t > 0
    out[positive] = np.exp(-1.0 / t[positive])
    return out


def chi(x):
    """
    Smooth even cutoff: 1 on |x| <= 1, 0 on |x| >= 2, monotone in between
    """
    ax = np.abs(np.asarray(x, dtype=float))
    up = _smooth_step(2.0 - ax)
    down = _smooth_step(ax - 1.0)
    return up / (up + down)


def chi_r(x, radius):
    return chi(np.asarray(x, dtype=float) / radius)


def weight_varphi(y):
    """Weight of the quadratic radiation form"""
    q2 = q_squared(y)
    return 0.5 * y * q2 - 3.0 * y * q2 ** 2 + 2.0 * y * q2 ** 3


def weight_big_phi(y):
    q2 = q_squared(y)
    y2 = y * y
    return (0.5 * y2 * q2 ** 2 - 13.0 * y2 * q2 ** 3
            + (86.0 / 3.0) * y2 * q2 ** 4 - (40.0 / 3.0) * y2 * q2 ** 5)


def weight_small_phi(y):
    """Antiderivative of weight_big_phi that decays at both ends"""
    y2 = y * y
    return -(1.0 / 24.0) * y ** 3 * (3.0 * y2 * y2 - 42.0 * y2 + 35.0) * q_squared(y) ** 4


def weight_yq2(y):
    return y * q_squared(y)


def weight_y3q4(y):
    return y ** 3 * q_squared(y) ** 2


# tag -> (function, growth degree at infinity)
WEIGHTS = {
    "varphi": (weight_varphi, -1),
    "Phi": (weight_big_phi, -2),
    "phi": (weight_small_phi, -1),
    "yQ2": (weight_yq2, -1),
    "y3Q4": (weight_y3q4, -1),
}


def complex_step_derivative(func, y, h=1e-30):
    """f'(y) = Im f(y + ih) / h, exact to rounding for real-analytic closed forms"""
    y = np.asarray(y, dtype=float)
    return np.imag(func(y + 1j * h)) / h
