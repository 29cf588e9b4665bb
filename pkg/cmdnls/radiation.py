"""
Closed forms of the radiation forcing terms a_j, frak_a_{i,j} and the
auxiliary frak_g_{i,j}.

Every formula is homogeneous under the normalization c_j -> c_j / lam^j,
frak_c_{i,j} -> frak_c_{i,j} / lam^{i+j+1}, so the same code produces a_j
from extracted parameters and A_j from normalized ones. The arguments are
accessors: c(m) with c(0) = 1, and frak(i, j). Values only need +, *,
scalar multiplication and conjugate(), so complex numbers and
AdmissibleExpr both work.
"""
import numpy as np

INV_PI = 1.0 / np.pi
INV_2PI = 0.5 / np.pi


def conj(value):
    return value.conjugate()


def nu_from_c1(c1):
    """nu_0 = 2 Im c_1"""
    return -1j * (c1 - conj(c1))


def mu_from_c1(c1):
    """mu_0 = 2 Re c_1"""
    return c1 + conj(c1)


def frak_g(i, j, frak):
    return frak(i + 1, j) + frak(i, j + 1) + INV_2PI * (frak(0, j) * frak(i, 0))


def a_term(j, c, frak):
    c1 = c(1)
    nu = nu_from_c1(c1)
    mu = mu_from_c1(c1)
    c2 = c(2)
    re_c2 = 0.5 * (c2 + conj(c2))
    return (nu * c(j + 1)
            - 1j * ((0.75 * (nu * nu) - 0.25 * (mu * mu) + 2.0 * re_c2) * c(j))
            - 1j * INV_2PI * (frak(1, j) - conj(c1) * frak(0, j)))


def frak_a_term(i, j, c, frak):
    c1 = c(1)
    c1_bar = conj(c1)
    ci_bar = conj(c(i))
    cj = c(j)
    nu = nu_from_c1(c1)

    def g(a, b):
        return frak_g(a, b, frak)

    g00 = g(0, 0)
    drift = nu * (frak(i, j + 1) + frak(i + 1, j))
    scale_part = (-2.0 / 3.0 * (ci_bar * cj * g00) + 2.0 * (cj * g(i, 0))
                  + 2.0 * (ci_bar * g(0, j)) - INV_PI * (frak(i, 0) * frak(0, j)))
    left = (-INV_PI * (frak(i, 1) * frak(0, j))
            + INV_PI * (ci_bar * c1 * frak(0, j) * frak(0, 0))
            + 2.0 / 3.0 * (ci_bar * cj * c1 * g00)
            - 2.0 * (ci_bar * cj * g(0, 1))
            - 2.0 * (cj * c1 * g(i, 0))
            + 2.0 * (cj * g(i, 1))
            + 2.0 * (ci_bar * c1 * g(0, j)))
    right = (-INV_PI * (frak(i, 0) * frak(1, j))
             + INV_PI * (c1_bar * cj * frak(i, 0) * frak(0, 0))
             + 2.0 / 3.0 * (ci_bar * cj * c1_bar * g00)
             - 2.0 * (ci_bar * cj * g(1, 0))
             - 2.0 * (ci_bar * c1_bar * g(0, j))
             + 2.0 * (ci_bar * g(1, j))
             + 2.0 * (c1_bar * cj * g(i, 0)))
    return drift - 0.5 * (nu * scale_part) - 0.5j * left + 0.5j * right


def sequence_accessor(values, one=1.0):
    """
    c(m) over values = [c_1, c_2, ...] with c(0) = one and zero past the end
    """
    def c(m):
        if m == 0:
            return one
        if 1 <= m <= len(values):
            return values[m - 1]
        return 0.0 * one
    return c


def matrix_accessor(matrix):
    """frak(i, j) over a square array, zero outside"""
    size = len(matrix)

    def frak(i, j):
        if 0 <= i < size and 0 <= j < size:
            return matrix[i][j]
        return 0.0
    return frak
