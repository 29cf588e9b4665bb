"""
Graded polynomial algebra of admissible combinations

Generators are Z_j, C_j and the quadratic radiation entries frakC_{i,j}, each
possibly conjugated. A monomial is a sorted tuple of generators (repeats
allowed), an expression maps monomials to complex coefficients.

    ord(Z_j) = j + 1/2,  ord(C_j) = j,  ord(frakC_{i,j}) = i + j + 1

Conjugation preserves order and products add it.
"""
from collections import namedtuple

import numpy as np

from cmdnls.errors import ConfigError

# coefficients below this are dropped after every operation
PRUNE_TOL = 1e-14

Generator = namedtuple("Generator", ["kind", "i", "j", "conj"])


def make_generator(kind, i, j=-1, conj=False):
    if kind not in ("Z", "C", "F"):
        raise ConfigError(f"unknown generator kind {kind!r}")
    if kind == "F":
        if i < 0 or j < 0:
            raise ConfigError("frakC indices must be nonnegative")
        # frakC_{j,i} = conj(frakC_{i,j})
        if i > j:
            i, j, conj = j, i, not conj
        return Generator("F", i, j, bool(conj))
    if i < 1:
        raise ConfigError(f"{kind}_{i} is not a generator")
    return Generator(kind, i, -1, bool(conj))


def generator_order(g):
    if g.kind == "Z":
        return g.i + 0.5
    if g.kind == "C":
        return float(g.i)
    return float(g.i + g.j + 1)


def conjugate_generator(g):
    return g._replace(conj=not g.conj)


def generator_text(g):
    if g.kind == "F":
        name = f"F{g.i}_{g.j}"
    else:
        name = f"{g.kind}{g.i}"
    return f"conj({name})" if g.conj else name


def _coefficient_text(value):
    value = complex(value)
    return f"({value.real:+.12g}{value.imag:+.12g}i)"


class AdmissibleExpr:
    # numpy scalars defer to the reflected operators
    __array_ufunc__ = None

    def __init__(self, terms=None):
        self.terms = {}
        for monomial, coefficient in (terms or {}).items():
            if abs(coefficient) > PRUNE_TOL:
                self.terms[tuple(sorted(monomial))] = complex(coefficient)

    @classmethod
    def constant(cls, value):
        return cls({(): value})

    @classmethod
    def generator(cls, kind, i, j=-1, conj=False):
        return cls({(make_generator(kind, i, j, conj),): 1.0})

    @classmethod
    def z(cls, j, conj=False):
        return cls.generator("Z", j, conj=conj)

    @classmethod
    def c(cls, j, conj=False):
        # C_0 = 1
        if j == 0:
            return cls.constant(1.0)
        return cls.generator("C", j, conj=conj)

    @classmethod
    def frak(cls, i, j, conj=False):
        return cls.generator("F", i, j, conj)

    def is_zero(self):
        return not self.terms

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def coefficient(self, monomial):
        return self.terms.get(tuple(sorted(monomial)), 0.0)

    @staticmethod
    def monomial_order(monomial):
        return sum(generator_order(g) for g in monomial)

    def orders(self):
        return sorted({self.monomial_order(m) for m in self.terms})

    @property
    def grade(self):
        """Common order of all monomials; None for the zero expression"""
        orders = self.orders()
        if not orders:
            return None
        if len(orders) > 1:
            raise ConfigError(f"expression mixes orders {orders}")
        return orders[0]

    def is_homogeneous(self):
        return len(self.orders()) <= 1

    def _lift(self, other):
        if isinstance(other, AdmissibleExpr):
            return other
        return AdmissibleExpr.constant(other)

    def __add__(self, other):
        other = self._lift(other)
        terms = dict(self.terms)
        for monomial, coefficient in other.terms.items():
            terms[monomial] = terms.get(monomial, 0.0) + coefficient
        return AdmissibleExpr(terms)

    __radd__ = __add__

    def __neg__(self):
        return AdmissibleExpr({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, AdmissibleExpr):
            return AdmissibleExpr({m: c * other for m, c in self.terms.items()})
        terms = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                monomial = tuple(sorted(m1 + m2))
                terms[monomial] = terms.get(monomial, 0.0) + c1 * c2
        return AdmissibleExpr(terms)

    __rmul__ = __mul__

    def conjugate(self):
        return AdmissibleExpr({
            tuple(conjugate_generator(g) for g in m): np.conj(c) for m, c in self.terms.items()
        })

    def generators(self):
        return sorted({g for m in self.terms for g in m})

    def max_index(self, kind):
        """Largest index carried by generators of this kind (-1 if absent)"""
        indices = [max(g.i, g.j) for g in self.generators() if g.kind == kind]
        return max(indices) if indices else -1

    def evaluate(self, value_of):
        """value_of(generator without conjugation) -> complex"""
        total = 0.0 + 0.0j
        for monomial, coefficient in self.terms.items():
            product = coefficient
            for g in monomial:
                value = value_of(g._replace(conj=False))
                product *= np.conj(value) if g.conj else value
            total += product
        return complex(total)

    def almost_equal(self, other, tol=1e-10):
        difference = self - other
        return all(abs(c) <= tol for c in difference.terms.values())

    def text(self):
        """Canonical text: sorted monomials joined by ' + ', coefficient as (a+bi)"""
        if not self.terms:
            return "0"
        pieces = []
        for monomial, coefficient in sorted(self.terms.items()):
            factors = "*".join(generator_text(g) for g in monomial)
            pieces.append(_coefficient_text(coefficient) + ("*" + factors if factors else ""))
        return " + ".join(pieces)

    def __repr__(self):
        return f"AdmissibleExpr({self.text()})"
