"""Exact multivariate polynomial arithmetic.

Polynomials are stored as ``{exponent tuple: coefficient}`` with zero
coefficients dropped.  Coefficients are whatever scalar type the caller puts
in (``fractions.Fraction`` for exact identity checks, ``float`` for
quadrature paths); all operations are coefficient-type agnostic.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

#: Guardrail for runaway symbolic growth; operations raise beyond this.
TERM_LIMIT = 10**6


class PolynomialSizeError(RuntimeError):
    """Raised when a result would exceed TERM_LIMIT terms."""


class Polynomial:
    """Polynomial in ``n`` variables; immutable by convention."""

    __slots__ = ("n", "terms", "_compiled")

    def __init__(self, n, terms=None):
        self.n = n
        self.terms = {}
        self._compiled = None
        if terms:
            for exps, c in terms.items():
                if c == 0:
                    continue
                self.terms[tuple(exps)] = c
        if len(self.terms) > TERM_LIMIT:
            raise PolynomialSizeError(f"{len(self.terms)} terms exceeds limit")

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, n):
        return cls(n)

    @classmethod
    def constant(cls, n, c):
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n, i):
        exps = [0] * n
        exps[i] = 1
        return cls(n, {tuple(exps): 1})

    @classmethod
    def monomial(cls, n, exps, c=1):
        return cls(n, {tuple(exps): c})

    # -- predicates ---------------------------------------------------

    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def degree(self):
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def is_homogeneous(self):
        degs = {sum(e) for e in self.terms}
        return len(degs) <= 1

    # -- arithmetic ---------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise ValueError("variable-count mismatch")
            return other
        return Polynomial.constant(self.n, other)

    def __add__(self, other):
        other = self._coerce(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            s = terms.get(e, 0) + c
            if s == 0:
                terms.pop(e, None)
            else:
                terms[e] = s
        return Polynomial(self.n, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if other == 0:
                return Polynomial.zero(self.n)
            return Polynomial(self.n, {e: c * other for e, c in self.terms.items()})
        if other.n != self.n:
            raise ValueError("variable-count mismatch")
        terms = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = terms.get(e, 0) + c1 * c2
                if s == 0:
                    terms.pop(e, None)
                else:
                    terms[e] = s
            if len(terms) > TERM_LIMIT:
                raise PolynomialSizeError(f"{len(terms)} terms exceeds limit")
        return Polynomial(self.n, terms)

    __rmul__ = __mul__

    def __pow__(self, k):
        if k < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(self.n, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.n == other.n and self.terms == other.terms
        return self.terms == self._coerce(other).terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # -- calculus -----------------------------------------------------

    def diff(self, i):
        terms = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            e2 = list(e)
            e2[i] -= 1
            terms[tuple(e2)] = c * e[i]
        return Polynomial(self.n, terms)

    def eval(self, point):
        total = 0
        for e, c in self.terms.items():
            v = c
            for x, p in zip(point, e):
                if p:
                    v = v * x**p
            total = total + v
        return total

    # -- conversions --------------------------------------------------

    def map_coeff(self, func):
        return Polynomial(self.n, {e: func(c) for e, c in self.terms.items()})

    def to_float(self):
        return self.map_coeff(float)

    def compiled(self):
        """(exponents, coefficients) arrays for vectorized evaluation."""
        if self._compiled is None:
            if self.terms:
                items = sorted(self.terms.items())
                exps = np.array([e for e, _ in items], dtype=np.int64)
                coeffs = np.array([float(c) for _, c in items])
            else:
                exps = np.zeros((0, self.n), dtype=np.int64)
                coeffs = np.zeros(0)
            self._compiled = (exps, coeffs)
        return self._compiled

    def eval_many(self, points):
        """Evaluate at ``points`` of shape (..., n), in float."""
        exps, coeffs = self.compiled()
        pts = np.asarray(points, dtype=float)
        if coeffs.size == 0:
            return np.zeros(pts.shape[:-1])
        maxdeg = int(exps.max(initial=0))
        # axis-wise power tables: powers[ax][d] = pts[..., ax]**d
        powers = [np.ones((maxdeg + 1,) + pts.shape[:-1]) for _ in range(self.n)]
        for ax in range(self.n):
            col = pts[..., ax]
            for d in range(1, maxdeg + 1):
                powers[ax][d] = powers[ax][d - 1] * col
        out = np.zeros(pts.shape[:-1])
        for (e, c) in zip(exps, coeffs):
            term = np.full(pts.shape[:-1], c)
            for ax in range(self.n):
                if e[ax]:
                    term = term * powers[ax][e[ax]]
            out += term
        return out

    def __repr__(self):
        if not self.terms:
            return "Polynomial(0)"
        bits = []
        for e in sorted(self.terms):
            mono = "*".join(f"x{i}^{p}" for i, p in enumerate(e) if p) or "1"
            bits.append(f"{self.terms[e]}*{mono}")
        return " + ".join(bits)


def random_polynomial(n, degree, rng, lo=-3, hi=3):
    """Dense random polynomial with integer (Fraction) coefficients."""
    terms = {}
    for exps in itertools.product(range(degree + 1), repeat=n):
        if sum(exps) <= degree:
            c = rng.rational(lo, hi)
            if c:
                terms[exps] = c
    return Polynomial(n, terms)


def random_homogeneous(n, degree, rng, lo=-3, hi=3):
    """Random homogeneous polynomial of exact total degree."""
    terms = {}
    for exps in itertools.product(range(degree + 1), repeat=n):
        if sum(exps) == degree:
            c = rng.rational(lo, hi)
            if c:
                terms[exps] = c
    if not terms:
        # keep the degree well-defined for downstream homogeneity checks
        e = [0] * n
        e[0] = degree
        terms[tuple(e)] = Fraction(1)
    return Polynomial(n, terms)
