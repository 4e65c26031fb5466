"""Integration over the unit sphere: exact for homogeneous rational functions,
numerical rules for smooth integrands.

All sphere integrals of monomials in integer dimensions reduce to rational
multiples of an integer power of pi, via the classical Gamma-function formula

    int_{S^{n-1}} xi^alpha dS = 0                     unless every alpha_i is even,
                              = 2 prod Gamma((alpha_i+1)/2) / Gamma((|alpha|+n)/2)

so identity residuals on this path are exact rationals, not tolerances.
"""

from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .polynomial import Polynomial


class PiRational:
    """Exact scalar of the form (rational) * pi^power."""

    __slots__ = ("coef", "pi_pow")

    def __init__(self, coef, pi_pow=0):
        self.coef = Fraction(coef)
        self.pi_pow = pi_pow if coef != 0 else 0

    def is_zero(self):
        return self.coef == 0

    def _check(self, other):
        if not isinstance(other, PiRational):
            other = PiRational(other, 0)
        if self.coef != 0 and other.coef != 0 and self.pi_pow != other.pi_pow:
            raise ValueError("incompatible powers of pi")
        return other

    def __add__(self, other):
        other = self._check(other)
        pow_ = self.pi_pow if self.coef != 0 else other.pi_pow
        return PiRational(self.coef + other.coef, pow_)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._check(other)
        pow_ = self.pi_pow if self.coef != 0 else other.pi_pow
        return PiRational(self.coef - other.coef, pow_)

    def __mul__(self, other):
        if isinstance(other, PiRational):
            return PiRational(self.coef * other.coef, self.pi_pow + other.pi_pow)
        return PiRational(self.coef * Fraction(other), self.pi_pow)

    __rmul__ = __mul__

    def __neg__(self):
        return PiRational(-self.coef, self.pi_pow)

    def __eq__(self, other):
        if isinstance(other, PiRational):
            return self.coef == other.coef and \
                (self.coef == 0 or self.pi_pow == other.pi_pow)
        return self.coef == 0 and other == 0

    def __float__(self):
        return float(self.coef) * math.pi ** self.pi_pow

    def __repr__(self):
        if self.pi_pow == 0:
            return f"{self.coef}"
        return f"{self.coef}*pi^{self.pi_pow}"


@lru_cache(maxsize=None)
def _gamma_half(two_z):
    """Gamma(two_z/2) as (Fraction, number of sqrt(pi) factors in {0,1})."""
    if two_z <= 0:
        raise ValueError("Gamma argument must be positive here")
    if two_z % 2 == 0:
        return Fraction(math.factorial(two_z // 2 - 1)), 0
    k = (two_z - 1) // 2  # Gamma(k + 1/2)
    return Fraction(math.factorial(2 * k), 4**k * math.factorial(k)), 1


@lru_cache(maxsize=None)
def _monomial_sphere_exact(n, exps):
    if any(e % 2 for e in exps):
        return PiRational(0)
    num = Fraction(2)
    sqrt_pis = 0
    for e in exps:
        c, s = _gamma_half(e + 1)
        num *= c
        sqrt_pis += s
    dc, ds = _gamma_half(sum(exps) + n)
    num /= dc
    sqrt_pis -= ds
    if sqrt_pis % 2:
        raise AssertionError("sphere integral should be a rational times pi^k")
    return PiRational(num, sqrt_pis // 2)


def monomial_sphere_integral(n, exponents, exact=True):
    """int_{S^{n-1}} xi^alpha dS, exact (PiRational) or float."""
    exps = tuple(int(e) for e in exponents)
    if len(exps) != n or any(e < 0 for e in exps):
        raise ValueError("need n nonnegative exponents")
    val = _monomial_sphere_exact(n, tuple(sorted(exps)))
    return val if exact else float(val)


def polynomial_sphere_integral(poly: Polynomial, exact=True):
    """Sphere integral of the restriction of a polynomial."""
    total = PiRational(0)
    for exps, c in poly.terms.items():
        total = total + monomial_sphere_integral(poly.n, exps) * Fraction(c)
    return total if exact else float(total)


def ball_monomial_integral(n, exponents, rho=Fraction(1)):
    """int_{|x|<=rho} x^alpha dx = sphere(alpha) * rho^{|a|+n} / (|a|+n)."""
    exps = tuple(exponents)
    s = monomial_sphere_integral(n, exps)
    return s * (Fraction(rho) ** (sum(exps) + n) / (sum(exps) + n))


def bump_ball_monomial_integral(n, exponents, power, rho=Fraction(1)):
    """int_{|x|<=rho} x^alpha (rho^2-|x|^2)^power dx, exact.

    Radial factor in closed form: with z = (|alpha|+n)/2,
    int_0^rho r^{|a|+n-1} (rho^2-r^2)^e dr = rho^{|a|+n+2e} e! / (2 z(z+1)..(z+e)).
    """
    exps = tuple(exponents)
    s = monomial_sphere_integral(n, exps)
    if s.is_zero():
        return PiRational(0)
    a = sum(exps)
    two_z = a + n
    denom = Fraction(1)
    for t in range(power + 1):
        denom *= Fraction(two_z + 2 * t, 2)
    radial = Fraction(rho) ** (a + n + 2 * power) * \
        Fraction(math.factorial(power)) / (2 * denom)
    return s * radial


def integrate_core_over_ball(core: Polynomial, power, rho=Fraction(1)):
    """Exact integral of core(x)*(rho^2-|x|^2)^power over the support ball."""
    total = PiRational(0)
    for exps, c in core.terms.items():
        total = total + bump_ball_monomial_integral(core.n, exps, power, rho) * Fraction(c)
    return total


# ---------------------------------------------------------------------------
# homogeneous rational functions p(xi)/|xi|^{2r}
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _norm2_poly(n) -> Polynomial:
    """|xi|^2 as a polynomial."""
    terms = {}
    for i in range(n):
        e = [0] * n
        e[i] = 2
        terms[tuple(e)] = Fraction(1)
    return Polynomial(n, terms)


class HomogeneousRational:
    """xi -> p(xi)/|xi|^{2r}; closed under differentiation.

    The homogeneity degree is deg(p) - 2r; the restriction to the unit sphere
    is the restriction of the numerator.
    """

    def __init__(self, numerator: Polynomial, pow2r: int = 0):
        if not numerator.is_homogeneous():
            raise ValueError("numerator must be homogeneous")
        if pow2r < 0:
            raise ValueError("pow2r must be nonnegative")
        self.n = numerator.n
        self.numerator = numerator
        self.pow2r = pow2r

    @property
    def degree(self):
        """Homogeneity degree; the zero function reports degree None."""
        if self.numerator.is_zero():
            return None
        return self.numerator.degree() - 2 * self.pow2r

    def diff(self, axis) -> "HomogeneousRational":
        """Quotient rule: ((dp)|xi|^2 - 2r p xi_a) / |xi|^{2(r+1)}."""
        xa = Polynomial.variable(self.n, axis)
        num = self.numerator.diff(axis) * _norm2_poly(self.n) \
            - 2 * self.pow2r * xa * self.numerator
        return HomogeneousRational(num, self.pow2r + 1)

    def diff_multi(self, axes) -> "HomogeneousRational":
        out = self
        for a in axes:
            out = out.diff(a)
        return out

    def mul_polynomial(self, poly: Polynomial) -> "HomogeneousRational":
        if not poly.is_homogeneous():
            raise ValueError("factor must be homogeneous")
        return HomogeneousRational(self.numerator * poly, self.pow2r)

    def value(self, xi):
        norm2 = sum(c * c for c in xi)
        return self.numerator.eval(xi) / norm2 ** self.pow2r

    def sphere_integral(self, exact=True):
        return polynomial_sphere_integral(self.numerator, exact=exact)

    def ball_integral(self, exact=True):
        """Radial-times-angular factorization; needs n + degree > 0."""
        lam = self.degree
        if lam is None:
            return PiRational(0) if exact else 0.0
        if self.n + lam <= 0:
            raise ValueError("not integrable over the ball")
        s = self.sphere_integral(exact=True) * Fraction(1, self.n + lam)
        return s if exact else float(s)


def integrate_homogeneous(g: HomogeneousRational, exact=True):
    """Sphere integral of p(xi)/|xi|^{2r}: the numerator's restriction."""
    return g.sphere_integral(exact=exact)


# ---------------------------------------------------------------------------
# the constants c_{l,s} and the sphere integration-by-parts identity
# ---------------------------------------------------------------------------

def c_constant(l, s, n) -> Fraction:
    """prod_{w=0}^{s-l-1} (n-1+2w) * (-1)^l s! / (2^l l! (s-2l)!)."""
    if not 0 <= 2 * l <= s:
        raise ValueError("need 0 <= l <= s/2")
    prod = 1
    for w in range(s - l):
        prod *= n - 1 + 2 * w
    return Fraction(prod * (-1) ** l * math.factorial(s),
                    2**l * math.factorial(l) * math.factorial(s - 2 * l))


def metric_power_weight(n, idx, l) -> Polynomial:
    """Component of i^l j^l (xi^(.s)) restricted to the sphere, as a polynomial.

    Equals sigma(i_1..i_s)[delta_{i1 i2}..delta_{i_{2l-1} i_{2l}}
    xi_{i_{2l+1}}..xi_{i_s}]; the dropped |xi|^{2l} factor is 1 on the sphere.
    """
    s = len(idx)
    if 2 * l > s:
        raise ValueError("too many metric factors")
    total = Polynomial.zero(n)
    fact = Fraction(1, math.factorial(s))
    for perm in itertools.permutations(idx):
        ok = all(perm[2 * t] == perm[2 * t + 1] for t in range(l))
        if not ok:
            continue
        exps = [0] * n
        for v in perm[2 * l:]:
            exps[v] += 1
        total = total + Polynomial.monomial(n, tuple(exps), fact)
    return total


def verify_ibp(g: HomogeneousRational, idx) -> PiRational:
    """LHS - RHS of the sphere integration-by-parts identity, exactly.

    LHS = int_S d^s g / d xi_{i_1}..d xi_{i_s};
    RHS = sum_l c_{l,s} int_S (i^l j^l xi^(.s))_{idx} g.
    Requires g positive homogeneous of degree s-1.
    """
    s = len(idx)
    if g.degree is None:
        return PiRational(0)
    if g.degree != s - 1:
        raise ValueError(f"need homogeneity degree {s - 1}, got {g.degree}")
    lhs = g.diff_multi(idx).sphere_integral()
    rhs = PiRational(0)
    for l in range(s // 2 + 1):
        weight = metric_power_weight(g.n, idx, l)
        rhs = rhs + polynomial_sphere_integral(weight * g.numerator) * c_constant(l, s, g.n)
    return lhs - rhs


# ---------------------------------------------------------------------------
# numerical quadrature rules
# ---------------------------------------------------------------------------

class SphereRule:
    """Nodes and positive weights integrating polynomials on S^{n-1}."""

    def __init__(self, n, degree, nodes, weights):
        self.n = n
        self.degree = degree
        self.nodes = np.asarray(nodes, dtype=float)
        self.weights = np.asarray(weights, dtype=float)

    def __len__(self):
        return len(self.weights)

    def integrate(self, func):
        return sum(w * func(tuple(node))
                   for node, w in zip(self.nodes, self.weights))

    def to_json_dict(self):
        return {"n": self.n, "degree": self.degree,
                "nodes": self.nodes.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(doc["n"], doc["degree"], doc["nodes"], doc["weights"])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def build_rule(n, degree, offset=0.0) -> SphereRule:
    """n=2: equispaced angles; n=3: Gauss-Legendre polar x equispaced azimuth.

    ``offset`` rotates the n=2 node set by a fraction of the spacing without
    changing the exactness degree; two rules with different offsets have
    independent quadrature errors, which keeps two-sided identity checks
    honest.
    """
    if n == 2:
        count = max(degree + 1, 4)
        angles = 2 * np.pi * (np.arange(count) + offset) / count
        nodes = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        weights = np.full(count, 2 * np.pi / count)
        return SphereRule(2, degree, nodes, weights)
    if n == 3:
        npolar = max((degree + 2) // 2, 2)
        naz = max(degree + 1, 4)
        z, wz = np.polynomial.legendre.leggauss(npolar)
        phi = 2 * np.pi * np.arange(naz) / naz
        nodes = []
        weights = []
        for zi, wi in zip(z, wz):
            st = np.sqrt(1.0 - zi * zi)
            for ph in phi:
                nodes.append((st * np.cos(ph), st * np.sin(ph), zi))
                weights.append(wi * 2 * np.pi / naz)
        return SphereRule(3, degree, np.array(nodes), np.array(weights))
    raise ValueError("numerical rules support n in {2, 3} only")
