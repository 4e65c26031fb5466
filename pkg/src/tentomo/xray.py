"""Ray, momentum and transverse ray transforms on polynomial bump fields.

The transforms restrict a field to a line, so for polynomial-bump inputs the
integrand along the chord through the support ball is a univariate polynomial
of known degree: Gauss-Legendre of sufficient order integrates it exactly, and
the only numerical error anywhere in this module is float roundoff.

Mixed (x, xi)-derivatives of transforms are computed analytically by
differentiating under the integral sign, never by nested numerical
differentiation.  ``TransformExpr`` implements that calculus: a transform is
a linear combination of atoms

    x^alpha xi^beta * int t^p h(x + t xi) dt,

where h is a mixed partial of a field component; d/dx_i maps an atom to one
with h differentiated, d/dxi_i additionally raises the t power, and monomial
prefactors follow the product rule.
"""

from __future__ import annotations

import csv
import itertools
import math
from functools import lru_cache

import numpy as np

from .polyfield import BudgetError, BumpPoly, PolyBumpField, operator_R
from .symtensor import canonical_indices, multiplicity

#: Lines closer to tangency than this (physical half-chord) count as misses.
TANGENCY_TOL = 1e-14


class Line:
    """Oriented line t -> x + t*xi; xi need not be unit, must be nonzero."""

    __slots__ = ("x", "xi")

    def __init__(self, x, xi):
        self.x = np.asarray(x, dtype=float)
        self.xi = np.asarray(xi, dtype=float)
        if float(self.xi @ self.xi) == 0.0:
            raise ValueError("direction must be nonzero")

    @property
    def n(self):
        return len(self.x)

    def bundle_point(self) -> "Line":
        """Equivalent line through the foot point with unit direction."""
        u = self.xi / np.linalg.norm(self.xi)
        return Line(self.x - (self.x @ u) * u, u)

    def __repr__(self):
        return f"Line(x={self.x.tolist()}, xi={self.xi.tolist()})"


class TransverseRay:
    """(omega, x, y) with omega a unit direction and x, y orthogonal to it."""

    __slots__ = ("omega", "x", "y")

    def __init__(self, omega, x, y, tol=1e-9):
        self.omega = np.asarray(omega, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        norm = np.linalg.norm(self.omega)
        if abs(norm - 1.0) > tol:
            raise ValueError("omega must be a unit vector")
        if abs(self.x @ self.omega) > tol or abs(self.y @ self.omega) > tol:
            raise ValueError("x and y must be orthogonal to omega")


@lru_cache(maxsize=None)
def _leggauss(q):
    return np.polynomial.legendre.leggauss(q)


def chord_interval(x, xi, rho):
    """Parameter interval where |x + t*xi| <= rho, or None on a miss."""
    a = float(xi @ xi)
    b = 2.0 * float(x @ xi)
    c = float(x @ x) - rho * rho
    disc = b * b - 4.0 * a * c
    if disc <= 0.0:
        return None
    half = math.sqrt(disc) / (2.0 * a)
    if half * math.sqrt(a) <= TANGENCY_TOL:
        return None
    tc = -b / (2.0 * a)
    return tc - half, tc + half


def chord_integral(bump: BumpPoly, tpow, x, xi):
    """Exact int t^tpow * bump(x + t*xi) dt over the support chord."""
    if bump.rho is None:
        raise ValueError("ray transforms need compactly supported fields")
    if bump.is_zero():
        return 0.0
    interval = chord_interval(x, xi, float(bump.rho))
    if interval is None:
        return 0.0
    t0, t1 = interval
    q = (bump.t_degree() + tpow) // 2 + 1
    nodes, weights = _leggauss(q)
    tm = 0.5 * (t0 + t1)
    th = 0.5 * (t1 - t0)
    ts = tm + th * nodes
    pts = x[None, :] + ts[:, None] * xi[None, :]
    vals = bump.eval_many(pts)
    if tpow:
        vals = vals * ts**tpow
    return th * float(weights @ vals)


def _xi_monomial_exps(idx, n):
    exps = [0] * n
    for i in idx:
        exps[i] += 1
    return tuple(exps)


def _monoval(vec, exps):
    v = 1.0
    for c, e in zip(vec, exps):
        if e:
            v *= c**e
    return v


# ---------------------------------------------------------------------------
# the transforms
# ---------------------------------------------------------------------------

def momentum_transform(f: PolyBumpField, line: Line, k: int = 0) -> float:
    """J_m^k f(x, xi) = int t^k <f(x + t xi), xi^(.m)> dt, exact quadrature."""
    if k < 0:
        raise ValueError("momentum order must be nonnegative")
    x, xi = line.x, line.xi
    total = 0.0
    for idx, _core in _nonzero_components(f):
        w = multiplicity(idx) * _monoval(xi, _xi_monomial_exps(idx, f.n))
        if w != 0.0:
            total += w * chord_integral(f.component(idx), k, x, xi)
    return total


def ray_transform(f: PolyBumpField, line: Line) -> float:
    """J_m f(x, xi); lines missing the support integrate to zero."""
    return momentum_transform(f, line, 0)


def _nonzero_components(f):
    for idx in canonical_indices(f.n, f.m):
        core = f.core(idx)
        if not core.is_zero():
            yield idx, core


def homogeneity_check(f, x, xi, r, s_shift):
    """Residuals of the two J_m homogeneity laws (scaling, base shift)."""
    if r == 0:
        raise ValueError("scale factor must be nonzero")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    base = ray_transform(f, Line(x, xi))
    scaled = ray_transform(f, Line(x, r * xi))
    shifted = ray_transform(f, Line(x + s_shift * xi, xi))
    res_scale = scaled - (r**f.m / abs(r)) * base
    res_shift = shifted - base
    return res_scale, res_shift


def momentum_shift_residual(f, x, xi, k, s):
    """Residual of J^k(x + s xi, xi) = sum_l C(k,l) (-s)^{k-l} J^l(x, xi)."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    lhs = momentum_transform(f, Line(x + s * xi, xi), k)
    rhs = sum(math.comb(k, l) * (-s) ** (k - l) * momentum_transform(f, Line(x, xi), l)
              for l in range(k + 1))
    return lhs - rhs


def momentum_scale_residual(f, x, xi, k, r):
    """Residual of J^k(x, r xi) = r^{m-k}/|r| J^k(x, xi)."""
    lhs = momentum_transform(f, Line(x, np.asarray(xi, float) * r), k)
    rhs = (r ** (f.m - k) / abs(r)) * momentum_transform(f, Line(x, xi), k)
    return lhs - rhs


def transverse_transform(f: PolyBumpField, ray: TransverseRay) -> float:
    """int <f(x + t omega), y^(.m)> dt with y orthogonal to the direction."""
    total = 0.0
    for idx, _core in _nonzero_components(f):
        w = multiplicity(idx) * _monoval(ray.y, _xi_monomial_exps(idx, f.n))
        if w != 0.0:
            total += w * chord_integral(f.component(idx), 0, ray.x, ray.omega)
    return total


def trt_pointwise_recover(etas, samples, m):
    """Solve <f, eta_{i1} (.) ... (.) eta_{im}> = sample for symmetric f.

    ``samples`` maps canonical index combinations (i1 <= ... <= im over the
    eta list) to pairing values; the system is square of size C(n+m-1, m).
    """
    from .symtensor import SymTensor, sym_dim
    n = len(etas)
    if any(len(v) != n for v in etas):
        raise ValueError("need n linearly independent vectors in dimension n")
    combos = list(canonical_indices(n, m))
    cols = list(canonical_indices(n, m))
    a = np.zeros((len(combos), len(cols)))
    rhs = np.zeros(len(combos))
    for r_i, combo in enumerate(combos):
        rhs[r_i] = samples[combo]
        for c_i, col in enumerate(cols):
            # <f, eta_{i1} x ... x eta_{im}> = sum over dense orderings
            total = 0.0
            for perm in set(itertools.permutations(col)):
                v = 1.0
                for eta_i, ax in zip(combo, perm):
                    v *= etas[eta_i][ax]
                total += v
            a[r_i, c_i] = total
    if np.linalg.matrix_rank(a) < sym_dim(n, m):
        raise ValueError("singular recovery system: directions are dependent")
    sol = np.linalg.solve(a, rhs)
    out = SymTensor(n, m)
    for c_i, col in enumerate(cols):
        out[col] = sol[c_i]
    return out


# ---------------------------------------------------------------------------
# analytic transform derivatives
# ---------------------------------------------------------------------------

class TransformExpr:
    """Linear combination of x^a xi^b * (momentum transform atoms)."""

    __slots__ = ("n", "terms", "bases")

    def __init__(self, n, terms=None, bases=None):
        self.n = n
        self.terms = terms if terms is not None else {}
        self.bases = bases if bases is not None else {}

    @classmethod
    def momentum(cls, f: PolyBumpField, k: int = 0) -> "TransformExpr":
        """The atom expansion of J_m^k f."""
        expr = cls(f.n)
        zero = (0,) * f.n
        for idx, _core in _nonzero_components(f):
            expr._add(float(multiplicity(idx)), zero,
                      _xi_monomial_exps(idx, f.n), f.component(idx), (), k)
        return expr

    def _add(self, coeff, xexp, xiexp, base, dmulti, tpow):
        bid = id(base)
        self.bases[bid] = base
        key = (xexp, xiexp, bid, dmulti, tpow)
        c = self.terms.get(key, 0.0) + coeff
        if c == 0.0:
            self.terms.pop(key, None)
        else:
            self.terms[key] = c

    def _blank(self):
        return TransformExpr(self.n, {}, dict(self.bases))

    def __add__(self, other):
        out = TransformExpr(self.n, dict(self.terms), dict(self.bases))
        out.bases.update(other.bases)
        for key, c in other.terms.items():
            s = out.terms.get(key, 0.0) + c
            if s == 0.0:
                out.terms.pop(key, None)
            else:
                out.terms[key] = s
        return out

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, c):
        c = float(c)
        if c == 0.0:
            return TransformExpr(self.n, {}, dict(self.bases))
        return TransformExpr(self.n, {k: v * c for k, v in self.terms.items()},
                             dict(self.bases))

    def dx(self, i) -> "TransformExpr":
        out = self._blank()
        for (xe, xie, bid, dm, tp), c in self.terms.items():
            if xe[i]:
                lowered = list(xe)
                lowered[i] -= 1
                out._add(c * xe[i], tuple(lowered), xie, self.bases[bid], dm, tp)
            out._add(c, xe, xie, self.bases[bid],
                     tuple(sorted(dm + (i,))), tp)
        return out

    def dxi(self, i) -> "TransformExpr":
        out = self._blank()
        for (xe, xie, bid, dm, tp), c in self.terms.items():
            if xie[i]:
                lowered = list(xie)
                lowered[i] -= 1
                out._add(c * xie[i], xe, tuple(lowered), self.bases[bid], dm, tp)
            out._add(c, xe, xie, self.bases[bid],
                     tuple(sorted(dm + (i,))), tp + 1)
        return out

    def dx_multi(self, axes):
        out = self
        for a in axes:
            out = out.dx(a)
        return out

    def mul_prefactor(self, weight_terms) -> "TransformExpr":
        """Multiply by a polynomial in (x, xi): {(xexp, xiexp): coeff}."""
        out = self._blank()
        for (xe, xie, bid, dm, tp), c in self.terms.items():
            for (wx, wxi), wc in weight_terms.items():
                nxe = tuple(a + b for a, b in zip(xe, wx))
                nxie = tuple(a + b for a, b in zip(xie, wxi))
                out._add(c * float(wc), nxe, nxie, self.bases[bid], dm, tp)
        return out

    def max_derivative_order(self):
        return max((len(dm) for (_, _, _, dm, _) in self.terms), default=0)

    def eval(self, x, xi, _cache=None):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        cache = _cache if _cache is not None else {}
        total = 0.0
        for (xe, xie, bid, dm, tp), c in self.terms.items():
            akey = (bid, dm, tp)
            av = cache.get(akey)
            if av is None:
                av = chord_integral(self.bases[bid].diff_multi(dm), tp, x, xi)
                cache[akey] = av
            if av:
                total += c * _monoval(x, xe) * _monoval(xi, xie) * av
        return total

    def sphere_integral(self, x, rule):
        total = 0.0
        for node, w in zip(rule.nodes, rule.weights):
            total += w * self.eval(x, node, _cache={})
        return total


def dot_power_terms(n, p):
    """<x, xi>^p expanded as {(xexp, xiexp): multinomial coefficient}."""
    terms = {}
    for combo in itertools.combinations_with_replacement(range(n), p):
        exps = [0] * n
        for a in combo:
            exps[a] += 1
        terms[(tuple(exps), tuple(exps))] = multiplicity(combo)
    if p == 0:
        terms = {((0,) * n, (0,) * n): 1}
    return terms


def transform_derivative(f: PolyBumpField, line: Line, k, x_orders, xi_orders) -> float:
    """Exact mixed partial of (x, xi) -> J_m^k f at the line's (x, xi).

    ``x_orders`` and ``xi_orders`` are per-axis derivative counts.
    """
    total_order = sum(x_orders) + sum(xi_orders)
    if f.rho is not None and total_order > f.power:
        raise BudgetError("derivative order exceeds smoothness budget")
    expr = TransformExpr.momentum(f, k)
    for i, cnt in enumerate(x_orders):
        for _ in range(cnt):
            expr = expr.dx(i)
    for i, cnt in enumerate(xi_orders):
        for _ in range(cnt):
            expr = expr.dxi(i)
    return expr.eval(line.x, line.xi)


def john_operator(expr: TransformExpr, i, j) -> TransformExpr:
    """J_ij = d^2/dx_i dxi_j - d^2/dx_j dxi_i on a transform expression."""
    return expr.dx(i).dxi(j) - expr.dx(j).dxi(i)


def john_apply(f: PolyBumpField, line: Line, k, pair) -> float:
    """One John operator applied to J_m^k f, evaluated at the line."""
    i, j = pair
    if f.rho is not None and 2 > f.power:
        raise BudgetError("smoothness budget exhausted")
    return john_operator(TransformExpr.momentum(f, k), i, j).eval(line.x, line.xi)


def john_iterate(f: PolyBumpField, line: Line, pairs) -> float:
    """Iterated John operators J_{i1 j1} ... J_{im jm} applied to J_m f."""
    if f.rho is not None and 2 * len(pairs) > f.power:
        raise BudgetError("smoothness budget exhausted")
    expr = TransformExpr.momentum(f, 0)
    for (i, j) in pairs:
        expr = john_operator(expr, i, j)
    return expr.eval(line.x, line.xi)


def verify_john_relation(f: PolyBumpField, line: Line):
    """Max residual of the iterated-John identity over R-image components.

    Checks (-2)^m m! J_0((Rf)_{i1 j1 .. im jm}) = J_{i1 j1}..J_{im jm}(J_m f)
    componentwise; both sides exact chord quadrature.  m >= 1 only (the m=0
    display degenerates; the classical ultrahyperbolic identity is checked
    separately by ``john_apply`` on scalar transforms).
    """
    m = f.m
    if m < 1:
        raise ValueError("the iterated relation needs m >= 1")
    rf = operator_R(f)
    factor = (-2.0) ** m * math.factorial(m)
    worst = 0.0
    for key in rf.canonical_keys():
        pairs, _blocks = key
        comp = rf.component(rf.key_to_index(key))
        scalar = PolyBumpField(f.n, 0, rf.rho, rf.power, {(): comp.core})
        lhs = factor * ray_transform(scalar, line)
        rhs = john_iterate(f, line, pairs)
        worst = max(worst, abs(lhs - rhs))
    return worst


# ---------------------------------------------------------------------------
# line-set CSV interface
# ---------------------------------------------------------------------------

def read_lines_csv(path):
    """Rows with columns x_1..x_n, xi_1..xi_n (header required)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [i for i, h in enumerate(header) if h.startswith("x_")]
        xicols = [i for i, h in enumerate(header) if h.startswith("xi_")]
        if not xcols or len(xcols) != len(xicols):
            raise ValueError("expected columns x_1..x_n, xi_1..xi_n")
        lines = []
        for row in reader:
            if not row:
                continue
            x = [float(row[i]) for i in xcols]
            xi = [float(row[i]) for i in xicols]
            lines.append(Line(x, xi))
    return lines


def write_transform_csv(path, lines, values, value_names):
    """Mirror the line rows and append one column per transform value."""
    n = lines[0].n if lines else 0
    header = [f"x_{i + 1}" for i in range(n)] + [f"xi_{i + 1}" for i in range(n)]
    header += list(value_names)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for line, vals in zip(lines, values):
            row = [repr(float(c)) for c in line.x]
            row += [repr(float(c)) for c in line.xi]
            row += [repr(float(v)) for v in (vals if hasattr(vals, "__len__") else [vals])]
            writer.writerow(row)
