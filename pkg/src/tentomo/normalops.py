"""Normal operators of the ray and momentum ray transforms, the
solenoidal-potential decomposition, and verification of the central
identities relating them.

Three numerical paths coexist, each with its own error source and tolerance:

* angular quadrature (sphere rule x exact chord quadrature) -- error is the
  sphere rule's, decreasing with rule degree;
* grid convolution with the sampled real-space kernel -- error is kernel
  discretization, ~1e-3 at N=128;
* exact Fourier symbol (n=2) -- the normal operator as a multiplier, exact up
  to roundoff; this is the path on which N(potential) = 0 holds to machine
  precision.

Spatial derivatives of normal operators are never taken by differencing
quadrature output; they are moved onto the field inside the line integral via
``TransformExpr``.
"""

from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.integrate import quad as _quad
from scipy.signal import fftconvolve

from .polyfield import PolyBumpField, generalized_R
from .spherequad import SphereRule, c_constant
from .symtensor import (SymTensor, canonical_indices, i_metric, j_metric,
                        multiplicity, sym_dim, sym_power, j_contract)
from .xray import TransformExpr, dot_power_terms, _leggauss, _monoval, _xi_monomial_exps


# ---------------------------------------------------------------------------
# grid tensor fields and spectral calculus
# ---------------------------------------------------------------------------

def _omega(N, L):
    """Angular frequencies for spectral derivatives; Nyquist bin zeroed so
    that odd-order derivative multipliers keep real fields real."""
    om = 2.0 * np.pi * np.fft.fftfreq(N, d=L / N)
    if N % 2 == 0:
        om[N // 2] = 0.0
    return om


class GridTensorField:
    """Symmetric tensor field sampled on a uniform periodic grid.

    ``comps`` has shape (C(n+m-1, m), N, ..., N); axis coordinates are
    -L/2 + (L/N)*index.
    """

    def __init__(self, n, m, N, L, comps):
        self.n = n
        self.m = m
        self.N = N
        self.L = float(L)
        self.comps = np.asarray(comps, dtype=float)
        if self.comps.shape != (sym_dim(n, m),) + (N,) * n:
            raise ValueError("component array has wrong shape")

    @classmethod
    def zeros(cls, n, m, N, L):
        return cls(n, m, N, L, np.zeros((sym_dim(n, m),) + (N,) * n))

    @classmethod
    def sample(cls, field: PolyBumpField, N, L, enforce_margin=True):
        """Sample a bump field; its support must sit well inside the box."""
        if field.rho is None:
            raise ValueError("grid sampling needs a compactly supported field")
        if enforce_margin and float(field.rho) > L / 4 + 1e-12:
            raise ValueError("support must leave a margin of at least L/4")
        axes = [np.arange(N) * (L / N) - L / 2 for _ in range(field.n)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        comps = [field.component(idx).eval_many(mesh)
                 for idx in canonical_indices(field.n, field.m)]
        return cls(field.n, field.m, N, L, np.stack(comps))

    @property
    def h(self):
        return self.L / self.N

    def axis_coords(self):
        return np.arange(self.N) * self.h - self.L / 2

    def index_list(self):
        return list(canonical_indices(self.n, self.m))

    def component(self, idx):
        key = tuple(sorted(idx))
        return self.comps[self.index_list().index(key)]

    def norm_l2(self):
        """Multiplicity-weighted discrete L2 norm."""
        total = 0.0
        for pos, idx in enumerate(self.index_list()):
            total += multiplicity(idx) * float((self.comps[pos] ** 2).sum())
        return math.sqrt(total) * self.h ** (self.n / 2)

    def __sub__(self, other):
        return GridTensorField(self.n, self.m, self.N, self.L,
                               self.comps - other.comps)

    def __add__(self, other):
        return GridTensorField(self.n, self.m, self.N, self.L,
                               self.comps + other.comps)

    def fft(self):
        return np.fft.fftn(self.comps, axes=tuple(range(1, self.n + 1)))

    # -- interchange format: JSON header + row-major CSV -------------------

    def save(self, path_prefix):
        with open(str(path_prefix) + ".json", "w") as fh:
            json.dump({"n": self.n, "m": self.m, "N": self.N, "L": self.L}, fh)
        flat = self.comps.reshape(len(self.comps), -1).T
        np.savetxt(str(path_prefix) + ".csv", flat, delimiter=",",
                   header=",".join("c" + "".join(map(str, idx))
                                   for idx in self.index_list()),
                   comments="")

    @classmethod
    def load(cls, path_prefix):
        with open(str(path_prefix) + ".json") as fh:
            head = json.load(fh)
        flat = np.loadtxt(str(path_prefix) + ".csv", delimiter=",", skiprows=1)
        flat = np.atleast_2d(flat)
        comps = flat.T.reshape((sym_dim(head["n"], head["m"]),)
                               + (head["N"],) * head["n"])
        return cls(head["n"], head["m"], head["N"], head["L"], comps)


class FrequencySymbol:
    """Canonical-coordinate matrices of y-multiplication maps on S^m.

    ``imul_coeffs[r, c, a]`` gives the matrix of i_y = (y (.) .) as
    sum_a y_a * imul_coeffs[..a]; ``jcon_coeffs`` likewise for the dual
    contraction j_y.  For y != 0 the Gram of i_y is positive definite.
    """

    def __init__(self, n, m):
        if m < 1:
            raise ValueError("need rank >= 1")
        self.n = n
        self.m = m
        rows = list(canonical_indices(n, m))
        cols = list(canonical_indices(n, m - 1))
        imul = np.zeros((len(rows), len(cols), n))
        for r, idx in enumerate(rows):
            for p in range(m):
                rest = tuple(sorted(idx[:p] + idx[p + 1:]))
                imul[r, cols.index(rest), idx[p]] += 1.0 / m
        jcon = np.zeros((len(cols), len(rows), n))
        for c, jdx in enumerate(cols):
            for a in range(n):
                jcon[c, rows.index(tuple(sorted(jdx + (a,)))), a] += 1.0
        self.imul_coeffs = imul
        self.jcon_coeffs = jcon

    def imul_matrix(self, y):
        return np.einsum("rca,a->rc", self.imul_coeffs, np.asarray(y, float))

    def jcon_matrix(self, y):
        return np.einsum("rca,a->rc", self.jcon_coeffs, np.asarray(y, float))

    def gram(self, y):
        return self.jcon_matrix(y) @ self.imul_matrix(y)


def _omega_mesh(N, L, n):
    oms = [_omega(N, L) for _ in range(n)]
    return np.stack(np.meshgrid(*oms, indexing="ij"), axis=-1)


def d_field(v: GridTensorField) -> GridTensorField:
    """Spectral symmetrized derivative, rank m -> m+1."""
    sym = FrequencySymbol(v.n, v.m + 1)
    w = _omega_mesh(v.N, v.L, v.n)
    vhat = v.fft()
    a = np.einsum("rca,...a->...rc", sym.imul_coeffs, w)
    dv = 1j * np.einsum("...rc,c...->r...",
                        a, vhat.reshape(vhat.shape[0], *vhat.shape[1:]))
    out = np.fft.ifftn(dv, axes=tuple(range(1, v.n + 1))).real
    return GridTensorField(v.n, v.m + 1, v.N, v.L, out)


def delta_field(f: GridTensorField) -> GridTensorField:
    """Spectral divergence, rank m -> m-1."""
    if f.m < 1:
        raise ValueError("divergence needs rank >= 1")
    sym = FrequencySymbol(f.n, f.m)
    w = _omega_mesh(f.N, f.L, f.n)
    fhat = f.fft()
    a = np.einsum("rca,...a->...rc", sym.jcon_coeffs, w)
    df = 1j * np.einsum("...rc,c...->r...", a, fhat)
    out = np.fft.ifftn(df, axes=tuple(range(1, f.n + 1))).real
    return GridTensorField(f.n, f.m - 1, f.N, f.L, out)


def laplacian_field(f: GridTensorField, times=1) -> GridTensorField:
    w = _omega_mesh(f.N, f.L, f.n)
    mult = -(w ** 2).sum(axis=-1)
    fhat = f.fft() * mult[None, ...] ** times
    out = np.fft.ifftn(fhat, axes=tuple(range(1, f.n + 1))).real
    return GridTensorField(f.n, f.m, f.N, f.L, out)


def solenoidal_decompose(f: GridTensorField):
    """Per-frequency least-squares split f = sf + d v with delta sf = 0.

    The zero frequency (and the zeroed Nyquist bins) carry no potential
    part; constants are divergence-free, so they belong to sf.
    """
    if f.m < 1:
        raise ValueError("decomposition needs rank >= 1")
    sym = FrequencySymbol(f.n, f.m)
    w = _omega_mesh(f.N, f.L, f.n).reshape(-1, f.n)
    fhat = f.fft().reshape(f.comps.shape[0], -1).T  # (P, dim_m)
    a = np.einsum("rca,pa->prc", sym.imul_coeffs, w)
    jm = np.einsum("rca,pa->prc", sym.jcon_coeffs, w)
    gram = jm @ a
    rhs = np.einsum("prc,pc->pr", jm, fhat)
    dead = (w == 0).all(axis=1)
    eye = np.eye(gram.shape[1])
    gram[dead] = eye
    rhs[dead] = 0.0
    wvec = np.linalg.solve(gram, rhs[..., None])[..., 0]   # what = i * vhat
    vhat = -1j * wvec
    dvhat = np.einsum("prc,pc->pr", a, wvec)
    shat = fhat - dvhat
    shape = (f.N,) * f.n
    sf = np.stack([np.fft.ifftn(shat[:, c].reshape(shape)).real
                   for c in range(shat.shape[1])])
    vv = np.stack([np.fft.ifftn(vhat[:, c].reshape(shape)).real
                   for c in range(vhat.shape[1])])
    return (GridTensorField(f.n, f.m, f.N, f.L, sf),
            GridTensorField(f.n, f.m - 1, f.N, f.L, vv))


def helmholtz_decompose_oracle(f: GridTensorField):
    """Independent classical route for m=1: scalar Poisson solve for the
    potential, v = Laplace^{-1} div f, then sf = f - grad v."""
    if f.m != 1:
        raise ValueError("oracle is for vector fields")
    w = _omega_mesh(f.N, f.L, f.n)
    fhat = f.fft()
    div = 1j * sum(w[..., a] * fhat[a] for a in range(f.n))
    norm2 = (w ** 2).sum(axis=-1)
    inv = np.zeros_like(norm2)
    np.divide(1.0, norm2, out=inv, where=norm2 > 0)
    vhat = -div * inv          # v solves Laplace v = div f
    grad = np.stack([1j * w[..., a] * vhat for a in range(f.n)])
    sf = np.stack([np.fft.ifftn(fhat[a] - grad[a]).real for a in range(f.n)])
    vv = np.fft.ifftn(vhat).real[None, ...]
    return (GridTensorField(f.n, 1, f.N, f.L, sf),
            GridTensorField(f.n, 0, f.N, f.L, vv))


# ---------------------------------------------------------------------------
# angular-quadrature normal operators
# ---------------------------------------------------------------------------

def normal_momentum(f: PolyBumpField, x, k, rule: SphereRule) -> SymTensor:
    """(N_m^k f)(x) = int <x,xi>^k xi^(.m) J_m^k f(x - <x,xi>xi, xi) dS."""
    return divergence_normal(f, x, k, 0, rule)


def normal_ray(f: PolyBumpField, x, rule: SphereRule) -> SymTensor:
    return divergence_normal(f, x, 0, 0, rule)


def divergence_normal(f: PolyBumpField, x, k, r, rule: SphereRule) -> SymTensor:
    """(delta^r N_m^k f)(x) via the closed angular formula.

    Carries the factor k!/(k-r)! and weight <x,xi>^{k-r} for r <= k;
    r = k+1 returns the zero tensor by contract.
    """
    if not 0 <= r <= k + 1:
        raise ValueError("need 0 <= r <= k+1")
    if r > f.m:
        raise ValueError("divergence order exceeds rank")
    x = np.asarray(x, dtype=float)
    out = SymTensor(f.n, f.m - r)
    if r == k + 1:
        return out
    factor = math.factorial(k) / math.factorial(k - r)
    vals = {idx: 0.0 for idx in canonical_indices(f.n, f.m - r)}
    for node, wgt in zip(rule.nodes, rule.weights):
        xi = np.asarray(node)
        proj = float(x @ xi)
        foot = x - proj * xi
        jv = _momentum_at(f, foot, xi, k)
        if jv == 0.0:
            continue
        base = wgt * jv * proj ** (k - r)
        for idx in vals:
            vals[idx] += base * _monoval(xi, _xi_monomial_exps(idx, f.n))
    for idx, v in vals.items():
        out[idx] = factor * v
    return out


def _momentum_at(f, x, xi, k):
    from .xray import Line, momentum_transform
    return momentum_transform(f, Line(x, xi), k)


def xi_moment_integral(f: PolyBumpField, x, k, rank_out, rule: SphereRule) -> SymTensor:
    """int_S xi^(.rank_out) J_m^k f(x, xi) dS at the base point x itself."""
    x = np.asarray(x, dtype=float)
    vals = {idx: 0.0 for idx in canonical_indices(f.n, rank_out)}
    for node, wgt in zip(rule.nodes, rule.weights):
        xi = np.asarray(node)
        jv = _momentum_at(f, x, xi, k)
        if jv == 0.0:
            continue
        for idx in vals:
            vals[idx] += wgt * jv * _monoval(xi, _xi_monomial_exps(idx, f.n))
    out = SymTensor(f.n, rank_out)
    for idx, v in vals.items():
        out[idx] = v
    return out


def normal_momentum_on_points(f: PolyBumpField, pts, k, rule: SphereRule):
    """Vectorized (N_m^k f) on an array of points; returns (P, dim S^m)."""
    pts = np.asarray(pts, dtype=float)
    rho = float(f.rho)
    comps = [(idx, multiplicity(idx), _xi_monomial_exps(idx, f.n),
              f.component(idx)) for idx, _ in _nonzero(f)]
    order = (max((c[3].t_degree() for c in comps), default=0) + k) // 2 + 1
    gl_nodes, gl_w = _leggauss(order)
    out_idx = list(canonical_indices(f.n, f.m))
    acc = np.zeros((len(pts), len(out_idx)))
    for node, wgt in zip(rule.nodes, rule.weights):
        xi = np.asarray(node)
        proj = pts @ xi
        feet = pts - proj[:, None] * xi[None, :]
        t2 = rho * rho - (feet * feet).sum(axis=1)
        alive = t2 > (1e-14) ** 2
        if not alive.any():
            continue
        half = np.sqrt(np.maximum(t2, 0.0))
        ts = half[:, None] * gl_nodes[None, :]
        chord_pts = feet[:, None, :] + ts[..., None] * xi[None, None, :]
        integrand = np.zeros(ts.shape)
        for _idx, mult, exps, bump in comps:
            w = mult * _monoval(xi, exps)
            if w != 0.0:
                integrand += w * bump.eval_many(chord_pts)
        if k:
            integrand = integrand * ts**k
        jvals = half * (integrand @ gl_w)
        jvals[~alive] = 0.0
        base = wgt * jvals * proj**k
        for c, idx in enumerate(out_idx):
            acc[:, c] += base * _monoval(xi, _xi_monomial_exps(idx, f.n))
    return acc


def _nonzero(f):
    for idx in canonical_indices(f.n, f.m):
        core = f.core(idx)
        if not core.is_zero():
            yield idx, core


# ---------------------------------------------------------------------------
# convolution-form normal operators on grids
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _origin_cell_average_2d(alpha, beta, h):
    """Cell average over the h-cell at 0 of x^alpha/|x|^beta (n=2).

    Exact radial integration leaves a smooth 1-D angular integral:
    the radial power is gamma = |alpha| - beta + 2 >= 1 for the kernels here.
    """
    if any(a % 2 for a in alpha):
        return 0.0
    gamma = sum(alpha) - beta + 2
    if gamma <= 0:
        raise ValueError("kernel not cell-integrable")

    def integrand(theta):
        c, s = math.cos(theta), math.sin(theta)
        r_edge = (h / 2) / max(abs(c), abs(s))
        return (c ** alpha[0]) * (s ** alpha[1]) * r_edge**gamma / gamma

    total, _err = _quad(integrand, 0.0, 2.0 * math.pi,
                        points=[i * math.pi / 4 for i in range(1, 8)],
                        limit=200)
    return total / h**2


@lru_cache(maxsize=None)
def _origin_cell_average_3d(alpha, beta, h):
    """Spherical analogue of the 2-D origin-cell average."""
    if any(a % 2 for a in alpha):
        return 0.0
    gamma = sum(alpha) - beta + 3
    if gamma <= 0:
        raise ValueError("kernel not cell-integrable")
    nz, wz = np.polynomial.legendre.leggauss(120)
    nphi = 240
    phis = 2 * np.pi * np.arange(nphi) / nphi
    total = 0.0
    for z, wgt in zip(nz, wz):
        st = math.sqrt(1.0 - z * z)
        us = np.stack([st * np.cos(phis), st * np.sin(phis),
                       np.full(nphi, z)], axis=1)
        r_edge = (h / 2) / np.abs(us).max(axis=1)
        vals = (us[:, 0] ** alpha[0] * us[:, 1] ** alpha[1]
                * us[:, 2] ** alpha[2]) * r_edge**gamma / gamma
        total += wgt * vals.sum() * (2 * np.pi / nphi)
    return total / h**3


def _kernel_grid(n, N, h, alpha, beta, average_radius=6, subsamples=10):
    """Sampled kernel x^alpha/|x|^beta on the offset grid (2N per axis).

    Cells within ``average_radius`` (Chebyshev) of the origin are replaced by
    cell averages: the origin cell analytically in the radial direction, the
    neighbors by tensor Gauss-Legendre subsampling.
    """
    offs = (np.arange(2 * N) - N) * h
    mesh = np.stack(np.meshgrid(*([offs] * n), indexing="ij"), axis=-1)
    r2 = (mesh**2).sum(axis=-1)
    num = np.ones(r2.shape)
    for a in range(n):
        if alpha[a]:
            num = num * mesh[..., a] ** alpha[a]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(r2 > 0, num / np.maximum(r2, 1e-300) ** (beta / 2.0), 0.0)
    gl_x, gl_w = np.polynomial.legendre.leggauss(subsamples)
    cell_nodes = 0.5 * h * gl_x
    cell_w = 0.5 * gl_w
    for cell in itertools.product(range(-average_radius, average_radius + 1),
                                  repeat=n):
        pos = tuple(N + c for c in cell)
        if all(c == 0 for c in cell):
            if n == 2:
                vals[pos] = _origin_cell_average_2d(tuple(alpha), beta, h)
            else:
                vals[pos] = _origin_cell_average_3d(tuple(alpha), beta, h)
            continue
        center = np.array(cell, dtype=float) * h
        grids = np.meshgrid(*[center[a] + cell_nodes for a in range(n)],
                            indexing="ij")
        pts = np.stack(grids, axis=-1)
        rr = (pts**2).sum(axis=-1)
        nm = np.ones(rr.shape)
        for a in range(n):
            if alpha[a]:
                nm = nm * pts[..., a] ** alpha[a]
        cellvals = nm / rr ** (beta / 2.0)
        wgrid = np.ones(rr.shape)
        for a in range(n):
            shape = [1] * n
            shape[a] = subsamples
            wgrid = wgrid * cell_w.reshape(shape)
        # cell_w integrates to h per axis, so this is already the average
        vals[pos] = float((cellvals * wgrid).sum())
    return vals


def normal_convolution(f: GridTensorField, k=0, average_radius=6):
    """(N_m^k f) by discrete convolution with the tensor-valued kernel.

    Implements the closed convolution form: for each l <= k the kernel is
    (x^(.2m+2k-l)) / |x|^{2m+2k-2l+n-1} with the x^(.2k-l) contraction applied
    pointwise after convolving, weighted by 2 C(k,l) (-1)^l.
    """
    n, m, N = f.n, f.m, f.N
    h = f.h
    if f.comps.shape[1] < 16:
        raise ValueError("grid too coarse for kernel resolution")
    coords = f.axis_coords()
    mesh = np.stack(np.meshgrid(*([coords] * n), indexing="ij"), axis=-1)
    out_idx = list(canonical_indices(n, m))
    out = np.zeros((len(out_idx),) + (N,) * n)
    conv_cache = {}

    def conv(jpos, mu, beta):
        key = (jpos, mu, beta)
        if key not in conv_cache:
            alpha = _xi_monomial_exps(mu, n)
            kern = _kernel_grid(n, N, h, alpha, beta, average_radius)
            full = fftconvolve(f.comps[jpos], kern, mode="full")
            sl = tuple(slice(N, 2 * N) for _ in range(n))
            conv_cache[key] = full[sl] * h**n
        return conv_cache[key]

    j_list = list(canonical_indices(n, m))
    for l in range(k + 1):
        beta = 2 * m + 2 * k - 2 * l + n - 1
        coeff = 2.0 * math.comb(k, l) * (-1) ** l
        for p_idx in canonical_indices(n, 2 * k - l):
            p_mult = multiplicity(p_idx)
            xpref = np.ones((N,) * n)
            for a in p_idx:
                xpref = xpref * mesh[..., a]
            for jpos, j_idx in enumerate(j_list):
                j_mult = multiplicity(j_idx)
                for c, i_idx in enumerate(out_idx):
                    mu = tuple(sorted(p_idx + i_idx + j_idx))
                    out[c] += coeff * p_mult * j_mult * xpref * conv(jpos, mu, beta)
    return GridTensorField(n, m, N, f.L, out)


def normal_symbol(f: GridTensorField):
    """N_m f (k=0) as an exact Fourier multiplier, n=2 only.

    The symbol is (4 pi / |w|) xi_w^(.m) <., xi_w^(.m)> with xi_w the unit
    vector orthogonal to w; it annihilates potential fields exactly, so this
    is the precision path for N_m f = N_m sf checks.  The zero bin (mean) is
    set to zero; comparisons must use the same convention on both operands.
    """
    if f.n != 2:
        raise ValueError("symbol path implemented for n=2")
    n, m, N = f.n, f.m, f.N
    w = _omega_mesh(N, f.L, n)
    norm = np.sqrt((w**2).sum(axis=-1))
    inv = np.zeros_like(norm)
    np.divide(1.0, norm, out=inv, where=norm > 0)
    xi = np.stack([-w[..., 1] * inv, w[..., 0] * inv], axis=-1)
    fhat = f.fft()
    idx_list = list(canonical_indices(n, m))
    pairing = np.zeros_like(fhat[0])
    monos = []
    for pos, idx in enumerate(idx_list):
        exps = _xi_monomial_exps(idx, n)
        mono = xi[..., 0] ** exps[0] * xi[..., 1] ** exps[1]
        monos.append(mono)
        pairing = pairing + multiplicity(idx) * fhat[pos] * mono
    scale = 4.0 * np.pi * inv
    out = np.stack([np.fft.ifftn(scale * monos[pos] * pairing).real
                    for pos in range(len(idx_list))])
    return GridTensorField(n, m, N, f.L, out)


# ---------------------------------------------------------------------------
# identity verification: scalar normal operator and i^l j^l matrices
# ---------------------------------------------------------------------------

def n0_scalar(g: PolyBumpField, x, rule: SphereRule) -> float:
    """N_0 g(x) = int_S J_0 g(x, xi) dS for a scalar field."""
    from .xray import chord_integral
    x = np.asarray(x, dtype=float)
    bump = g.component(())
    return sum(w * chord_integral(bump, 0, x, np.asarray(node))
               for node, w in zip(rule.nodes, rule.weights))


@lru_cache(maxsize=None)
def _iljl_matrix(n, m, l):
    """Matrix of i^l j^l on S^m in canonical coordinates (exact, as floats)."""
    rows = list(canonical_indices(n, m))
    mat = np.zeros((len(rows), len(rows)))
    for col, jdx in enumerate(rows):
        basis = SymTensor(n, m, {jdx: Fraction(1)})
        t = i_metric(j_metric(basis, l), l)
        for r, idx in enumerate(rows):
            mat[r, col] = float(t.get(idx))
    return mat


def _normal_component_exprs(f: PolyBumpField):
    """TransformExpr for each component of the N_m f integrand xi^I J_m f."""
    base = TransformExpr.momentum(f, 0)
    zero = (0,) * f.n
    out = {}
    for idx in canonical_indices(f.n, f.m):
        out[idx] = base.mul_prefactor({(zero, _xi_monomial_exps(idx, f.n)): 1.0})
    return out


def verify_ray_key_identity(f: PolyBumpField, x, rule: SphereRule):
    """Residuals of the ray-transform key identity, per R-image component.

    LHS: m! N_0((Rf)_{i1 j1..im jm}) by angular quadrature of the exact
    polynomial components of Rf.  RHS: the c_{l,m}-weighted alternated
    spatial derivatives of i^l j^l N_m f, with every derivative moved onto f
    inside the line integral.
    """
    from .polyfield import operator_R
    m, n = f.m, f.n
    x = np.asarray(x, dtype=float)
    rf = operator_R(f)
    exprs = _normal_component_exprs(f)
    cache = {}

    def sval(comp_idx, der_idx):
        key = (comp_idx, der_idx)
        if key not in cache:
            cache[key] = exprs[comp_idx].dx_multi(der_idx).sphere_integral(x, rule)
        return cache[key]

    idx_list = list(canonical_indices(n, m))
    residuals = {}
    for key in rf.canonical_keys():
        pairs, _blocks = key
        comp = rf.component(rf.key_to_index(key))
        scalar = PolyBumpField(n, 0, rf.rho, rf.power, {(): comp.core})
        lhs = math.factorial(m) * n0_scalar(scalar, x, rule)
        rhs = 0.0
        for l in range(m // 2 + 1):
            bmat = _iljl_matrix(n, m, l)
            cl = float(c_constant(l, m, n))
            acc = 0.0
            for flips in itertools.product((0, 1), repeat=m):
                comp_ax = []
                der_ax = []
                for t, (a, b) in enumerate(pairs):
                    if flips[t]:
                        a, b = b, a
                    comp_ax.append(a)
                    der_ax.append(b)
                sign = (-1) ** sum(flips)
                crow = idx_list.index(tuple(sorted(comp_ax)))
                dtup = tuple(sorted(der_ax))
                val = sum(bmat[crow, ci] * sval(cidx, dtup)
                          for ci, cidx in enumerate(idx_list)
                          if bmat[crow, ci] != 0.0)
                acc += sign * val
            rhs += cl * acc / 2.0**m
        residuals[key] = lhs - rhs
    return residuals


def verify_momentum_moment_identity(f: PolyBumpField, x, k, rule: SphereRule):
    """Residual tensor of the momentum-data reduction identity.

    LHS integrates xi^(.(m-k)) J^k f at the base point; RHS combines
    x-contracted divergences of the normal operators N^r (foot-point path),
    so the two sides are quadratures of genuinely different integrands.
    """
    if not 0 <= k <= f.m:
        raise ValueError("k out of range")
    x = np.asarray(x, dtype=float)
    lhs = xi_moment_integral(f, x, k, f.m - k, rule)
    rhs = SymTensor(f.n, f.m - k)
    for r in range(k + 1):
        coeff = (-1.0) ** (k - r) * math.comb(k, r) / math.factorial(r)
        t = divergence_normal(f, x, r, r, rule)
        t = j_contract(sym_power(tuple(x), k - r, f.n), t)
        rhs = rhs + t * coeff
    return lhs - rhs


def _delta_np_expr(f, p, comp_idx):
    """Expression for (delta^p N^p_m f)_{comp} before sphere integration.

    Base-point form: p! sum_l C(p,l) <x,xi>^{p-l} xi^{comp} J^l f(x, xi).
    """
    n = f.n
    expr = None
    xiexp = _xi_monomial_exps(comp_idx, n)
    for l in range(p + 1):
        pref = {}
        for (wx, wxi), wc in dot_power_terms(n, p - l).items():
            pref[(wx, tuple(a + b for a, b in zip(wxi, xiexp)))] = float(wc)
        term = TransformExpr.momentum(f, l).mul_prefactor(pref)
        term = term.scale(math.comb(p, l))
        expr = term if expr is None else expr + term
    return expr.scale(math.factorial(p))


def _g_tensor_exprs(f, k, r):
    """Expressions for the components of the auxiliary tensor G_{m-r}."""
    n, m = f.n, f.m
    rank = m - r
    inner = {}
    for kidx in canonical_indices(n, rank):
        e = None
        for p in range(r + 1):
            coeff = (-1.0) ** (r - p) * math.comb(r, p) / math.factorial(p)
            for aidx in canonical_indices(n, r - p):
                sub = _delta_np_expr(f, p, tuple(sorted(kidx + aidx)))
                pref = {(_xi_monomial_exps(aidx, n), (0,) * n):
                        coeff * multiplicity(aidx)}
                term = sub.mul_prefactor(pref)
                e = term if e is None else e + term
        inner[kidx] = e
    idx_list = list(canonical_indices(n, rank))
    gexprs = {}
    for kidx in canonical_indices(n, rank):
        e = None
        for l in range(rank // 2 + 1):
            bmat = _iljl_matrix(n, rank, l)
            cl = float(c_constant(l, rank, n))
            row = idx_list.index(kidx)
            for ci, cidx in enumerate(idx_list):
                w = bmat[row, ci]
                if w == 0.0:
                    continue
                term = inner[cidx].scale(cl * w)
                e = term if e is None else e + term
        gexprs[kidx] = e
    return gexprs


def momentum_key_rhs_exprs(f: PolyBumpField, k):
    """One TransformExpr per output component of the momentum key identity."""
    n, m = f.n, f.m
    from .polyfield import PairSymTensorField, _position_splits
    layout = PairSymTensorField(n, m - k, (k,), f.rho, f.power)
    gexprs = {r: _g_tensor_exprs(f, k, r) for r in range(k + 1)}
    out = {}
    for key in layout.canonical_keys():
        pairs, (fixed,) = key
        total = None
        for r in range(k + 1):
            coeff = (-1.0) ** r * math.comb(k, r)
            for (der_i, rest_i), wgt in _position_splits(fixed, (r, k - r)):
                acc = None
                for flips in itertools.product((0, 1), repeat=m - k):
                    comp_ax = []
                    der_ax = []
                    for t, (a, b) in enumerate(pairs):
                        if flips[t]:
                            a, b = b, a
                        comp_ax.append(a)
                        der_ax.append(b)
                    sign = (-1.0) ** sum(flips) / 2.0 ** (m - k)
                    gkey = tuple(sorted(tuple(comp_ax) + tuple(rest_i)))
                    term = gexprs[r][gkey].dx_multi(tuple(sorted(der_ax)))
                    term = term.scale(sign)
                    acc = term if acc is None else acc + term
                term = acc.dx_multi(tuple(sorted(der_i))).scale(coeff * float(wgt))
                total = term if total is None else total + term
        out[key] = total
    return out


def verify_momentum_key_identity(f: PolyBumpField, x, k, rule: SphereRule, rhs_exprs=None):
    """Residuals of the momentum key identity at one point, per component."""
    n, m = f.n, f.m
    if not 0 <= k <= m:
        raise ValueError("k out of range")
    x = np.asarray(x, dtype=float)
    if rhs_exprs is None:
        rhs_exprs = momentum_key_rhs_exprs(f, k)
    rkf = generalized_R(f, k)
    residuals = {}
    for key, expr in rhs_exprs.items():
        comp = rkf.component(rkf.key_to_index(key))
        scalar = PolyBumpField(n, 0, rkf.rho, rkf.power, {(): comp.core})
        lhs = math.factorial(m) * n0_scalar(scalar, x, rule)
        rhs = expr.sphere_integral(x, rule)
        residuals[key] = lhs - rhs
    return residuals


def verify_smoothness(f: GridTensorField):
    """Residual of Delta^m sf = 2^m (even-index divergence)^m R f, spectrally.

    The even-index divergence candidate contracts one derivative against each
    j-slot of R f.  Validated exactly at m=1; for m >= 2 the result is
    informational (the defining reference is external).
    """
    n, m = f.n, f.m
    sf, _v = solenoidal_decompose(f)
    lhs = laplacian_field(sf, times=m)
    w = _omega_mesh(f.N, f.L, n)
    fhat = f.fft()
    idx_list = f.index_list()
    rhs_comps = []
    for idx in idx_list:
        acc = np.zeros(fhat.shape[1:], dtype=complex)
        for jtuple in itertools.product(range(n), repeat=m):
            jfac = np.ones(fhat.shape[1:], dtype=complex)
            for a in jtuple:
                jfac = jfac * (1j * w[..., a])
            inner = np.zeros(fhat.shape[1:], dtype=complex)
            for flips in itertools.product((0, 1), repeat=m):
                comp = []
                dfac = np.ones(fhat.shape[1:], dtype=complex)
                for t in range(m):
                    a, b = idx[t], jtuple[t]
                    if flips[t]:
                        a, b = b, a
                    comp.append(a)
                    dfac = dfac * (1j * w[..., b])
                sign = (-1.0) ** sum(flips)
                pos = idx_list.index(tuple(sorted(comp)))
                inner = inner + sign * dfac * fhat[pos]
            acc = acc + jfac * inner / 2.0**m
        rhs_comps.append(np.fft.ifftn(2.0**m * acc).real)
    rhs = GridTensorField(n, m, f.N, f.L, np.stack(rhs_comps))
    residual = lhs - rhs
    rel = residual.norm_l2() / max(f.norm_l2(), 1e-300)
    return residual, rel


# ---------------------------------------------------------------------------
# desk-scale unique-continuation experiments
# ---------------------------------------------------------------------------

def _check(name, value, tolerance, mode="below"):
    ok = value <= tolerance if mode == "below" else value > tolerance
    return {"name": name, "value": float(value), "tolerance": float(tolerance),
            "pass": bool(ok)}


def _sample_lines_through(rng, center, radius, count, n):
    from .xray import Line
    lines = []
    for t in range(count):
        child = rng.split(f"line-{t}")
        x = np.asarray(center) + np.asarray(child.point_in_ball(n, radius))
        lines.append(Line(x, child.direction(n)))
    return lines


def _exact_zero_value(pair_field):
    if pair_field.is_zero():
        return 0.0
    return max(max(abs(float(c)) for c in p.terms.values())
               for p in pair_field.comps.values() if not p.is_zero())


def ucp_experiment(scenario, config, rng):
    """Run one unique-continuation mechanics scenario and report residuals.

    ``scenario`` is one of "ray", "mrt", "trt".  The report is a dict
    {scenario, config, residuals: [{name, value, tolerance, pass}], timing}.
    Checks named *_nonvanishing are negative controls: they pass when the
    value EXCEEDS the threshold.
    """
    import time as _time
    from . import polyfield as pfmod
    from .xray import Line, momentum_transform, ray_transform, write_transform_csv

    t_start = _time.time()
    checks = []
    artifacts = {}
    n = config.get("n", 2)
    m = config.get("m", 1)
    tol = config.get("tolerance", 1e-9)
    floor = config.get("nonvanish_floor", 1e-3)
    u_center = np.asarray(config.get("u_center", [0.2] + [0.0] * (n - 1)))
    u_radius = config.get("u_radius", 0.25)
    num_lines = config.get("num_lines", 30)
    num_points = config.get("num_points", 10)
    rule = SphereRule.from_json_dict(config["rule"]) if "rule" in config else None

    if scenario == "ray":
        if rule is None:
            from .spherequad import build_rule
            rule = build_rule(n, config.get("rule_degree", 30))
        potential = config.get("potential", True)
        if potential:
            v = pfmod.random_bump_field(n, m - 1, rng, power=m + 3,
                                        degree=config.get("degree", 2), label="v")
            f = pfmod.inner_derivative(v)
        else:
            f = pfmod.random_bump_field(n, m, rng, power=m + 3,
                                        degree=config.get("degree", 2), label="f")
        rf = pfmod.operator_R(f)
        checks.append(_check("curvature_operator_exactly_zero",
                             _exact_zero_value(rf), 1e-10))
        lines = _sample_lines_through(rng, u_center, u_radius, num_lines, n)
        data = [ray_transform(f, line) for line in lines]
        checks.append(_check("ray_data_through_U_max",
                             max(abs(d) for d in data), tol))
        pts = [np.asarray(u_center) + np.asarray(rng.split(f"pt{t}").point_in_ball(n, u_radius))
               for t in range(num_points)]
        nmax = max(normal_ray(f, x, rule).max_abs() for x in pts)
        checks.append(_check("normal_operator_on_U_max", nmax, tol))
        f_neg = pfmod.random_bump_field(n, m, rng, power=m + 3,
                                        degree=config.get("degree", 2), label="neg")
        neg = max(normal_ray(f_neg, x, rule).max_abs() for x in pts[:3])
        checks.append(_check("nonpotential_normal_nonvanishing", neg, floor,
                             mode="above"))
        artifacts["lines"] = lines
        artifacts["line_values"] = data

    elif scenario == "mrt":
        k = config.get("k", 1)
        if not 0 <= k < m:
            raise ValueError("mrt scenario needs 0 <= k < m")
        if rule is None:
            from .spherequad import build_rule
            rule = build_rule(n, config.get("rule_degree", 30))
        potential = config.get("potential", True)
        if potential:
            v = pfmod.random_bump_field(n, m - k - 1, rng, power=m + k + 4,
                                        degree=config.get("degree", 2), label="v")
            f = pfmod.potential_field(v, order=k + 1)
        else:
            f = pfmod.random_bump_field(n, m, rng, power=m + k + 4,
                                        degree=config.get("degree", 2), label="f")
        rkf = pfmod.generalized_R(f, k)
        checks.append(_check("generalized_curvature_exactly_zero",
                             _exact_zero_value(rkf), 1e-10))
        lines = _sample_lines_through(rng, u_center, u_radius, num_lines, n)
        values = []
        for p in range(k + 1):
            data = [momentum_transform(f, line, p) for line in lines]
            values.append(data)
            checks.append(_check(f"momentum_data_order{p}_through_U_max",
                                 max(abs(d) for d in data), tol))
        pts = [np.asarray(u_center) + np.asarray(rng.split(f"pt{t}").point_in_ball(n, u_radius))
               for t in range(num_points)]
        for p in range(k + 1):
            nmax = max(normal_momentum(f, x, p, rule).max_abs() for x in pts)
            checks.append(_check(f"normal_momentum_order{p}_on_U_max", nmax, tol))
        neg = max(abs(momentum_transform(f, line, k + 1)) for line in lines)
        checks.append(_check(f"momentum_data_order{k + 1}_nonvanishing", neg,
                             floor, mode="above"))
        artifacts["lines"] = lines
        artifacts["line_values"] = list(zip(*values))

    elif scenario == "trt":
        from .symtensor import sym_dim, sym_power_span_rank
        from .xray import TransverseRay, transverse_transform, trt_pointwise_recover
        if n < 3:
            raise ValueError("transverse scenario needs n >= 3")
        f = pfmod.random_bump_field(n, m, rng, power=4,
                                    degree=config.get("degree", 2), label="f")
        u_center = np.asarray(config.get("u_center", [2.5] + [0.0] * (n - 1)))
        etas = []
        while True:
            etas = [rng.split(f"eta{t}").direction(n) for t in range(n)]
            if abs(np.linalg.det(np.array(etas))) > 0.2:
                break
        expected = sym_dim(n, m)
        rank = sym_power_span_rank([list(e) for e in etas], m)
        checks.append(_check("sym_power_span_rank_deficit",
                             abs(rank - expected), 0.5))
        # f vanishes on U (support is disjoint from U by construction)
        pts_u = [u_center + np.asarray(rng.split(f"u{t}").point_in_ball(n, u_radius))
                 for t in range(num_points)]
        fmax_u = max(f.value(tuple(x)).max_abs() for x in pts_u)
        checks.append(_check("field_vanishes_on_U_max", fmax_u, 1e-12))
        # pointwise recovery from pairings against the eta products
        worst = 0.0
        for t in range(num_points):
            x = rng.split(f"rp{t}").point_in_ball(n, 0.9)
            fx = f.value(x)
            samples = {}
            for combo in canonical_indices(n, m):
                val = 0.0
                for dense in itertools.product(range(n), repeat=m):
                    w = fx.get(dense)
                    if w:
                        prod = 1.0
                        for eta_i, ax in zip(combo, dense):
                            prod *= etas[eta_i][ax]
                        val += w * prod
                samples[combo] = val
            rec = trt_pointwise_recover([list(e) for e in etas], samples, m)
            worst = max(worst, (rec - fx).max_abs())
        checks.append(_check("pointwise_recovery_max_err", worst, tol))
        # transverse data on lines from U into the support reduce to scalar
        # ray data of the contracted component <f, y^(.m)>
        worst = 0.0
        for t in range(num_lines):
            child = rng.split(f"ray{t}")
            eta = np.asarray(etas[t % n])
            base = u_center + np.asarray(child.point_in_ball(n, u_radius))
            target = np.asarray(child.point_in_ball(n, 0.8))
            omega = target - base
            omega = omega / np.linalg.norm(omega)
            xpt = base - (base @ omega) * omega
            ray = TransverseRay(omega, xpt, eta - (eta @ omega) * omega)
            tval = transverse_transform(f, ray)
            # scalar oracle: contract f against y^(.m) componentwise
            contracted = {}
            for dense in itertools.product(range(n), repeat=m):
                core = f.core(dense)
                if not core.is_zero():
                    wy = 1.0
                    for ax in dense:
                        wy *= ray.y[ax]
                    contracted[()] = contracted.get((), 0) + core * wy
            scalar = pfmod.PolyBumpField(n, 0, f.rho, f.power, contracted)
            sval = ray_transform(scalar, Line(ray.x, ray.omega))
            worst = max(worst, abs(tval - sval))
        checks.append(_check("transverse_scalar_reduction_max", worst, 1e-10))
        # negative control: dependent directions make recovery singular
        bad = [list(etas[0])] * n
        try:
            trt_pointwise_recover(bad, samples, m)
            raised = 0.0
        except ValueError:
            raised = 1.0
        checks.append(_check("dependent_directions_rejected", raised, 0.5,
                             mode="above"))
    else:
        raise ValueError(f"unknown scenario {scenario!r}")

    report = {
        "scenario": scenario,
        "config": {key: val for key, val in config.items() if key != "rule"},
        "residuals": checks,
        "timing": {"total_seconds": _time.time() - t_start},
    }
    if artifacts.get("lines") and config.get("lines_csv"):
        vals = artifacts["line_values"]
        names = ["value"] if not isinstance(vals[0], (tuple, list)) \
            else [f"value_k{p}" for p in range(len(vals[0]))]
        write_transform_csv(config["lines_csv"], artifacts["lines"], vals, names)
    return report
