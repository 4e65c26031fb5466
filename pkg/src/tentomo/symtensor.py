"""Finite-dimensional symmetric tensor algebra.

Rank-m tensors over R^n are tiny here (n <= 4, m <= 4 in practice), so
contractions are explicit loops over dense index tuples; correctness first.
Symmetric tensors are stored compressed: one scalar per non-decreasing index
tuple, of which there are C(n+m-1, m).

Scalars are generic: exact ``Fraction`` entries for identity proofs, floats
for quadrature paths, and any ring element supporting ``+``/``*`` otherwise
(polynomials included).
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np


def sym_dim(n, m):
    """dim S^m(R^n) = C(n+m-1, m)."""
    return math.comb(n + m - 1, m)


def canonical_indices(n, m):
    """All non-decreasing index tuples of length m over {0..n-1}."""
    return itertools.combinations_with_replacement(range(n), m)


def multiplicity(idx):
    """Number of distinct permutations of the tuple: m!/prod(counts!)."""
    m = len(idx)
    denom = 1
    for c in Counter(idx).values():
        denom *= math.factorial(c)
    return math.factorial(m) // denom


class MultiIndex:
    """Index tuple i_1..i_m over axes 0..n-1, canonical when non-decreasing."""

    __slots__ = ("indices",)

    def __init__(self, indices):
        self.indices = tuple(indices)

    def canonical(self) -> "MultiIndex":
        return MultiIndex(sorted(self.indices))

    def multiplicity(self) -> int:
        return multiplicity(self.indices)

    def __eq__(self, other):
        return sorted(self.indices) == sorted(other.indices)

    def __hash__(self):
        return hash(tuple(sorted(self.indices)))

    def __repr__(self):
        return f"MultiIndex{self.indices}"


class DenseTensor:
    """Full n^m array of scalars, stored sparsely as a dict."""

    def __init__(self, n, m, entries=None):
        self.n = n
        self.m = m
        self.entries = {}
        if entries:
            for idx, v in entries.items():
                if v != 0:
                    self.entries[tuple(idx)] = v

    @classmethod
    def from_function(cls, n, m, func):
        entries = {}
        for idx in itertools.product(range(n), repeat=m):
            v = func(idx)
            if v != 0:
                entries[idx] = v
        return cls(n, m, entries)

    def __getitem__(self, idx):
        return self.entries.get(tuple(idx), 0)

    def __setitem__(self, idx, v):
        if v == 0:
            self.entries.pop(tuple(idx), None)
        else:
            self.entries[tuple(idx)] = v

    def __add__(self, other):
        out = DenseTensor(self.n, self.m, dict(self.entries))
        for idx, v in other.entries.items():
            out[idx] = out[idx] + v
        return out

    def __sub__(self, other):
        return self + (other * -1)

    def __mul__(self, scalar):
        return DenseTensor(self.n, self.m,
                           {i: v * scalar for i, v in self.entries.items()})

    def is_zero(self):
        return all(v == 0 for v in self.entries.values())

    def max_abs(self):
        return max((abs(v) for v in self.entries.values()), default=0)


class SymTensor:
    """Symmetric tensor, one stored scalar per canonical index tuple."""

    def __init__(self, n, m, data=None):
        self.n = n
        self.m = m
        self.data = {}
        if data:
            for idx, v in data.items():
                self.data[tuple(sorted(idx))] = v

    @classmethod
    def zero(cls, n, m):
        return cls(n, m)

    @classmethod
    def from_vector(cls, n, vec):
        """Rank-1 tensor from a vector."""
        return cls(n, 1, {(i,): v for i, v in enumerate(vec) if v != 0})

    def get(self, idx):
        return self.data.get(tuple(sorted(idx)), 0)

    __getitem__ = get

    def set(self, idx, v):
        key = tuple(sorted(idx))
        if v == 0:
            self.data.pop(key, None)
        else:
            self.data[key] = v

    __setitem__ = set

    def to_dense(self):
        out = DenseTensor(self.n, self.m)
        for idx in itertools.product(range(self.n), repeat=self.m):
            v = self.get(idx)
            if v != 0:
                out[idx] = v
        return out

    def __add__(self, other):
        if (self.n, self.m) != (other.n, other.m):
            raise ValueError("shape mismatch")
        out = SymTensor(self.n, self.m, dict(self.data))
        for idx, v in other.data.items():
            out[idx] = out.get(idx) + v
        return out

    def __sub__(self, other):
        return self + (other * -1)

    def __mul__(self, scalar):
        return SymTensor(self.n, self.m,
                         {i: v * scalar for i, v in self.data.items()})

    __rmul__ = __mul__

    def is_zero(self):
        return all(v == 0 for v in self.data.values())

    def max_abs(self):
        return max((abs(v) for v in self.data.values()), default=0)

    def map_values(self, func):
        return SymTensor(self.n, self.m,
                         {i: func(v) for i, v in self.data.items()})

    def storage_size(self):
        return sym_dim(self.n, self.m)

    def to_canonical_vector(self):
        return [self.get(idx) for idx in canonical_indices(self.n, self.m)]

    def __eq__(self, other):
        if not isinstance(other, SymTensor) or (self.n, self.m) != (other.n, other.m):
            return NotImplemented
        for idx in canonical_indices(self.n, self.m):
            if self.get(idx) != other.get(idx):
                return False
        return True

    def __repr__(self):
        return f"SymTensor(n={self.n}, m={self.m}, {self.data})"


def metric_tensor(n, scalar_one=Fraction(1)):
    """Euclidean metric delta_ij as a rank-2 SymTensor."""
    return SymTensor(n, 2, {(i, i): scalar_one for i in range(n)})


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def symmetrize(t: DenseTensor) -> SymTensor:
    """Average of t over all permutations of its m slots."""
    m = t.m
    fact = math.factorial(m)
    out = SymTensor(t.n, t.m)
    for idx in canonical_indices(t.n, t.m):
        total = 0
        for perm in itertools.permutations(idx):
            total = total + t[perm]
        out[idx] = _divide(total, fact)
    return out


def partial_symmetrize(t: DenseTensor, slots) -> DenseTensor:
    """Average t over permutations of the named slots only (0-based)."""
    slots = tuple(slots)
    if not slots:
        raise ValueError("slots must be nonempty")
    if any(s < 0 or s >= t.m for s in slots):
        raise IndexError("slot index out of range")
    fact = math.factorial(len(slots))
    out = DenseTensor(t.n, t.m)
    for idx in itertools.product(range(t.n), repeat=t.m):
        total = 0
        for perm in itertools.permutations([idx[s] for s in slots]):
            jdx = list(idx)
            for s, v in zip(slots, perm):
                jdx[s] = v
            total = total + t[tuple(jdx)]
        v = _divide(total, fact)
        if v != 0:
            out[idx] = v
    return out


def alternate(t: DenseTensor, slot_a, slot_b) -> DenseTensor:
    """(alpha t)(..a..b..) = (t(..a..b..) - t(..b..a..)) / 2."""
    if slot_a == slot_b:
        raise ValueError("alternation slots must differ")
    if not (0 <= slot_a < t.m and 0 <= slot_b < t.m):
        raise IndexError("slot index out of range")
    out = DenseTensor(t.n, t.m)
    for idx in itertools.product(range(t.n), repeat=t.m):
        jdx = list(idx)
        jdx[slot_a], jdx[slot_b] = jdx[slot_b], jdx[slot_a]
        v = _divide(t[idx] - t[tuple(jdx)], 2)
        if v != 0:
            out[idx] = v
    return out


def sym_product(u: SymTensor, v: SymTensor) -> SymTensor:
    """Symmetrized tensor product u (.) v of rank m+k."""
    if u.n != v.n:
        raise ValueError("dimension mismatch")
    m, k = u.m, v.m
    fact = math.factorial(m + k)
    out = SymTensor(u.n, m + k)
    for idx in canonical_indices(u.n, m + k):
        total = 0
        for perm in itertools.permutations(idx):
            total = total + u.get(perm[:m]) * v.get(perm[m:])
        out[idx] = _divide(total, fact)
    return out


def sym_power(vec, m, n=None):
    """xi^(.m): dense entries are plain products of the components."""
    if n is None:
        n = len(vec)
    out = SymTensor(n, m)
    if m == 0:
        out[()] = 1
        return out
    for idx in canonical_indices(n, m):
        v = 1
        for i in idx:
            v = v * vec[i]
        out[idx] = v
    return out


def i_mul(u: SymTensor, f: SymTensor) -> SymTensor:
    """Symmetric multiplication by u; equals sym_product(u, f)."""
    return sym_product(u, f)


def j_contract(u: SymTensor, g: SymTensor) -> SymTensor:
    """Contract the trailing rank(u) slots of g against u (full summation)."""
    if u.n != g.n:
        raise ValueError("dimension mismatch")
    k, mk = u.m, g.m
    if mk < k:
        raise ValueError("rank(g) must be at least rank(u)")
    m = mk - k
    out = SymTensor(g.n, m)
    for idx in canonical_indices(g.n, m):
        total = 0
        for tail in itertools.product(range(g.n), repeat=k):
            uv = u.get(tail)
            if uv != 0:
                total = total + g.get(idx + tail) * uv
        out[idx] = total
    return out


def inner(u: SymTensor, v: SymTensor):
    """Full contraction over all n^m dense tuples (multiplicity-weighted)."""
    if (u.n, u.m) != (v.n, v.m):
        raise ValueError("shape mismatch")
    total = 0
    for idx in canonical_indices(u.n, u.m):
        uv = u.get(idx)
        vv = v.get(idx)
        if uv != 0 and vv != 0:
            total = total + multiplicity(idx) * uv * vv
    return total


def i_metric(f: SymTensor, times: int = 1) -> SymTensor:
    """i^times f: repeated symmetric multiplication by the metric."""
    g = metric_tensor(f.n)
    for _ in range(times):
        f = sym_product(g, f)
    return f


def j_metric(g: SymTensor, times: int = 1) -> SymTensor:
    """j^times g: repeated trace over the trailing slot pair."""
    met = metric_tensor(g.n)
    for _ in range(times):
        g = j_contract(met, g)
    return g


def sym_power_span_rank(vectors, m) -> int:
    """Rank of {eta_{i1} (.) ... (.) eta_{im}} over canonical i1<=..<=im.

    Full rank C(n+m-1, m) exactly when the n vectors are linearly
    independent; rank-deficient inputs yield a smaller rank.
    """
    n = len(vectors)
    if any(len(v) != n for v in vectors):
        raise ValueError("need exactly n vectors of dimension n")
    rank1 = [SymTensor.from_vector(n, v) for v in vectors]
    rows = []
    exact = all(isinstance(c, (int, Fraction)) for v in vectors for c in v)
    for combo in canonical_indices(n, m):
        t = rank1[combo[0]] if m else SymTensor(n, 0, {(): 1})
        for i in combo[1:]:
            t = sym_product(t, rank1[i])
        rows.append(t.to_canonical_vector())
    if exact:
        return _exact_rank([[Fraction(c) for c in row] for row in rows])
    return int(np.linalg.matrix_rank(np.array(rows, dtype=float)))


def _exact_rank(rows):
    """Gaussian elimination over the rationals."""
    rows = [row[:] for row in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pr = rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                factor = rows[r][col] / pr[col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], pr)]
        rank += 1
    return rank


def _divide(value, k):
    """Division by a positive integer, exact whenever the scalar allows it."""
    if isinstance(value, float):
        return value / k
    if isinstance(value, (int, Fraction)):
        return Fraction(value, k)
    return value * Fraction(1, k)
