"""Symmetric tensor algebra against brute-force permutation oracles."""

import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hyp

from tentomo.rng import SplitMix64
from tentomo.symtensor import (DenseTensor, MultiIndex, SymTensor, alternate,
                               canonical_indices, i_mul, inner,
                               j_contract, j_metric, metric_tensor,
                               multiplicity, partial_symmetrize, sym_dim,
                               sym_power, sym_power_span_rank, sym_product,
                               symmetrize)


def random_dense(n, m, rng):
    return DenseTensor.from_function(n, m, lambda idx: rng.rational(-5, 5))


def random_sym(n, m, rng):
    out = SymTensor(n, m)
    for idx in canonical_indices(n, m):
        out[idx] = rng.rational(-5, 5)
    return out


def brute_symmetrize(t):
    """Independent oracle: average over all slot permutations, dense."""
    out = DenseTensor(t.n, t.m)
    fact = math.factorial(t.m)
    for idx in itertools.product(range(t.n), repeat=t.m):
        total = Fraction(0)
        for perm in itertools.permutations(range(t.m)):
            total += Fraction(t[tuple(idx[p] for p in perm)])
        out[idx] = total / fact
    return out


class TestMultiIndex:
    def test_canonicalization_idempotent(self):
        mi = MultiIndex((2, 0, 1))
        assert mi.canonical().canonical().indices == (0, 1, 2)

    def test_equal_sorted_forms_are_equal(self):
        assert MultiIndex((2, 0, 1)) == MultiIndex((1, 2, 0))
        assert hash(MultiIndex((2, 0))) == hash(MultiIndex((0, 2)))

    @pytest.mark.parametrize("idx,mult", [((0, 1), 2), ((0, 0), 1),
                                          ((0, 1, 1), 3), ((0, 1, 2), 6)])
    def test_multiplicity(self, idx, mult):
        assert multiplicity(idx) == mult
        # m!/prod(counts!) computed directly
        from collections import Counter
        denom = 1
        for c in Counter(idx).values():
            denom *= math.factorial(c)
        assert mult == math.factorial(len(idx)) // denom


class TestSymmetrize:
    def test_two_slot_example(self):
        t = DenseTensor(2, 2, {(0, 1): Fraction(1)})
        assert symmetrize(t).get((0, 1)) == Fraction(1, 2)

    def test_idempotent_on_symmetric_input(self):
        rng = SplitMix64(1)
        s = random_sym(2, 3, rng)
        assert symmetrize(s.to_dense()) == s

    def test_matches_brute_force_n3_m3(self):
        rng = SplitMix64(2)
        t = random_dense(3, 3, rng)
        oracle = brute_symmetrize(t)
        got = symmetrize(t)
        for idx in itertools.product(range(3), repeat=3):
            assert got.get(idx) == oracle[idx]

    def test_projection_property(self):
        # <sigma t, u> = <t, u> for symmetric u, via dense contraction
        rng = SplitMix64(3)
        t = random_dense(2, 3, rng)
        u = random_sym(2, 3, rng)
        lhs = inner(symmetrize(t), u)
        rhs = sum(t[idx] * u.get(idx)
                  for idx in itertools.product(range(2), repeat=3))
        assert lhs == rhs

    def test_storage_size(self):
        for n in range(1, 5):
            for m in range(0, 5):
                assert sym_dim(n, m) == math.comb(n + m - 1, m)
                assert len(list(canonical_indices(n, m))) == sym_dim(n, m)


class TestPartialSymmetrize:
    def test_full_slot_set_agrees_with_symmetrize(self):
        rng = SplitMix64(4)
        t = random_dense(2, 3, rng)
        full = partial_symmetrize(t, (0, 1, 2))
        s = symmetrize(t)
        for idx in itertools.product(range(2), repeat=3):
            assert full[idx] == s.get(idx)

    def test_single_slot_is_identity(self):
        rng = SplitMix64(5)
        t = random_dense(3, 2, rng)
        got = partial_symmetrize(t, (1,))
        for idx in itertools.product(range(3), repeat=2):
            assert got[idx] == t[idx]

    def test_two_slots_brute_force(self):
        rng = SplitMix64(6)
        t = random_dense(2, 3, rng)
        got = partial_symmetrize(t, (0, 1))
        for idx in itertools.product(range(2), repeat=3):
            want = (Fraction(t[idx]) +
                    Fraction(t[(idx[1], idx[0], idx[2])])) / 2
            assert got[idx] == want

    def test_slot_out_of_range(self):
        t = random_dense(2, 2, SplitMix64(7))
        with pytest.raises(IndexError):
            partial_symmetrize(t, (0, 5))
        with pytest.raises(ValueError):
            partial_symmetrize(t, ())


class TestAlternate:
    def test_kills_symmetric_part(self):
        s = random_sym(2, 2, SplitMix64(8)).to_dense()
        assert alternate(s, 0, 1).is_zero()

    def test_definition_example(self):
        t = DenseTensor(2, 2, {(0, 1): Fraction(1)})
        a = alternate(t, 0, 1)
        assert a[(0, 1)] == Fraction(1, 2)
        assert a[(1, 0)] == Fraction(-1, 2)

    def test_idempotent_on_same_pair(self):
        t = random_dense(2, 3, SplitMix64(9))
        once = alternate(t, 0, 2)
        twice = alternate(once, 0, 2)
        for idx in itertools.product(range(2), repeat=3):
            assert once[idx] == twice[idx]

    def test_slot_errors(self):
        t = random_dense(2, 2, SplitMix64(10))
        with pytest.raises(ValueError):
            alternate(t, 1, 1)
        with pytest.raises(IndexError):
            alternate(t, 0, 4)


class TestSymProduct:
    def test_basis_example(self):
        e1 = SymTensor.from_vector(2, [Fraction(1), Fraction(0)])
        e2 = SymTensor.from_vector(2, [Fraction(0), Fraction(1)])
        assert sym_product(e1, e2).get((0, 1)) == Fraction(1, 2)

    def test_commutative(self):
        rng = SplitMix64(11)
        u, v = random_sym(2, 1, rng), random_sym(2, 2, rng)
        assert sym_product(u, v) == sym_product(v, u)

    def test_power_of_vector_dense_entries_are_products(self):
        # oracle: expand tensor product then symmetrize by brute force
        xi = SymTensor.from_vector(2, [Fraction(1), Fraction(2)])
        cube = sym_product(sym_product(xi, xi), xi)
        assert cube.get((0, 0, 1)) == 2
        assert cube == sym_power([Fraction(1), Fraction(2)], 3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sym_product(random_sym(2, 1, SplitMix64(1)),
                        random_sym(3, 1, SplitMix64(1)))


class TestMetricOperators:
    def test_i_on_scalar_gives_metric(self):
        c = SymTensor(2, 0, {(): Fraction(3)})
        out = i_mul(metric_tensor(2), c)
        assert out == metric_tensor(2) * Fraction(3)

    def test_i_metric_twice_matches_brute_sigma(self):
        # sigma(delta x delta) in n=3 via dense expansion
        g = metric_tensor(3)
        got = i_mul(g, g)
        dense = DenseTensor.from_function(
            3, 4, lambda idx: Fraction(int(idx[0] == idx[1] and idx[2] == idx[3])))
        assert got == symmetrize(dense)

    def test_j_of_vector_square_is_norm(self):
        xi = SymTensor.from_vector(2, [Fraction(3), Fraction(4)])
        assert j_metric(sym_product(xi, xi)).get(()) == 25

    def test_j_rank_error(self):
        with pytest.raises(ValueError):
            j_contract(random_sym(2, 3, SplitMix64(1)),
                       random_sym(2, 1, SplitMix64(1)))

    def test_contraction_of_orthogonal_powers(self):
        x = sym_power([Fraction(1), Fraction(0)], 2)
        xi = sym_power([Fraction(0), Fraction(1)], 2)
        assert j_contract(x, xi).get(()) == 0

    @given(hyp.integers(0, 2**60))
    @settings(max_examples=25, deadline=None)
    def test_ij_duality(self, seed):
        rng = SplitMix64(seed)
        u = random_sym(2, 1, rng)
        f = random_sym(2, 2, rng)
        g = random_sym(2, 3, rng)
        assert inner(i_mul(u, f), g) == inner(f, j_contract(u, g))


class TestInner:
    def test_positive_definite(self):
        rng = SplitMix64(12)
        u = random_sym(3, 2, rng)
        assert inner(u, u) >= 0
        assert inner(SymTensor(3, 2), SymTensor(3, 2)) == 0

    def test_frozen_half(self):
        e1 = SymTensor.from_vector(2, [Fraction(1), Fraction(0)])
        e2 = SymTensor.from_vector(2, [Fraction(0), Fraction(1)])
        p = sym_product(e1, e2)
        assert inner(p, p) == Fraction(1, 2)

    def test_pairing_with_vector_power_is_multilinear_eval(self):
        rng = SplitMix64(13)
        f = random_sym(2, 3, rng)
        xi = [Fraction(2), Fraction(-1)]
        want = Fraction(0)
        for idx in itertools.product(range(2), repeat=3):
            term = Fraction(f.get(idx))
            for i in idx:
                term *= xi[i]
            want += term
        assert inner(f, sym_power(xi, 3)) == want


class TestSpanRank:
    def test_standard_basis_n2_m2(self):
        assert sym_power_span_rank([[1, 0], [0, 1]], 2) == 3

    def test_random_invertible_triple_n3_m2(self):
        rng = SplitMix64(14)
        while True:
            vecs = [[rng.rational(-4, 4) for _ in range(3)] for _ in range(3)]
            det = (vecs[0][0] * (vecs[1][1] * vecs[2][2] - vecs[1][2] * vecs[2][1])
                   - vecs[0][1] * (vecs[1][0] * vecs[2][2] - vecs[1][2] * vecs[2][0])
                   + vecs[0][2] * (vecs[1][0] * vecs[2][1] - vecs[1][1] * vecs[2][0]))
            if det != 0:
                break
        assert sym_power_span_rank(vecs, 2) == 6

    def test_dependent_pair_gives_rank_one(self):
        assert sym_power_span_rank([[1, 1], [2, 2]], 2) == 1

    def test_full_rank_small_cases(self):
        for n in (2, 3):
            for m in (1, 2, 3):
                basis = [[Fraction(int(i == j)) for j in range(n)]
                         for i in range(n)]
                assert sym_power_span_rank(basis, m) == sym_dim(n, m)
