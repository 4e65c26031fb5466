"""Exact polynomial arithmetic."""

from fractions import Fraction

import numpy as np
import pytest

from tentomo.polynomial import (Polynomial, PolynomialSizeError,
                                random_homogeneous, random_polynomial)
from tentomo.rng import SplitMix64


def test_add_mul_exact():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = (x + y) * (x - y)
    assert p == x * x - y * y


def test_zero_terms_dropped():
    x = Polynomial.variable(2, 0)
    assert (x - x).is_zero()
    assert not (x - x).terms


def test_diff_and_eval():
    x = Polynomial.variable(2, 0)
    y = Polynomial.variable(2, 1)
    p = x**3 * y + Fraction(1, 2) * y**2
    assert p.diff(0) == 3 * x**2 * y
    assert p.diff(1) == x**3 + y
    assert p.eval((Fraction(2), Fraction(3))) == 24 + Fraction(9, 2)


def test_eval_many_matches_eval():
    rng = SplitMix64(1)
    p = random_polynomial(3, 3, rng)
    pts = np.array([[0.3, -1.2, 0.5], [1.0, 0.0, 2.0]])
    got = p.to_float().eval_many(pts)
    for row, pt in zip(got, pts):
        assert row == pytest.approx(float(p.eval(tuple(pt))), rel=1e-12)


def test_homogeneous_generator():
    rng = SplitMix64(2)
    p = random_homogeneous(3, 4, rng)
    assert p.is_homogeneous()
    assert p.degree() == 4


def test_power():
    x = Polynomial.variable(1, 0)
    assert (x + 1) ** 3 == x**3 + 3 * x**2 + 3 * x + 1
    assert (x + 1) ** 0 == Polynomial.constant(1, 1)


def test_size_guardrail():
    import tentomo.polynomial as mod
    old = mod.TERM_LIMIT
    mod.TERM_LIMIT = 10
    try:
        dense = random_polynomial(2, 3, SplitMix64(3), lo=1, hi=3)
        with pytest.raises(PolynomialSizeError):
            _ = dense * dense * dense
    finally:
        mod.TERM_LIMIT = old


def test_variable_count_mismatch():
    with pytest.raises(ValueError):
        Polynomial.variable(2, 0) + Polynomial.variable(3, 0)
