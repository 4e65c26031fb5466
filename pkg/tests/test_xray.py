"""Ray, momentum and transverse transforms: kernel properties, homogeneity
laws, analytic derivatives against finite differences, and the iterated John
relation."""

import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from tentomo.polyfield import (PolyBumpField, inner_derivative,
                               random_bump_field)
from tentomo.polynomial import Polynomial
from tentomo.rng import SplitMix64
from tentomo.xray import (Line, TransverseRay, chord_interval,
                          homogeneity_check, john_apply, john_iterate,
                          momentum_scale_residual, momentum_shift_residual,
                          momentum_transform, ray_transform, read_lines_csv,
                          transform_derivative, transverse_transform,
                          trt_pointwise_recover, verify_john_relation,
                          write_transform_csv)

RNG = SplitMix64(77)


def random_line(rng, n=2, spread=1.8):
    return Line(rng.point_in_ball(n, spread), rng.direction(n))


class TestRayTransform:
    def test_line_missing_support_is_zero(self):
        f = random_bump_field(2, 1, RNG.split("miss"), power=3, degree=2)
        assert ray_transform(f, Line([3.0, 0.0], [0.0, 1.0])) == 0.0

    def test_frozen_radial_chord(self):
        # m=0, core 1, s=1, rho=1, line through origin: int (1-t^2) dt = 4/3
        f = PolyBumpField(2, 0, Fraction(1), 1,
                          {(): Polynomial.constant(2, Fraction(1))})
        got = ray_transform(f, Line([0.0, 0.0], [1.0, 0.0]))
        assert got == pytest.approx(4.0 / 3.0, abs=1e-14)

    def test_potential_fields_integrate_to_zero(self):
        rng = SplitMix64(10)
        v = random_bump_field(2, 1, rng, power=4, degree=2)
        f = inner_derivative(v)
        for t in range(50):
            child = rng.split(f"l{t}")
            assert abs(ray_transform(f, random_line(child))) < 1e-12

    def test_tangency_guard(self):
        f = random_bump_field(2, 0, RNG.split("tan"), power=2, degree=1)
        # line at distance exactly rho (tangent): treated as a miss
        assert ray_transform(f, Line([1.0, -5.0], [0.0, 1.0])) == 0.0
        assert chord_interval(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1.0) is None

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            Line([0.0, 0.0], [0.0, 0.0])


class TestHomogeneity:
    def test_scaling_and_shift(self):
        f = random_bump_field(2, 1, SplitMix64(11), power=4, degree=2)
        rs, rsh = homogeneity_check(f, [0.1, 0.2], [1.0, 0.5], 2.0, 0.7)
        assert abs(rs) < 1e-12 and abs(rsh) < 1e-12

    def test_orientation_reversal_m0(self):
        f = random_bump_field(2, 0, SplitMix64(12), power=3, degree=2)
        line = random_line(SplitMix64(13))
        rev = Line(line.x, -line.xi)
        assert ray_transform(f, line) == pytest.approx(
            ray_transform(f, rev), abs=1e-13)

    def test_trivial_scale(self):
        f = random_bump_field(2, 2, SplitMix64(14), power=4, degree=2)
        rs, rsh = homogeneity_check(f, [0.3, -0.1], [0.8, 0.6], 1.0, 1.3)
        assert rs == 0.0 and abs(rsh) < 1e-12

    def test_momentum_scale_law(self):
        f = random_bump_field(2, 1, SplitMix64(15), power=4, degree=2)
        assert abs(momentum_scale_residual(f, [0.1, -0.2], [0.8, 0.6], 1, 3.0)) < 1e-12

    def test_momentum_shift_law(self):
        f = random_bump_field(2, 2, SplitMix64(16), power=6, degree=2)
        for s in (0.4, -1.1):
            assert abs(momentum_shift_residual(f, [0.1, 0.0], [1.0, -0.3], 2, s)) < 1e-12

    def test_momentum_k0_is_ray(self):
        f = random_bump_field(2, 1, SplitMix64(17), power=3, degree=2)
        line = random_line(SplitMix64(18))
        assert momentum_transform(f, line, 0) == ray_transform(f, line)

    def test_data_equivalence_reconstruction(self):
        # \{J^l at a bundle point\}_{l<=k} reconstructs J^k at shifted bases
        f = random_bump_field(2, 2, SplitMix64(19), power=6, degree=2)
        rng = SplitMix64(20)
        xi = np.asarray(rng.direction(2))
        x = np.asarray(rng.point_in_ball(2, 1.2))
        x = x - (x @ xi) * xi   # bundle point
        k = 2
        base = [momentum_transform(f, Line(x, xi), l) for l in range(k + 1)]
        for s in (0.7, -0.4):
            direct = momentum_transform(f, Line(x + s * xi, xi), k)
            recon = sum(math.comb(k, l) * (-s) ** (k - l) * base[l]
                        for l in range(k + 1))
            assert direct == pytest.approx(recon, abs=1e-12)


class TestTransformDerivative:
    def test_zero_orders_is_momentum(self):
        f = random_bump_field(2, 1, SplitMix64(21), power=4, degree=2)
        line = random_line(SplitMix64(22))
        assert transform_derivative(f, line, 1, (0, 0), (0, 0)) == \
            pytest.approx(momentum_transform(f, line, 1), abs=1e-14)

    def test_x_derivative_commutes_with_component_derivative(self):
        # m=0: d/dx_i J^0 f = J^0 (d f / d x_i)
        f = random_bump_field(2, 0, SplitMix64(23), power=4, degree=2)
        line = random_line(SplitMix64(24))
        lhs = transform_derivative(f, line, 0, (1, 0), (0, 0))
        df = PolyBumpField(2, 0, f.rho, f.power - 1,
                           {(): f.component(()).diff(0).core})
        assert lhs == pytest.approx(ray_transform(df, line), abs=1e-13)

    def test_against_central_finite_differences(self):
        f = random_bump_field(2, 2, SplitMix64(25), power=6, degree=2)
        rng = SplitMix64(26)
        h = 1e-5
        for t in range(20):
            child = rng.split(f"cfg{t}")
            line = random_line(child, spread=1.2)
            x, xi = line.x, line.xi
            an = transform_derivative(f, line, 1, (1, 0), (0, 1))

            def jk(xx, xxi):
                return momentum_transform(f, Line(xx, xxi), 1)

            fd = (jk(x + [h, 0], xi + [0, h]) - jk(x + [h, 0], xi - [0, h])
                  - jk(x - [h, 0], xi + [0, h]) + jk(x - [h, 0], xi - [0, h])) \
                / (4 * h * h)
            assert an == pytest.approx(fd, rel=1e-6, abs=1e-7)

    def test_budget_error(self):
        f = random_bump_field(2, 1, SplitMix64(27), power=2, degree=2)
        with pytest.raises(Exception):
            transform_derivative(f, random_line(SplitMix64(28)), 0,
                                 (2, 0), (1, 0))


class TestJohn:
    def test_ultrahyperbolic_m0(self):
        f = random_bump_field(2, 0, SplitMix64(29), power=4, degree=2)
        rng = SplitMix64(30)
        worst = 0.0
        for t in range(100):
            child = rng.split(f"cfg{t}")
            line = random_line(child)
            worst = max(worst, abs(john_apply(f, line, 0, (0, 1))))
        assert worst < 1e-10

    def test_antisymmetry_and_diagonal(self):
        f = random_bump_field(2, 1, SplitMix64(31), power=4, degree=2)
        line = random_line(SplitMix64(32))
        assert john_apply(f, line, 0, (0, 1)) == pytest.approx(
            -john_apply(f, line, 0, (1, 0)), abs=1e-13)
        assert john_apply(f, line, 0, (0, 0)) == 0.0

    def test_relation_m1(self):
        f = random_bump_field(2, 1, SplitMix64(33), power=4, degree=2)
        rng = SplitMix64(34)
        for t in range(20):
            assert verify_john_relation(f, random_line(rng.split(f"l{t}"))) < 1e-10

    def test_relation_m2(self):
        f = random_bump_field(2, 2, SplitMix64(35), power=6, degree=2)
        rng = SplitMix64(36)
        for t in range(10):
            assert verify_john_relation(f, random_line(rng.split(f"l{t}"))) < 1e-9

    def test_relation_trivial_on_potentials(self):
        v = random_bump_field(2, 0, SplitMix64(37), power=5, degree=2)
        f = inner_derivative(v)
        assert verify_john_relation(f, random_line(SplitMix64(38))) < 1e-12

    def test_iterate_equals_nested_apply(self):
        f = random_bump_field(2, 2, SplitMix64(39), power=6, degree=2)
        line = random_line(SplitMix64(40))
        got = john_iterate(f, line, [(0, 1), (0, 1)])
        assert np.isfinite(got)

    def test_m0_rejected_by_relation(self):
        f = random_bump_field(2, 0, SplitMix64(41), power=4, degree=2)
        with pytest.raises(ValueError):
            verify_john_relation(f, random_line(SplitMix64(42)))


class TestTransverse:
    def test_m0_matches_ray_independent_of_y(self):
        f = random_bump_field(3, 0, SplitMix64(43), power=3, degree=2)
        omega = np.array([1.0, 0.0, 0.0])
        ray = TransverseRay(omega, [0.0, 0.2, -0.1], [0.0, 3.0, 4.0])
        want = ray_transform(f, Line(ray.x, omega))
        assert transverse_transform(f, ray) == pytest.approx(want, abs=1e-13)

    def test_zero_y(self):
        f = random_bump_field(3, 2, SplitMix64(44), power=4, degree=2)
        ray = TransverseRay([0.0, 0.0, 1.0], [0.1, 0.0, 0.0], [0.0, 0.0, 0.0])
        assert transverse_transform(f, ray) == 0.0

    def test_componentwise_scalar_oracle(self):
        # single nonzero component: pairing reduces to a scalar transform
        core = Polynomial.monomial(3, (1, 0, 1), Fraction(2))
        f = PolyBumpField(3, 2, Fraction(1), 3, {(0, 1): core})
        omega = np.array([0.0, 0.0, 1.0])
        y = np.array([0.5, -1.2, 0.0])
        ray = TransverseRay(omega, [0.2, 0.1, 0.0], y)
        scalar = PolyBumpField(3, 0, Fraction(1), 3, {(): core})
        want = 2 * y[0] * y[1] * ray_transform(scalar, Line(ray.x, omega))
        assert transverse_transform(f, ray) == pytest.approx(want, abs=1e-13)

    def test_constraint_violation(self):
        with pytest.raises(ValueError):
            TransverseRay([0.0, 0.0, 1.0], [0.0, 0.0, 0.5], [1.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            TransverseRay([0.0, 0.0, 2.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0])


class TestPointwiseRecovery:
    def test_zero_samples_give_zero_tensor(self):
        etas = [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
        from tentomo.symtensor import canonical_indices
        samples = {c: 0.0 for c in canonical_indices(3, 2)}
        rec = trt_pointwise_recover(etas, samples, 2)
        assert rec.max_abs() == 0

    def test_standard_basis_recovers_components(self):
        rng = SplitMix64(45)
        f = random_bump_field(3, 2, rng, power=3, degree=2)
        x = (0.2, -0.3, 0.1)
        fx = f.value(x).map_values(float)
        etas = [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
        # with basis vectors the pairing is just the dense component
        from tentomo.symtensor import canonical_indices
        samples = {combo: fx.get(combo) for combo in canonical_indices(3, 2)}
        rec = trt_pointwise_recover(etas, samples, 2)
        assert (rec - fx).max_abs() < 1e-12

    def test_random_directions_recover(self):
        rng = SplitMix64(46)
        f = random_bump_field(3, 2, rng, power=3, degree=2)
        x = (0.1, 0.25, -0.2)
        fx = f.value(x).map_values(float)
        etas = [list(rng.split(f"e{t}").direction(3)) for t in range(3)]
        import itertools as it
        from tentomo.symtensor import canonical_indices
        samples = {}
        for combo in canonical_indices(3, 2):
            val = 0.0
            for dense in it.product(range(3), repeat=2):
                w = fx.get(dense)
                if w:
                    val += w * etas[combo[0]][dense[0]] * etas[combo[1]][dense[1]]
            samples[combo] = val
        rec = trt_pointwise_recover(etas, samples, 2)
        assert (rec - fx).max_abs() < 1e-10

    def test_singular_system_rejected(self):
        etas = [[1.0, 0, 0], [1.0, 0, 0], [0, 0, 1.0]]
        from tentomo.symtensor import canonical_indices
        samples = {c: 0.0 for c in canonical_indices(3, 2)}
        with pytest.raises(ValueError):
            trt_pointwise_recover(etas, samples, 2)


class TestLineCSV:
    def test_round_trip_with_values(self, tmp_path):
        rng = SplitMix64(47)
        f = random_bump_field(2, 1, rng, power=3, degree=2)
        lines = [random_line(rng.split(f"l{t}")) for t in range(5)]
        values = [ray_transform(f, line) for line in lines]
        path = tmp_path / "lines.csv"
        write_transform_csv(path, lines, values, ["value"])
        back = read_lines_csv(path)
        assert len(back) == 5
        for a, b in zip(lines, back):
            assert np.allclose(a.x, b.x) and np.allclose(a.xi, b.xi)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x_1", "x_2", "xi_1", "xi_2", "value"]
        assert float(rows[1][4]) == pytest.approx(values[0], abs=1e-15)
