import math

import numpy as np
import pytest

from fracivp.fracops import (
    INTERP_SPLINE,
    FracOpsError,
    Grid,
    InsufficientRegularityError,
    SampledFunction,
    check_composition,
    frac_derivative,
    frac_derivative_minus_one,
    frac_integral,
    linear_combination,
    make_interpolant,
)


def power(grid, mu):
    return SampledFunction.from_callable(grid, lambda x: x ** mu, leading_exponent=mu)


class TestGrid:
    def test_points(self):
        grid = Grid(0.5, 4)
        np.testing.assert_allclose(grid.points, [0.0, 0.125, 0.25, 0.375, 0.5])
        assert grid.h == 0.125
        assert grid.index_of(0.25) == 2

    @pytest.mark.parametrize("X,n", [(0.0, 4), (-1.0, 4), (1.0, 0)])
    def test_invalid(self, X, n):
        with pytest.raises(FracOpsError):
            Grid(X, n)


class TestSampledFunction:
    def test_values_are_read_only_copies(self):
        grid = Grid(1.0, 8)
        raw = np.ones(9)
        u = SampledFunction(grid, raw)
        raw[0] = 5.0
        assert u.values[0] == 1.0
        with pytest.raises(ValueError):
            u.values[1] = 2.0

    def test_shape_mismatch(self):
        with pytest.raises(FracOpsError):
            SampledFunction(Grid(1.0, 8), np.ones(8))

    def test_positive_exponent_requires_zero_at_origin(self):
        with pytest.raises(FracOpsError):
            SampledFunction(Grid(1.0, 8), np.ones(9), leading_exponent=0.5)

    def test_regular_part_extrapolates_origin(self):
        u = SampledFunction.from_callable(Grid(1.0, 64), lambda x: x ** 0.5 * (1.0 + x),
                                          leading_exponent=0.5)
        r = u.regular_part()
        assert r[0] == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(r[1:], 1.0 + u.grid.points[1:], rtol=1e-12)


class TestIntegral:
    @pytest.mark.parametrize("sigma,mu", [(0.5, 0.0), (1.5, 0.0), (0.7, 0.5), (1.3, 1.5)])
    def test_power_rule(self, sigma, mu):
        grid = Grid(1.0, 64)
        out = frac_integral(sigma, power(grid, mu))
        x = grid.points
        expected = math.gamma(mu + 1) / math.gamma(mu + 1 + sigma) * x ** (mu + sigma)
        np.testing.assert_allclose(out.values, expected, atol=1e-13)
        assert out.leading_exponent == pytest.approx(mu + sigma)

    def test_semigroup(self):
        grid = Grid(1.0, 128)
        u = SampledFunction.from_callable(grid, np.exp)
        once = frac_integral(1.2, u)
        twice = frac_integral(0.6, frac_integral(0.6, u))
        np.testing.assert_allclose(twice.values, once.values, atol=1e-6)

    def test_zero_input(self):
        grid = Grid(1.0, 16)
        out = frac_integral(0.5, SampledFunction(grid, np.zeros(17)))
        assert out.is_zero()

    @pytest.mark.parametrize("sigma", [0.0, 2.0, -0.5])
    def test_order_range(self, sigma):
        with pytest.raises(FracOpsError):
            frac_integral(sigma, power(Grid(1.0, 8), 1.0))


class TestDerivatives:
    @pytest.mark.parametrize("sigma", [1.2, 1.5, 1.8])
    def test_minus_one_of_singular_power(self, sigma):
        # D^(sigma-1) x^(sigma-1) = Gamma(sigma)
        grid = Grid(1.0, 64)
        out = frac_derivative_minus_one(sigma, power(grid, sigma - 1.0))
        np.testing.assert_allclose(out.values, math.gamma(sigma), rtol=1e-12)

    @pytest.mark.parametrize("sigma", [1.2, 1.5, 1.8])
    def test_minus_one_of_regular_power(self, sigma):
        # D^(sigma-1) x^sigma = Gamma(sigma + 1) x
        grid = Grid(1.0, 64)
        out = frac_derivative_minus_one(sigma, power(grid, sigma))
        np.testing.assert_allclose(out.values, math.gamma(sigma + 1) * grid.points, atol=1e-11)

    @pytest.mark.parametrize("sigma", [1.2, 1.5, 1.8])
    def test_derivative_of_power(self, sigma):
        # D^sigma x^sigma = Gamma(sigma + 1)
        grid = Grid(1.0, 64)
        out = frac_derivative(sigma, power(grid, sigma))
        np.testing.assert_allclose(out.values, math.gamma(sigma + 1), rtol=1e-10)

    def test_derivative_is_second_order_up_to_the_ends(self):
        # D^1.5 [x^1.5 (1 + x^3)] = Gamma(2.5) + Gamma(5.5) / Gamma(4) x^3
        sigma = 1.5
        errors = []
        for n in (32, 64, 128):
            grid = Grid(1.0, n)
            u = SampledFunction.from_callable(grid, lambda x: x ** sigma * (1.0 + x ** 3),
                                              leading_exponent=sigma)
            out = frac_derivative(sigma, u, interpolation=INTERP_SPLINE)
            x = grid.points
            exact = math.gamma(2.5) + math.gamma(5.5) / math.gamma(4.0) * x ** 3
            errors.append(np.max(np.abs(out.values - exact)))
        orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
        assert np.all(orders > 1.8)

    def test_derivative_annihilates_singular_power(self):
        # D^sigma x^(sigma-1) = 0
        grid = Grid(1.0, 64)
        out = frac_derivative(1.5, power(grid, 0.5))
        np.testing.assert_allclose(out.values, 0.0, atol=1e-10)

    def test_minus_one_rejects_rough_input(self):
        grid = Grid(1.0, 16)
        with pytest.raises(InsufficientRegularityError):
            frac_derivative_minus_one(1.5, SampledFunction(grid, np.ones(17)))

    def test_derivative_rejects_intermediate_exponent(self):
        with pytest.raises(InsufficientRegularityError):
            frac_derivative(1.5, power(Grid(1.0, 16), 1.0))

    def test_zero_input(self):
        grid = Grid(1.0, 16)
        zero = SampledFunction(grid, np.zeros(17))
        assert frac_derivative(1.5, zero).is_zero()
        assert frac_derivative_minus_one(1.5, zero).is_zero()

    def test_order_range(self):
        with pytest.raises(FracOpsError):
            frac_derivative(0.5, power(Grid(1.0, 16), 1.0))


class TestComposition:
    @pytest.mark.parametrize("sigma", [1.3, 1.5, 1.7])
    def test_exact_on_power(self, sigma):
        grid = Grid(1.0, 128)
        assert check_composition(sigma, power(grid, sigma), d_init=0.0) < 1e-9

    def test_subtraction_form_with_initial_value(self):
        # u = x^(sigma-1): D^sigma u = 0 and D^(sigma-1) u(0) = Gamma(sigma)
        sigma = 1.5
        grid = Grid(1.0, 128)
        u = power(grid, sigma - 1.0)
        left = frac_integral(sigma, frac_derivative(sigma, u))
        expected = u.values - math.gamma(sigma) * grid.points ** (sigma - 1.0) / math.gamma(sigma)
        np.testing.assert_allclose(left.values, expected, atol=1e-9)

    def test_defects_shrink_under_refinement(self):
        sigma = 1.5
        defects = []
        sizes = [64, 128, 256, 512]
        for n in sizes:
            grid = Grid(1.0, n)
            u = SampledFunction.from_callable(grid, lambda x: x ** sigma * np.exp(x),
                                              leading_exponent=sigma)
            defects.append(check_composition(sigma, u, d_init=0.0))
        order = math.log(defects[0] / defects[-1]) / math.log(sizes[-1] / sizes[0])
        assert defects[-1] < defects[0]
        assert order >= 1.0


class TestLinearCombination:
    def test_combination(self):
        grid = Grid(1.0, 8)
        u = power(grid, 1.0)
        w = power(grid, 1.0)
        out = linear_combination(2.0, u, -1.0, w)
        np.testing.assert_allclose(out.values, grid.points)

    def test_grid_mismatch(self):
        with pytest.raises(FracOpsError):
            linear_combination(1.0, power(Grid(1.0, 8), 1.0), 1.0, power(Grid(1.0, 16), 1.0))


class TestLinearity:
    A, B = 2.0, -3.0

    def pieces(self, n):
        grid = Grid(1.0, n)
        u = SampledFunction.from_callable(grid, lambda x: x ** 1.5 * np.exp(x),
                                          leading_exponent=1.5)
        w = SampledFunction.from_callable(grid, lambda x: x ** 1.5 * np.sin(8.0 * x),
                                          leading_exponent=1.5)
        return u, w, linear_combination(self.A, u, self.B, w)

    def defect(self, op, n, interpolation):
        u, w, combined = self.pieces(n)
        whole = op(combined, interpolation)
        parts = self.A * op(u, interpolation) + self.B * op(w, interpolation)
        return float(np.max(np.abs(whole - parts)))

    OPERATORS = {
        "integral": lambda f, i: frac_integral(0.5, f, interpolation=i).values,
        "minus_one": lambda f, i: frac_derivative_minus_one(1.5, f, interpolation=i).values,
        "derivative": lambda f, i: frac_derivative(1.5, f, interpolation=i).values,
    }

    @pytest.mark.parametrize("name", sorted(OPERATORS))
    def test_spline_operators_are_linear(self, name):
        assert self.defect(self.OPERATORS[name], 32, INTERP_SPLINE) < 1e-10

    @pytest.mark.parametrize("name", ["integral", "minus_one"])
    def test_pchip_defect_bounded_by_interpolation_gap(self, name):
        op = self.OPERATORS[name]
        u, w, combined = self.pieces(64)
        gap = sum(abs(c) * np.max(np.abs(op(f, "pchip") - op(f, INTERP_SPLINE)))
                  for c, f in ((1.0, combined), (self.A, u), (self.B, w)))
        assert self.defect(op, 64, "pchip") <= gap + 1e-10

    def test_pchip_defect_shrinks_under_refinement(self):
        op = self.OPERATORS["integral"]
        assert self.defect(op, 256, "pchip") < self.defect(op, 64, "pchip")

    def test_unknown_interpolation(self):
        x = np.linspace(0.0, 1.0, 5)
        with pytest.raises(FracOpsError):
            make_interpolant(x, x, "linear")
