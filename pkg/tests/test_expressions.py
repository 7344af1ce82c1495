"""Parser, pretty-printer and jet evaluation of the expression language."""

import math

import numpy as np
import pytest

from framesym import ParseError, UnknownIdentifier, eval_jet, evaluate, parse, pretty
from framesym.errors import DomainError
from framesym.expressions import (
    Add, Call, Div, Lit, Mul, Neg, Pow, Sub, Var, differentiate,
)

X = Var(0, "x")
Y = Var(1, "y")


class TestParse:
    def test_spec_example_sum_of_power(self):
        assert parse("1 + x^2", ["x", "y"]) == Add(Lit(1.0), Pow(X, Lit(2.0)))

    def test_unary_minus_binds_looser_than_power(self):
        assert parse("-x^2", ["x"]) == Neg(Pow(X, Lit(2.0)))

    def test_malformed_sequence_reports_offset(self):
        with pytest.raises(ParseError) as err:
            parse("x + * y", ["x", "y"])
        assert err.value.position == 4

    def test_unknown_variable(self):
        with pytest.raises(UnknownIdentifier) as err:
            parse("x + z", ["x", "y"])
        assert err.value.name == "z"
        assert err.value.position == 4

    def test_unknown_function(self):
        with pytest.raises(UnknownIdentifier):
            parse("sinc(x)", ["x"])

    def test_power_right_associative(self):
        assert parse("x^2^3", ["x"]) == Pow(X, Pow(Lit(2.0), Lit(3.0)))

    def test_subtraction_left_associative(self):
        e = parse("1 - 2 - 3", ["x"])
        assert e == Sub(Sub(Lit(1.0), Lit(2.0)), Lit(3.0))

    def test_unary_minus_in_operand_position(self):
        assert evaluate(parse("2^-1", ["x"]), np.zeros(1)) == pytest.approx(0.5)
        assert evaluate(parse("2 * -3", ["x"]), np.zeros(1)) == pytest.approx(-6.0)

    def test_unary_minus_takes_power_not_product(self):
        # -x^2 * y parses as (-(x^2)) * y
        e = parse("-x^2 * y", ["x", "y"])
        assert e == Mul(Neg(Pow(X, Lit(2.0))), Y)

    def test_function_application(self):
        assert parse("sin(x*y)", ["x", "y"]) == Call("sin", Mul(X, Y))

    def test_function_without_arguments_rejected(self):
        with pytest.raises(ParseError):
            parse("sin + 1", ["x"])

    def test_trailing_tokens_rejected(self):
        with pytest.raises(ParseError):
            parse("x 1", ["x"])

    def test_scientific_notation(self):
        assert parse("1.5e-3", ["x"]) == Lit(1.5e-3)

    def test_duplicate_coordinates_rejected(self):
        with pytest.raises(ValueError):
            parse("x", ["x", "x"])


_SOURCES = [
    "1 + x^2",
    "-x^2",
    "x*y - y/x",
    "sin(x) * cos(y) + exp(x*y)",
    "2^-x",
    "-(x + y)^3",
    "sqrt(1 + x^2) / (1 + tanh(y))",
    "x^2^3 - atan(y)",
    "1.5e-3 * x + 2",
    "-(-x)",
]


class TestPretty:
    @pytest.mark.parametrize("source", _SOURCES)
    def test_round_trip_is_structural_identity(self, source):
        ast = parse(source, ["x", "y"])
        assert parse(pretty(ast), ["x", "y"]) == ast

    def test_random_trees_round_trip(self):
        rng = np.random.default_rng(7)

        def build(depth):
            pick = rng.integers(0, 9 if depth > 0 else 2)
            if pick == 0:
                return Lit(float(np.round(rng.uniform(0, 5), 3)))
            if pick == 1:
                return Var(*((0, "x") if rng.integers(2) else (1, "y")))
            if pick == 2:
                return Neg(build(depth - 1))
            if pick == 3:
                return Add(build(depth - 1), build(depth - 1))
            if pick == 4:
                return Sub(build(depth - 1), build(depth - 1))
            if pick == 5:
                return Mul(build(depth - 1), build(depth - 1))
            if pick == 6:
                return Div(build(depth - 1), build(depth - 1))
            if pick == 7:
                return Pow(build(depth - 1), build(depth - 1))
            return Call(("sin", "cos", "exp", "tanh", "atan")[rng.integers(5)],
                        build(depth - 1))

        for _ in range(300):
            ast = build(3)
            assert parse(pretty(ast), ["x", "y"]) == ast


def _fd_partial(f, x, axis, h=0.02):
    """Richardson-extrapolated central difference, O(h^4)."""
    e = np.zeros(len(x))
    e[axis] = 1.0

    def central(step):
        return (f(x + step * e) - f(x - step * e)) / (2.0 * step)

    return (4.0 * central(h / 2) - central(h)) / 3.0


def _fd_coefficient(expr, x, alpha):
    """Taylor coefficient d^alpha e(x) / alpha! by nested finite differences."""
    fns = [lambda p: evaluate(expr, p)]
    for axis, count in enumerate(alpha):
        for _ in range(count):
            prev = fns[-1]
            fns.append(lambda p, g=prev, a=axis: _fd_partial(g, p, a))
    fact = math.prod(math.factorial(a) for a in alpha)
    return fns[-1](x) / fact


class TestEvalJet:
    def test_square_at_three(self):
        jet = eval_jet(parse("x^2", ["x"]), np.array([3.0]), 2)
        np.testing.assert_allclose(jet.coeffs, [9.0, 6.0, 1.0])

    def test_constant(self):
        jet = eval_jet(parse("7", ["x"]), np.array([1.3]), 3)
        np.testing.assert_allclose(jet.coeffs, [7.0, 0.0, 0.0, 0.0])

    def test_exp_series(self):
        jet = eval_jet(parse("exp(x)", ["x"]), np.array([0.0]), 3)
        np.testing.assert_allclose(jet.coeffs, [1.0, 1.0, 0.5, 1.0 / 6.0])

    def test_order_zero_equals_pointwise(self):
        rng = np.random.default_rng(5)
        exprs = ["sin(x)*y + exp(x*y)", "sqrt(1+x^2) - atan(y)", "x^3/(2+y^2)"]
        pts = rng.uniform(-1.5, 1.5, size=(20, 2))
        for source in exprs:
            expr = parse(source, ["x", "y"])
            jet = eval_jet(expr, pts, 0)
            # evaluation orders differ (Horner composition vs direct calls),
            # so agreement is to rounding, not bit-exact
            np.testing.assert_allclose(jet.constant_term(), evaluate(expr, pts),
                                       rtol=1e-14, atol=1e-15)

    @pytest.mark.parametrize("source", [
        "sin(x)*cos(y)",
        "exp(x*y)",
        "1/(2 + x^2 + y^2)",
        "sqrt(4 + x) * tanh(y)",
        "x^3 - 2*x*y + y^2",
        "atan(x + y)",
    ])
    def test_coefficients_match_finite_differences(self, source):
        # independent oracle: nested Richardson central differences
        expr = parse(source, ["x", "y"])
        x = np.array([0.3, -0.4])
        jet = eval_jet(expr, x, 3)
        for alpha in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1)]:
            got = jet.coefficient(alpha)
            want = _fd_coefficient(expr, x, alpha)
            scale = max(1.0, abs(want))
            assert abs(got - want) / scale < 1e-6, (source, alpha, got, want)

    def test_log_of_nonpositive_constant_raises(self):
        with pytest.raises(DomainError):
            eval_jet(parse("log(x)", ["x"]), np.array([-1.0]), 2)

    def test_division_by_zero_constant_raises(self):
        with pytest.raises(DomainError):
            eval_jet(parse("1/x", ["x"]), np.array([0.0]), 2)

    def test_integer_power_of_negative_base_is_fine(self):
        jet = eval_jet(parse("x^3", ["x"]), np.array([-2.0]), 1)
        np.testing.assert_allclose(jet.coeffs, [-8.0, 12.0])

    def test_batched_base_points(self):
        expr = parse("x^2 + y", ["x", "y"])
        pts = np.array([[1.0, 2.0], [3.0, -1.0]])
        jet = eval_jet(expr, pts, 2)
        np.testing.assert_allclose(jet.constant_term(), [3.0, 8.0])
        np.testing.assert_allclose(jet.coefficient((1, 0)), [2.0, 6.0])


class TestDifferentiate:
    @pytest.mark.parametrize("source", [
        "x^2 * y", "sin(x*y)", "exp(x)/(1+y^2)", "sqrt(4+x)", "atan(x-y)",
        "tanh(x) + cosh(y)", "x^y",
    ])
    def test_against_finite_differences(self, source):
        expr = parse(source, ["x", "y"])
        x = np.array([0.7, 0.4])
        for axis in (0, 1):
            d = differentiate(expr, axis)
            want = _fd_partial(lambda p: evaluate(expr, p), x, axis)
            # the FD oracle itself is only O(h^4) accurate
            assert abs(evaluate(d, x) - want) < 1e-6 * max(1.0, abs(want))
