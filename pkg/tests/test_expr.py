import math

import numpy as np
import pytest

from fracivp.expr import (
    BinaryOp,
    ExprDomainError,
    ExprSyntaxError,
    Negate,
    Number,
    PowConst,
    UnknownIdentifierError,
    Variable,
    evaluate,
    parse,
    serialize,
    tokenize,
)

X, W, V = 0.7, -1.3, 2.1

PYTHON_NAMESPACE = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": math.sqrt,
    "abs": abs,
    "neg": lambda a: -a,
    "pow": math.pow,
    "pi": math.pi,
    "x": X,
    "w": W,
    "v": V,
}

# Python shares the precedence and associativity of every operator in the grammar
# once '^' is written '**'.
CORPUS = [
    "1 + 2 * 3",
    "(1 + 2) * 3",
    "2 * 3 + 4 * 5",
    "10 - 4 - 3",
    "10 - (4 - 3)",
    "24 / 4 / 3",
    "24 / (4 / 3)",
    "2 ^ 3 ^ 2",
    "(2 ^ 3) ^ 2",
    "-2 ^ 2",
    "(-2) ^ 2",
    "2 ^ -1",
    "-x",
    "--x",
    "-x * w",
    "-x ^ 2",
    "x - -w",
    "x * -w",
    "x + w * v",
    "(x + w) * v",
    "x * w + v",
    "x / w * v",
    "x / (w * v)",
    "x ^ 2 * w",
    "x ^ 0.5 * v",
    "2 * x ^ 3 - 4 * x ^ 2 + x - 7",
    "v ^ 2 ^ 0.5",
    "pi * x",
    "2 * pi",
    "exp(x)",
    "exp(-x ^ 2)",
    "log(v)",
    "log(x * v) - log(x) - log(v)",
    "sin(x) ^ 2 + cos(x) ^ 2",
    "sqrt(v) * sqrt(v)",
    "abs(w)",
    "abs(w) * -1",
    "neg(w)",
    "neg(x + w)",
    "pow(v, 3)",
    "pow(x, 0.5)",
    "pow(x + v, -2)",
    "sin(cos(x))",
    "exp(log(v))",
    "x * w * v / (1 + x ^ 2)",
    "1e-3 * x",
    "2.5e2 + .5",
    "3. * x",
    "((((x))))",
    "0.2 * w + 0.1 * v - 0.3 * x * w * v",
]


def python_value(text):
    return eval(text.replace("^", "**"), {"__builtins__": {}}, PYTHON_NAMESPACE)


class TestCorpus:
    def test_corpus_size(self):
        assert len(CORPUS) == 50

    @pytest.mark.parametrize("text", CORPUS)
    def test_precedence_matches_python(self, text):
        value = parse(text).evaluate(x=X, w=W, v=V)
        assert value == pytest.approx(python_value(text), rel=1e-13, abs=1e-13)

    @pytest.mark.parametrize("text", CORPUS)
    def test_serialized_form_parses_back(self, text):
        tree = parse(text)
        assert parse(serialize(tree)) == tree


class TestTree:
    def test_structure(self):
        assert parse("x + w * v") == BinaryOp("+", Variable("x"),
                                               BinaryOp("*", Variable("w"), Variable("v")))

    def test_power_is_right_associative(self):
        assert parse("x ^ w ^ v") == BinaryOp("^", Variable("x"),
                                               BinaryOp("^", Variable("w"), Variable("v")))

    def test_unary_minus_binds_looser_than_power(self):
        assert parse("-x ^ 2") == Negate(BinaryOp("^", Variable("x"), Number(2.0)))

    def test_pow_takes_constant_exponent(self):
        assert parse("pow(x, -2)") == PowConst(Variable("x"), -2.0)

    def test_variables(self):
        assert parse("x * 2 + sin(v)").variables() == frozenset({"x", "v"})
        assert parse("pi + 1").variables() == frozenset()

    def test_nodes_are_immutable(self):
        tree = parse("x + 1")
        with pytest.raises(AttributeError):
            tree.op = "-"

    def test_alternative_variable_set(self):
        tree = parse("u ^ 2", variables=("u",))
        assert tree.evaluate(u=3.0) == pytest.approx(9.0)
        with pytest.raises(UnknownIdentifierError):
            parse("x", variables=("u",))


class TestEvaluate:
    def test_scalar_inputs_give_float(self):
        value = evaluate(parse("x + w + v"), 1.0, 2.0, 3.0)
        assert isinstance(value, float)
        assert value == 6.0

    def test_vectorized_broadcast(self):
        x = np.linspace(0.0, 1.0, 5)
        out = parse("x * w + v").evaluate(x=x, w=2.0, v=1.0)
        np.testing.assert_allclose(out, 2.0 * x + 1.0)

    def test_constant_expression_broadcasts_to_input_shape(self):
        out = parse("3").evaluate(x=np.zeros((2, 3)), w=0.0, v=0.0)
        assert out.shape == (2, 3)
        assert np.all(out == 3.0)

    def test_missing_variable(self):
        with pytest.raises(KeyError):
            parse("x + w").evaluate(x=1.0)

    @pytest.mark.parametrize("text,env", [
        ("1 / x", {"x": 0.0}),
        ("log(x)", {"x": 0.0}),
        ("log(w)", {"w": -1.0}),
        ("sqrt(w)", {"w": -0.5}),
        ("w ^ 0.5", {"w": -2.0}),
        ("x ^ -1", {"x": 0.0}),
        ("pow(x, -0.5)", {"x": 0.0}),
        ("exp(x)", {"x": 1000.0}),
    ])
    def test_domain_errors(self, text, env):
        with pytest.raises(ExprDomainError):
            parse(text).evaluate(**env)

    def test_domain_error_names_subexpression(self):
        with pytest.raises(ExprDomainError) as info:
            parse("1 + log(x - 1)").evaluate(x=np.array([2.0, 1.0]))
        assert "log" in info.value.subexpression

    def test_negative_base_integer_exponent(self):
        assert parse("w ^ 3").evaluate(w=-2.0) == pytest.approx(-8.0)

    def test_domain_error_is_arithmetic_error(self):
        assert issubclass(ExprDomainError, ArithmeticError)


class TestMalformed:
    @pytest.mark.parametrize("text,offset", [
        ("x y", 2),
        ("(x", 2),
        ("x +", 3),
        ("x $ 2", 2),
        ("", 0),
        (")", 0),
        ("2 * (x + 1))", 11),
        ("sin x", 4),
        ("pow(x)", 5),
        ("x + * w", 4),
    ])
    def test_positioned_errors(self, text, offset):
        with pytest.raises(ExprSyntaxError) as info:
            parse(text)
        assert info.value.offset == offset
        assert f"at offset {offset}" in str(info.value)

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifierError) as info:
            parse("x + foo(w)")
        assert info.value.offset == 4
        assert info.value.name == "foo"
        assert "x" in info.value.allowed

    def test_pow_exponent_must_be_constant(self):
        with pytest.raises(ExprSyntaxError):
            parse("pow(x, w)")

    @pytest.mark.parametrize("text,offset", [
        ("pow(x, 1/0)", 7),
        ("pow(x, log(0))", 7),
        ("pow(x, 1e300 * 1e300)", 7),
    ])
    def test_undefined_pow_exponent_is_positioned(self, text, offset):
        with pytest.raises(ExprSyntaxError) as info:
            parse(text)
        assert info.value.offset == offset

    @pytest.mark.parametrize("text,offset", [("1e999", 0), ("x + 2e400", 4)])
    def test_overflowing_literal(self, text, offset):
        with pytest.raises(ExprSyntaxError) as info:
            parse(text)
        assert info.value.offset == offset

    def test_offsets_are_bytes(self):
        tokens = tokenize("x + 1")
        assert [t.offset for t in tokens] == [0, 2, 4, 5]
        with pytest.raises(ExprSyntaxError) as info:
            parse("x + é")
        assert info.value.offset == 4

    def test_non_text_input(self):
        with pytest.raises(ExprSyntaxError):
            parse(3.0)
