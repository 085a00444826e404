"""
Right-hand-side expressions.

Problem files describe the regular part g(x, w, v) of the right-hand side as
text. This module tokenizes and parses that text into an immutable tree and
evaluates the tree over numpy arrays, so the solver can evaluate g on a whole
matrix of quadrature nodes at once.

Grammar (loosest to tightest binding)::

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := atom ('^' unary)?          # right-associative
    atom       := NUMBER | 'pi' | VARIABLE | FUNCTION '(' args ')' | '(' expression ')'

Functions: neg, exp, log, sin, cos, sqrt, abs (one argument) and
pow(expression, constant).
"""

import math
import re
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

DEFAULT_VARIABLES = ("x", "w", "v")
CONSTANTS = {"pi": math.pi}
UNARY_FUNCTIONS = {
    "neg": np.negative,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
FUNCTIONS = tuple(UNARY_FUNCTIONS) + ("pow",)


class ExprSyntaxError(ValueError):
    """Malformed expression text; `offset` is the byte offset of the offending token."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    """Identifier that is neither a variable, a constant nor a function."""

    def __init__(self, name: str, offset: int, allowed: Iterable[str]):
        self.name = name
        self.allowed = tuple(allowed)
        super().__init__(f"unknown identifier '{name}' (allowed: {', '.join(self.allowed)})",
                         offset)


class ExprDomainError(ArithmeticError):
    """Evaluation left the domain of an operation (division by zero, log of x <= 0, ...)."""

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression


# =============================================================================
# Expression tree
# =============================================================================

class Expr:
    """Base class of expression tree nodes. Nodes are immutable."""

    def _eval(self, env: dict) -> ArrayLike:
        raise NotImplementedError

    def variables(self) -> frozenset:
        """Names of the variables the expression reads."""
        return frozenset()

    def evaluate(self, **env: ArrayLike) -> ArrayLike:
        """
        Evaluate with variables given as keywords (scalars or broadcastable arrays).

        Returns:
            A float if every input is scalar, otherwise an array of the
            broadcast input shape.

        Raises:
            ExprDomainError: If any element leaves the domain of an operation or
                produces a non-finite value.
            KeyError: If a variable used by the expression is not supplied.
        """
        missing = self.variables() - set(env)
        if missing:
            raise KeyError(f"missing values for variables: {', '.join(sorted(missing))}")
        arrays = {name: np.asarray(value, dtype=float) for name, value in env.items()}
        shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
        with np.errstate(all="ignore"):
            result = np.asarray(self._eval(arrays), dtype=float)
        _check_finite(result, self)
        if shape == ():
            return float(result)
        return np.array(np.broadcast_to(result, shape))

    def __str__(self) -> str:
        return serialize(self)


@dataclass(frozen=True)
class Number(Expr):
    value: float

    def _eval(self, env):
        return np.float64(self.value)


@dataclass(frozen=True)
class Constant(Expr):
    name: str

    def _eval(self, env):
        return np.float64(CONSTANTS[self.name])


@dataclass(frozen=True)
class Variable(Expr):
    name: str

    def _eval(self, env):
        return env[self.name]

    def variables(self):
        return frozenset((self.name,))


@dataclass(frozen=True)
class Negate(Expr):
    operand: Expr

    def _eval(self, env):
        return -self.operand._eval(env)

    def variables(self):
        return self.operand.variables()


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _eval(self, env):
        a = self.left._eval(env)
        b = self.right._eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise ExprDomainError("division by zero", serialize(self))
            return a / b
        return _power(a, b, self)

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class FunctionCall(Expr):
    name: str
    argument: Expr

    def _eval(self, env):
        a = self.argument._eval(env)
        if self.name == "log" and np.any(np.asarray(a) <= 0.0):
            raise ExprDomainError("log of a non-positive value", serialize(self))
        if self.name == "sqrt" and np.any(np.asarray(a) < 0.0):
            raise ExprDomainError("sqrt of a negative value", serialize(self))
        return UNARY_FUNCTIONS[self.name](a)

    def variables(self):
        return self.argument.variables()


@dataclass(frozen=True)
class PowConst(Expr):
    base: Expr
    exponent: float

    def _eval(self, env):
        return _power(self.base._eval(env), np.float64(self.exponent), self)

    def variables(self):
        return self.base.variables()


def _power(base, exponent, node: Expr):
    base_arr = np.asarray(base)
    exp_arr = np.asarray(exponent)
    fractional = exp_arr != np.round(exp_arr)
    if np.any((base_arr < 0.0) & fractional):
        raise ExprDomainError("negative base with non-integer exponent", serialize(node))
    if np.any((base_arr == 0.0) & (exp_arr < 0.0)):
        raise ExprDomainError("zero raised to a negative power", serialize(node))
    return np.power(base, exponent)


def _check_finite(result: np.ndarray, node: Expr):
    if not np.all(np.isfinite(result)):
        raise ExprDomainError("non-finite value", serialize(node))


def serialize(expr: Expr) -> str:
    """Fully parenthesized text that parses back to an equivalent tree."""
    if isinstance(expr, Number):
        return repr(float(expr.value))
    if isinstance(expr, (Constant, Variable)):
        return expr.name
    if isinstance(expr, Negate):
        return f"(-{serialize(expr.operand)})"
    if isinstance(expr, BinaryOp):
        return f"({serialize(expr.left)} {expr.op} {serialize(expr.right)})"
    if isinstance(expr, FunctionCall):
        return f"{expr.name}({serialize(expr.argument)})"
    if isinstance(expr, PowConst):
        return f"pow({serialize(expr.base)}, {float(expr.exponent)!r})"
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate(expr: Expr, x: ArrayLike = 0.0, w: ArrayLike = 0.0, v: ArrayLike = 0.0) -> ArrayLike:
    """Evaluate a right-hand-side expression g(x, w, v)."""
    return expr.evaluate(x=x, w=w, v=v)


# =============================================================================
# Tokenizer and parser
# =============================================================================

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_SINGLE = set("+-*/^(),")


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    offset: int


def tokenize(text: str) -> list:
    """Split expression text into tokens carrying byte offsets."""
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        offset = len(text[:i].encode("utf-8"))
        if c.isspace():
            i += 1
            continue
        match = _NUMBER.match(text, i)
        if match:
            tokens.append(Token("num", match.group(0), offset))
            i = match.end()
            continue
        match = _NAME.match(text, i)
        if match:
            tokens.append(Token("name", match.group(0), offset))
            i = match.end()
            continue
        if c in _SINGLE:
            tokens.append(Token("op", c, offset))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character '{c}'", offset)
    tokens.append(Token("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens: list, variables: tuple):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.current
        if token.text != text or token.kind == "num":
            found = "end of input" if token.kind == "end" else f"'{token.text}'"
            raise ExprSyntaxError(f"expected '{text}', found {found}", token.offset)
        return self.advance()

    def parse(self) -> Expr:
        expr = self.expression()
        if self.current.kind != "end":
            raise ExprSyntaxError(f"unexpected '{self.current.text}'", self.current.offset)
        return expr

    def expression(self) -> Expr:
        left = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance().text
            left = BinaryOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self.advance().text
            left = BinaryOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            return Negate(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.current.kind == "op" and self.current.text == "^":
            self.advance()
            return BinaryOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "num":
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"number '{token.text}' overflows a double", token.offset)
            return Number(value)
        if token.kind == "name":
            self.advance()
            if token.text in FUNCTIONS:
                return self.call(token)
            if token.text in CONSTANTS:
                return Constant(token.text)
            if token.text in self.variables:
                return Variable(token.text)
            raise UnknownIdentifierError(token.text, token.offset,
                                         self.variables + tuple(CONSTANTS) + FUNCTIONS)
        if token.kind == "op" and token.text == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        if token.kind == "end":
            raise ExprSyntaxError("unexpected end of input", token.offset)
        raise ExprSyntaxError(f"unexpected '{token.text}'", token.offset)

    def call(self, name: Token) -> Expr:
        self.expect("(")
        argument = self.expression()
        if name.text != "pow":
            self.expect(")")
            return FunctionCall(name.text, argument)
        self.expect(",")
        exponent_token = self.current
        exponent = self.expression()
        self.expect(")")
        if not exponent.variables() == frozenset():
            raise ExprSyntaxError("pow exponent must be a constant", exponent_token.offset)
        try:
            value = float(exponent.evaluate())
        except ExprDomainError as exc:
            raise ExprSyntaxError(f"pow exponent is undefined ({exc})",
                                  exponent_token.offset) from exc
        if not math.isfinite(value):
            raise ExprSyntaxError("pow exponent is not finite", exponent_token.offset)
        return PowConst(argument, value)


def parse(text: str, variables: tuple = DEFAULT_VARIABLES) -> Expr:
    """
    Parse expression text into an Expr tree.

    Args:
        text: Expression source, whitespace-insensitive.
        variables: Names accepted as variables; g uses (x, w, v), the Osgood
            modulus uses ('u',).

    Returns:
        Expr tree; `serialize(parse(s))` parses back to an equivalent tree.

    Raises:
        ExprSyntaxError: Malformed input, with the byte offset of the problem.
        UnknownIdentifierError: Identifier outside variables, constants and functions.
    """
    if not isinstance(text, str):
        raise ExprSyntaxError(f"expression must be text, got {type(text).__name__}", 0)
    return _Parser(tokenize(text), tuple(variables)).parse()
