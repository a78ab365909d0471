"""Small arithmetic expression language for drift, jump and coefficient functions.

Expressions are built over three variables: ``t`` (time), ``y`` (state) and
``v`` (jump mark).  They can be parsed from text, evaluated, differentiated
symbolically and compiled into numba functions for the samplers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

VARIABLES = ("t", "y", "v")
UNARY_FUNCS = ("sin", "cos", "exp", "ln", "sqrt")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")

_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_PRECEDENCE = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class EvalDomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, subexpr: "Expr"):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{serialize(subexpr)}'")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if self.name not in VARIABLES:
            raise UnknownIdentifierError(f"unknown variable {self.name!r}", 0)


@dataclass(frozen=True)
class Unary:
    op: str  # neg or one of UNARY_FUNCS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            while text[pos].isspace():
                pos += 1
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        value = m.group(kind)
        if value == "**":
            value = "^"
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"unexpected {found}", pos, (repr(value),))

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos, ("operator", "end of input"))
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            # right-associative; allows 2^-1
            return Binary("pow", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in VARIABLES:
                return Var(val)
            if val in UNARY_FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(val, arg)
            raise UnknownIdentifierError(
                f"unknown identifier {val!r}", pos, VARIABLES + UNARY_FUNCS
            )
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(
            f"unexpected {found}", pos, ("number", "variable", "function", "'('")
        )


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Precedence from loosest to tightest: ``+ -``, ``* /``, unary minus, ``^``.
    ``**`` is accepted as a synonym of ``^``.
    """
    return _Parser(text).parse()


def as_expr(e: Union[Expr, str, float, int]) -> Expr:
    if isinstance(e, str):
        return parse(e)
    if isinstance(e, (int, float)):
        return Const(float(e))
    return e


# ---------------------------------------------------------------------------
# serialization


def _fmt_const(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        s = str(int(x))
    else:
        s = repr(x)
    return s


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PRECEDENCE[e.op]
    if isinstance(e, Unary) and e.op == "neg":
        return _PRECEDENCE["neg"]
    return 10


def serialize(e: Expr) -> str:
    """Render ``e`` as text that parses back to the same tree."""
    if isinstance(e, Const):
        if math.copysign(1.0, e.value) < 0:
            return f"(-{_fmt_const(-e.value)})"
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = serialize(e.arg)
            if _prec(e.arg) < _PRECEDENCE["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{e.op}({serialize(e.arg)})"
    p = _PRECEDENCE[e.op]
    left = serialize(e.left)
    right = serialize(e.right)
    if e.op == "pow":
        # base must be atomic; exponent parses as a unary expression
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _PRECEDENCE["neg"]:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        # left-associative: parenthesize equal precedence on the right
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left}{_SYMBOL[e.op]}{right}"


def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Unary):
        return free_vars(e.arg)
    return free_vars(e.left) | free_vars(e.right)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: Union[Expr, str], binding: Mapping[str, float] | None = None, **kw: float) -> float:
    """Evaluate ``e`` in IEEE double precision.

    Variables are taken from ``binding`` and keyword arguments.  Domain
    violations (``ln`` of a non-positive number, ``sqrt`` of a negative one,
    division by zero) raise :class:`EvalDomainError`.
    """
    env = dict(binding or {})
    env.update(kw)
    return _eval(as_expr(e), env)


def _eval(e: Expr, env: Mapping[str, float]) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise ExprError(f"variable {e.name!r} is not bound") from None
    if isinstance(e, Unary):
        a = _eval(e.arg, env)
        op = e.op
        if op == "neg":
            return -a
        if op == "sin":
            return math.sin(a)
        if op == "cos":
            return math.cos(a)
        if op == "exp":
            try:
                return math.exp(a)
            except OverflowError:
                raise EvalDomainError("overflow in exp", e) from None
        if op == "ln":
            if a <= 0.0:
                raise EvalDomainError(f"ln of non-positive value {a!r}", e)
            return math.log(a)
        if op == "sqrt":
            if a < 0.0:
                raise EvalDomainError(f"sqrt of negative value {a!r}", e)
            return math.sqrt(a)
        raise ExprError(f"unknown unary operator {op!r}")
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    op = e.op
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0.0:
            raise EvalDomainError("division by zero", e)
        return a / b
    if op == "pow":
        try:
            return math.pow(a, b)
        except (ValueError, ZeroDivisionError):
            raise EvalDomainError(f"invalid power {a!r}^{b!r}", e) from None
        except OverflowError:
            raise EvalDomainError("overflow in power", e) from None
    raise ExprError(f"unknown binary operator {op!r}")


# ---------------------------------------------------------------------------
# construction helpers with constant folding

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return _ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("div", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def power(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return _ONE
    return Binary("pow", a, b)


def func(name: str, a: Expr) -> Expr:
    return Unary(name, a)


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of variable ``name`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Const):
        return e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, name, replacement))
    return Binary(e.op, substitute(e.left, name, replacement), substitute(e.right, name, replacement))


# ---------------------------------------------------------------------------
# differentiation


def differentiate(e: Union[Expr, str], wrt: str) -> Expr:
    """Symbolic derivative of ``e`` with respect to variable ``wrt``.

    Only constant folding is applied to the result.  Powers must have an
    exponent that does not depend on ``wrt``.
    """
    if wrt not in VARIABLES:
        raise UnknownIdentifierError(f"unknown variable {wrt!r}", 0)
    return _diff(as_expr(e), wrt)


def _diff(e: Expr, x: str) -> Expr:
    if isinstance(e, Const):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.name == x else _ZERO
    if x not in free_vars(e):
        return _ZERO
    if isinstance(e, Unary):
        u = e.arg
        du = _diff(u, x)
        op = e.op
        if op == "neg":
            return neg(du)
        if op == "sin":
            return mul(func("cos", u), du)
        if op == "cos":
            return neg(mul(func("sin", u), du))
        if op == "exp":
            return mul(e, du)
        if op == "ln":
            return div(du, u)
        if op == "sqrt":
            return div(du, mul(Const(2.0), e))
        raise ExprError(f"unknown unary operator {op!r}")
    a, b = e.left, e.right
    op = e.op
    if op == "add":
        return add(_diff(a, x), _diff(b, x))
    if op == "sub":
        return sub(_diff(a, x), _diff(b, x))
    if op == "mul":
        return add(mul(_diff(a, x), b), mul(a, _diff(b, x)))
    if op == "div":
        da, db = _diff(a, x), _diff(b, x)
        if _is_const(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Const(2.0)))
    if op == "pow":
        if x in free_vars(b):
            raise ExprError(
                f"cannot differentiate '{serialize(e)}': exponent depends on {x!r}"
            )
        if _is_const(b):
            lowered = power(a, Const(b.value - 1.0))
        else:
            lowered = power(a, sub(b, _ONE))
        return mul(mul(b, lowered), _diff(a, x))
    raise ExprError(f"unknown binary operator {op!r}")


# ---------------------------------------------------------------------------
# code generation

_PY_FUNCS = {"sin": "math.sin", "cos": "math.cos", "exp": "math.exp", "ln": "math.log", "sqrt": "math.sqrt"}


def to_python(e: Expr, names: Mapping[str, str] | None = None) -> str:
    """Python source for ``e`` using the ``math`` module.

    ``names`` optionally renames variables in the generated code.
    """
    names = names or {}
    if isinstance(e, Const):
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if isinstance(e, Var):
        return names.get(e.name, e.name)
    if isinstance(e, Unary):
        inner = to_python(e.arg, names)
        if e.op == "neg":
            return f"(-{inner})"
        return f"{_PY_FUNCS[e.op]}({inner})"
    left = to_python(e.left, names)
    right = to_python(e.right, names)
    if e.op == "pow":
        if _is_const(e.right) and e.right.value == 2.0:
            return f"({left}*{left})"
        return f"({left}**{right})"
    return f"({left}{_SYMBOL[e.op]}{right})"
