"""Scalar expression language used to author Lagrangians, frame maps, embeddings and curves.

.. code-block:: python

    from plox.lagrange import exprlang

Grammar (``^`` is right associative and binds tighter than unary minus)::

    expr    := expr ("+" | "-") expr | expr ("*" | "/") expr | "-" expr
             | expr "^" expr | atom
    atom    := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"
    NUMBER  := decimal or scientific literal, e.g. ``2``, ``0.5``, ``.5``, ``1e-3``

Identifiers are either variables (``t`` or ``<letters><digits>``, e.g. ``q1``, ``qd2``,
``x1``), the constant ``pi``, or named constants handed to :func:`parse`. Functions:
``sin cos tan exp log sqrt atan2``.

Example:

    >>> expr = parse("0.5*(qd1^2 + qd2^2)")
    >>> expr.free_vars
    ('qd1', 'qd2')
    >>> expr.evaluate({"qd1": 1.0, "qd2": 2.0})
    2.5
"""

from __future__ import annotations

import math
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from logging import getLogger
from typing import Callable, Optional, Union

from plox.lagrange import dualnum
from plox.lagrange.dualnum import Scalar

logger = getLogger(__name__)

VARIABLE_NAME = re.compile(r"^(t|[A-Za-z]+[0-9]+)$")
"""Shape of identifiers that are treated as variables."""

FUNCTIONS: dict[str, tuple[int, Callable[..., Scalar]]] = {
    "sin": (1, dualnum.sin),
    "cos": (1, dualnum.cos),
    "tan": (1, dualnum.tan),
    "exp": (1, dualnum.exp),
    "log": (1, dualnum.log),
    "sqrt": (1, dualnum.sqrt),
    "atan2": (2, dualnum.atan2),
}

NON_SMOOTH = frozenset({"abs", "floor", "ceil", "min", "max", "sign", "round"})

BUILTIN_CONSTANTS = {"pi": math.pi}

_ATOM_START = frozenset({"number", "identifier", "'('", "'-'"})
_AFTER_OPERAND = frozenset({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
_IN_PARENS = frozenset({"')'"}) | (_AFTER_OPERAND - {"end of input"})


class ExprSyntaxError(ValueError):
    """Malformed expression source.

    Attributes:
        line: 1-based line of the offending token.
        column: 1-based column of the offending token.
        expected: Token kinds that would have been accepted.
    """

    def __init__(
        self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()
    ) -> None:
        self.line = line
        self.column = column
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at line {line}, column {column}{detail}")


class UnknownFunctionError(ExprSyntaxError):
    """Call of a function outside of the differentiable primitive set."""


class UnknownConstantError(ExprSyntaxError):
    """Identifier that is neither a variable nor a known constant."""


class UnboundVariableError(KeyError):
    """Evaluation was attempted without a binding for every free variable."""

    def __init__(self, names: tuple[str, ...]) -> None:
        self.names = names
        super().__init__(f"unbound variable(s): {', '.join(names)}")

    def __str__(self) -> str:
        return str(self.args[0])


# -- tree -------------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str
    value: float


@dataclass(frozen=True)
class Neg:
    operand: Node


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Node, ...]


Node = Union[Num, Var, Const, Neg, BinOp, Call]

_PRECEDENCE = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}
_NEG_PRECEDENCE = 25
_ATOM_PRECEDENCE = 100


# -- tokenizer --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # number | identifier | op | end
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == "end":
            return "end of input"
        return f"'{self.text}'"


_TOKEN_RE = re.compile(
    r"(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<identifier>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
    r"|(?P<space>[ \t\r\n]+)"
)


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        column = pos - line_start + 1
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", line, column)
        kind = m.lastgroup or ""
        text = m.group()
        if kind == "space":
            for offset, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + offset + 1
        else:
            tokens.append(_Token(kind, text, line, column))
        pos = m.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


# -- parser -----------------------------------------------------------------------------


class _Parser:
    """Pratt parser over the token list; binding powers follow ``_PRECEDENCE``."""

    def __init__(self, source: str, constants: Mapping[str, float]) -> None:
        self.tokens = _tokenize(source)
        self.pos = 0
        self.constants = constants

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, tok: _Token, expected: frozenset[str]) -> ExprSyntaxError:
        return ExprSyntaxError(f"unexpected {tok.describe()}", tok.line, tok.column, expected)

    def expect(self, text: str) -> _Token:
        tok = self.advance()
        if tok.kind != "op" or tok.text != text:
            raise self.fail(tok, frozenset({f"'{text}'"}))
        return tok

    def parse(self) -> Node:
        node = self.expression(0)
        if self.peek().kind != "end":
            raise self.fail(self.peek(), _AFTER_OPERAND)
        return node

    def lbp(self, tok: _Token) -> int:
        if tok.kind == "op":
            return _PRECEDENCE.get(tok.text, 0)
        return 0

    def expression(self, rbp: int) -> Node:
        left = self.nud(self.advance())
        while rbp < self.lbp(self.peek()):
            tok = self.advance()
            # right associativity of ^ by binding its operand one notch looser
            right = self.expression(_PRECEDENCE[tok.text] - (1 if tok.text == "^" else 0))
            left = BinOp(tok.text, left, right)
        return left

    def nud(self, tok: _Token) -> Node:
        if tok.kind == "number":
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(
                    f"literal {tok.text} is out of range", tok.line, tok.column
                )
            return Num(value)
        if tok.kind == "identifier":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call(tok)
            return self.identifier(tok)
        if tok.kind == "op" and tok.text == "(":
            node = self.expression(0)
            closing = self.advance()
            if closing.kind != "op" or closing.text != ")":
                raise self.fail(closing, _IN_PARENS)
            return node
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_NEG_PRECEDENCE))
        raise self.fail(tok, _ATOM_START)

    def identifier(self, tok: _Token) -> Node:
        name = tok.text
        if name in self.constants:
            return Const(name, float(self.constants[name]))
        if name in BUILTIN_CONSTANTS:
            return Const(name, BUILTIN_CONSTANTS[name])
        if VARIABLE_NAME.match(name):
            return Var(name)
        if name in FUNCTIONS:
            raise self.fail(self.peek(), frozenset({"'('"}))
        raise UnknownConstantError(f"unknown constant {name!r}", tok.line, tok.column)

    def call(self, tok: _Token) -> Node:
        name = tok.text
        if name not in FUNCTIONS:
            why = "non-smooth primitive" if name in NON_SMOOTH else "unknown function"
            raise UnknownFunctionError(f"{why} {name!r}", tok.line, tok.column)
        self.expect("(")
        args = [self.expression(0)]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expression(0))
        closing = self.peek()
        if closing.kind != "op" or closing.text != ")":
            raise self.fail(closing, frozenset({"','"}) | _IN_PARENS)
        self.advance()
        arity = FUNCTIONS[name][0]
        if len(args) != arity:
            raise ExprSyntaxError(
                f"{name} takes {arity} argument(s), got {len(args)}", tok.line, tok.column
            )
        return Call(name, tuple(args))


# -- compiled evaluation ----------------------------------------------------------------

Evaluator = Callable[[Mapping[str, Scalar]], Scalar]


def _compile(node: Node) -> Evaluator:
    if isinstance(node, Num):
        v = node.value
        return lambda env: v
    if isinstance(node, Const):
        c = node.value
        return lambda env: c
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, BinOp):
        lhs, rhs = _compile(node.left), _compile(node.right)
        if node.op == "+":
            return lambda env: lhs(env) + rhs(env)
        if node.op == "-":
            return lambda env: lhs(env) - rhs(env)
        if node.op == "*":
            return lambda env: lhs(env) * rhs(env)
        if node.op == "/":
            return lambda env: dualnum.divide(lhs(env), rhs(env))
        return lambda env: dualnum.power(lhs(env), rhs(env))
    fn = FUNCTIONS[node.name][1]
    if len(node.args) == 1:
        arg = _compile(node.args[0])
        return lambda env: fn(arg(env))
    args = [_compile(a) for a in node.args]
    return lambda env: fn(*(a(env) for a in args))


def _collect_vars(node: Node, acc: dict[str, None]) -> None:
    if isinstance(node, Var):
        acc.setdefault(node.name, None)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, acc)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, acc)
        _collect_vars(node.right, acc)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_vars(a, acc)


@dataclass(frozen=True)
class Expr:
    """Parsed, immutable expression.

    Two expressions are equal when their trees are structurally identical.

    Attributes:
        root: Root node of the expression tree.
        free_vars: Variable names in order of first appearance.
    """

    root: Node
    free_vars: tuple[str, ...] = field(init=False, compare=False)
    _fn: Evaluator = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        acc: dict[str, None] = {}
        _collect_vars(self.root, acc)
        object.__setattr__(self, "free_vars", tuple(acc))
        object.__setattr__(self, "_fn", _compile(self.root))

    def __str__(self) -> str:
        return unparse(self)

    def evaluate(self, binding: Mapping[str, Scalar]) -> Scalar:
        """Evaluate on plain reals or :class:`~plox.lagrange.dualnum.Dual2` scalars.

        Raises:
            UnboundVariableError: A free variable has no binding.
            plox.lagrange.dualnum.DomainError: A primitive left its domain.
        """
        missing = [v for v in self.free_vars if v not in binding]
        if missing:
            raise UnboundVariableError(tuple(missing))
        return self._fn(binding)

    def derivative(self, var: str) -> Expr:
        return derivative(self, var)

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return substitute(self, mapping)

    def depends_on(self, var: str) -> bool:
        return var in self.free_vars


def parse(source: str, constants: Optional[Mapping[str, float]] = None) -> Expr:
    """Parse expression source text.

    Example:

        >>> parse("2^3^2").evaluate({})
        512.0
        >>> parse("-2^2").evaluate({})
        -4.0

    Args:
        source: Expression text.
        constants: Named real constants (e.g. scenario parameters) the text may use.

    Raises:
        ExprSyntaxError: Malformed text, with line/column and expected tokens.
        UnknownFunctionError: Call of an unsupported (or non-smooth) function.
        UnknownConstantError: Identifier that is neither a variable nor a constant.

    Returns:
        Expr: The parsed expression.
    """
    return Expr(_Parser(source, constants or {}).parse())


def evaluate(expr: Expr, binding: Mapping[str, Scalar]) -> Scalar:
    return expr.evaluate(binding)


def constant(value: float) -> Expr:
    return Expr(_num(value))


def variable(name: str) -> Expr:
    return Expr(Var(name))


# -- unparse ----------------------------------------------------------------------------


def _precedence(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _NEG_PRECEDENCE
    return _ATOM_PRECEDENCE


def _render(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_render(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = _render(node.operand)
        if _precedence(node.operand) < _NEG_PRECEDENCE:
            inner = f"({inner})"
        return f"-{inner}"

    p = _PRECEDENCE[node.op]
    left, right = _render(node.left), _render(node.right)
    lp, rp = _precedence(node.left), _precedence(node.right)
    if lp < p or (node.op == "^" and lp == p):
        left = f"({left})"
    if rp < p or (node.op != "^" and rp == p):
        right = f"({right})"
    return f"{left} {node.op} {right}" if node.op != "^" else f"{left}^{right}"


def unparse(expr: Expr) -> str:
    """Render canonical source text; ``parse(unparse(e)) == e`` for parsed ``e``."""
    return _render(expr.root)


# -- source transformation --------------------------------------------------------------

_ZERO = Num(0.0)
_ONE = Num(1.0)


def _num(value: float) -> Node:
    return Neg(Num(-value)) if value < 0 else Num(float(value))


def _is_zero(node: Node) -> bool:
    return isinstance(node, Num) and node.value == 0.0


def _is_one(node: Node) -> bool:
    return isinstance(node, Num) and node.value == 1.0


def _neg(a: Node) -> Node:
    return _ZERO if _is_zero(a) else Neg(a)


def _add(a: Node, b: Node) -> Node:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return BinOp("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_zero(a) or _is_zero(b):
        return _ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    return BinOp("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_zero(a):
        return _ZERO
    if _is_one(b):
        return a
    return BinOp("/", a, b)


def _d(node: Node, var: str) -> Node:
    if isinstance(node, (Num, Const)):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Neg):
        return _neg(_d(node.operand, var))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _d(a, var), _d(b, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if node.op == "/":
            return _div(_sub(_mul(da, b), _mul(a, db)), BinOp("^", b, Num(2.0)))
        # a^b
        if _is_zero(db):
            exponent = _num(b.value - 1.0) if isinstance(b, Num) else _sub(b, _ONE)
            return _mul(_mul(b, BinOp("^", a, exponent)), da)
        return _mul(
            node,
            _add(_mul(db, Call("log", (a,))), _div(_mul(b, da), a)),
        )

    (a, *rest) = node.args
    da = _d(a, var)
    if node.name == "atan2":
        x = rest[0]
        dx = _d(x, var)
        r2 = BinOp("+", BinOp("^", x, Num(2.0)), BinOp("^", a, Num(2.0)))
        return _div(_sub(_mul(x, da), _mul(a, dx)), r2)
    if _is_zero(da):
        return _ZERO
    if node.name == "sin":
        return _mul(Call("cos", (a,)), da)
    if node.name == "cos":
        return _neg(_mul(Call("sin", (a,)), da))
    if node.name == "tan":
        return _mul(BinOp("+", _ONE, BinOp("^", node, Num(2.0))), da)
    if node.name == "exp":
        return _mul(node, da)
    if node.name == "log":
        return _div(da, a)
    # sqrt
    return _div(da, BinOp("*", Num(2.0), node))


def derivative(expr: Expr, var: str) -> Expr:
    """Partial derivative of ``expr`` with respect to the variable ``var``.

    Forward-mode source transformation of the tree; only literal zeros and ones are
    folded away. The result evaluates on Dual2 scalars like any other expression, which
    is what lets second derivatives flow through Jacobians of frame maps.
    """
    return Expr(_d(expr.root, var))


def _subst(node: Node, mapping: Mapping[str, Node]) -> Node:
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(_subst(node.operand, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, _subst(node.left, mapping), _subst(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.name, tuple(_subst(a, mapping) for a in node.args))
    return node


def substitute(expr: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, simultaneously."""
    return Expr(_subst(expr.root, {k: v.root for k, v in mapping.items()}))


def shift_time(expr: Expr, offset: float) -> Expr:
    """Reparameterise ``t`` as ``t + offset``."""
    if offset == 0.0 or not expr.depends_on("t"):
        return expr
    if offset > 0:
        shifted: Node = BinOp("+", Var("t"), Num(offset))
    else:
        shifted = BinOp("-", Var("t"), Num(-offset))
    return Expr(_subst(expr.root, {"t": shifted}))


def parse_all(
    sources: Sequence[str], constants: Optional[Mapping[str, float]] = None
) -> tuple[Expr, ...]:
    return tuple(parse(s, constants) for s in sources)
