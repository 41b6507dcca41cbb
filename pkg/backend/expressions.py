"""Arithmetic expressions for derived metric functions.

Grammar (recursive descent, standard precedence, left associative)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | NAME | ("min" | "max") "(" expr "," expr ")" | "(" expr ")"

``min`` and ``max`` are reserved and cannot be used as operand names.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import FrozenSet, Iterator, List, Mapping, Optional, Tuple, Union

from backend.errors import EvaluationError, ExpressionError

BUILTINS = ("min", "max")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/(),]))"
)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Negate:
    operand: "Node"


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Node", ...]


Node = Union[Number, Name, Negate, BinaryOp, Call]


# ---------------------------------------------------------------------------
# Tokeniser / parser
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(text: str) -> Iterator[_Token]:
    pos = 0
    length = len(text)
    while pos < length:
        if text[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ExpressionError(f"Unexpected character {text[pos:].lstrip()[:1]!r} at position {pos} in {text!r}")
        kind = match.lastgroup or "op"
        yield _Token(kind, match.group(kind), match.start(kind))
        pos = match.end()
    yield _Token("end", "", length)


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens: List[_Token] = list(_tokenize(text))
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _expect(self, text: str) -> None:
        if self.current.text != text or self.current.kind != "op":
            self._fail(f"expected {text!r}")
        self._advance()

    def _fail(self, what: str) -> None:
        token = self.current
        found = "end of input" if token.kind == "end" else repr(token.text)
        raise ExpressionError(f"{what} but found {found} at position {token.pos} in {self.text!r}")

    def parse(self) -> Node:
        node = self._expr()
        if self.current.kind != "end":
            self._fail("expected operator")
        return node

    def _expr(self) -> Node:
        node = self._term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self._advance().text
            node = BinaryOp(op, node, self._term())
        return node

    def _term(self) -> Node:
        node = self._unary()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            node = BinaryOp(op, node, self._unary())
        return node

    def _unary(self) -> Node:
        if self.current.kind == "op" and self.current.text == "-":
            self._advance()
            return Negate(self._unary())
        return self._primary()

    def _primary(self) -> Node:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Number(float(token.text))
        if token.kind == "name":
            self._advance()
            if token.text in BUILTINS:
                self._expect("(")
                first = self._expr()
                self._expect(",")
                second = self._expr()
                self._expect(")")
                return Call(token.text, (first, second))
            return Name(token.text)
        if token.kind == "op" and token.text == "(":
            self._advance()
            node = self._expr()
            self._expect(")")
            return node
        self._fail("expected number, name or '('")
        raise AssertionError("unreachable")


def parse_expression(text: str) -> Node:
    """Parse ``text`` into an AST; raises ``ExpressionError`` on bad syntax."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Queries / evaluation
# ---------------------------------------------------------------------------


def free_variables(node: Node) -> FrozenSet[str]:
    if isinstance(node, Number):
        return frozenset()
    if isinstance(node, Name):
        return frozenset({node.ident})
    if isinstance(node, Negate):
        return free_variables(node.operand)
    if isinstance(node, BinaryOp):
        return free_variables(node.left) | free_variables(node.right)
    result: FrozenSet[str] = frozenset()
    for arg in node.args:
        result |= free_variables(arg)
    return result


def evaluate(node: Node, env: Mapping[str, float]) -> float:
    """Evaluate ``node`` with operand values from ``env``."""
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Name):
        try:
            return float(env[node.ident])
        except KeyError:
            raise EvaluationError(f"Missing operand '{node.ident}'") from None
    if isinstance(node, Negate):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        first, second = (evaluate(arg, env) for arg in node.args)
        return min(first, second) if node.func == "min" else max(first, second)
    left = evaluate(node.left, env)
    right = evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if right == 0:
        raise EvaluationError("Division by zero")
    return left / right


def render(node: Node, parent_prec: int = 0) -> str:
    """Render an AST back to source text with minimal parentheses."""
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Negate):
        return f"-{render(node.operand, 3)}"
    if isinstance(node, Call):
        return f"{node.func}({render(node.args[0])}, {render(node.args[1])})"
    prec = 1 if node.op in "+-" else 2
    # right operand binds one level tighter: a - (b - c) keeps its parentheses
    text = f"{render(node.left, prec)} {node.op} {render(node.right, prec + 1)}"
    return f"({text})" if prec < parent_prec else text


def compile_expression(text: str, operands: Optional[Tuple[str, ...]] = None) -> Node:
    """Parse ``text`` and check its free variables against ``operands``."""
    node = parse_expression(text)
    if operands is not None:
        reserved = sorted(set(operands) & set(BUILTINS))
        if reserved:
            raise ExpressionError(f"Operand name '{reserved[0]}' is reserved")
        unknown = sorted(free_variables(node) - set(operands))
        if unknown:
            raise ExpressionError(f"Expression {text!r} uses undeclared operand '{unknown[0]}'")
    return node


__all__ = [
    "BUILTINS",
    "Node",
    "Number",
    "Name",
    "Negate",
    "BinaryOp",
    "Call",
    "parse_expression",
    "compile_expression",
    "free_variables",
    "evaluate",
    "render",
]
