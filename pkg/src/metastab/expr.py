"""Restricted arithmetic expressions in the parameter ``N``.

Accepted: numbers, the name ``N``, ``+ - * /``, unary signs, parentheses
and integer powers of ``N`` written ``N^k`` or ``N**k``.  Anything else is
a :class:`~metastab.errors.ParseError`.
"""

import ast
import operator

from .errors import InvalidSpec, ParseError

__all__ = ["Expression", "compile_expression"]

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub,
           ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _integer_exponent(node):
    sign = 1
    while isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        if isinstance(node.op, ast.USub):
            sign = -sign
        node = node.operand
    if isinstance(node, ast.Constant) and type(node.value) is int:
        return sign * node.value
    return None


def _check(node, text, line):
    if isinstance(node, ast.Expression):
        return _check(node.body, text, line)
    if isinstance(node, ast.Constant):
        if type(node.value) not in (int, float):
            raise ParseError(line, f"unsupported literal in {text!r}")
        return
    if isinstance(node, ast.Name):
        if node.id != "N":
            raise ParseError(line, f"unknown name {node.id!r} in {text!r}; only N is allowed")
        return
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _check(node.operand, text, line)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.left, ast.Name) and node.left.id == "N"):
                raise ParseError(line, f"only N may be raised to a power in {text!r}")
            if _integer_exponent(node.right) is None:
                raise ParseError(line, f"exponent must be an integer in {text!r}")
            return
        if type(node.op) in _BINOPS:
            _check(node.left, text, line)
            _check(node.right, text, line)
            return
    raise ParseError(line, f"unsupported construct in {text!r}")


def _eval(node, N):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return float(N)
    if isinstance(node, ast.UnaryOp):
        return _UNOPS[type(node.op)](_eval(node.operand, N))
    if isinstance(node.op, ast.Pow):
        return float(N) ** _integer_exponent(node.right)
    return _BINOPS[type(node.op)](_eval(node.left, N), _eval(node.right, N))


class Expression:
    """Compiled expression; calling it with an integer ``N`` returns a float."""

    def __init__(self, text, tree):
        self.text = text
        self._tree = tree

    def __call__(self, N):
        try:
            return _eval(self._tree.body, N)
        except ZeroDivisionError:
            raise InvalidSpec(f"division by zero evaluating {self.text!r} at N={N}") from None

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and other.text == self.text

    def __hash__(self):
        return hash(self.text)


def compile_expression(text, line=None) -> Expression:
    """Parse ``text`` (a string or a plain number) into an :class:`Expression`."""
    if isinstance(text, bool):
        raise ParseError(line, "boolean is not an expression")
    if isinstance(text, (int, float)):
        text = repr(text)
    if not isinstance(text, str) or not text.strip():
        raise ParseError(line, "empty expression")
    src = text.strip().replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError:
        raise ParseError(line, f"malformed expression {text!r}") from None
    _check(tree, text, line)
    return Expression(text, tree)
