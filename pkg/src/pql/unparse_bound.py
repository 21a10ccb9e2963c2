"""Render bound expressions back to canonical query text.

Used by plan explanations and diagnostics; mirrors `ast.unparse` but works
on the bound tree, where constants are already normalized.
"""

from __future__ import annotations

from .ast import ConstKind
from .binder import (
    BoundAggregation,
    BoundAnd,
    BoundColumn,
    BoundCompare,
    BoundNot,
    BoundOr,
)
from .times import format_timestamp

_PREC_OR, _PREC_AND, _PREC_NOT = 1, 2, 3


def _constant(const) -> str:
    kind, value = const.kind, const.value
    if kind is ConstKind.NULL:
        return "NULL"
    if kind is ConstKind.BOOL:
        return "TRUE" if value else "FALSE"
    if kind is ConstKind.STRING:
        return '"' + str(value).replace('"', '""') + '"'
    if kind is ConstKind.TIMESTAMP:
        return '"' + format_timestamp(value) + '"'
    if kind is ConstKind.ARRAY:
        return "[" + ", ".join(_constant(e) for e in value) + "]"
    if kind is ConstKind.FLOAT:
        return repr(value)
    return str(value)


def _operand(node) -> str:
    if isinstance(node, BoundColumn):
        return f"{node.table}.{node.column}"
    assert isinstance(node, BoundAggregation)
    inner = f"{node.table}.{node.column or '*'}"
    if node.where is not None:
        inner += " WHERE " + _condition(node.where, 0)
    if node.window is not None:
        w = node.window
        start = "-INF" if w.start is None else str(w.start)
        inner += f", {start}, {w.end}, {w.unit.value}"
    return f"{node.kind.value}({inner})"


def _condition(node, prec: int) -> str:
    if isinstance(node, BoundCompare):
        return f"{_operand(node.lhs)} {node.op.value} {_constant(node.rhs)}"
    if isinstance(node, BoundNot):
        text = "NOT " + _condition(node.operand, _PREC_NOT)
        return f"({text})" if prec > _PREC_NOT else text
    if isinstance(node, BoundAnd):
        text = _condition(node.left, _PREC_AND) + " AND " + _condition(node.right, _PREC_AND + 1)
        return f"({text})" if prec > _PREC_AND else text
    if isinstance(node, BoundOr):
        text = _condition(node.left, _PREC_OR) + " OR " + _condition(node.right, _PREC_OR + 1)
        return f"({text})" if prec > _PREC_OR else text
    raise AssertionError(type(node))


def describe_condition(node) -> str:
    return _condition(node, 0)


def describe_target(node) -> str:
    if isinstance(node, (BoundColumn, BoundAggregation)):
        return _operand(node)
    return _condition(node, 0)
