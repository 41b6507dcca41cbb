"""Concrete syntax for metric constraints.

Two forms are accepted::

    <concept> (>=|<=|=) <number> [<unit>]        e.g. "MTTF >= 99.5 %"
    <number> <= <concept> <= <number> [<unit>]   e.g. "60 <= FrameRate <= 72 fps"

Open-ended forms are closed with the concept's domain range, expressed in the
constraint's own unit; the unit defaults to the concept's canonical unit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

from backend.catalog.models import MetricConstraint
from backend.errors import ConstraintSyntaxError
from backend.ontology import Ontology

UNIT_ALIASES = {"%": "percent", "μs": "us", "µs": "us"}

_NUM = r"[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?"
_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_UNIT = r"[^\s\d.+\-][^\s]*"

_BOUND_RE = re.compile(
    rf"^\s*(?P<concept>{_IDENT})\s*(?P<op>>=|<=|=)\s*(?P<value>{_NUM})\s*(?P<unit>{_UNIT})?\s*$"
)
_RANGE_RE = re.compile(
    rf"^\s*(?P<lo>{_NUM})\s*<=\s*(?P<concept>{_IDENT})\s*<=\s*(?P<hi>{_NUM})\s*(?P<unit>{_UNIT})?\s*$"
)


@dataclass(frozen=True)
class ConstraintExpr:
    """Syntax tree of one constraint expression (before ontology resolution).

    ``op`` is one of ``>=``, ``<=``, ``=`` or ``range``; ``upper`` is only set for
    the range form, where ``value`` holds the lower bound.
    """

    concept: str
    op: str
    value: float
    upper: Optional[float] = None
    unit: Optional[str] = None


def parse_constraint_expr(text: str) -> ConstraintExpr:
    expr = _match_constraint(text)
    if not all(math.isfinite(v) for v in (expr.value, expr.upper) if v is not None):
        raise ConstraintSyntaxError(f"Non-finite bound in constraint {text!r}", identifier=text)
    return expr


def _match_constraint(text: str) -> ConstraintExpr:
    match = _RANGE_RE.match(text)
    if match:
        return ConstraintExpr(
            concept=match.group("concept"),
            op="range",
            value=float(match.group("lo")),
            upper=float(match.group("hi")),
            unit=match.group("unit"),
        )
    match = _BOUND_RE.match(text)
    if match:
        return ConstraintExpr(
            concept=match.group("concept"),
            op=match.group("op"),
            value=float(match.group("value")),
            unit=match.group("unit"),
        )
    raise ConstraintSyntaxError(f"Cannot parse constraint {text!r}", identifier=text)


def render_constraint(expr: ConstraintExpr) -> str:
    suffix = f" {expr.unit}" if expr.unit else ""
    if expr.op == "range":
        return f"{expr.value!r} <= {expr.concept} <= {expr.upper!r}{suffix}"
    return f"{expr.concept} {expr.op} {expr.value!r}{suffix}"


def resolve_unit(raw: Optional[str], default: str) -> str:
    if raw is None:
        return default
    return UNIT_ALIASES.get(raw, raw)


def parse_constraint(text: str, ontology: Ontology) -> MetricConstraint:
    """Parse ``text`` into a constraint in its stated unit.

    ``>= v`` → [v, domain_max]; ``<= v`` → [domain_min, v]; ``= v`` → [v, v];
    ``a <= x <= b`` → [a, b].
    """
    expr = parse_constraint_expr(text)
    concept = ontology.concept(expr.concept)
    unit = resolve_unit(expr.unit, concept.canonical_unit)
    # domain bounds expressed in the constraint's unit (raises on dimension mismatch)
    dmin = ontology.convert(concept.domain.min, concept.canonical_unit, unit)
    dmax = ontology.convert(concept.domain.max, concept.canonical_unit, unit)

    if expr.op == ">=":
        lo, hi = expr.value, max(dmax, expr.value)
    elif expr.op == "<=":
        lo, hi = min(dmin, expr.value), expr.value
    elif expr.op == "=":
        lo, hi = expr.value, expr.value
    else:
        lo, hi = expr.value, float(expr.upper if expr.upper is not None else expr.value)
        if lo > hi:
            raise ConstraintSyntaxError(
                f"Lower bound {lo!r} exceeds upper bound {hi!r} in {text!r}", identifier=expr.concept
            )
    return MetricConstraint(concept=expr.concept, lo=lo, hi=hi, unit=unit)


__all__ = [
    "UNIT_ALIASES",
    "ConstraintExpr",
    "parse_constraint_expr",
    "render_constraint",
    "resolve_unit",
    "parse_constraint",
]
