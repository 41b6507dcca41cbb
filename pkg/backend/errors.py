"""Exception hierarchy shared by the loaders, matcher, ranker and CLI.

Everything the engine raises on bad input derives from ``QoSError`` so the CLI
can map it to exit status 2 with one ``except`` clause. I/O failures are left as
``OSError`` and map to exit status 3.
"""

from __future__ import annotations

from typing import Optional


class QoSError(Exception):
    """Base class for input errors (parse or semantic)."""


class DocumentError(QoSError):
    """Malformed JSON or a schema violation in one of the input documents."""

    def __init__(self, message: str, source: str = "", pointer: str = "") -> None:
        self.source = source
        self.pointer = pointer
        where = source or "<document>"
        if pointer:
            where = f"{where} at {pointer}"
        super().__init__(f"{where}: {message}")


class OntologyError(QoSError):
    """Semantic violation in the ontology (dangling parent, cycle, bad unit, ...)."""

    def __init__(self, message: str, identifier: Optional[str] = None) -> None:
        self.identifier = identifier
        super().__init__(message)


class UnknownConceptError(OntologyError):
    def __init__(self, identifier: str) -> None:
        super().__init__(f"Unknown concept '{identifier}'", identifier)


class UnknownUnitError(OntologyError):
    def __init__(self, identifier: str) -> None:
        super().__init__(f"Unknown unit '{identifier}'", identifier)


class DimensionMismatchError(OntologyError):
    def __init__(self, from_unit: str, to_unit: str, from_dim: str, to_dim: str) -> None:
        super().__init__(
            f"Cannot convert '{from_unit}' ({from_dim}) to '{to_unit}' ({to_dim}): dimension mismatch",
            from_unit,
        )
        self.to_unit = to_unit


class ExpressionError(QoSError):
    """Metric function expression does not parse."""


class EvaluationError(QoSError):
    """Missing operand or division by zero while evaluating a metric function."""


class CatalogError(QoSError):
    """Semantic violation in a catalog or request document."""

    def __init__(self, message: str, identifier: Optional[str] = None, component: Optional[str] = None) -> None:
        self.identifier = identifier
        self.component = component
        if component:
            message = f"{component}: {message}"
        super().__init__(message)


class ConstraintSyntaxError(CatalogError):
    """Constraint expression does not match the constraint grammar."""


class EvaluatorError(QoSError):
    """Relevance judgments do not cover the evaluated requests or catalog."""


__all__ = [
    "QoSError",
    "DocumentError",
    "OntologyError",
    "UnknownConceptError",
    "UnknownUnitError",
    "DimensionMismatchError",
    "ExpressionError",
    "EvaluationError",
    "CatalogError",
    "ConstraintSyntaxError",
    "EvaluatorError",
]
