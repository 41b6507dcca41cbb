"""Document loading and JSON-schema validation for every input format.

All documents are JSON, UTF-8 (a leading BOM is tolerated). Unknown keys are
rejected everywhere (``additionalProperties: false``); field names are exact and
case-sensitive.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from jsonschema import Draft202012Validator

from backend.errors import DocumentError

DocumentSource = Union[str, Path, Mapping[str, Any]]


# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------

_NAME = {"type": "string", "minLength": 1}
_NUMBER = {"type": "number"}

ONTOLOGY_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["concepts", "units"],
    "properties": {
        "concepts": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "kind", "direction", "canonical_unit", "domain"],
                "properties": {
                    "name": _NAME,
                    "parent": _NAME,
                    "kind": {"type": "string"},
                    "direction": {"type": "string"},
                    "canonical_unit": _NAME,
                    "domain": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["min", "max"],
                        "properties": {"min": _NUMBER, "max": _NUMBER},
                    },
                },
            },
        },
        "equivalences": {
            "type": "array",
            "items": {"type": "array", "items": _NAME, "minItems": 2},
        },
        "units": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "dimension"],
                "properties": {"name": _NAME, "dimension": _NAME},
            },
        },
        "conversions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to", "factor"],
                "properties": {"from": _NAME, "to": _NAME, "factor": _NUMBER},
            },
        },
        "functions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["target", "operands", "expr"],
                "properties": {
                    "target": _NAME,
                    "operands": {"type": "array", "items": _NAME},
                    "expr": {"type": "string"},
                },
            },
        },
    },
}

_OPERAND_VALUE = {
    "oneOf": [
        _NUMBER,
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["value"],
            "properties": {"value": _NUMBER, "unit": _NAME},
        },
    ]
}

_CONSTRAINT = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["expr"],
            "properties": {"expr": {"type": "string"}},
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["concept", "min", "max"],
            "properties": {"concept": _NAME, "min": _NUMBER, "max": _NUMBER, "unit": _NAME},
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["concept", "operands"],
            "properties": {
                "concept": _NAME,
                "operands": {"type": "object", "additionalProperties": _OPERAND_VALUE},
            },
        },
    ]
}

_INTERFACE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "metrics"],
    "properties": {
        "name": _NAME,
        "metrics": {"type": "array", "items": _CONSTRAINT, "minItems": 1},
    },
}

_COMPONENT = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "provided", "required"],
    "properties": {
        "name": _NAME,
        "metadata": {"type": "object", "additionalProperties": {"type": "string"}},
        "provided": {"type": "array", "items": _INTERFACE},
        "required": {"type": "array", "items": _INTERFACE},
    },
}

CATALOG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["components"],
    "properties": {"components": {"type": "array", "items": _COMPONENT}},
}

REQUEST_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "provided", "required"],
    "properties": {
        "name": _NAME,
        "provided": {"type": "array", "items": _INTERFACE},
        "required": {"type": "array", "items": _INTERFACE},
        "mu": {"type": "integer"},
        "rank_threshold": _NUMBER,
    },
}

REQUEST_SET_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["requests"],
    "properties": {"requests": {"type": "array", "items": REQUEST_SCHEMA}},
}

JUDGMENTS_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": {"type": "array", "items": _NAME, "uniqueItems": True},
}


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _read_text(path: Path) -> str:
    raw = path.read_bytes()
    # Strip UTF BOM if present
    if raw[:3] == b"\xef\xbb\xbf":
        raw = raw[3:]
    return raw.decode("utf-8")


def _pointer(path: Any) -> str:
    parts = [str(p) for p in path]
    return "/" + "/".join(parts) if parts else "/"


def validate_document(document: Any, schema: Mapping[str, Any], source: str = "") -> None:
    """Raise ``DocumentError`` for the first schema violation (deterministic order)."""
    validator = Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda e: (list(map(str, e.path)), e.message))
    if errors:
        first = errors[0]
        raise DocumentError(first.message, source=source, pointer=_pointer(first.path))


def _non_finite_path(value: Any, path: tuple = ()) -> Optional[tuple]:
    if isinstance(value, float) and not math.isfinite(value):
        return path
    if isinstance(value, Mapping):
        items = value.items()
    elif isinstance(value, (list, tuple)):
        items = enumerate(value)
    else:
        return None
    for key, item in items:
        found = _non_finite_path(item, path + (key,))
        if found is not None:
            return found
    return None


def read_document(source: DocumentSource, schema: Mapping[str, Any]) -> Dict[str, Any]:
    """Return a schema-valid document from a path or an already-parsed mapping.

    ``OSError`` from reading the file propagates unchanged.
    """
    if isinstance(source, Mapping):
        document: Any = dict(source)
        label = "<memory>"
    else:
        path = Path(source)
        label = str(path)
        try:
            document = json.loads(_read_text(path))
        except json.JSONDecodeError as exc:
            raise DocumentError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", source=label) from exc
        except UnicodeDecodeError as exc:
            raise DocumentError(f"not valid UTF-8: {exc}", source=label) from exc
    bad = _non_finite_path(document)
    if bad is not None:
        raise DocumentError("NaN and infinite numbers are not allowed", source=label, pointer=_pointer(bad))
    validate_document(document, schema, source=label)
    return document


def source_label(source: DocumentSource) -> str:
    return "<memory>" if isinstance(source, Mapping) else str(source)


__all__ = [
    "ONTOLOGY_SCHEMA",
    "CATALOG_SCHEMA",
    "REQUEST_SCHEMA",
    "REQUEST_SET_SCHEMA",
    "JUDGMENTS_SCHEMA",
    "DocumentSource",
    "read_document",
    "validate_document",
    "source_label",
]
