"""Loading and serialisation of catalog and request documents.

Every constraint is canonicalised on load: converted to its concept's canonical
unit and clamped to the concept's domain range. Clamping is recoverable and
surfaces as a warning (logged and kept on the loaded object); everything else
raises a ``QoSError`` subclass naming the offending identifier.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from backend.catalog.constraints import parse_constraint, resolve_unit
from backend.catalog.models import (
    Catalog,
    Component,
    Interface,
    MetricConstraint,
    Origin,
    Polarity,
    QoSProfile,
    Request,
)
from backend.errors import CatalogError, EvaluationError, QoSError
from backend.ontology import Ontology
from backend.schemas import (
    CATALOG_SCHEMA,
    REQUEST_SCHEMA,
    REQUEST_SET_SCHEMA,
    DocumentSource,
    read_document,
    source_label,
    validate_document,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Canonicalisation helpers
# ---------------------------------------------------------------------------


def canonicalize(constraint: MetricConstraint, ontology: Ontology, warnings: List[str], owner: str) -> MetricConstraint:
    """Convert to the canonical unit and clamp into the domain range."""
    concept = ontology.concept(constraint.concept)
    target = concept.canonical_unit
    lo = ontology.convert(constraint.lo, constraint.unit, target)
    hi = ontology.convert(constraint.hi, constraint.unit, target)
    if lo > hi:
        raise CatalogError(f"Empty interval [{lo}, {hi}] for '{constraint.concept}'", constraint.concept, owner)
    domain = concept.domain
    clamped_lo, clamped_hi = domain.clamp(lo), domain.clamp(hi)
    if (clamped_lo, clamped_hi) != (lo, hi):
        message = (
            f"{owner}: interval [{lo!r}, {hi!r}] {target} for '{constraint.concept}' clamped to "
            f"domain [{clamped_lo!r}, {clamped_hi!r}]"
        )
        logger.warning("%s", message)
        warnings.append(message)
    return MetricConstraint(
        concept=constraint.concept,
        lo=clamped_lo,
        hi=clamped_hi,
        unit=target,
        origin=constraint.origin,
    )


def _derive(raw: Mapping[str, Any], ontology: Ontology, warnings: List[str], owner: str) -> MetricConstraint:
    concept_name = str(raw["concept"])
    fn = ontology.function_for(concept_name)
    if fn is None:
        raise CatalogError(f"'{concept_name}' has no metric function; give min/max instead", concept_name, owner)
    values: Dict[str, float] = {}
    for operand, given in raw["operands"].items():
        if operand not in fn.operands:
            raise CatalogError(f"'{operand}' is not an operand of '{concept_name}'", operand, owner)
        canonical = ontology.concept(operand).canonical_unit
        if isinstance(given, Mapping):
            unit = resolve_unit(given.get("unit"), canonical)
            values[operand] = ontology.convert(float(given["value"]), unit, canonical)
        else:
            values[operand] = float(given)
    try:
        value = ontology.eval_function(fn, values, diagnostics=warnings)
    except EvaluationError as exc:
        raise CatalogError(str(exc), concept_name, owner) from exc
    unit = ontology.concept(concept_name).canonical_unit
    return MetricConstraint(concept=concept_name, lo=value, hi=value, unit=unit, origin=Origin.DERIVED)


def _constraint_from_dict(raw: Mapping[str, Any], ontology: Ontology, warnings: List[str], owner: str) -> MetricConstraint:
    try:
        if "expr" in raw:
            constraint = parse_constraint(str(raw["expr"]), ontology)
        elif "operands" in raw:
            constraint = _derive(raw, ontology, warnings, owner)
        else:
            concept = ontology.concept(str(raw["concept"]))
            constraint = MetricConstraint(
                concept=concept.name,
                lo=float(raw["min"]),
                hi=float(raw["max"]),
                unit=resolve_unit(raw.get("unit"), concept.canonical_unit),
            )
        return canonicalize(constraint, ontology, warnings, owner)
    except CatalogError as exc:
        if exc.component is not None:
            raise
        raise type(exc)(str(exc), exc.identifier, owner) from exc
    except QoSError as exc:
        identifier = getattr(exc, "identifier", None)
        raise CatalogError(str(exc), identifier, owner) from exc


def _profile_from_list(
    raw_metrics: Sequence[Mapping[str, Any]], ontology: Ontology, warnings: List[str], owner: str
) -> QoSProfile:
    constraints: List[MetricConstraint] = []
    for raw in raw_metrics:
        constraint = _constraint_from_dict(raw, ontology, warnings, owner)
        for existing in constraints:
            if ontology.equivalent(existing.concept, constraint.concept):
                raise CatalogError(
                    f"duplicate constraints on equivalent concepts '{existing.concept}' and '{constraint.concept}'",
                    constraint.concept,
                    owner,
                )
        constraints.append(constraint)
    return QoSProfile(tuple(constraints))


def _interfaces_from_list(
    raw_list: Sequence[Mapping[str, Any]],
    polarity: Polarity,
    ontology: Ontology,
    warnings: List[str],
    owner: str,
) -> Tuple[Interface, ...]:
    interfaces: List[Interface] = []
    seen = set()
    for raw in raw_list:
        name = str(raw["name"])
        if name in seen:
            raise CatalogError(f"duplicate {polarity.value} interface '{name}'", name, owner)
        seen.add(name)
        profile = _profile_from_list(raw["metrics"], ontology, warnings, f"{owner}.{name}")
        interfaces.append(Interface(name=name, polarity=polarity, profile=profile))
    return tuple(interfaces)


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


def _component_from_dict(raw: Mapping[str, Any], ontology: Ontology, warnings: List[str]) -> Component:
    name = str(raw["name"])
    provided = _interfaces_from_list(raw.get("provided", []), Polarity.PROVIDED, ontology, warnings, name)
    required = _interfaces_from_list(raw.get("required", []), Polarity.REQUIRED, ontology, warnings, name)
    if not provided and not required:
        raise CatalogError("component declares no interfaces", name, name)
    metadata = {str(k): str(v) for k, v in (raw.get("metadata") or {}).items()}
    return Component(name=name, provided=provided, required=required, metadata=metadata)


def load_catalog(source: DocumentSource, ontology: Ontology) -> Catalog:
    document = read_document(source, CATALOG_SCHEMA)
    warnings: List[str] = []
    components: List[Component] = []
    names = set()
    for raw in document["components"]:
        component = _component_from_dict(raw, ontology, warnings)
        if component.name in names:
            raise CatalogError("duplicate component name", component.name, component.name)
        names.add(component.name)
        components.append(component)
    logger.debug("Loaded %d components from %s", len(components), source_label(source))
    return Catalog(components=tuple(components), warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------


def build_request(
    name: str,
    provided: Tuple[Interface, ...],
    required: Tuple[Interface, ...],
    mu: Optional[int] = None,
    rank_threshold: Optional[float] = None,
    warnings: Sequence[str] = (),
) -> Request:
    """Construct a request, applying the μ default and the Request invariants."""
    total = len(provided) + len(required)
    if total == 0:
        raise CatalogError("request declares no interfaces", name, name)
    if mu is None:
        mu = total
    if mu < 1:
        raise CatalogError(f"mu must be positive (got {mu})", "mu", name)
    if mu > total:
        raise CatalogError(f"mu={mu} exceeds the request's {total} interfaces", "mu", name)
    if rank_threshold is not None and rank_threshold < 0:
        raise CatalogError(f"rank_threshold must be nonnegative (got {rank_threshold})", "rank_threshold", name)
    return Request(
        name=name,
        provided=provided,
        required=required,
        mu=int(mu),
        rank_threshold=None if rank_threshold is None else float(rank_threshold),
        warnings=tuple(warnings),
    )


def with_overrides(request: Request, mu: Optional[int] = None, threshold: Optional[float] = None) -> Request:
    """Return ``request`` with CLI overrides applied and re-validated."""
    return build_request(
        request.name,
        request.provided,
        request.required,
        mu=request.mu if mu is None else mu,
        rank_threshold=request.rank_threshold if threshold is None else threshold,
        warnings=request.warnings,
    )


def _request_from_dict(raw: Mapping[str, Any], ontology: Ontology) -> Request:
    name = str(raw["name"])
    warnings: List[str] = []
    provided = _interfaces_from_list(raw.get("provided", []), Polarity.PROVIDED, ontology, warnings, name)
    required = _interfaces_from_list(raw.get("required", []), Polarity.REQUIRED, ontology, warnings, name)
    mu = raw.get("mu")
    return build_request(
        name,
        provided,
        required,
        mu=None if mu is None else int(mu),
        rank_threshold=raw.get("rank_threshold"),
        warnings=warnings,
    )


def load_request(source: DocumentSource, ontology: Ontology) -> Request:
    document = read_document(source, REQUEST_SCHEMA)
    return _request_from_dict(document, ontology)


def load_requests(source: DocumentSource, ontology: Ontology) -> List[Request]:
    """Load a request-set document ``{"requests": [...]}`` or a single request."""
    if isinstance(source, Mapping):
        document: Mapping[str, Any] = source
    else:
        document = read_document(source, {"type": "object"})
    label = source_label(source)
    if "requests" not in document:
        validate_document(document, REQUEST_SCHEMA, source=label)
        return [_request_from_dict(document, ontology)]
    validate_document(document, REQUEST_SET_SCHEMA, source=label)
    requests = [_request_from_dict(raw, ontology) for raw in document["requests"]]
    names = [r.name for r in requests]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise CatalogError("duplicate request name", duplicates[0], duplicates[0])
    return requests


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _constraint_to_doc(constraint: MetricConstraint) -> Dict[str, Any]:
    return {"concept": constraint.concept, "min": constraint.lo, "max": constraint.hi, "unit": constraint.unit}


def _interfaces_to_doc(interfaces: Sequence[Interface]) -> List[Dict[str, Any]]:
    return [
        {"name": item.name, "metrics": [_constraint_to_doc(c) for c in item.profile]}
        for item in interfaces
    ]


def dump_catalog(catalog: Catalog) -> Dict[str, Any]:
    """Render a loaded catalog as a document in canonical units.

    Derived metrics are written as their materialised point interval.
    """
    components = []
    for component in catalog:
        entry: Dict[str, Any] = {
            "name": component.name,
            "provided": _interfaces_to_doc(component.provided),
            "required": _interfaces_to_doc(component.required),
        }
        if component.metadata:
            entry["metadata"] = dict(component.metadata)
        components.append(entry)
    return {"components": components}


def dump_request(request: Request) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "name": request.name,
        "provided": _interfaces_to_doc(request.provided),
        "required": _interfaces_to_doc(request.required),
        "mu": request.mu,
    }
    if request.rank_threshold is not None:
        document["rank_threshold"] = request.rank_threshold
    return document


def save_catalog(catalog: Catalog, path: Path) -> Path:
    path.write_text(json.dumps(dump_catalog(catalog), indent=2, ensure_ascii=False), encoding="utf-8")
    return path


__all__ = [
    "canonicalize",
    "load_catalog",
    "load_request",
    "load_requests",
    "build_request",
    "with_overrides",
    "dump_catalog",
    "dump_request",
    "save_catalog",
]
