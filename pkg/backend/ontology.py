"""QoS ontology: metric concepts, subsumption, units and metric functions.

Public API
----------
ontology = load_ontology(<path_to>/ontology.json)

ontology.subsumes("MTTF", "Reliability")      # → True   (MTTF ⊑ Reliability)
ontology.equivalent("FrameRate", "FrameOutput")
ontology.convert(1, "s", "ms")                # → 1000.0
ontology.eval_function(fn, {"Uptime": 999, "Downtime": 1})

Design notes
------------
• Subsumption is reachability over the parent forest after equivalence classes
  are merged; no description-logic reasoner is involved.
• Conversions are multiplicative only. Every unit of a dimension must be
  connected to the dimension's reference unit (the first unit declared for it),
  and every declared factor must agree with the composed path factor.
• The object is immutable after ``load_ontology`` and safe to share across
  threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from backend.errors import (
    DimensionMismatchError,
    EvaluationError,
    ExpressionError,
    OntologyError,
    UnknownConceptError,
    UnknownUnitError,
)
from backend.expressions import Node, compile_expression, evaluate
from backend.schemas import ONTOLOGY_SCHEMA, DocumentSource, read_document

logger = logging.getLogger(__name__)

ROUND_TRIP_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


class ConceptKind(str, Enum):
    SERVICE = "service"
    RESOURCE = "resource"


class Direction(str, Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class DomainRange:
    """Closed interval [min, max] of admissible values in a concept's canonical unit."""

    min: float
    max: float

    @property
    def degenerate(self) -> bool:
        return self.min == self.max

    def contains(self, value: float) -> bool:
        return self.min <= value <= self.max

    def clamp(self, value: float) -> float:
        if value < self.min:
            return self.min
        if value > self.max:
            return self.max
        return value


@dataclass(frozen=True)
class MetricConcept:
    name: str
    kind: ConceptKind
    direction: Direction
    canonical_unit: str
    domain: DomainRange
    parent: Optional[str] = None


@dataclass(frozen=True)
class Unit:
    name: str
    dimension: str


@dataclass(frozen=True)
class Conversion:
    from_unit: str
    to_unit: str
    factor: float  # 1 from_unit == factor to_unit


@dataclass(frozen=True)
class MetricFunction:
    target_concept: str
    operands: Tuple[str, ...]
    expression: str
    tree: Node


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------


class UnitTable:
    """Units grouped by dimension with a multiplicative conversion graph."""

    def __init__(self, units: Sequence[Unit], conversions: Sequence[Conversion]) -> None:
        self.units: Mapping[str, Unit] = MappingProxyType({u.name: u for u in units})
        self.conversions: Tuple[Conversion, ...] = tuple(conversions)
        self._scale: Dict[str, float] = {}
        self._validate_and_index(units)

    def _validate_and_index(self, units: Sequence[Unit]) -> None:
        seen: Dict[str, Unit] = {}
        references: Dict[str, str] = {}
        for unit in units:
            if unit.name in seen:
                raise OntologyError(f"Duplicate unit '{unit.name}'", unit.name)
            seen[unit.name] = unit
            references.setdefault(unit.dimension, unit.name)

        graph = nx.DiGraph()
        graph.add_nodes_from(seen)
        for conv in self.conversions:
            for name in (conv.from_unit, conv.to_unit):
                if name not in seen:
                    raise UnknownUnitError(name)
            if not conv.factor > 0 or math.isinf(conv.factor):
                raise OntologyError(
                    f"Conversion {conv.from_unit}→{conv.to_unit} has non-positive factor {conv.factor}",
                    conv.from_unit,
                )
            from_dim = seen[conv.from_unit].dimension
            to_dim = seen[conv.to_unit].dimension
            if from_dim != to_dim:
                raise DimensionMismatchError(conv.from_unit, conv.to_unit, from_dim, to_dim)
            graph.add_edge(conv.from_unit, conv.to_unit, factor=conv.factor)
            if not graph.has_edge(conv.to_unit, conv.from_unit):
                graph.add_edge(conv.to_unit, conv.from_unit, factor=1.0 / conv.factor)

        # scale[u] = how many u make one reference unit of u's dimension
        for dimension, reference in references.items():
            self._scale[reference] = 1.0
            for parent, child in nx.bfs_edges(graph, reference):
                self._scale[child] = self._scale[parent] * graph.edges[parent, child]["factor"]
            members = sorted(u.name for u in units if u.dimension == dimension)
            orphans = [name for name in members if name not in self._scale]
            if orphans:
                raise OntologyError(
                    f"Unit '{orphans[0]}' is not connected to reference unit '{reference}' of dimension '{dimension}'",
                    orphans[0],
                )

        # every declared factor must agree with the composed (path) factor
        for conv in self.conversions:
            composed = self._scale[conv.to_unit] / self._scale[conv.from_unit]
            if not math.isclose(composed, conv.factor, rel_tol=ROUND_TRIP_TOLERANCE):
                raise OntologyError(
                    f"Conversion {conv.from_unit}→{conv.to_unit} factor {conv.factor!r} breaks round-trip "
                    f"consistency (composed factor {composed!r})",
                    conv.from_unit,
                )

    def __contains__(self, name: object) -> bool:
        return name in self.units

    def dimension(self, unit: str) -> str:
        try:
            return self.units[unit].dimension
        except KeyError:
            raise UnknownUnitError(unit) from None

    def factor(self, from_unit: str, to_unit: str) -> float:
        from_dim = self.dimension(from_unit)
        to_dim = self.dimension(to_unit)
        if from_dim != to_dim:
            raise DimensionMismatchError(from_unit, to_unit, from_dim, to_dim)
        if from_unit == to_unit:
            return 1.0
        return self._scale[to_unit] / self._scale[from_unit]


# ---------------------------------------------------------------------------
# Ontology
# ---------------------------------------------------------------------------


class Ontology:
    """Immutable knowledge base; construct through ``load_ontology``."""

    def __init__(
        self,
        concepts: Sequence[MetricConcept],
        equivalences: Sequence[Sequence[str]],
        units: UnitTable,
        functions: Sequence[MetricFunction] = (),
    ) -> None:
        self.units = units
        self.concepts: Mapping[str, MetricConcept] = MappingProxyType(self._index_concepts(concepts))
        self._representative: Dict[str, str] = {}
        self._members: Dict[str, FrozenSet[str]] = {}
        self._merge_equivalences(equivalences)
        self._graph = self._build_class_graph()
        self._ancestors: Dict[str, FrozenSet[str]] = {
            rep: frozenset(nx.descendants(self._graph, rep)) | {rep} for rep in self._graph.nodes
        }
        self._depth: Dict[str, int] = self._compute_depths()
        self.functions: Mapping[str, MetricFunction] = MappingProxyType(self._index_functions(functions))

    # -----------------------
    # Construction helpers
    # -----------------------

    def _index_concepts(self, concepts: Sequence[MetricConcept]) -> Dict[str, MetricConcept]:
        index: Dict[str, MetricConcept] = {}
        for concept in concepts:
            if concept.name in index:
                raise OntologyError(f"Duplicate concept '{concept.name}'", concept.name)
            if concept.canonical_unit not in self.units:
                raise OntologyError(
                    f"Concept '{concept.name}' uses unknown unit '{concept.canonical_unit}'", concept.name
                )
            if concept.domain.min > concept.domain.max:
                raise OntologyError(
                    f"Concept '{concept.name}' has empty domain [{concept.domain.min}, {concept.domain.max}]",
                    concept.name,
                )
            index[concept.name] = concept
        for concept in index.values():
            if concept.parent is None:
                continue
            if concept.parent == concept.name:
                raise OntologyError(f"Concept '{concept.name}' is its own parent (cycle)", concept.name)
            if concept.parent not in index:
                raise OntologyError(
                    f"Concept '{concept.name}' has unknown parent '{concept.parent}'", concept.name
                )
            self._check_same_dimension(concept, index[concept.parent], "parent")
        return index

    def _check_same_dimension(self, concept: MetricConcept, other: MetricConcept, relation: str) -> None:
        mine = self.units.dimension(concept.canonical_unit)
        theirs = self.units.dimension(other.canonical_unit)
        if mine != theirs:
            raise OntologyError(
                f"Concept '{concept.name}' ({mine}) and its {relation} '{other.name}' ({theirs}) "
                "measure different dimensions",
                concept.name,
            )

    def _merge_equivalences(self, equivalences: Sequence[Sequence[str]]) -> None:
        owner: Dict[str, int] = {}
        for index, members in enumerate(equivalences):
            names = list(members)
            if len(set(names)) < 2:
                raise OntologyError(f"Equivalence {names} needs at least two distinct concepts")
            for name in names:
                if name not in self.concepts:
                    raise UnknownConceptError(name)
                if name in owner and owner[name] != index:
                    raise OntologyError(f"Concept '{name}' appears in overlapping equivalence classes", name)
                owner[name] = index
            first = self.concepts[names[0]]
            for name in names[1:]:
                self._check_same_dimension(self.concepts[name], first, "equivalent")
            rep = min(names)
            group = frozenset(names)
            for name in names:
                self._representative[name] = rep
            self._members[rep] = group
        for name in self.concepts:
            if name not in self._representative:
                self._representative[name] = name
                self._members[name] = frozenset({name})

    def _build_class_graph(self) -> nx.DiGraph:
        # edges point child class → parent class
        graph = nx.DiGraph()
        graph.add_nodes_from(set(self._representative.values()))
        for concept in self.concepts.values():
            if concept.parent is None:
                continue
            child = self._representative[concept.name]
            parent = self._representative[concept.parent]
            if child == parent:
                raise OntologyError(
                    f"Concept '{concept.name}' is equivalent to its parent '{concept.parent}' (cycle)",
                    concept.name,
                )
            graph.add_edge(child, parent)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return graph
        raise OntologyError(f"Subsumption cycle through '{cycle[0][0]}'", cycle[0][0])

    def _compute_depths(self) -> Dict[str, int]:
        depth: Dict[str, int] = {}
        # parents come after children in topological order; walk it reversed
        for rep in reversed(list(nx.topological_sort(self._graph))):
            parents = list(self._graph.successors(rep))
            depth[rep] = 1 + max(depth[p] for p in parents) if parents else 0
        return depth

    def _index_functions(self, functions: Sequence[MetricFunction]) -> Dict[str, MetricFunction]:
        index: Dict[str, MetricFunction] = {}
        for fn in functions:
            self._require(fn.target_concept)
            for operand in fn.operands:
                self._require(operand)
            if fn.target_concept in fn.operands:
                raise OntologyError(
                    f"Function for '{fn.target_concept}' uses its own target as an operand", fn.target_concept
                )
            if fn.target_concept in index:
                raise OntologyError(f"Concept '{fn.target_concept}' has more than one function", fn.target_concept)
            index[fn.target_concept] = fn
        return index

    # -----------------------
    # Lookups
    # -----------------------

    def _require(self, name: str) -> MetricConcept:
        try:
            return self.concepts[name]
        except KeyError:
            raise UnknownConceptError(name) from None

    def concept(self, name: str) -> MetricConcept:
        return self._require(name)

    def __contains__(self, name: object) -> bool:
        return name in self.concepts

    def representative(self, name: str) -> str:
        self._require(name)
        return self._representative[name]

    def depth(self, name: str) -> int:
        """Distance from the concept's class to the farthest root above it."""
        return self._depth[self.representative(name)]

    def function_for(self, name: str) -> Optional[MetricFunction]:
        self._require(name)
        return self.functions.get(name)

    # -----------------------
    # Reasoning primitives
    # -----------------------

    def subsumes(self, a: str, b: str) -> bool:
        """Decide a ⊑ b (reflexive, transitive; equivalents subsume each other)."""
        rep_a = self.representative(a)
        rep_b = self.representative(b)
        return rep_b in self._ancestors[rep_a]

    def equivalent(self, a: str, b: str) -> bool:
        return self.representative(a) == self.representative(b)

    def chain(self, a: str, b: str) -> Optional[List[str]]:
        """Concepts from ``a`` up to ``b`` along parent links, or None if a ⋢ b."""
        if not self.subsumes(a, b):
            return None
        rep_a = self.representative(a)
        rep_b = self.representative(b)
        path = nx.shortest_path(self._graph, rep_a, rep_b)
        names = list(path)
        names[0] = a
        if len(names) == 1:
            return [a] if a == b else [a, b]
        names[-1] = b
        return names

    def convert(self, value: float, from_unit: str, to_unit: str) -> float:
        if from_unit == to_unit:
            self.units.dimension(from_unit)
            return value
        return value * self.units.factor(from_unit, to_unit)

    def eval_function(
        self,
        fn: MetricFunction,
        operand_values: Mapping[str, float],
        diagnostics: Optional[List[str]] = None,
    ) -> float:
        """Evaluate ``fn`` over operand values given in canonical units.

        A result outside the target's domain range is reported (logged and
        appended to ``diagnostics``) and still returned.
        """
        missing = [name for name in fn.operands if name not in operand_values]
        if missing:
            raise EvaluationError(f"Function for '{fn.target_concept}' is missing operand '{missing[0]}'")
        value = evaluate(fn.tree, operand_values)
        if not math.isfinite(value):
            raise EvaluationError(f"Function for '{fn.target_concept}' produced a non-finite value")
        domain = self._require(fn.target_concept).domain
        if not domain.contains(value):
            message = (
                f"Derived value {value!r} for '{fn.target_concept}' is outside its domain "
                f"[{domain.min}, {domain.max}]"
            )
            logger.warning("%s", message)
            if diagnostics is not None:
                diagnostics.append(message)
        return value

    def summary(self) -> Dict[str, int]:
        return {
            "concepts": len(self.concepts),
            "equivalence_classes": sum(1 for m in self._members.values() if len(m) > 1),
            "units": len(self.units.units),
            "conversions": len(self.units.conversions),
            "functions": len(self.functions),
        }


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _parse_enum(enum_cls: Any, raw: str, field: str, concept: str) -> Any:
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(member.value for member in enum_cls)
        raise OntologyError(
            f"Concept '{concept}' has invalid {field} '{raw}' (expected one of: {allowed})", concept
        ) from None


def _concept_from_dict(raw: Mapping[str, Any]) -> MetricConcept:
    name = str(raw["name"])
    domain = raw["domain"]
    return MetricConcept(
        name=name,
        kind=_parse_enum(ConceptKind, raw["kind"], "kind", name),
        direction=_parse_enum(Direction, raw["direction"], "direction", name),
        canonical_unit=str(raw["canonical_unit"]),
        domain=DomainRange(float(domain["min"]), float(domain["max"])),
        parent=raw.get("parent"),
    )


def _function_from_dict(raw: Mapping[str, Any]) -> MetricFunction:
    operands = tuple(str(o) for o in raw["operands"])
    target = str(raw["target"])
    try:
        tree = compile_expression(str(raw["expr"]), operands)
    except ExpressionError as exc:
        raise OntologyError(f"Function for '{target}': {exc}", target) from exc
    return MetricFunction(target_concept=target, operands=operands, expression=str(raw["expr"]), tree=tree)


def load_ontology(source: DocumentSource) -> Ontology:
    """Load and validate an ontology document (path or parsed mapping)."""
    document = read_document(source, ONTOLOGY_SCHEMA)
    units = UnitTable(
        [Unit(str(u["name"]), str(u["dimension"])) for u in document.get("units", [])],
        [Conversion(str(c["from"]), str(c["to"]), float(c["factor"])) for c in document.get("conversions", [])],
    )
    ontology = Ontology(
        concepts=[_concept_from_dict(c) for c in document.get("concepts", [])],
        equivalences=[list(e) for e in document.get("equivalences", [])],
        units=units,
        functions=[_function_from_dict(f) for f in document.get("functions", [])],
    )
    logger.debug("Loaded ontology: %s", ontology.summary())
    return ontology


__all__ = [
    "ConceptKind",
    "Direction",
    "DomainRange",
    "MetricConcept",
    "Unit",
    "Conversion",
    "MetricFunction",
    "UnitTable",
    "Ontology",
    "load_ontology",
]
