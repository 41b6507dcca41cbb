"""QoS matching: per-interface match levels and μ-thresholded admission.

Matching is concept-level only. Interval values are ignored here and enter
only in ``backend.ranker``.

Public API
----------
match_profiles(ontology, request_profile, candidate_profile)  → ProfileMatch
match_component(ontology, request, component)                 → MatchOutcome | None
match_all(ontology, request, catalog, workers=1)              → [MatchOutcome]
relax(ontology, request, catalog)                             → (mu_used, [MatchOutcome])
explain_component(ontology, request, component)               → [InterfaceTrace]
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import networkx as nx

from backend.catalog.models import Catalog, Component, Interface, MetricConstraint, Polarity, QoSProfile, Request
from backend.catalog.storage import with_overrides
from backend.ontology import Ontology

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


class MatchLevel(str, Enum):
    PLUGIN = "plugin"
    SUBSUME = "subsume"
    EXACT = "exact"
    FAIL = "fail"

    @property
    def swapped(self) -> "MatchLevel":
        if self is MatchLevel.PLUGIN:
            return MatchLevel.SUBSUME
        if self is MatchLevel.SUBSUME:
            return MatchLevel.PLUGIN
        return self


class Relation(str, Enum):
    EQUIVALENT = "equivalent"
    CANDIDATE_SUBSUMED_BY_REQUEST = "candidate_subsumed_by_request"
    REQUEST_SUBSUMED_BY_CANDIDATE = "request_subsumed_by_candidate"


@dataclass(frozen=True)
class MetricPairing:
    request_constraint: MetricConstraint
    candidate_constraint: MetricConstraint
    relation: Relation


def interface_weight(level: MatchLevel, polarity: Polarity) -> Optional[int]:
    """Vector entry for a match level at a polarity; None when it counts as a failure."""
    if level is MatchLevel.EXACT:
        return 1
    if level is MatchLevel.PLUGIN and polarity is Polarity.PROVIDED:
        return 2
    if level is MatchLevel.SUBSUME and polarity is Polarity.REQUIRED:
        return 2
    return None


@dataclass(frozen=True)
class InterfaceMatch:
    interface_name: str
    polarity: Polarity
    level: MatchLevel
    weight: int
    pairings: Tuple[MetricPairing, ...]

    def __post_init__(self) -> None:
        expected = interface_weight(self.level, self.polarity)
        if expected is None or expected != self.weight:
            raise ValueError(
                f"Interface '{self.interface_name}': weight {self.weight} is inconsistent with "
                f"{self.level.value} on a {self.polarity.value} interface"
            )


@dataclass(frozen=True)
class MatchOutcome:
    component_name: str
    interface_matches: Tuple[InterfaceMatch, ...]

    @property
    def matched_count(self) -> int:
        return len(self.interface_matches)

    @property
    def weights(self) -> List[int]:
        return [m.weight for m in self.interface_matches]

    @property
    def levels(self) -> List[MatchLevel]:
        return [m.level for m in self.interface_matches]


class ProfileMatch(NamedTuple):
    level: MatchLevel
    pairings: Tuple[MetricPairing, ...]


@dataclass(frozen=True)
class InterfaceTrace:
    """Rule evaluation for one request interface, used by ``explain``."""

    interface_name: str
    polarity: Polarity
    level: MatchLevel
    weight: Optional[int]
    pairings: Tuple[MetricPairing, ...]
    plugin: bool
    subsume: bool
    exact: bool
    reason: str = ""

    @property
    def matched(self) -> bool:
        return self.weight is not None


# ---------------------------------------------------------------------------
# Rule conditions
# ---------------------------------------------------------------------------


def exact_condition(ontology: Ontology, request: Sequence[str], candidate: Sequence[str]) -> bool:
    return all(any(ontology.equivalent(r, c) for c in candidate) for r in request) and all(
        any(ontology.equivalent(c, r) for r in request) for c in candidate
    )


def plugin_condition(ontology: Ontology, request: Sequence[str], candidate: Sequence[str]) -> bool:
    """Every request concept has a candidate concept subsumed by it."""
    return all(any(ontology.subsumes(c, r) for c in candidate) for r in request)


def subsume_condition(ontology: Ontology, request: Sequence[str], candidate: Sequence[str]) -> bool:
    """Every candidate concept has a request concept subsumed by it."""
    return all(any(ontology.subsumes(r, c) for r in request) for c in candidate)


# ---------------------------------------------------------------------------
# Witness pairing
# ---------------------------------------------------------------------------


def _relation(ontology: Ontology, request_concept: str, candidate_concept: str) -> Relation:
    if ontology.equivalent(request_concept, candidate_concept):
        return Relation.EQUIVALENT
    if ontology.subsumes(candidate_concept, request_concept):
        return Relation.CANDIDATE_SUBSUMED_BY_REQUEST
    return Relation.REQUEST_SUBSUMED_BY_CANDIDATE


def _pairing_size(graph: nx.Graph) -> int:
    if graph.number_of_edges() == 0:
        return 0
    drivers = [node for node in graph if node[0] == "driver"]
    return len(nx.bipartite.hopcroft_karp_matching(graph, top_nodes=drivers)) // 2


def _pair(
    ontology: Ontology,
    drivers: Sequence[MetricConstraint],
    pool: Sequence[MetricConstraint],
    accepts: Callable[[str, str], bool],
    request_drives: bool,
) -> Tuple[MetricPairing, ...]:
    # each constraint on either side is used at most once and the pairing stays maximum;
    # within that, drivers take the most specific witness in order, ties by concept name
    graph = nx.Graph()
    graph.add_nodes_from((("driver", i) for i in range(len(drivers))), bipartite=0)
    graph.add_nodes_from((("witness", j) for j in range(len(pool))), bipartite=1)
    graph.add_edges_from(
        (("driver", i), ("witness", j))
        for i, driver in enumerate(drivers)
        for j, item in enumerate(pool)
        if accepts(driver.concept, item.concept)
    )
    remaining = _pairing_size(graph)
    pairings: List[MetricPairing] = []
    for i, driver in enumerate(drivers):
        node = ("driver", i)
        options = sorted(
            graph.neighbors(node),
            key=lambda option: (-ontology.depth(pool[option[1]].concept), pool[option[1]].concept),
        )
        chosen = None
        for option in options:
            rest = graph.subgraph(n for n in graph if n not in (node, option))
            if 1 + _pairing_size(rest) == remaining:
                chosen = option
                break
        if chosen is None:
            graph.remove_node(node)
            continue
        graph.remove_nodes_from((node, chosen))
        remaining -= 1
        witness = pool[chosen[1]]
        req, cand = (driver, witness) if request_drives else (witness, driver)
        pairings.append(MetricPairing(req, cand, _relation(ontology, req.concept, cand.concept)))
    return tuple(pairings)


def _pairings_for(
    ontology: Ontology, level: MatchLevel, request: QoSProfile, candidate: QoSProfile
) -> Tuple[MetricPairing, ...]:
    constraints_req = list(request)
    constraints_cand = list(candidate)
    if level is MatchLevel.EXACT:
        return _pair(ontology, constraints_req, constraints_cand, ontology.equivalent, True)
    if level is MatchLevel.PLUGIN:
        return _pair(ontology, constraints_req, constraints_cand, lambda r, c: ontology.subsumes(c, r), True)
    if level is MatchLevel.SUBSUME:
        return _pair(ontology, constraints_cand, constraints_req, lambda c, r: ontology.subsumes(r, c), False)
    return ()


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------


def match_profiles(
    ontology: Ontology,
    request: QoSProfile,
    candidate: QoSProfile,
    prefer: MatchLevel = MatchLevel.PLUGIN,
) -> ProfileMatch:
    """Match two profiles: Exact first, then Plugin or Subsume, else Fail.

    When both the Plugin and the Subsume condition hold without an Exact match,
    ``prefer`` decides which level is reported.
    """
    req, cand = request.concepts, candidate.concepts
    if exact_condition(ontology, req, cand):
        level = MatchLevel.EXACT
    else:
        plugin = plugin_condition(ontology, req, cand)
        subsume = subsume_condition(ontology, req, cand)
        if plugin and subsume:
            level = prefer
        elif plugin:
            level = MatchLevel.PLUGIN
        elif subsume:
            level = MatchLevel.SUBSUME
        else:
            return ProfileMatch(MatchLevel.FAIL, ())
    return ProfileMatch(level, _pairings_for(ontology, level, request, candidate))


def _preferred_level(polarity: Polarity) -> MatchLevel:
    return MatchLevel.SUBSUME if polarity is Polarity.REQUIRED else MatchLevel.PLUGIN


def _counterpart(component: Component, interface: Interface) -> Optional[Interface]:
    return component.interface(interface.name, interface.polarity)


def match_component(ontology: Ontology, request: Request, component: Component) -> Optional[MatchOutcome]:
    matches: List[InterfaceMatch] = []
    for wanted in request.interfaces:
        offered = _counterpart(component, wanted)
        if offered is None:
            continue
        result = match_profiles(ontology, wanted.profile, offered.profile, _preferred_level(wanted.polarity))
        weight = interface_weight(result.level, wanted.polarity)
        logger.debug(
            "%s/%s (%s): %s weight=%s", component.name, wanted.name, wanted.polarity.value, result.level.value, weight
        )
        if weight is None:
            continue
        matches.append(InterfaceMatch(wanted.name, wanted.polarity, result.level, weight, result.pairings))
    if len(matches) < request.mu:
        return None
    return MatchOutcome(component.name, tuple(matches))


def match_all(ontology: Ontology, request: Request, catalog: Catalog, workers: int = 1) -> List[MatchOutcome]:
    """Σ: admitted outcomes sorted by component name."""
    components = list(catalog)
    if workers > 1 and len(components) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: match_component(ontology, request, c), components))
    else:
        results = [match_component(ontology, request, c) for c in components]
    admitted = sorted((r for r in results if r is not None), key=lambda r: r.component_name)
    logger.debug("%s: %d of %d components admitted at mu=%d", request.name, len(admitted), len(components), request.mu)
    return admitted


def relax(
    ontology: Ontology, request: Request, catalog: Catalog, workers: int = 1
) -> Tuple[int, List[MatchOutcome]]:
    """Lower μ one step at a time until Σ is non-empty; returns the μ used."""
    for mu in range(request.mu, 0, -1):
        outcomes = match_all(ontology, with_overrides(request, mu=mu), catalog, workers)
        if outcomes:
            if mu < request.mu:
                logger.info("%s relaxed from mu=%d to mu=%d", request.name, request.mu, mu)
            return mu, outcomes
    return 1, []


# ---------------------------------------------------------------------------
# Explanation
# ---------------------------------------------------------------------------


def failure_reason(ontology: Ontology, request: QoSProfile, candidate: QoSProfile) -> str:
    """Name the first request and candidate concepts that block every rule."""
    req, cand = request.concepts, candidate.concepts
    lonely_req = [r for r in req if not any(ontology.subsumes(c, r) for c in cand)]
    lonely_cand = [c for c in cand if not any(ontology.subsumes(r, c) for r in req)]
    if lonely_req and lonely_cand:
        return f"no subsumption between {lonely_cand[0]} and {lonely_req[0]}"
    return ""


def explain_component(ontology: Ontology, request: Request, component: Component) -> List[InterfaceTrace]:
    traces: List[InterfaceTrace] = []
    for wanted in request.interfaces:
        offered = _counterpart(component, wanted)
        if offered is None:
            traces.append(
                InterfaceTrace(
                    wanted.name,
                    wanted.polarity,
                    MatchLevel.FAIL,
                    None,
                    (),
                    plugin=False,
                    subsume=False,
                    exact=False,
                    reason=f"no {wanted.polarity.value} interface named {wanted.name}",
                )
            )
            continue
        req, cand = wanted.profile.concepts, offered.profile.concepts
        result = match_profiles(ontology, wanted.profile, offered.profile, _preferred_level(wanted.polarity))
        weight = interface_weight(result.level, wanted.polarity)
        if result.level is MatchLevel.FAIL:
            reason = failure_reason(ontology, wanted.profile, offered.profile)
        elif weight is None:
            reason = f"{result.level.value} match does not count on a {wanted.polarity.value} interface"
        else:
            reason = ""
        traces.append(
            InterfaceTrace(
                wanted.name,
                wanted.polarity,
                result.level,
                weight,
                result.pairings,
                plugin=plugin_condition(ontology, req, cand),
                subsume=subsume_condition(ontology, req, cand),
                exact=exact_condition(ontology, req, cand),
                reason=reason,
            )
        )
    return traces


__all__ = [
    "MatchLevel",
    "Relation",
    "MetricPairing",
    "InterfaceMatch",
    "MatchOutcome",
    "ProfileMatch",
    "InterfaceTrace",
    "interface_weight",
    "exact_condition",
    "plugin_condition",
    "subsume_condition",
    "match_profiles",
    "match_component",
    "match_all",
    "relax",
    "failure_reason",
    "explain_component",
]
