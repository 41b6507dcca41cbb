"""Ranking of matched candidates by the CRank dissimilarity measure.

Each pairing recorded by the matcher is compared in the request concept's
frame: both intervals are converted to its canonical unit and min-max
normalised over its domain range. δ is half the sum of the endpoint distances;
an interface contributes its δ sum divided by its match weight.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from backend.catalog.models import MetricConstraint, Request
from backend.matcher import InterfaceMatch, MatchOutcome, MetricPairing
from backend.ontology import DomainRange, Ontology

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizedInterval:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise ValueError(f"Not a normalised interval: [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class DeltaTerm:
    pairing: MetricPairing
    request_interval: NormalizedInterval
    candidate_interval: NormalizedInterval
    delta: float


@dataclass(frozen=True)
class InterfaceContribution:
    interface_name: str
    weight: int
    terms: Tuple[DeltaTerm, ...]

    @property
    def delta_sum(self) -> float:
        return sum(term.delta for term in self.terms)

    @property
    def contribution(self) -> float:
        return self.delta_sum / self.weight


@dataclass(frozen=True)
class RankedCandidate:
    component_name: str
    crank: float
    outcome: MatchOutcome
    contributions: Tuple[InterfaceContribution, ...]


# ---------------------------------------------------------------------------
# Normalisation and distance
# ---------------------------------------------------------------------------


def normalize(value: float, domain: DomainRange, diagnostics: Optional[List[str]] = None) -> float:
    """Min-max normalise ``value`` over ``domain``; a degenerate range maps to 0."""
    if not domain.contains(value):
        message = f"Value {value!r} outside range [{domain.min}, {domain.max}] clamped before normalisation"
        logger.warning("%s", message)
        if diagnostics is not None:
            diagnostics.append(message)
        value = domain.clamp(value)
    if domain.degenerate:
        return 0.0
    return (value - domain.min) / (domain.max - domain.min)


def normalize_interval(
    constraint: MetricConstraint, domain: DomainRange, diagnostics: Optional[List[str]] = None
) -> NormalizedInterval:
    return NormalizedInterval(normalize(constraint.lo, domain, diagnostics), normalize(constraint.hi, domain, diagnostics))


def delta(a: NormalizedInterval, b: NormalizedInterval) -> float:
    return (abs(a.hi - b.hi) + abs(a.lo - b.lo)) / 2.0


def _in_unit(ontology: Ontology, constraint: MetricConstraint, unit: str) -> MetricConstraint:
    if constraint.unit == unit:
        return constraint
    return MetricConstraint(
        concept=constraint.concept,
        lo=ontology.convert(constraint.lo, constraint.unit, unit),
        hi=ontology.convert(constraint.hi, constraint.unit, unit),
        unit=unit,
        origin=constraint.origin,
    )


def pairing_term(ontology: Ontology, pairing: MetricPairing) -> DeltaTerm:
    frame = ontology.concept(pairing.request_constraint.concept)
    req = normalize_interval(_in_unit(ontology, pairing.request_constraint, frame.canonical_unit), frame.domain)
    cand = normalize_interval(_in_unit(ontology, pairing.candidate_constraint, frame.canonical_unit), frame.domain)
    return DeltaTerm(pairing, req, cand, delta(req, cand))


# ---------------------------------------------------------------------------
# CRank
# ---------------------------------------------------------------------------


def _contribution(ontology: Ontology, match: InterfaceMatch) -> InterfaceContribution:
    terms = tuple(pairing_term(ontology, p) for p in match.pairings)
    return InterfaceContribution(match.interface_name, match.weight, terms)


def crank(ontology: Ontology, request: Request, outcome: MatchOutcome) -> RankedCandidate:
    contributions = tuple(_contribution(ontology, m) for m in outcome.interface_matches)
    score = sum(c.contribution for c in contributions)
    logger.debug("%s vs %s: CRank=%.6f", request.name, outcome.component_name, score)
    return RankedCandidate(outcome.component_name, score, outcome, contributions)


def rank_all(
    ontology: Ontology, request: Request, outcomes: Sequence[MatchOutcome], workers: int = 1
) -> List[RankedCandidate]:
    """Σ': candidates with CRank at or below the request threshold, best first."""
    if workers > 1 and len(outcomes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ranked = list(pool.map(lambda o: crank(ontology, request, o), outcomes))
    else:
        ranked = [crank(ontology, request, o) for o in outcomes]
    threshold = request.rank_threshold
    if threshold is not None:
        ranked = [r for r in ranked if r.crank <= threshold]
    return sorted(ranked, key=lambda r: (r.crank, r.component_name))


__all__ = [
    "NormalizedInterval",
    "DeltaTerm",
    "InterfaceContribution",
    "RankedCandidate",
    "normalize",
    "normalize_interval",
    "delta",
    "pairing_term",
    "crank",
    "rank_all",
]
