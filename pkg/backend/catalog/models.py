from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple


# ---------------------------------------------------------------------------
# Enumerations
# ---------------------------------------------------------------------------


class Origin(str, Enum):
    DECLARED = "declared"
    DERIVED = "derived"  # produced by a metric function at load


class Polarity(str, Enum):
    PROVIDED = "provided"
    REQUIRED = "required"


# ---------------------------------------------------------------------------
# QoS descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricConstraint:
    """One metric requirement or offer: concept + closed interval in ``unit``."""

    concept: str
    lo: float
    hi: float
    unit: str
    origin: Origin = Origin.DECLARED


@dataclass(frozen=True)
class QoSProfile:
    """Conjunction of metric constraints attached to one interface."""

    constraints: Tuple[MetricConstraint, ...]

    def __iter__(self) -> Iterator[MetricConstraint]:
        return iter(self.constraints)

    def __len__(self) -> int:
        return len(self.constraints)

    @property
    def concepts(self) -> List[str]:
        return [c.concept for c in self.constraints]


@dataclass(frozen=True)
class Interface:
    name: str
    polarity: Polarity
    profile: QoSProfile


@dataclass(frozen=True)
class Component:
    """A candidate component ⟨N, D, I^P, I^R⟩.

    ``metadata`` (version, technology, vendor, ...) is carried for display only;
    it never takes part in matching or ranking.
    """

    name: str
    provided: Tuple[Interface, ...] = ()
    required: Tuple[Interface, ...] = ()
    metadata: Dict[str, str] = field(default_factory=dict, compare=False)

    @property
    def interfaces(self) -> Tuple[Interface, ...]:
        return self.provided + self.required

    def interface(self, name: str, polarity: Polarity) -> Optional[Interface]:
        pool = self.provided if polarity is Polarity.PROVIDED else self.required
        for item in pool:
            if item.name == name:
                return item
        return None


@dataclass(frozen=True)
class Request:
    """A developer request; ``mu`` is the minimum number of matched interfaces."""

    name: str
    provided: Tuple[Interface, ...]
    required: Tuple[Interface, ...]
    mu: int
    rank_threshold: Optional[float] = None
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    @property
    def interfaces(self) -> Tuple[Interface, ...]:
        return self.provided + self.required

    @property
    def interface_count(self) -> int:
        return len(self.provided) + len(self.required)


@dataclass(frozen=True)
class Catalog:
    components: Tuple[Component, ...]
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    def __iter__(self) -> Iterator[Component]:
        return iter(self.components)

    def __len__(self) -> int:
        return len(self.components)

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.components]

    def get(self, name: str) -> Optional[Component]:
        for component in self.components:
            if component.name == name:
                return component
        return None
