"""Selection quality against developer relevance judgments.

Two modes are compared over the same request set: ``match_only`` selects every
admitted candidate, ``match_and_rank`` selects only the candidates kept after
ranking and threshold filtering.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence, Tuple

import pandas as pd

from backend.catalog.models import Catalog, Request
from backend.errors import EvaluatorError
from backend.matcher import match_all
from backend.ontology import Ontology
from backend.ranker import rank_all
from backend.schemas import JUDGMENTS_SCHEMA, DocumentSource, read_document

logger = logging.getLogger(__name__)

RelevanceJudgments = Mapping[str, FrozenSet[str]]

REPORT_COLUMNS = ["request", "selected", "relevant", "relevant_selected", "precision", "recall"]


# ---------------------------------------------------------------------------
# Data containers
# ---------------------------------------------------------------------------


class EvalMode(str, Enum):
    MATCH_ONLY = "match_only"
    MATCH_AND_RANK = "match_and_rank"


@dataclass(frozen=True)
class RequestScore:
    request_name: str
    selected: FrozenSet[str]
    relevant: FrozenSet[str]

    @property
    def relevant_selected_count(self) -> int:
        return len(self.selected & self.relevant)

    @property
    def precision(self) -> float:
        return precision_recall(self.selected, self.relevant)[0]

    @property
    def recall(self) -> float:
        return precision_recall(self.selected, self.relevant)[1]


@dataclass(frozen=True)
class EvalReport:
    mode: EvalMode
    scores: Tuple[RequestScore, ...]

    @property
    def average_precision(self) -> float:
        return _mean(s.precision for s in self.scores)

    @property
    def average_recall(self) -> float:
        return _mean(s.recall for s in self.scores)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "request": s.request_name,
                "selected": " ".join(sorted(s.selected)),
                "relevant": " ".join(sorted(s.relevant)),
                "relevant_selected": s.relevant_selected_count,
                "precision": s.precision,
                "recall": s.recall,
            }
            for s in self.scores
        ]
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def _mean(values: Iterable[float]) -> float:
    items = list(values)
    return sum(items) / len(items) if items else 0.0


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def precision_recall(selected: Iterable[str], relevant: Iterable[str]) -> Tuple[float, float]:
    """Precision and recall; an empty selection has precision 1, an empty relevant set recall 1."""
    chosen = set(selected)
    wanted = set(relevant)
    hits = len(chosen & wanted)
    precision = hits / len(chosen) if chosen else 1.0
    recall = hits / len(wanted) if wanted else 1.0
    return precision, recall


# ---------------------------------------------------------------------------
# Judgments
# ---------------------------------------------------------------------------


def load_judgments(
    source: DocumentSource, requests: Sequence[Request], catalog: Catalog
) -> Dict[str, FrozenSet[str]]:
    document = read_document(source, JUDGMENTS_SCHEMA)
    judgments = {str(name): frozenset(str(c) for c in members) for name, members in document.items()}
    check_judgments(judgments, requests, catalog)
    return judgments


def check_judgments(judgments: RelevanceJudgments, requests: Sequence[Request], catalog: Catalog) -> None:
    for request in requests:
        if request.name not in judgments:
            raise EvaluatorError(f"No relevance judgments for request '{request.name}'")
    known = set(catalog.names)
    for name in sorted(judgments):
        unknown = sorted(judgments[name] - known)
        if unknown:
            raise EvaluatorError(f"Judgments for '{name}' name unknown component '{unknown[0]}'")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def select_names(
    ontology: Ontology, catalog: Catalog, request: Request, mode: EvalMode
) -> FrozenSet[str]:
    outcomes = match_all(ontology, request, catalog)
    if mode is EvalMode.MATCH_ONLY:
        return frozenset(o.component_name for o in outcomes)
    return frozenset(r.component_name for r in rank_all(ontology, request, outcomes))


def run_eval(
    ontology: Ontology,
    catalog: Catalog,
    requests: Sequence[Request],
    judgments: RelevanceJudgments,
    mode: EvalMode,
    workers: int = 1,
) -> EvalReport:
    if not requests:
        raise EvaluatorError("No requests to evaluate")
    check_judgments(judgments, requests, catalog)

    def _score(request: Request) -> RequestScore:
        selected = select_names(ontology, catalog, request, mode)
        return RequestScore(request.name, selected, frozenset(judgments[request.name]))

    if workers > 1 and len(requests) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores: List[RequestScore] = list(pool.map(_score, requests))
    else:
        scores = [_score(r) for r in requests]
    report = EvalReport(mode, tuple(scores))
    logger.debug(
        "%s: average precision %.3f, recall %.3f", mode.value, report.average_precision, report.average_recall
    )
    return report


def export_report_csv(reports: Sequence[EvalReport], out_path: Path) -> Path:
    """Write one CSV with a ``mode`` column and an ``Average`` row per mode."""
    frames = []
    for report in reports:
        frame = report.to_frame()
        average = {
            "request": "Average",
            "selected": "",
            "relevant": "",
            "relevant_selected": "",
            "precision": report.average_precision,
            "recall": report.average_recall,
        }
        frame = pd.concat([frame, pd.DataFrame([average], columns=REPORT_COLUMNS)], ignore_index=True)
        frame.insert(0, "mode", report.mode.value)
        frames.append(frame)
    combined = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["mode", *REPORT_COLUMNS])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    combined.to_csv(out_path, index=False, float_format="%.3f")
    return out_path


__all__ = [
    "EvalMode",
    "RequestScore",
    "EvalReport",
    "RelevanceJudgments",
    "precision_recall",
    "load_judgments",
    "check_judgments",
    "select_names",
    "run_eval",
    "export_report_csv",
]
