"""Command-line entry point: load → match → rank → report.

Usage
-----
python run_select.py validate
python run_select.py select --mu 2 --format json
python run_select.py explain C2
python run_select.py eval --mode match_only

Exit status: 0 results, 1 empty result, 2 input error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from backend import QOS_DATA_DIR
from backend.catalog.models import Catalog, Component, MetricConstraint, Request
from backend.catalog.storage import load_catalog, load_requests, with_overrides
from backend.errors import CatalogError, QoSError
from backend.evaluator import EvalMode, EvalReport, export_report_csv, load_judgments, run_eval
from backend.matcher import (
    InterfaceTrace,
    MatchOutcome,
    MetricPairing,
    Relation,
    explain_component,
    match_all,
    match_component,
    relax,
)
from backend.ontology import Ontology, load_ontology
from backend.ranker import NormalizedInterval, RankedCandidate, crank, pairing_term, rank_all

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

DEFAULT_ONTOLOGY_PATH = QOS_DATA_DIR / "ontology.json"
DEFAULT_CATALOG_PATH = QOS_DATA_DIR / "table1_catalog.json"
DEFAULT_REQUEST_PATH = QOS_DATA_DIR / "table1_request.json"
DEFAULT_EVAL_CATALOG_PATH = QOS_DATA_DIR / "camera_catalog.json"
DEFAULT_EVAL_REQUESTS_PATH = QOS_DATA_DIR / "camera_requests.json"
DEFAULT_JUDGMENTS_PATH = QOS_DATA_DIR / "camera_judgments.json"

TABLE_PRECISION = 2
JSON_PRECISION = 6
SCORE_PRECISION = 3

EXIT_OK = 0
EXIT_EMPTY = 1
EXIT_INPUT_ERROR = 2
EXIT_IO_ERROR = 3


@dataclass
class RunConfig:
    command: str
    ontology_path: Path = DEFAULT_ONTOLOGY_PATH
    catalog_path: Path = DEFAULT_CATALOG_PATH
    request_path: Optional[Path] = DEFAULT_REQUEST_PATH
    mu_override: Optional[int] = None
    threshold_override: Optional[float] = None
    output_format: str = "table"
    workers: int = 1
    relax: bool = False
    component: Optional[str] = None
    judgments_path: Path = DEFAULT_JUDGMENTS_PATH
    mode: Optional[EvalMode] = None
    csv_path: Optional[Path] = None


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _load_inputs(config: RunConfig):
    ontology = load_ontology(config.ontology_path)
    catalog = load_catalog(config.catalog_path, ontology)
    requests: List[Request] = []
    if config.request_path is not None:
        requests = [
            with_overrides(r, mu=config.mu_override, threshold=config.threshold_override)
            for r in load_requests(config.request_path, ontology)
        ]
    return ontology, catalog, requests


def _single_request(requests: Sequence[Request]) -> Request:
    if len(requests) != 1:
        raise CatalogError(f"expected one request, found {len(requests)}")
    return requests[0]


def _emit_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))


def _rounded(value: float, digits: int) -> float:
    return round(value, digits)


def _threshold_label(request: Request) -> str:
    return "none" if request.rank_threshold is None else f"{request.rank_threshold:g}"


def _metadata_label(component: Optional[Component]) -> str:
    if component is None or not component.metadata:
        return ""
    return " [" + ", ".join(f"{k}={v}" for k, v in sorted(component.metadata.items())) + "]"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_validate(config: RunConfig) -> int:
    ontology, catalog, requests = _load_inputs(config)
    diagnostics = list(catalog.warnings)
    for request in requests:
        diagnostics.extend(request.warnings)
    summary = ontology.summary()
    if config.output_format == "json":
        _emit_json(
            {
                "status": "ok",
                "ontology": summary,
                "catalog": {"components": len(catalog)},
                "requests": [
                    {"name": r.name, "interfaces": r.interface_count, "mu": r.mu} for r in requests
                ],
                "diagnostics": diagnostics,
            }
        )
        return EXIT_OK
    for message in diagnostics:
        print(f"WARNING: {message}")
    parts = [
        f"ontology ({summary['concepts']} concepts, {summary['equivalence_classes']} equivalence classes, "
        f"{summary['units']} units, {summary['conversions']} conversions, {summary['functions']} functions)",
        f"catalog ({len(catalog)} components)",
    ]
    for request in requests:
        parts.append(f"request {request.name} ({request.interface_count} interfaces, mu={request.mu})")
    print("OK: " + "; ".join(parts))
    return EXIT_OK


def _outcome_to_dict(outcome: MatchOutcome) -> Dict[str, Any]:
    return {
        "component": outcome.component_name,
        "matched_count": outcome.matched_count,
        "interfaces": [
            {"name": m.interface_name, "polarity": m.polarity.value, "level": m.level.value, "weight": m.weight}
            for m in outcome.interface_matches
        ],
    }


def _matched(config: RunConfig, ontology: Ontology, catalog: Catalog, request: Request):
    if config.relax:
        mu, outcomes = relax(ontology, request, catalog, config.workers)
        return with_overrides(request, mu=mu), outcomes
    return request, match_all(ontology, request, catalog, config.workers)


def cmd_match(config: RunConfig) -> int:
    ontology, catalog, requests = _load_inputs(config)
    request, outcomes = _matched(config, ontology, catalog, _single_request(requests))
    if config.output_format == "json":
        _emit_json({"request": request.name, "mu": request.mu, "candidates": [_outcome_to_dict(o) for o in outcomes]})
    else:
        print(f"Request {request.name} (mu={request.mu}): {len(outcomes)} candidate(s)")
        for outcome in outcomes:
            levels = ", ".join(f"{m.interface_name}={m.level.value}/{m.weight}" for m in outcome.interface_matches)
            print(f"  {outcome.component_name}: {outcome.matched_count} matched ({levels})")
    return EXIT_OK if outcomes else EXIT_EMPTY


def _interval_json(interval: NormalizedInterval) -> List[float]:
    return [_rounded(interval.lo, JSON_PRECISION), _rounded(interval.hi, JSON_PRECISION)]


def _ranked_to_dict(candidate: RankedCandidate, catalog: Catalog) -> Dict[str, Any]:
    component = catalog.get(candidate.component_name)
    interfaces = []
    for match, contribution in zip(candidate.outcome.interface_matches, candidate.contributions):
        interfaces.append(
            {
                "name": match.interface_name,
                "polarity": match.polarity.value,
                "level": match.level.value,
                "weight": match.weight,
                "delta_sum": _rounded(contribution.delta_sum, JSON_PRECISION),
                "contribution": _rounded(contribution.contribution, JSON_PRECISION),
                "pairings": [
                    {
                        "request_concept": term.pairing.request_constraint.concept,
                        "candidate_concept": term.pairing.candidate_constraint.concept,
                        "relation": term.pairing.relation.value,
                        "request_interval": _interval_json(term.request_interval),
                        "candidate_interval": _interval_json(term.candidate_interval),
                        "delta": _rounded(term.delta, JSON_PRECISION),
                    }
                    for term in contribution.terms
                ],
            }
        )
    return {
        "component": candidate.component_name,
        "crank": _rounded(candidate.crank, JSON_PRECISION),
        "metadata": dict(component.metadata) if component else {},
        "interfaces": interfaces,
    }


def cmd_select(config: RunConfig) -> int:
    ontology, catalog, requests = _load_inputs(config)
    request, outcomes = _matched(config, ontology, catalog, _single_request(requests))
    ranked = rank_all(ontology, request, outcomes, config.workers)
    if config.output_format == "json":
        _emit_json(
            {
                "request": request.name,
                "mu": request.mu,
                "threshold": request.rank_threshold,
                "candidates": [_ranked_to_dict(c, catalog) for c in ranked],
            }
        )
        return EXIT_OK if ranked else EXIT_EMPTY

    p = TABLE_PRECISION
    print(f"Request {request.name} (mu={request.mu}, threshold {_threshold_label(request)}): {len(ranked)} result(s)")
    for position, candidate in enumerate(ranked, start=1):
        print(f"{position}. {candidate.component_name}  CRank {candidate.crank:.{p}f}{_metadata_label(catalog.get(candidate.component_name))}")
        for match, contribution in zip(candidate.outcome.interface_matches, candidate.contributions):
            print(
                f"   {match.interface_name} ({match.polarity.value}) {match.level.value} w={match.weight} "
                f"delta_sum {contribution.delta_sum:.{p}f} -> {contribution.contribution:.{p}f}"
            )
    return EXIT_OK if ranked else EXIT_EMPTY


def _relation_text(ontology: Ontology, pairing: MetricPairing) -> str:
    req = pairing.request_constraint.concept
    cand = pairing.candidate_constraint.concept
    if pairing.relation is Relation.EQUIVALENT:
        return req if req == cand else f"{req} ≡ {cand}"
    if pairing.relation is Relation.REQUEST_SUBSUMED_BY_CANDIDATE:
        chain = ontology.chain(req, cand) or [req, cand]
    else:
        chain = ontology.chain(cand, req) or [cand, req]
    return " ⊑ ".join(chain)


def _explain_lines(ontology: Ontology, trace: InterfaceTrace) -> List[str]:
    p = TABLE_PRECISION
    header = f"{trace.interface_name} ({trace.polarity.value}): {trace.level.value}"
    if trace.weight is not None:
        header += f", weight {trace.weight}"
    if trace.reason:
        header += f", {trace.reason}"
    lines = [header]
    flags = {"exact": trace.exact, "plugin": trace.plugin, "subsume": trace.subsume}
    lines.append("  conditions: " + " ".join(f"{k}={'yes' if v else 'no'}" for k, v in flags.items()))
    for pairing in trace.pairings:
        term = pairing_term(ontology, pairing)
        concept = ontology.concept(pairing.request_constraint.concept)
        lines.append(
            f"  {_relation_text(ontology, pairing)} [{concept.kind.value}, {concept.direction.value}]: "
            f"request [{term.request_interval.lo:.{p}f}, {term.request_interval.hi:.{p}f}] "
            f"candidate [{term.candidate_interval.lo:.{p}f}, {term.candidate_interval.hi:.{p}f}] "
            f"delta {term.delta:.{p}f}"
        )
    return lines


def _trace_to_dict(ontology: Ontology, trace: InterfaceTrace) -> Dict[str, Any]:
    pairings = []
    for pairing in trace.pairings:
        term = pairing_term(ontology, pairing)
        pairings.append(
            {
                "relation": pairing.relation.value,
                "chain": _relation_text(ontology, pairing),
                "request": _constraint_json(pairing.request_constraint),
                "candidate": _constraint_json(pairing.candidate_constraint),
                "request_interval": _interval_json(term.request_interval),
                "candidate_interval": _interval_json(term.candidate_interval),
                "delta": _rounded(term.delta, JSON_PRECISION),
            }
        )
    return {
        "name": trace.interface_name,
        "polarity": trace.polarity.value,
        "level": trace.level.value,
        "weight": trace.weight,
        "conditions": {"exact": trace.exact, "plugin": trace.plugin, "subsume": trace.subsume},
        "reason": trace.reason,
        "pairings": pairings,
    }


def _constraint_json(constraint: MetricConstraint) -> Dict[str, Any]:
    return {
        "concept": constraint.concept,
        "min": _rounded(constraint.lo, JSON_PRECISION),
        "max": _rounded(constraint.hi, JSON_PRECISION),
        "unit": constraint.unit,
        "origin": constraint.origin.value,
    }


def cmd_explain(config: RunConfig) -> int:
    ontology, catalog, requests = _load_inputs(config)
    request = _single_request(requests)
    component = catalog.get(config.component or "")
    if component is None:
        raise CatalogError("unknown component", config.component, config.component)
    traces = explain_component(ontology, request, component)
    matched = [t for t in traces if t.matched]
    admitted = len(matched) >= request.mu
    score: Optional[float] = None
    if admitted:
        outcome = match_component(ontology, request, component)
        if outcome is not None:
            score = crank(ontology, request, outcome).crank

    if config.output_format == "json":
        _emit_json(
            {
                "component": component.name,
                "metadata": dict(component.metadata),
                "request": request.name,
                "mu": request.mu,
                "matched_count": len(matched),
                "admitted": admitted,
                "crank": None if score is None else _rounded(score, JSON_PRECISION),
                "interfaces": [_trace_to_dict(ontology, t) for t in traces],
            }
        )
        return EXIT_OK

    print(f"Component {component.name}{_metadata_label(component)} against request {request.name} (mu={request.mu})")
    for trace in traces:
        for line in _explain_lines(ontology, trace):
            print(line)
    verdict = f"admitted, CRank {score:.{TABLE_PRECISION}f}" if score is not None else "not admitted"
    print(f"Result: {len(matched)} of {request.interface_count} interfaces matched, {verdict}")
    return EXIT_OK


def format_eval_table(report: EvalReport) -> str:
    p = SCORE_PRECISION
    lines = [f"Mode: {report.mode.value}", f"{'Request':<10}{'Precision':>12}{'Recall':>10}"]
    for score in report.scores:
        lines.append(f"{score.request_name:<10}{score.precision:>12.{p}f}{score.recall:>10.{p}f}")
    lines.append(f"{'Average':<10}{report.average_precision:>12.{p}f}{report.average_recall:>10.{p}f}")
    return "\n".join(lines)


def _report_to_dict(report: EvalReport) -> Dict[str, Any]:
    return {
        "mode": report.mode.value,
        "requests": [
            {
                "request": s.request_name,
                "selected": sorted(s.selected),
                "relevant": sorted(s.relevant),
                "relevant_selected": s.relevant_selected_count,
                "precision": _rounded(s.precision, SCORE_PRECISION),
                "recall": _rounded(s.recall, SCORE_PRECISION),
            }
            for s in report.scores
        ],
        "average": {
            "precision": _rounded(report.average_precision, SCORE_PRECISION),
            "recall": _rounded(report.average_recall, SCORE_PRECISION),
        },
    }


def cmd_eval(config: RunConfig) -> int:
    ontology, catalog, requests = _load_inputs(config)
    judgments = load_judgments(config.judgments_path, requests, catalog)
    modes = [config.mode] if config.mode else [EvalMode.MATCH_ONLY, EvalMode.MATCH_AND_RANK]
    reports = [run_eval(ontology, catalog, requests, judgments, mode, config.workers) for mode in modes]
    if config.csv_path is not None:
        export_report_csv(reports, config.csv_path)
        logger.info("Saved evaluation report to %s", config.csv_path)
    if config.output_format == "json":
        _emit_json({"reports": [_report_to_dict(r) for r in reports]})
    else:
        print("\n\n".join(format_eval_table(r) for r in reports))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "validate": cmd_validate,
    "match": cmd_match,
    "select": cmd_select,
    "explain": cmd_explain,
    "eval": cmd_eval,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--ontology", type=Path, default=None, help="Ontology document (JSON)")
    common.add_argument("--catalog", type=Path, default=None, help="Component catalog document (JSON)")
    common.add_argument("--request", type=Path, default=None, help="Request or request-set document (JSON)")
    common.add_argument("--mu", type=int, default=None, help="Override the request's minimum matched interfaces")
    common.add_argument("--threshold", type=float, default=None, help="Override the request's CRank threshold")
    common.add_argument("--format", choices=("table", "json"), default="table", dest="output_format")
    common.add_argument("--workers", type=int, default=1, help="Thread pool size for matching and ranking")
    common.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level on stderr")

    parser = argparse.ArgumentParser(prog="run_select", description="QoS-based component matching and ranking")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="Load and check all input documents")
    match = sub.add_parser("match", parents=[common], help="List candidates admitted by QoS matching")
    match.add_argument("--relax", action="store_true", help="Lower mu until some candidate is admitted")
    select = sub.add_parser("select", parents=[common], help="Match, rank and filter candidates")
    select.add_argument("--relax", action="store_true", help="Lower mu until some candidate is admitted")
    explain = sub.add_parser("explain", parents=[common], help="Show the rule evaluation for one component")
    explain.add_argument("component", help="Component name")
    evaluate = sub.add_parser("eval", parents=[common], help="Precision/recall against relevance judgments")
    evaluate.add_argument("--judgments", type=Path, default=None, help="Relevance judgments document (JSON)")
    evaluate.add_argument("--mode", choices=[m.value for m in EvalMode], default=None)
    evaluate.add_argument("--csv", type=Path, default=None, dest="csv_path", help="Also write the report as CSV")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    is_eval = args.command == "eval"
    if args.workers < 1:
        raise CatalogError(f"--workers must be at least 1 (got {args.workers})")
    return RunConfig(
        command=args.command,
        ontology_path=args.ontology or DEFAULT_ONTOLOGY_PATH,
        catalog_path=args.catalog or (DEFAULT_EVAL_CATALOG_PATH if is_eval else DEFAULT_CATALOG_PATH),
        request_path=args.request or (DEFAULT_EVAL_REQUESTS_PATH if is_eval else DEFAULT_REQUEST_PATH),
        mu_override=args.mu,
        threshold_override=args.threshold,
        output_format=args.output_format,
        workers=args.workers,
        relax=getattr(args, "relax", False),
        component=getattr(args, "component", None),
        judgments_path=getattr(args, "judgments", None) or DEFAULT_JUDGMENTS_PATH,
        mode=EvalMode(args.mode) if getattr(args, "mode", None) else None,
        csv_path=getattr(args, "csv_path", None),
    )


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("backend").setLevel(logging.DEBUG if verbose else logging.WARNING)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = config_from_args(args)
        return COMMANDS[config.command](config)
    except QoSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
