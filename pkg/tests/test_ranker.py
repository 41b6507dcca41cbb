import dataclasses
import math

import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.strategies import DrawFn, composite

from backend.catalog.models import Interface, MetricConstraint, Polarity, QoSProfile
from backend.catalog.storage import build_request, with_overrides
from backend.matcher import InterfaceMatch, MatchLevel, MatchOutcome, MetricPairing, Relation, match_all
from backend.ontology import DomainRange, load_ontology
from backend.ranker import NormalizedInterval, crank, delta, normalize, normalize_interval, pairing_term, rank_all

# Concepts whose domain is [0, 1] so declared values are already normalised.
UNIT_DOMAIN = load_ontology(
    {
        "concepts": [
            {
                "name": name,
                "kind": "service",
                "direction": "increasing",
                "canonical_unit": "u",
                "domain": {"min": 0, "max": 1},
            }
            for name in ("Video", "Control", "Format")
        ],
        "units": [{"name": "u", "dimension": "score"}],
    }
)


# ---------------------------------------------------------------------------
# Helper builders
# ---------------------------------------------------------------------------


def _pairing(concept, request_interval, candidate_interval):
    req = MetricConstraint(concept, *request_interval, "u")
    cand = MetricConstraint(concept, *candidate_interval, "u")
    return MetricPairing(req, cand, Relation.EQUIVALENT)


def _match(name, polarity, level, weight, *pairings):
    return InterfaceMatch(name, polarity, level, weight, tuple(pairings))


def _table3_outcome(name, video, control, dv_format):
    return MatchOutcome(
        name,
        (
            _match("VideoStream", Polarity.PROVIDED, MatchLevel.EXACT, 1, _pairing("Video", *video)),
            _match("CameraControl", Polarity.PROVIDED, MatchLevel.EXACT, 1, _pairing("Control", *control)),
            _match("DVFormat", Polarity.REQUIRED, MatchLevel.SUBSUME, 2, _pairing("Format", *dv_format)),
        ),
    )


def _request():
    # crank only reads the request name for logging
    profile = QoSProfile((MetricConstraint("Video", 0.0, 1.0, "u"),))
    return build_request("R", (Interface("VideoStream", Polarity.PROVIDED, profile),), ())


# ---------------------------------------------------------------------------
# Normalisation and δ
# ---------------------------------------------------------------------------


def test_normalize_examples():
    assert normalize(99.5, DomainRange(99.0, 100.0)) == 0.5
    assert math.isclose(normalize(30, DomainRange(25.0, 72.0)), 5 / 47)
    assert normalize(25, DomainRange(25.0, 72.0)) == 0.0
    assert normalize(72, DomainRange(25.0, 72.0)) == 1.0


def test_normalize_clamps_out_of_range_values():
    diagnostics = []
    assert normalize(120.0, DomainRange(0.0, 100.0), diagnostics) == 1.0
    assert len(diagnostics) == 1 and "clamped" in diagnostics[0]


def test_degenerate_domain_maps_to_zero():
    diagnostics = []
    assert normalize(5.0, DomainRange(5.0, 5.0), diagnostics) == 0.0
    assert diagnostics == []
    assert normalize(7.0, DomainRange(5.0, 5.0), diagnostics) == 0.0
    assert len(diagnostics) == 1


def test_normalized_interval_examples(ontology):
    mttf = MetricConstraint("MTTF", 99.5, 100.0, "percent")
    reliability = MetricConstraint("Reliability", 99.0, 100.0, "percent")
    domain = ontology.concept("MTTF").domain
    assert normalize_interval(mttf, domain) == NormalizedInterval(0.5, 1.0)
    assert normalize_interval(reliability, domain) == NormalizedInterval(0.0, 1.0)


def test_normalized_interval_rejects_bad_bounds():
    with pytest.raises(ValueError):
        NormalizedInterval(0.6, 0.5)
    with pytest.raises(ValueError):
        NormalizedInterval(0.0, 1.5)


def test_delta_examples():
    assert math.isclose(delta(NormalizedInterval(0.0, 1.0), NormalizedInterval(0.11, 1.0)), 0.055)
    assert math.isclose(delta(NormalizedInterval(0.0, 0.0), NormalizedInterval(0.0, 0.04)), 0.02)
    assert delta(NormalizedInterval(0.5, 1.0), NormalizedInterval(0.0, 1.0)) == 0.25


def test_pairing_is_measured_in_the_request_frame(ontology):
    # 0.1 s against the request's ms scale over [0, 1000]
    request = MetricConstraint("StartUpTime", 0.0, 10.0, "ms")
    candidate = MetricConstraint("TimeToRespond", 0.0, 0.1, "s")
    term = pairing_term(ontology, MetricPairing(request, candidate, Relation.EQUIVALENT))
    assert term.request_interval == NormalizedInterval(0.0, 0.01)
    assert math.isclose(term.candidate_interval.hi, 0.1)
    assert math.isclose(term.delta, 0.045)


# ---------------------------------------------------------------------------
# CRank on the worked example
# ---------------------------------------------------------------------------


def test_crank_from_normalised_intervals():
    c2 = _table3_outcome("C2", ((0, 1), (0.11, 1)), ((0, 0), (0, 0)), ((0.5, 1), (0.5, 1)))
    c3 = _table3_outcome("C3", ((0, 1), (0, 1)), ((0, 0), (0, 0.04)), ((0.5, 1), (0, 1)))
    request = _request()
    assert math.isclose(crank(UNIT_DOMAIN, request, c2).crank, 0.055, abs_tol=1e-9)
    ranked_c3 = crank(UNIT_DOMAIN, request, c3)
    assert math.isclose(ranked_c3.crank, 0.145, abs_tol=1e-9)
    assert [c.contribution for c in ranked_c3.contributions] == pytest.approx([0.0, 0.02, 0.125])
    assert [r.component_name for r in rank_all(UNIT_DOMAIN, request, [c3, c2])] == ["C2", "C3"]


def test_identical_intervals_rank_zero():
    same = _table3_outcome("C", ((0.2, 0.7), (0.2, 0.7)), ((0, 0), (0, 0)), ((1, 1), (1, 1)))
    assert crank(UNIT_DOMAIN, _request(), same).crank == 0.0


def test_table1_end_to_end(ontology, table1_request, table1_catalog):
    ranked = rank_all(ontology, table1_request, match_all(ontology, table1_request, table1_catalog))
    assert [r.component_name for r in ranked] == ["C2", "C3"]
    assert math.isclose(ranked[0].crank, 0.055, abs_tol=0.005)
    assert math.isclose(ranked[1].crank, 0.145, abs_tol=0.005)


def test_c1_ranks_zero_once_admitted(ontology, table1_request, table1_catalog):
    relaxed = with_overrides(table1_request, mu=2)
    ranked = rank_all(ontology, relaxed, match_all(ontology, relaxed, table1_catalog))
    assert [r.component_name for r in ranked] == ["C1", "C2", "C3"]
    assert ranked[0].crank == 0.0


def test_threshold_filters_candidates(ontology, table1_request, table1_catalog):
    request = with_overrides(table1_request, threshold=0.1)
    ranked = rank_all(ontology, request, match_all(ontology, request, table1_catalog))
    assert [r.component_name for r in ranked] == ["C2"]


def test_workers_do_not_change_ranking(ontology, camera_requests, camera_catalog):
    for request in camera_requests:
        outcomes = match_all(ontology, request, camera_catalog)
        assert rank_all(ontology, request, outcomes, workers=4) == rank_all(ontology, request, outcomes)


def test_ties_break_by_component_name():
    a = _table3_outcome("Beta", ((0, 1), (0, 1)), ((0, 0), (0, 0)), ((1, 1), (1, 1)))
    b = _table3_outcome("Alpha", ((0, 1), (0, 1)), ((0, 0), (0, 0)), ((1, 1), (1, 1)))
    assert [r.component_name for r in rank_all(UNIT_DOMAIN, _request(), [a, b])] == ["Alpha", "Beta"]


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

_unit = st.floats(min_value=0.0, max_value=1.0)


@composite
def normalized_intervals(draw: DrawFn):
    a, b = draw(_unit), draw(_unit)
    return NormalizedInterval(min(a, b), max(a, b))


@settings(max_examples=10000, deadline=None)
@given(a=normalized_intervals(), b=normalized_intervals(), c=normalized_intervals())
def test_delta_is_a_pseudometric(a, b, c):
    assert delta(a, a) == 0.0
    assert delta(a, b) >= 0.0
    assert delta(a, b) <= 1.0
    if delta(a, b) == 0.0:
        assert a == b
    assert delta(a, b) == delta(b, a)
    assert delta(a, c) <= delta(a, b) + delta(b, c) + 1e-12


@settings(max_examples=500, deadline=None)
@given(
    x=st.floats(min_value=-1e6, max_value=1e6),
    y=st.floats(min_value=-1e6, max_value=1e6),
    lo=st.floats(min_value=-1e3, max_value=1e3),
    width=st.floats(min_value=0.0, max_value=1e3),
)
def test_normalize_is_monotone_and_bounded(x, y, lo, width):
    domain = DomainRange(lo, lo + width)
    nx_, ny = normalize(x, domain), normalize(y, domain)
    assert 0.0 <= nx_ <= 1.0
    if x <= y:
        assert nx_ <= ny


@settings(max_examples=500, deadline=None)
@given(
    lo=st.floats(min_value=-1e3, max_value=1e3),
    width=st.floats(min_value=1e-3, max_value=1e3),
    fx=st.floats(min_value=0.0, max_value=1.0),
    gap=st.floats(min_value=1e-6, max_value=1.0),
)
def test_normalize_is_strictly_monotone_inside_a_wide_domain(lo, width, fx, gap):
    assume(fx + gap <= 1.0)
    domain = DomainRange(lo, lo + width)
    x, y = lo + fx * width, lo + (fx + gap) * width
    assert domain.contains(x) and domain.contains(y)
    assert normalize(x, domain) < normalize(y, domain)


_intervals = st.tuples(_unit, _unit).map(lambda pair: (min(pair), max(pair)))


@composite
def outcomes(draw: DrawFn):
    matches = []
    for index in range(draw(st.integers(min_value=1, max_value=3))):
        pairings = [
            _pairing(concept, draw(_intervals), draw(_intervals))
            for concept in draw(st.lists(st.sampled_from(["Video", "Control", "Format"]), max_size=3, unique=True))
        ]
        if draw(st.booleans()):
            matches.append(_match(f"I{index}", Polarity.PROVIDED, MatchLevel.EXACT, 1, *pairings))
        else:
            matches.append(_match(f"I{index}", Polarity.REQUIRED, MatchLevel.SUBSUME, 2, *pairings))
    return MatchOutcome("X", tuple(matches))


def _literal_crank(outcome):
    total = 0.0
    for match in outcome.interface_matches:
        inner = 0.0
        for pairing in match.pairings:
            r, c = pairing.request_constraint, pairing.candidate_constraint
            inner += (abs(r.hi - c.hi) + abs(r.lo - c.lo)) / 2
        total += inner / match.weight
    return total


@settings(max_examples=300, deadline=None)
@given(outcome=outcomes())
def test_crank_agrees_with_literal_double_sum(outcome):
    ranked = crank(UNIT_DOMAIN, _request(), outcome)
    assert math.isclose(ranked.crank, _literal_crank(outcome), rel_tol=1e-12, abs_tol=1e-12)
    assert ranked.crank >= 0.0
    assert math.isclose(ranked.crank, sum(c.contribution for c in ranked.contributions), abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(outcome=outcomes(), data=st.data())
def test_doubling_a_weight_never_increases_crank(outcome, data):
    singles = [i for i, m in enumerate(outcome.interface_matches) if m.weight == 1]
    assume(singles)
    index = data.draw(st.sampled_from(singles))
    flipped = list(outcome.interface_matches)
    flipped[index] = dataclasses.replace(flipped[index], level=MatchLevel.PLUGIN, weight=2)
    before = crank(UNIT_DOMAIN, _request(), outcome)
    after = crank(UNIT_DOMAIN, _request(), MatchOutcome(outcome.component_name, tuple(flipped)))
    assert after.crank <= before.crank + 1e-12
    if before.contributions[index].delta_sum > 0:
        assert after.contributions[index].contribution < before.contributions[index].contribution
