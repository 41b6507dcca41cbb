import copy
import json

import pytest
from hypothesis import given, settings, strategies as st

from backend import QOS_DATA_DIR
from backend.catalog.constraints import ConstraintExpr, parse_constraint, parse_constraint_expr, render_constraint
from backend.catalog.models import Origin, Polarity
from backend.catalog.storage import (
    dump_catalog,
    dump_request,
    load_catalog,
    load_request,
    load_requests,
    save_catalog,
    with_overrides,
)
from backend.errors import CatalogError, ConstraintSyntaxError, DocumentError


# ---------------------------------------------------------------------------
# Helper builders
# ---------------------------------------------------------------------------


def _component(name, provided=None, required=None, metadata=None):
    raw = {
        "name": name,
        "provided": provided if provided is not None else [{"name": "VideoCamera", "metrics": [{"expr": "MTTF >= 99.5 %"}]}],
        "required": required or [],
    }
    if metadata:
        raw["metadata"] = metadata
    return raw


def _request(provided=None, required=None, **extra):
    raw = {
        "name": "Req",
        "provided": provided if provided is not None else [{"name": "VideoCamera", "metrics": [{"expr": "MTTF >= 99.5 %"}]}],
        "required": required or [],
    }
    raw.update(extra)
    return raw


def _interface(name, *exprs):
    return {"name": name, "metrics": [{"expr": e} for e in exprs]}


# ---------------------------------------------------------------------------
# Constraint grammar
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, expected",
    [
        ("MTTF >= 99.5 %", ("MTTF", 99.5, 100.0, "percent")),
        ("ResponseTime <= 10 ms", ("ResponseTime", 0.0, 10.0, "ms")),
        ("FrameRate = 30 fps", ("FrameRate", 30.0, 30.0, "fps")),
        ("60 <= FrameRate <= 72 fps", ("FrameRate", 60.0, 72.0, "fps")),
        ("TimeToRespond <= 0.1 s", ("TimeToRespond", 0.0, 0.1, "s")),
        ("Reliability >= 99.5", ("Reliability", 99.5, 100.0, "percent")),
    ],
)
def test_parse_constraint_closes_open_forms_with_domain(ontology, text, expected):
    concept, lo, hi, unit = expected
    constraint = parse_constraint(text, ontology)
    assert (constraint.concept, constraint.unit) == (concept, unit)
    assert (constraint.lo, constraint.hi) == pytest.approx((lo, hi))


@pytest.mark.parametrize("text", ["MTTF >> 5", "MTTF", ">= 5", "MTTF >= abc", "99 <= MTTF"])
def test_bad_constraint_syntax(text):
    with pytest.raises(ConstraintSyntaxError):
        parse_constraint_expr(text)


def test_inverted_range_is_rejected(ontology):
    with pytest.raises(ConstraintSyntaxError, match="exceeds upper bound"):
        parse_constraint("72 <= FrameRate <= 60 fps", ontology)


_exprs = st.builds(
    ConstraintExpr,
    concept=st.sampled_from(["MTTF", "FrameRate", "Uptime_2"]),
    op=st.sampled_from([">=", "<=", "="]),
    value=st.floats(allow_nan=False, allow_infinity=False),
    unit=st.sampled_from([None, "ms", "fps", "%", "percent", "μs"]),
) | st.builds(
    ConstraintExpr,
    concept=st.sampled_from(["MTTF", "FrameRate"]),
    op=st.just("range"),
    value=st.floats(allow_nan=False, allow_infinity=False),
    upper=st.floats(allow_nan=False, allow_infinity=False),
    unit=st.sampled_from([None, "h", "dpi"]),
)


@settings(max_examples=300, deadline=None)
@given(expr=_exprs)
def test_render_then_parse_is_identity(expr):
    assert parse_constraint_expr(render_constraint(expr)) == expr


# ---------------------------------------------------------------------------
# Catalog loading
# ---------------------------------------------------------------------------


def test_table1_catalog_loads(table1_catalog):
    assert table1_catalog.names == ["C1", "C2", "C3"]
    c2 = table1_catalog.get("C2")
    assert [i.name for i in c2.provided] == ["VideoStream", "CameraControl"]
    assert c2.required[0].polarity is Polarity.REQUIRED
    assert c2.metadata["technology"] == "CCM"
    assert table1_catalog.warnings == ()


def test_constraints_are_canonicalised(camera_catalog):
    cam09 = camera_catalog.get("Cam09").interface("VideoCamera", Polarity.PROVIDED)
    respond = [c for c in cam09.profile if c.concept == "TimeToRespond"][0]
    assert respond.unit == "ms"
    assert (respond.lo, respond.hi) == pytest.approx((0.0, 100.0))


def test_derived_metric_is_a_point_interval(camera_catalog):
    cam12 = camera_catalog.get("Cam12").interface("VideoCamera", Polarity.PROVIDED)
    availability = cam12.profile.constraints[0]
    assert availability.concept == "Availability"
    assert availability.origin is Origin.DERIVED
    assert availability.lo == availability.hi
    assert availability.lo == pytest.approx(99.9, rel=1e-9)


def test_out_of_domain_interval_is_clamped_with_warning(ontology):
    catalog = load_catalog({"components": [_component("X", [_interface("VideoCamera", "MTTF >= 98 %")])]}, ontology)
    constraint = catalog.get("X").provided[0].profile.constraints[0]
    assert (constraint.lo, constraint.hi) == (99.0, 100.0)
    assert len(catalog.warnings) == 1
    assert "clamped" in catalog.warnings[0] and "MTTF" in catalog.warnings[0]


def test_unknown_concept_names_concept_and_component(ontology):
    doc = {"components": [_component("Broken", [_interface("VideoCamera", "Jitter <= 5 ms")])]}
    with pytest.raises(CatalogError) as excinfo:
        load_catalog(doc, ontology)
    assert excinfo.value.identifier == "Jitter"
    assert "Jitter" in str(excinfo.value) and "Broken" in str(excinfo.value)


def test_unit_of_wrong_dimension_is_rejected(ontology):
    doc = {"components": [_component("X", [_interface("VideoCamera", "MTTF >= 99 ms")])]}
    with pytest.raises(CatalogError, match="dimension mismatch"):
        load_catalog(doc, ontology)


def test_equivalent_concepts_twice_in_one_profile(ontology):
    doc = {"components": [_component("X", [_interface("VideoCamera", "FrameRate >= 30 fps", "FrameOutput >= 25 fps")])]}
    with pytest.raises(CatalogError, match="equivalent concepts"):
        load_catalog(doc, ontology)


def test_duplicate_component_and_interface_names(ontology):
    with pytest.raises(CatalogError, match="duplicate component"):
        load_catalog({"components": [_component("X"), _component("X")]}, ontology)
    twice = [_interface("VideoCamera", "MTTF >= 99.5 %"), _interface("VideoCamera", "FrameRate >= 30 fps")]
    with pytest.raises(CatalogError, match="duplicate provided interface"):
        load_catalog({"components": [_component("X", twice)]}, ontology)


def test_component_without_interfaces(ontology):
    with pytest.raises(CatalogError, match="no interfaces"):
        load_catalog({"components": [_component("Empty", provided=[])]}, ontology)


def test_operands_for_concept_without_function(ontology):
    raw = {"concept": "MTTF", "operands": {"Uptime": 10}}
    doc = {"components": [_component("X", [{"name": "VideoCamera", "metrics": [raw]}])]}
    with pytest.raises(CatalogError, match="no metric function"):
        load_catalog(doc, ontology)


def test_derived_metric_division_by_zero(ontology):
    raw = {"concept": "Availability", "operands": {"Uptime": 0, "Downtime": 0}}
    doc = {"components": [_component("X", [{"name": "VideoCamera", "metrics": [raw]}])]}
    with pytest.raises(CatalogError, match="Division by zero"):
        load_catalog(doc, ontology)


def test_schema_rejects_unknown_keys(ontology):
    doc = {"components": [dict(_component("X"), colour="red")]}
    with pytest.raises(DocumentError):
        load_catalog(doc, ontology)


def test_dump_is_idempotent(camera_catalog, ontology):
    first = dump_catalog(camera_catalog)
    assert dump_catalog(load_catalog(first, ontology)) == first


def test_saved_catalog_reloads_equal(table1_catalog, ontology, tmp_path):
    path = save_catalog(table1_catalog, tmp_path / "catalog.json")
    assert load_catalog(path, ontology) == table1_catalog
    assert json.loads(path.read_text(encoding="utf-8"))["components"][0]["name"] == "C1"


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------


def test_mu_defaults_to_interface_count(table1_request):
    assert table1_request.interface_count == 3
    assert table1_request.mu == 3
    assert table1_request.rank_threshold is None


@pytest.mark.parametrize("mu", [0, 2])
def test_mu_out_of_range(ontology, mu):
    with pytest.raises(CatalogError, match="mu"):
        load_request(_request(mu=mu), ontology)


def test_negative_threshold_is_rejected(ontology):
    with pytest.raises(CatalogError, match="rank_threshold"):
        load_request(_request(rank_threshold=-0.1), ontology)


def test_overrides_are_revalidated(table1_request):
    relaxed = with_overrides(table1_request, mu=2, threshold=0.1)
    assert (relaxed.mu, relaxed.rank_threshold) == (2, 0.1)
    with pytest.raises(CatalogError):
        with_overrides(table1_request, mu=4)


def test_request_set_and_single_request(ontology, camera_requests):
    assert [r.name for r in camera_requests] == [f"R{i}" for i in range(1, 9)]
    assert all(r.mu == 1 for r in camera_requests)
    assert camera_requests[3].rank_threshold is None
    single = load_requests(QOS_DATA_DIR / "table1_request.json", ontology)
    assert [r.name for r in single] == ["R"]


def test_duplicate_request_names(ontology):
    doc = {"requests": [_request(), copy.deepcopy(_request())]}
    with pytest.raises(CatalogError, match="duplicate request"):
        load_requests(doc, ontology)


def test_dump_request_round_trip(table1_request, ontology):
    assert load_request(dump_request(table1_request), ontology) == table1_request
