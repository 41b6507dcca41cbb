"""Catalog package: component/request models, constraint grammar and storage."""

from .constraints import ConstraintExpr, parse_constraint, parse_constraint_expr, render_constraint
from .models import Catalog, Component, Interface, MetricConstraint, Origin, Polarity, QoSProfile, Request
from .storage import (
    build_request,
    dump_catalog,
    dump_request,
    load_catalog,
    load_request,
    load_requests,
    with_overrides,
)

__all__ = [
    "ConstraintExpr",
    "parse_constraint",
    "parse_constraint_expr",
    "render_constraint",
    "Catalog",
    "Component",
    "Interface",
    "MetricConstraint",
    "Origin",
    "Polarity",
    "QoSProfile",
    "Request",
    "build_request",
    "dump_catalog",
    "dump_request",
    "load_catalog",
    "load_request",
    "load_requests",
    "with_overrides",
]
