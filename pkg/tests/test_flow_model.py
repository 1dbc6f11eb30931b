from __future__ import annotations

import json

import pytest

from dlgflow.errors import (
    FlowReferenceError,
    FlowSchemaError,
    FlowSyntaxError,
    InvalidFlowError,
)
from dlgflow.flow import parse_flow, serialize_flow, validate_flow

from .oracles import brute_force_walks, random_acyclic_flow

MINIMAL = {
    "schema_version": 1, "name": "minimal", "start": "m1",
    "entities": [],
    "nodes": [{"id": "m1", "kind": "message", "text": "Hi"},
              {"id": "e", "kind": "end"}],
    "edges": [{"from": "m1", "to": "e", "condition": {"kind": "always"}}],
}


def test_parse_minimal_flow() -> None:
    flow = parse_flow(json.dumps(MINIMAL))
    assert len(flow.nodes) == 2
    assert len(flow.edges) == 1
    assert flow.start == "m1"


def test_parse_fonts_mini(fonts_mini) -> None:
    assert fonts_mini.name == "fonts-mini"
    assert len(fonts_mini.nodes) == 8
    questions = [n for n in fonts_mini.nodes if n.kind == "question"]
    assert len(questions) == 2
    # four start-to-end paths through the two binary questions
    assert len(brute_force_walks(json.loads(serialize_flow(fonts_mini)))) == 4


def test_dangling_edge_reference_names_the_id() -> None:
    doc = dict(MINIMAL)
    doc["edges"] = [{"from": "m1", "to": "nope", "condition": {"kind": "always"}}]
    with pytest.raises(FlowReferenceError, match="nope"):
        parse_flow(json.dumps(doc))


def test_malformed_json_reports_line_and_column() -> None:
    with pytest.raises(FlowSyntaxError) as exc:
        parse_flow(b'{"schema_version": 1,\n  "name": oops}')
    assert exc.value.line == 2
    assert exc.value.column is not None


def test_unknown_field_rejected() -> None:
    doc = dict(MINIMAL)
    doc["surprise"] = True
    with pytest.raises(FlowSchemaError, match="surprise"):
        parse_flow(json.dumps(doc))


def test_wrong_type_rejected() -> None:
    doc = dict(MINIMAL)
    doc["name"] = 7
    with pytest.raises(FlowSchemaError, match="name"):
        parse_flow(json.dumps(doc))


def test_kind_specific_fields_enforced() -> None:
    doc = json.loads(json.dumps(MINIMAL))
    doc["nodes"][0].pop("text")
    with pytest.raises(FlowSchemaError, match="text"):
        parse_flow(json.dumps(doc))
    doc = json.loads(json.dumps(MINIMAL))
    doc["nodes"][1]["entity"] = "x"
    with pytest.raises(FlowSchemaError, match="entity"):
        parse_flow(json.dumps(doc))


def test_serialize_is_canonical_under_reordering(fonts_mini_doc) -> None:
    doc = json.loads(fonts_mini_doc)
    shuffled = dict(doc)
    shuffled["nodes"] = list(reversed(doc["nodes"]))
    shuffled["edges"] = list(reversed(doc["edges"]))
    shuffled["entities"] = list(reversed(doc["entities"]))
    a = serialize_flow(parse_flow(json.dumps(doc)))
    b = serialize_flow(parse_flow(json.dumps(shuffled)))
    assert a == b


def test_parse_serialize_identity_on_canonical_documents() -> None:
    for seed in range(30):
        doc = random_acyclic_flow(seed)
        flow = parse_flow(json.dumps(doc))
        if any(i.severity == "error" for i in validate_flow(flow)):
            continue
        canonical = serialize_flow(flow)
        again = serialize_flow(parse_flow(canonical))
        assert canonical == again, f"seed {seed}"


def test_serialize_refuses_invalid_flow() -> None:
    doc = json.loads(json.dumps(MINIMAL))
    doc["nodes"].append({"id": "orphan", "kind": "message", "text": "lost"})
    doc["edges"].append({"from": "orphan", "to": "e",
                         "condition": {"kind": "always"}})
    flow = parse_flow(json.dumps(doc))
    with pytest.raises(InvalidFlowError):
        serialize_flow(flow)


def test_placeholder_must_name_declared_entity() -> None:
    doc = json.loads(json.dumps(MINIMAL))
    doc["nodes"][0]["text"] = "the weather of [city]?"
    flow = parse_flow(json.dumps(doc))
    issues = validate_flow(flow)
    assert any(i.code == "UNDECLARED_PLACEHOLDER" for i in issues)
