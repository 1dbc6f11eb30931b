from __future__ import annotations

import json

from dlgflow.flow import parse_flow, validate_flow
from dlgflow.flow.model import (
    ALWAYS,
    Condition,
    DialogFlow,
    EntityDef,
    FlowEdge,
    FlowNode,
    OptionValue,
)


def _flow(nodes, edges, entities=(), start="a", name="t") -> DialogFlow:
    return DialogFlow(name=name, schema_version=1, start=start,
                      entities=tuple(entities), nodes=tuple(nodes),
                      edges=tuple(edges))


TARGET = EntityDef(name="target", kind="enum",
                   values=(OptionValue("app"), OptionValue("screen")))


def test_fonts_mini_is_clean(fonts_mini) -> None:
    assert validate_flow(fonts_mini) == []


def test_unreachable_node_reported() -> None:
    flow = _flow(
        [FlowNode("a", "message", text="hi"), FlowNode("x", "message", text="lost"),
         FlowNode("e", "end")],
        [FlowEdge("a", "e", ALWAYS), FlowEdge("x", "e", ALWAYS)])
    issues = [i for i in validate_flow(flow) if i.severity == "error"]
    assert [(i.code, i.location) for i in issues] == [("UNREACHABLE_NODE", "x")]


def test_duplicate_option_values_are_ambiguous() -> None:
    flow = _flow(
        [FlowNode("a", "question", text="app or screen?", entity="target"),
         FlowNode("b", "message", text="ok"), FlowNode("e", "end")],
        [FlowEdge("a", "b", Condition("option", "target", "app")),
         FlowEdge("a", "b", Condition("option", "target", "app")),
         FlowEdge("b", "e", ALWAYS)],
        entities=[TARGET])
    issues = validate_flow(flow)
    assert any(i.code == "AMBIGUOUS_EDGES" and i.location == "a" for i in issues)


def test_non_exclusive_message_edges_are_ambiguous() -> None:
    flow = _flow(
        [FlowNode("a", "message", text="hi"), FlowNode("b", "message", text="x"),
         FlowNode("c", "message", text="y"), FlowNode("e", "end")],
        [FlowEdge("a", "b", Condition("entity_present", "target")),
         FlowEdge("a", "c", Condition("entity_present", "target")),
         FlowEdge("b", "e", ALWAYS), FlowEdge("c", "e", ALWAYS)],
        entities=[TARGET])
    assert any(i.code == "AMBIGUOUS_EDGES" for i in validate_flow(flow))


def test_present_absent_split_is_exclusive() -> None:
    flow = _flow(
        [FlowNode("a", "message", text="hi"), FlowNode("b", "message", text="x"),
         FlowNode("c", "message", text="y"), FlowNode("e", "end")],
        [FlowEdge("a", "b", Condition("entity_present", "target")),
         FlowEdge("a", "c", Condition("entity_absent", "target")),
         FlowEdge("b", "e", ALWAYS), FlowEdge("c", "e", ALWAYS)],
        entities=[TARGET])
    assert [i for i in validate_flow(flow) if i.code == "AMBIGUOUS_EDGES"] == []


def test_question_feeding_end_is_rejected() -> None:
    flow = _flow(
        [FlowNode("a", "question", text="app or screen?", entity="target"),
         FlowNode("b", "message", text="ok"), FlowNode("e", "end")],
        [FlowEdge("a", "b", Condition("option", "target", "app")),
         FlowEdge("a", "e", Condition("option", "target", "screen")),
         FlowEdge("b", "e", ALWAYS)],
        entities=[TARGET])
    assert any(i.code == "QUESTION_TO_END" for i in validate_flow(flow))


def test_no_path_to_end_reported() -> None:
    flow = _flow(
        [FlowNode("a", "message", text="hi"), FlowNode("b", "message", text="loop"),
         FlowNode("e", "end")],
        [FlowEdge("a", "b", ALWAYS), FlowEdge("b", "b", ALWAYS)])
    codes = {i.code for i in validate_flow(flow)}
    assert "NO_PATH_TO_END" in codes
    assert "UNREACHABLE_NODE" in codes  # end node itself


def test_report_is_order_independent(fonts_mini_doc) -> None:
    doc = json.loads(fonts_mini_doc)
    doc["nodes"].append({"id": "x", "kind": "message", "text": "lost [nope]"})
    doc["edges"].append({"from": "x", "to": "done", "condition": {"kind": "always"}})
    forward = validate_flow(parse_flow(json.dumps(doc)))
    doc["nodes"].reverse()
    doc["edges"].reverse()
    backward = validate_flow(parse_flow(json.dumps(doc)))
    assert forward == backward
    assert [i.code for i in forward] == ["UNDECLARED_PLACEHOLDER", "UNREACHABLE_NODE"]


def test_enum_values_unique_case_insensitive() -> None:
    ent = EntityDef(name="t", kind="enum",
                    values=(OptionValue("App"), OptionValue("app")))
    flow = _flow(
        [FlowNode("a", "question", text="?", entity="t"),
         FlowNode("b", "message", text="ok"), FlowNode("e", "end")],
        [FlowEdge("a", "b", Condition("option", "t", "App")),
         FlowEdge("b", "e", ALWAYS)],
        entities=[ent])
    assert any(i.code == "DUPLICATE_OPTION_VALUE" for i in validate_flow(flow))
