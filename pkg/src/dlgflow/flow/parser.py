"""Parse and serialize flow documents.

The wire format is UTF-8 JSON. Parsing is strict: unknown fields, wrong
types, and dangling references are errors, so a parsed flow is structurally
sound. `serialize_flow` emits the canonical form (fixed key order, nodes
sorted by id, edges by (from, to, condition), entities by name), and
parse(serialize(f)) == f.
"""

from __future__ import annotations

import json

from ..errors import FlowReferenceError, FlowSchemaError, FlowSyntaxError, InvalidFlowError
from .model import (
    CONDITION_KINDS,
    ENTITY_KINDS,
    NODE_KINDS,
    Condition,
    DialogFlow,
    EntityDef,
    FlowEdge,
    FlowNode,
    OptionValue,
)


def _require(obj: dict, key: str, typ, where: str):
    if key not in obj:
        raise FlowSchemaError(f"{where}: missing field '{key}'")
    val = obj[key]
    if not isinstance(val, typ):
        raise FlowSchemaError(f"{where}: field '{key}' has wrong type "
                              f"(expected {typ.__name__}, got {type(val).__name__})")
    return val


def _no_extras(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise FlowSchemaError(f"{where}: unknown field '{sorted(extra)[0]}'")


def _str_list(val, where: str) -> tuple[str, ...]:
    if not isinstance(val, list) or not all(isinstance(s, str) for s in val):
        raise FlowSchemaError(f"{where}: expected a list of strings")
    return tuple(val)


def _parse_entity(obj, i: int) -> EntityDef:
    where = f"entities[{i}]"
    if not isinstance(obj, dict):
        raise FlowSchemaError(f"{where}: expected an object")
    _no_extras(obj, {"name", "kind", "values"}, where)
    name = _require(obj, "name", str, where)
    kind = _require(obj, "kind", str, where)
    if kind not in ENTITY_KINDS:
        raise FlowSchemaError(f"{where}: unknown entity kind '{kind}'")
    values = []
    if kind == "enum":
        raw = _require(obj, "values", list, where)
        for j, v in enumerate(raw):
            vw = f"{where}.values[{j}]"
            if not isinstance(v, dict):
                raise FlowSchemaError(f"{vw}: expected an object")
            _no_extras(v, {"value", "synonyms"}, vw)
            values.append(OptionValue(
                value=_require(v, "value", str, vw),
                synonyms=_str_list(_require(v, "synonyms", list, vw), vw),
            ))
    elif "values" in obj and obj["values"]:
        raise FlowSchemaError(f"{where}: open entities carry no values")
    return EntityDef(name=name, kind=kind, values=tuple(values))


def _parse_node(obj, i: int) -> FlowNode:
    where = f"nodes[{i}]"
    if not isinstance(obj, dict):
        raise FlowSchemaError(f"{where}: expected an object")
    _no_extras(obj, {"id", "kind", "text", "entity", "api_name", "args"}, where)
    nid = _require(obj, "id", str, where)
    kind = _require(obj, "kind", str, where)
    if kind not in NODE_KINDS:
        raise FlowSchemaError(f"{where}: unknown node kind '{kind}'")
    text = entity = api_name = None
    args: tuple[str, ...] = ()
    if kind in ("message", "question"):
        text = _require(obj, "text", str, where)
    if kind == "question":
        entity = _require(obj, "entity", str, where)
    if kind == "api":
        api_name = _require(obj, "api_name", str, where)
        args = _str_list(_require(obj, "args", list, where), where)
    for forbidden, label in ((text is None and "text" in obj, "text"),
                             (entity is None and "entity" in obj, "entity"),
                             (api_name is None and "api_name" in obj, "api_name"),
                             (kind != "api" and "args" in obj, "args")):
        if forbidden:
            raise FlowSchemaError(f"{where}: field '{label}' not allowed on a {kind} node")
    return FlowNode(id=nid, kind=kind, text=text, entity=entity,
                    api_name=api_name, args=args)


def _parse_condition(obj, where: str) -> Condition:
    if not isinstance(obj, dict):
        raise FlowSchemaError(f"{where}: expected an object")
    _no_extras(obj, {"kind", "entity", "value"}, where)
    kind = _require(obj, "kind", str, where)
    if kind not in CONDITION_KINDS:
        raise FlowSchemaError(f"{where}: unknown condition kind '{kind}'")
    entity = value = None
    if kind != "always":
        entity = _require(obj, "entity", str, where)
    if kind == "option":
        value = _require(obj, "value", str, where)
    if kind == "always" and ("entity" in obj or "value" in obj):
        raise FlowSchemaError(f"{where}: always conditions carry no entity/value")
    if kind in ("entity_present", "entity_absent") and "value" in obj:
        raise FlowSchemaError(f"{where}: field 'value' only allowed on option conditions")
    return Condition(kind=kind, entity=entity, value=value)


def _parse_edge(obj, i: int) -> FlowEdge:
    where = f"edges[{i}]"
    if not isinstance(obj, dict):
        raise FlowSchemaError(f"{where}: expected an object")
    _no_extras(obj, {"from", "to", "condition"}, where)
    return FlowEdge(
        from_=_require(obj, "from", str, where),
        to=_require(obj, "to", str, where),
        condition=_parse_condition(_require(obj, "condition", dict, where),
                                   f"{where}.condition"),
    )


def parse_flow(data: bytes | str) -> DialogFlow:
    """Parse a flow document; raises on malformed syntax, schema, or references."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FlowSyntaxError(f"document is not valid UTF-8: {exc}") from exc
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FlowSyntaxError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: "
                              f"{exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(raw, dict):
        raise FlowSchemaError("document root must be an object")
    _no_extras(raw, {"schema_version", "name", "start", "entities", "nodes", "edges"},
               "document")
    version = _require(raw, "schema_version", int, "document")
    if version != 1:
        raise FlowSchemaError(f"unsupported schema_version {version}")
    flow = DialogFlow(
        name=_require(raw, "name", str, "document"),
        schema_version=version,
        start=_require(raw, "start", str, "document"),
        entities=tuple(_parse_entity(e, i)
                       for i, e in enumerate(_require(raw, "entities", list, "document"))),
        nodes=tuple(_parse_node(n, i)
                    for i, n in enumerate(_require(raw, "nodes", list, "document"))),
        edges=tuple(_parse_edge(e, i)
                    for i, e in enumerate(_require(raw, "edges", list, "document"))),
    )
    _check_references(flow)
    return flow


def _check_references(flow: DialogFlow) -> None:
    ids = [n.id for n in flow.nodes]
    dup = {i for i in ids if ids.count(i) > 1}
    if dup:
        raise FlowReferenceError(f"duplicate node id '{sorted(dup)[0]}'")
    known = set(ids)
    entity_names = {e.name for e in flow.entities}
    if flow.start not in known:
        raise FlowReferenceError(f"start references unknown node '{flow.start}'")
    for node in flow.nodes:
        if node.entity and node.entity not in entity_names:
            raise FlowReferenceError(
                f"node '{node.id}' references unknown entity '{node.entity}'")
        for arg in node.args:
            if arg not in entity_names:
                raise FlowReferenceError(
                    f"node '{node.id}' references unknown entity '{arg}'")
    for edge in flow.edges:
        for endpoint in (edge.from_, edge.to):
            if endpoint not in known:
                raise FlowReferenceError(f"edge references unknown node '{endpoint}'")
        if edge.condition.entity and edge.condition.entity not in entity_names:
            raise FlowReferenceError(
                f"edge {edge.from_}->{edge.to} references unknown entity "
                f"'{edge.condition.entity}'")


def flow_to_dict(flow: DialogFlow) -> dict:
    """Canonical plain-dict form of a flow (sorted nodes/edges/entities)."""
    entities = []
    for e in sorted(flow.entities, key=lambda x: x.name):
        item: dict = {"name": e.name, "kind": e.kind}
        if e.kind == "enum":
            item["values"] = [{"value": v.value, "synonyms": list(v.synonyms)}
                              for v in e.values]
        entities.append(item)
    nodes = []
    for n in sorted(flow.nodes, key=lambda x: x.id):
        item = {"id": n.id, "kind": n.kind}
        if n.text is not None:
            item["text"] = n.text
        if n.entity is not None:
            item["entity"] = n.entity
        if n.api_name is not None:
            item["api_name"] = n.api_name
            item["args"] = list(n.args)
        nodes.append(item)
    edges = []
    for e in sorted(flow.edges, key=FlowEdge.key):
        cond: dict = {"kind": e.condition.kind}
        if e.condition.entity is not None:
            cond["entity"] = e.condition.entity
        if e.condition.value is not None:
            cond["value"] = e.condition.value
        edges.append({"from": e.from_, "to": e.to, "condition": cond})
    return {
        "schema_version": flow.schema_version,
        "name": flow.name,
        "start": flow.start,
        "entities": entities,
        "nodes": nodes,
        "edges": edges,
    }


def serialize_flow(flow: DialogFlow) -> bytes:
    """Canonical UTF-8 serialization; refuses flows that fail validation."""
    from .validate import validate_flow

    problems = [p for p in validate_flow(flow) if p.severity == "error"]
    if problems:
        raise InvalidFlowError(
            f"flow has {len(problems)} validation error(s): "
            + "; ".join(f"{p.code}@{p.location}" for p in problems[:5]))
    return (json.dumps(flow_to_dict(flow), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
