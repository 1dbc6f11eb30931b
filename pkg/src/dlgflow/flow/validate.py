"""Semantic validation of dialog flows.

Problems are reported, never raised; an empty report means the flow is safe
input for every compiler operation. Entries are ordered by (location, code)
so reports are stable regardless of input ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import NAME_RE, Condition, DialogFlow, placeholders


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # error | warning
    code: str
    location: str
    message: str


def _issue(code: str, location: str, message: str, severity: str = "error") -> ValidationIssue:
    return ValidationIssue(severity=severity, code=code, location=location, message=message)


def _mutually_exclusive(a: Condition, b: Condition) -> bool:
    """True when a and b can never both hold in one dialog state."""
    if a.kind == "always" or b.kind == "always":
        return False
    if a.entity != b.entity:
        return False
    kinds = {a.kind, b.kind}
    if kinds == {"option"}:
        return a.value != b.value
    if kinds == {"entity_present", "entity_absent"}:
        return True
    if kinds == {"option", "entity_absent"}:
        return True
    return False


def validate_flow(flow: DialogFlow) -> list[ValidationIssue]:
    issues: list[ValidationIssue] = []
    entity_defs = {e.name: e for e in flow.entities}

    for ent in flow.entities:
        if not NAME_RE.match(ent.name):
            issues.append(_issue("BAD_NAME", ent.name,
                                 f"entity name '{ent.name}' must match [a-z][a-z0-9_]*"))
        seen: set[str] = set()
        for val in ent.values:
            low = val.value.lower()
            if low in seen:
                issues.append(_issue("DUPLICATE_OPTION_VALUE", ent.name,
                                     f"enum value '{val.value}' declared twice"))
            seen.add(low)

    ids = [n.id for n in flow.nodes]
    known = set(ids)
    for nid in sorted({i for i in ids if ids.count(i) > 1}):
        issues.append(_issue("DUPLICATE_NODE_ID", nid, f"node id '{nid}' declared twice"))
    if flow.start not in known:
        issues.append(_issue("DANGLING_START", flow.start,
                             f"start references unknown node '{flow.start}'"))

    outgoing: dict[str, list] = {nid: [] for nid in known}
    for edge in flow.edges:
        loc = f"{edge.from_}->{edge.to}"
        missing = [p for p in (edge.from_, edge.to) if p not in known]
        for p in missing:
            issues.append(_issue("DANGLING_EDGE_ENDPOINT", loc,
                                 f"edge endpoint '{p}' is not a node"))
        cond = edge.condition
        if cond.entity is not None and cond.entity not in entity_defs:
            issues.append(_issue("UNKNOWN_ENTITY", loc,
                                 f"condition references undeclared entity '{cond.entity}'"))
        elif cond.kind == "option":
            ent = entity_defs[cond.entity]
            if ent.kind != "enum" or cond.value not in {v.value for v in ent.values}:
                issues.append(_issue("OPTION_VALUE_UNDECLARED", loc,
                                     f"'{cond.value}' is not a declared value of "
                                     f"entity '{cond.entity}'"))
        if not missing:
            outgoing[edge.from_].append(edge)

    for node in flow.nodes:
        out = outgoing.get(node.id, [])
        if node.kind == "end":
            if out:
                issues.append(_issue("END_WITH_OUTGOING", node.id,
                                     "end nodes take no outgoing edges"))
            continue
        if not out:
            issues.append(_issue("MISSING_OUTGOING_EDGE", node.id,
                                 f"node '{node.id}' has no outgoing edge"))
        if node.kind in ("message", "question") and node.text is not None:
            for ph in placeholders(node.text):
                if ph not in entity_defs:
                    issues.append(_issue("UNDECLARED_PLACEHOLDER", node.id,
                                         f"placeholder [{ph}] names an undeclared entity"))
        if node.kind == "question":
            issues.extend(_check_question(node, out, entity_defs))
        else:
            issues.extend(_check_exclusive(node.id, out))

    issues.extend(_check_reachability(flow, known, outgoing))

    used = {n.entity for n in flow.nodes if n.entity}
    used |= {a for n in flow.nodes for a in n.args}
    used |= {e.condition.entity for e in flow.edges if e.condition.entity}
    used |= {ph for n in flow.nodes if n.text for ph in placeholders(n.text)}
    for ent in flow.entities:
        if ent.name not in used:
            issues.append(_issue("UNUSED_ENTITY", ent.name,
                                 f"entity '{ent.name}' is never referenced",
                                 severity="warning"))

    return sorted(issues, key=lambda p: (p.location, p.code, p.message))


def _check_question(node, out, entity_defs) -> list[ValidationIssue]:
    issues = []
    ent = entity_defs.get(node.entity)
    if ent is None:
        issues.append(_issue("UNKNOWN_ENTITY", node.id,
                             f"question asks for undeclared entity '{node.entity}'"))
        return issues
    options = [e for e in out if e.condition.kind == "option"]
    always = [e for e in out if e.condition.kind == "always"]
    other = [e for e in out if e.condition.kind not in ("option", "always")]
    if other or (options and always):
        issues.append(_issue("AMBIGUOUS_EDGES", node.id,
                             "question edges must be all options on the asked entity, "
                             "or a single always edge"))
    if ent.kind == "enum":
        if not options:
            issues.append(_issue("QUESTION_WITHOUT_OPTIONS", node.id,
                                 f"question '{node.id}' has no option edge for "
                                 f"entity '{node.entity}'"))
        seen: set[str] = set()
        for e in options:
            if e.condition.entity != node.entity:
                issues.append(_issue("AMBIGUOUS_EDGES", node.id,
                                     f"option edge conditions on '{e.condition.entity}' "
                                     f"but the question asks for '{node.entity}'"))
            elif e.condition.value in seen:
                issues.append(_issue("AMBIGUOUS_EDGES", node.id,
                                     f"two option edges carry the value "
                                     f"'{e.condition.value}'"))
            else:
                seen.add(e.condition.value)
    else:  # open entity: the reply is free text, only an unconditional edge works
        if not always:
            issues.append(_issue("QUESTION_WITHOUT_OPTIONS", node.id,
                                 f"open question '{node.id}' needs an always edge"))
        if len(always) > 1 or options:
            issues.append(_issue("AMBIGUOUS_EDGES", node.id,
                                 "open question takes exactly one always edge"))
    return issues


def _check_exclusive(node_id: str, out) -> list[ValidationIssue]:
    issues = []
    conds = [e.condition for e in out]
    if sum(1 for c in conds if c.kind == "always") > 1:
        issues.append(_issue("AMBIGUOUS_EDGES", node_id, "more than one always edge"))
    elif any(c.kind == "always" for c in conds) and len(conds) > 1:
        issues.append(_issue("AMBIGUOUS_EDGES", node_id,
                             "an always edge cannot coexist with conditioned edges"))
    else:
        for i in range(len(conds)):
            for j in range(i + 1, len(conds)):
                if not _mutually_exclusive(conds[i], conds[j]):
                    issues.append(_issue("AMBIGUOUS_EDGES", node_id,
                                         "outgoing conditions are not mutually exclusive"))
                    return issues
    return issues


def _check_reachability(flow, known, outgoing) -> list[ValidationIssue]:
    issues = []
    if flow.start not in known:
        return issues
    nodes_by_id = {n.id: n for n in flow.nodes}

    reached = {flow.start}
    frontier = [flow.start]
    while frontier:
        for edge in outgoing.get(frontier.pop(), []):
            if edge.to not in reached:
                reached.add(edge.to)
                frontier.append(edge.to)
    for nid in sorted(known - reached):
        issues.append(_issue("UNREACHABLE_NODE", nid,
                             f"node '{nid}' is unreachable from start"))

    ends = {n.id for n in flow.nodes if n.kind == "end"}
    can_end = set(ends)
    changed = True
    while changed:
        changed = False
        for nid in known:
            if nid in can_end:
                continue
            if any(e.to in can_end for e in outgoing.get(nid, [])):
                can_end.add(nid)
                changed = True
    for nid in sorted(known - can_end):
        issues.append(_issue("NO_PATH_TO_END", nid,
                             f"no end node is reachable from '{nid}'"))

    for edge in flow.edges:
        src = nodes_by_id.get(edge.from_)
        dst = nodes_by_id.get(edge.to)
        if src and dst and src.kind == "question" and dst.kind == "end":
            issues.append(_issue("QUESTION_TO_END", edge.from_,
                                 "a question must be answered and responded to "
                                 "before the dialog ends"))
    return issues
