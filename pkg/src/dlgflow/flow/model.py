"""Domain types for the rule-based dialog flow.

A flow is a finite state machine: nodes are system actions, edges carry the
conditions under which the conversation moves from one action to the next.
All types are frozen; operations elsewhere treat them as values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

NODE_KINDS = ("message", "question", "api", "end")
CONDITION_KINDS = ("always", "option", "entity_present", "entity_absent")
ENTITY_KINDS = ("enum", "open")

NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")

# `[entity]` substitutes, `[[` escapes a literal bracket
PLACEHOLDER_RE = re.compile(r"\[\[|\[([a-z][a-z0-9_]*)\]")


def placeholders(text: str) -> list[str]:
    """Entity names referenced as [name] in a template text, in order."""
    return [m.group(1) for m in PLACEHOLDER_RE.finditer(text) if m.group(1)]


@dataclass(frozen=True)
class OptionValue:
    value: str
    synonyms: tuple[str, ...] = ()


@dataclass(frozen=True)
class EntityDef:
    name: str
    kind: str  # enum | open
    values: tuple[OptionValue, ...] = ()

    def surface_forms(self, value: str) -> tuple[str, ...]:
        for v in self.values:
            if v.value == value:
                return (v.value, *v.synonyms)
        return (value,)


@dataclass(frozen=True)
class Condition:
    kind: str  # always | option | entity_present | entity_absent
    entity: str | None = None
    value: str | None = None

    def key(self) -> tuple:
        return (self.kind, self.entity or "", self.value or "")


ALWAYS = Condition(kind="always")


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: str  # message | question | api | end
    text: str | None = None
    entity: str | None = None
    api_name: str | None = None
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class FlowEdge:
    from_: str
    to: str
    condition: Condition

    def key(self) -> tuple:
        return (self.from_, self.to, *self.condition.key())


@dataclass(frozen=True)
class DialogFlow:
    name: str
    schema_version: int
    start: str
    entities: tuple[EntityDef, ...]
    nodes: tuple[FlowNode, ...]
    edges: tuple[FlowEdge, ...]

    _node_index: dict = field(default=None, repr=False, compare=False)

    def node(self, node_id: str) -> FlowNode:
        return self.nodes_by_id()[node_id]

    def nodes_by_id(self) -> dict[str, FlowNode]:
        if self._node_index is None:
            object.__setattr__(self, "_node_index", {n.id: n for n in self.nodes})
        return self._node_index

    def entity(self, name: str) -> EntityDef | None:
        for e in self.entities:
            if e.name == name:
                return e
        return None

    def outgoing(self, node_id: str) -> list[FlowEdge]:
        return sorted((e for e in self.edges if e.from_ == node_id),
                      key=FlowEdge.key)
