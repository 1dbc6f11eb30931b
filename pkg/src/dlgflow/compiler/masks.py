"""Derive action masks from the conditions guarding a flow's edges.

For every template we compute the entity conditions that hold on *every*
path into its originating nodes (a must-analysis over the flow graph), so a
mask can never forbid an action the rule-based flow could take. Templates
with placeholders or api arguments additionally require those entities
present, which keeps substitution total at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..entities import EntityMemory
from ..flow.model import DialogFlow, placeholders
from .dialogs import ActionTemplate

# atoms: ("present", entity) | ("absent", entity) | ("value", entity, value)


@dataclass(frozen=True)
class ActionMask:
    template_id: int
    requires_present: frozenset[str] = frozenset()
    requires_absent: frozenset[str] = frozenset()
    requires_values: frozenset[tuple[str, str]] = frozenset()

    def allows(self, memory: EntityMemory) -> bool:
        names = memory.names()
        if not self.requires_present <= names:
            return False
        if self.requires_absent & names:
            return False
        return all(memory.value(e) == v for e, v in self.requires_values)

    def to_dict(self) -> dict:
        return {"template_id": self.template_id,
                "requires_present": sorted(self.requires_present),
                "requires_absent": sorted(self.requires_absent),
                "requires_values": sorted(list(p) for p in self.requires_values)}

    @classmethod
    def from_dict(cls, d: dict) -> "ActionMask":
        return cls(template_id=d["template_id"],
                   requires_present=frozenset(d.get("requires_present", ())),
                   requires_absent=frozenset(d.get("requires_absent", ())),
                   requires_values=frozenset((e, v) for e, v in
                                             d.get("requires_values", ())))


def empty_mask(template_id: int) -> ActionMask:
    return ActionMask(template_id=template_id)


def _edge_atoms(condition) -> frozenset:
    if condition.kind == "option":
        return frozenset({("value", condition.entity, condition.value),
                          ("present", condition.entity)})
    if condition.kind == "entity_present":
        return frozenset({("present", condition.entity)})
    if condition.kind == "entity_absent":
        return frozenset({("absent", condition.entity)})
    return frozenset()


def _node_transfer(node, state: frozenset) -> frozenset:
    if node.kind != "question" or node.entity is None:
        return state
    entity = node.entity
    kept = {a for a in state
            if not (a[1] == entity and a[0] in ("absent", "value"))}
    kept.add(("present", entity))
    return frozenset(kept)


def derive_action_masks(flow: DialogFlow,
                        templates: list[ActionTemplate] | None = None,
                        node_to_template: dict[str, int] | None = None
                        ) -> list[ActionMask]:
    """One mask per template, ordered by template id."""
    from .dialogs import derive_templates

    if templates is None or node_to_template is None:
        templates, node_to_template = derive_templates(flow)

    universe: set = set()
    for ent in flow.entities:
        universe.add(("present", ent.name))
        universe.add(("absent", ent.name))
        for val in ent.values:
            universe.add(("value", ent.name, val.value))
    top = frozenset(universe)

    nodes = flow.nodes_by_id()
    incoming: dict[str, list] = {nid: [] for nid in nodes}
    for edge in flow.edges:
        incoming[edge.to].append(edge)

    state: dict[str, frozenset] = {nid: top for nid in nodes}
    state[flow.start] = frozenset()
    changed = True
    while changed:
        changed = False
        for nid in sorted(nodes):
            if nid == flow.start:
                continue
            edges = incoming[nid]
            if not edges:
                continue
            new = None
            for edge in edges:
                contrib = _node_transfer(nodes[edge.from_], state[edge.from_])
                contrib = contrib | _edge_atoms(edge.condition)
                new = contrib if new is None else (new & contrib)
            if new != state[nid]:
                state[nid] = new
                changed = True

    per_template: dict[int, frozenset | None] = {t.id: None for t in templates}
    for nid, tid in node_to_template.items():
        s = state[nid]
        per_template[tid] = s if per_template[tid] is None else (per_template[tid] & s)

    masks: list[ActionMask] = []
    for template in templates:
        atoms = per_template.get(template.id) or frozenset()
        present = {a[1] for a in atoms if a[0] == "present"}
        absent = {a[1] for a in atoms if a[0] == "absent"}
        values = {(a[1], a[2]) for a in atoms if a[0] == "value"}
        if template.kind == "text":
            present |= set(placeholders(template.text))
        else:
            present |= set(template.args)
        masks.append(ActionMask(template_id=template.id,
                                requires_present=frozenset(present),
                                requires_absent=frozenset(absent),
                                requires_values=frozenset(values)))
    return masks


def allowed_templates(masks: list[ActionMask], memory: EntityMemory) -> set[int]:
    return {m.template_id for m in masks if m.allows(memory)}
