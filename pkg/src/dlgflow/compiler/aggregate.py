"""Aggregate training dialogs back into a dialog flow.

Dialogs are folded into a prefix tree keyed by system-template sequence and
the user's option bindings; nodes with the same template and the same
outgoing signature are then merged to a fixpoint. The contract is walk-set
equivalence with the source flow, not graph isomorphism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InconsistentDialogsError
from ..flow.model import ALWAYS, Condition, DialogFlow, EntityDef, FlowEdge, FlowNode
from .dialogs import ActionTemplate, TrainingDialog

_CHAIN = ("chain",)


def walk_signatures(flow: DialogFlow, walks,
                    catalog: list[ActionTemplate]) -> set[tuple]:
    """Walks as (template-id sequence, binding sequence) pairs.

    Template ids are resolved through `catalog` by identity, so two flows
    can be compared even when their node ids differ.
    """
    from .dialogs import derive_templates

    local_templates, node_to_template = derive_templates(flow)
    ident_to_id = {t.identity(): t.id for t in catalog}
    local_to_catalog = {t.id: ident_to_id[t.identity()] for t in local_templates}
    nodes = flow.nodes_by_id()
    out: set[tuple] = set()
    for walk in walks:
        seq = tuple(local_to_catalog[node_to_template[n]]
                    for n in walk.node_ids if nodes[n].kind != "end")
        out.add((seq, walk.bindings))
    return out


@dataclass
class _TrieNode:
    template_id: int
    first_dialog: str
    children: dict[tuple, "_TrieNode"] = field(default_factory=dict)
    ends: bool = False


def aggregate_to_flow(dialogs: list[TrainingDialog],
                      templates: list[ActionTemplate],
                      entities: list[EntityDef],
                      name: str = "aggregated") -> DialogFlow:
    if not dialogs:
        raise ValueError("cannot aggregate an empty dialog list")
    catalog = {t.id: t for t in templates}
    root = _TrieNode(template_id=-1, first_dialog=dialogs[0].id)
    for dialog in dialogs:
        _insert(root, dialog, catalog)
    _check_terminals(root)
    classes = _merge_classes(root)
    return _build_flow(root, classes, catalog, entities, name)


def _insert(root: _TrieNode, dialog: TrainingDialog,
            catalog: dict[int, ActionTemplate]) -> None:
    cur = root
    key: tuple = ("root",)
    for turn in dialog.turns:
        if turn.user is not None:
            awaiting = catalog.get(cur.template_id)
            if awaiting is None or not awaiting.awaits_user:
                raise InconsistentDialogsError(
                    f"dialog '{dialog.id}' has a user turn where no question "
                    f"is pending", dialog_ids=[dialog.id])
            value = None
            for mention in turn.user.mentions:
                if mention.entity == awaiting.entity:
                    value = mention.value
                    break
            if value is None and turn.user.mentions:
                value = turn.user.mentions[0].value
            key = ("usr", value if value is not None else turn.user.text)
        for action in turn.system:
            child = cur.children.get(key)
            if child is None:
                child = _TrieNode(template_id=action.template_id,
                                  first_dialog=dialog.id)
                cur.children[key] = child
            elif child.template_id != action.template_id:
                raise InconsistentDialogsError(
                    "dialogs diverge in system action without a distinguishing "
                    f"user input: '{child.first_dialog}' vs '{dialog.id}'",
                    dialog_ids=[child.first_dialog, dialog.id])
            cur = child
            key = _CHAIN
    cur.ends = True


def _check_terminals(root: _TrieNode) -> None:
    stack = [root]
    while stack:
        node = stack.pop()
        if node.ends and node.children:
            raise InconsistentDialogsError(
                f"one dialog ends at an action where another continues "
                f"(near '{node.first_dialog}')", dialog_ids=[node.first_dialog])
        stack.extend(node.children.values())


def _merge_classes(root: _TrieNode) -> dict[int, int]:
    """Partition trie nodes into equivalence classes by (template, signature)."""
    nodes: list[_TrieNode] = []
    stack = [root]
    while stack:
        node = stack.pop()
        nodes.append(node)
        stack.extend(node.children.values())
    cls: dict[int, int] = {id(n): 0 for n in nodes}
    while True:
        signatures: dict[tuple, int] = {}
        new_cls: dict[int, int] = {}
        for node in nodes:
            sig = (node.template_id, node.ends,
                   frozenset((key, cls[id(child)])
                             for key, child in node.children.items()))
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_cls[id(node)] = signatures[sig]
        if new_cls == cls:
            return cls
        cls = new_cls


def _build_flow(root: _TrieNode, cls: dict[int, int],
                catalog: dict[int, ActionTemplate],
                entities: list[EntityDef], name: str) -> DialogFlow:
    entity_kinds = {e.name: e.kind for e in entities}
    rep: dict[int, _TrieNode] = {}
    order: list[int] = []
    queue = [root.children[("root",)]]
    while queue:
        node = queue.pop(0)
        c = cls[id(node)]
        if c in rep:
            continue
        rep[c] = node
        order.append(c)
        for key in sorted(node.children, key=str):
            queue.append(node.children[key])

    node_ids = {c: f"n{i}" for i, c in enumerate(order)}
    flow_nodes: list[FlowNode] = []
    flow_edges: list[FlowEdge] = []
    needs_end = False

    for c in order:
        node = rep[c]
        template = catalog[node.template_id]
        nid = node_ids[c]
        if template.kind == "api":
            flow_nodes.append(FlowNode(id=nid, kind="api",
                                       api_name=template.api_name,
                                       args=template.args))
        elif template.awaits_user:
            flow_nodes.append(FlowNode(id=nid, kind="question",
                                       text=template.text, entity=template.entity))
        else:
            flow_nodes.append(FlowNode(id=nid, kind="message", text=template.text))
        if node.ends:
            needs_end = True
            flow_edges.append(FlowEdge(from_=nid, to="end", condition=ALWAYS))
            continue
        for key in sorted(node.children, key=str):
            child = node.children[key]
            target = node_ids[cls[id(child)]]
            if key == _CHAIN or key == ("root",):
                condition = ALWAYS
            else:
                _, value = key
                if entity_kinds.get(template.entity) == "open":
                    condition = ALWAYS
                else:
                    condition = Condition(kind="option", entity=template.entity,
                                          value=value)
            flow_edges.append(FlowEdge(from_=nid, to=target, condition=condition))

    if needs_end:
        flow_nodes.append(FlowNode(id="end", kind="end"))
    start = node_ids[cls[id(root.children[("root",)])]]
    return DialogFlow(name=name, schema_version=1, start=start,
                      entities=tuple(entities), nodes=tuple(flow_nodes),
                      edges=tuple(flow_edges))
