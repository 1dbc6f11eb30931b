"""Action templates and the walk-to-training-dialog compiler."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..entities import EMPTY_MEMORY, EntityMemory, remember, substitute
from ..flow.model import DialogFlow, FlowNode
from .walks import Walk


@dataclass(frozen=True)
class ActionTemplate:
    id: int
    kind: str  # text | api
    awaits_user: bool
    text: str | None = None
    api_name: str | None = None
    args: tuple[str, ...] = ()
    entity: str | None = None  # entity a question template asks for
    ends_dialog: bool = False

    def identity(self) -> tuple:
        if self.kind == "api":
            return ("api", self.api_name, self.args)
        return ("text", self.text.strip(), self.awaits_user, self.entity)

    def to_dict(self) -> dict:
        d: dict = {"id": self.id, "kind": self.kind, "awaits_user": self.awaits_user,
                   "ends_dialog": self.ends_dialog}
        if self.kind == "text":
            d["text"] = self.text
        else:
            d["api_name"] = self.api_name
            d["args"] = list(self.args)
        if self.entity is not None:
            d["entity"] = self.entity
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ActionTemplate":
        return cls(id=d["id"], kind=d["kind"], awaits_user=d["awaits_user"],
                   text=d.get("text"), api_name=d.get("api_name"),
                   args=tuple(d.get("args", ())), entity=d.get("entity"),
                   ends_dialog=d.get("ends_dialog", False))


@dataclass(frozen=True)
class UserTurn:
    text: str
    mentions: tuple = ()  # of entities.Mention

    def to_dict(self) -> dict:
        return {"text": self.text,
                "mentions": [{"entity": m.entity, "start": m.start, "end": m.end,
                              "value": m.value} for m in self.mentions]}


@dataclass(frozen=True)
class SystemAction:
    template_id: int
    filled_text: str

    def to_dict(self) -> dict:
        return {"template_id": self.template_id, "filled_text": self.filled_text}


@dataclass(frozen=True)
class Turn:
    user: UserTurn | None
    system: tuple[SystemAction, ...]

    def to_dict(self) -> dict:
        return {"user": self.user.to_dict() if self.user else None,
                "system": [a.to_dict() for a in self.system]}


@dataclass(frozen=True)
class TrainingDialog:
    id: str
    turns: tuple[Turn, ...]
    source: str = "compiled"  # compiled | corrected | authored

    def to_dict(self) -> dict:
        return {"id": self.id, "source": self.source,
                "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingDialog":
        from ..entities import Mention

        turns = []
        for t in d["turns"]:
            user = None
            if t.get("user"):
                u = t["user"]
                mentions = tuple(
                    Mention(entity=m["entity"], start=m["start"], end=m["end"],
                            surface=u["text"][m["start"]:m["end"]], value=m["value"])
                    for m in u.get("mentions", ()))
                user = UserTurn(text=u["text"], mentions=mentions)
            system = tuple(SystemAction(template_id=a["template_id"],
                                        filled_text=a["filled_text"])
                           for a in t["system"])
            turns.append(Turn(user=user, system=system))
        return cls(id=d["id"], turns=tuple(turns), source=d.get("source", "compiled"))


def render_api_call(api_name: str, args: tuple[str, ...], memory: EntityMemory) -> str:
    parts = []
    for arg in args:
        value = memory.value(arg)
        if value is None:
            from ..errors import MissingEntityError
            raise MissingEntityError(f"api argument '{arg}' has no grounded value",
                                     entity=arg)
        parts.append(f"{arg}={value}")
    return f"{api_name}({', '.join(parts)})"


def fill_template(template: ActionTemplate, memory: EntityMemory) -> str:
    if template.kind == "api":
        return render_api_call(template.api_name, template.args, memory)
    return substitute(template.text, memory)


def derive_templates(flow: DialogFlow) -> tuple[list[ActionTemplate], dict[str, int]]:
    """Collapse flow nodes into the dense action-template catalog.

    Nodes with identical payload share one template; ids are assigned in
    canonical node order, so the catalog is deterministic for a given flow.
    """
    end_ids = {n.id for n in flow.nodes if n.kind == "end"}
    templates: list[ActionTemplate] = []
    by_identity: dict[tuple, int] = {}
    node_to_template: dict[str, int] = {}
    for node in sorted(flow.nodes, key=lambda n: n.id):
        if node.kind == "end":
            continue
        draft = _template_for_node(node)
        key = draft.identity()
        if key not in by_identity:
            by_identity[key] = len(templates)
            templates.append(replace(draft, id=len(templates)))
        tid = by_identity[key]
        node_to_template[node.id] = tid

    # a template ends the dialog only if every originating node always exits to end
    terminal: dict[int, bool] = {t.id: True for t in templates}
    for node in flow.nodes:
        if node.kind == "end":
            continue
        out = flow.outgoing(node.id)
        node_terminal = bool(out) and all(e.to in end_ids for e in out)
        tid = node_to_template[node.id]
        terminal[tid] = terminal[tid] and node_terminal
    templates = [replace(t, ends_dialog=terminal[t.id]) for t in templates]
    return templates, node_to_template


def _template_for_node(node: FlowNode) -> ActionTemplate:
    if node.kind == "api":
        return ActionTemplate(id=-1, kind="api", awaits_user=False,
                              api_name=node.api_name, args=node.args)
    return ActionTemplate(id=-1, kind="text", awaits_user=node.kind == "question",
                          text=node.text, entity=node.entity)


def walks_to_training_dialogs(flow: DialogFlow, walks: list[Walk],
                              synonyms_per_option: int = 0,
                              templates: list[ActionTemplate] | None = None,
                              node_to_template: dict[str, int] | None = None
                              ) -> list[TrainingDialog]:
    """One dialog per walk, plus synonym variants per option binding."""
    if templates is None or node_to_template is None:
        templates, node_to_template = derive_templates(flow)
    dialogs: list[TrainingDialog] = []
    for w_index, walk in enumerate(walks):
        base_turns = _walk_turns(flow, walk, node_to_template,
                                 [b[1] for b in walk.bindings])
        base_id = f"{flow.name}-w{w_index:03d}"
        dialogs.append(TrainingDialog(id=base_id, turns=base_turns, source="compiled"))
        if synonyms_per_option <= 0:
            continue
        for b_index, (entity, value) in enumerate(walk.bindings):
            ent = flow.entity(entity)
            if ent is None or ent.kind != "enum":
                continue
            synonyms = ()
            for opt in ent.values:
                if opt.value == value:
                    synonyms = opt.synonyms
                    break
            for s_index, synonym in enumerate(synonyms[:synonyms_per_option]):
                utterances = [b[1] for b in walk.bindings]
                utterances[b_index] = synonym
                turns = _walk_turns(flow, walk, node_to_template, utterances)
                dialogs.append(TrainingDialog(
                    id=f"{base_id}-b{b_index}s{s_index}", turns=turns,
                    source="compiled"))
    return dialogs


def _walk_turns(flow: DialogFlow, walk: Walk, node_to_template: dict[str, int],
                utterances: list[str]) -> tuple[Turn, ...]:
    from ..entities import Mention

    nodes = flow.nodes_by_id()
    turns: list[Turn] = []
    pending_user: UserTurn | None = None
    actions: list[SystemAction] = []
    memory = EMPTY_MEMORY
    binding_index = 0
    for node_id in walk.node_ids:
        node = nodes[node_id]
        if node.kind == "end":
            break
        tid = node_to_template[node_id]
        if node.kind == "api":
            filled = render_api_call(node.api_name, node.args, memory)
        else:
            filled = substitute(node.text, memory)
        actions.append(SystemAction(template_id=tid, filled_text=filled))
        if node.kind == "question":
            turns.append(Turn(user=pending_user, system=tuple(actions)))
            actions = []
            entity, value = walk.bindings[binding_index]
            utterance = utterances[binding_index]
            binding_index += 1
            mention = Mention(entity=entity, start=0, end=len(utterance),
                              surface=utterance, value=value)
            pending_user = UserTurn(text=utterance, mentions=(mention,))
            memory = remember(memory, entity, value, turn=len(turns), source="detected")
    turns.append(Turn(user=pending_user, system=tuple(actions)))
    return tuple(turns)
