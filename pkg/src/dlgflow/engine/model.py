"""The trained dialog policy and its inference surface."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..compiler.dialogs import ActionTemplate, fill_template
from ..compiler.masks import ActionMask, allowed_templates
from ..entities import (
    EMPTY_MEMORY,
    EntityMemory,
    detect_entities,
    ground,
    match_option,
    remember,
)
from ..errors import ActionLoopError, EmptyMaskError, NonFiniteActivationError
from ..flow.model import EntityDef
from .featurizer import FeatureVector, Featurizer, featurize_turn
from .network import lstm_step, output_logits, softmax

MAX_ACTIONS_PER_TURN = 10


@dataclass
class Hyperparams:
    embedding_dim: int = 32
    hidden_size: int = 128
    learning_rate: float = 0.01
    max_epochs: int = 500
    clip_norm: float = 5.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {"embedding_dim": self.embedding_dim, "hidden_size": self.hidden_size,
                "learning_rate": self.learning_rate, "max_epochs": self.max_epochs,
                "clip_norm": self.clip_norm, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**d)


@dataclass
class PolicyModel:
    featurizer: Featurizer
    params: dict[str, np.ndarray]
    hyper: Hyperparams
    templates: list[ActionTemplate]
    masks: list[ActionMask]
    entities: list[EntityDef]
    version: int = 1

    @property
    def template_count(self) -> int:
        return len(self.templates)

    def template(self, template_id: int) -> ActionTemplate:
        return self.templates[template_id]


@dataclass(frozen=True)
class DialogState:
    memory: EntityMemory = EMPTY_MEMORY
    hidden: np.ndarray = None
    cell: np.ndarray = None
    last_action: int | None = None
    turn: int = 0
    done: bool = False

    @classmethod
    def fresh(cls, hidden_size: int) -> "DialogState":
        return cls(memory=EMPTY_MEMORY, hidden=np.zeros(hidden_size),
                   cell=np.zeros(hidden_size), last_action=None, turn=0, done=False)

    def summary(self) -> dict:
        return {"memory": self.memory.as_dict(), "last_action": self.last_action,
                "turn": self.turn, "done": self.done}


@dataclass(frozen=True)
class ActionRecord:
    template_id: int
    text: str
    probability: float
    distribution: tuple[float, ...]
    allowed: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"template_id": self.template_id, "text": self.text,
                "probability": self.probability,
                "distribution": list(self.distribution),
                "allowed": list(self.allowed)}


def forward(model: PolicyModel, features: FeatureVector,
            state: DialogState) -> tuple[np.ndarray, DialogState]:
    """One policy step: distribution over all templates plus the new state."""
    x = features.concat()
    if not np.all(np.isfinite(x)):
        raise NonFiniteActivationError("non-finite feature vector")
    h, c, _ = lstm_step(model.params, x, state.hidden, state.cell)
    probs = softmax(output_logits(model.params, h))
    return probs, replace(state, hidden=h, cell=c)


def apply_mask(distribution: np.ndarray, allowed: set[int]) -> np.ndarray:
    """Zero out masked actions and renormalize the rest."""
    if not allowed:
        raise EmptyMaskError("no action is allowed in this state")
    masked = np.zeros_like(distribution)
    idx = sorted(allowed)
    masked[idx] = distribution[idx]
    total = masked.sum()
    if total <= 0:
        raise EmptyMaskError("allowed actions carry no probability mass")
    return masked / total


def resolve_entities(model: PolicyModel, state: DialogState,
                     utterance: str) -> EntityMemory:
    """Detect and ground mentions; generalize free replies onto the pending
    question's options when direct detection comes up empty."""
    expected = None
    if state.last_action is not None:
        last = model.template(state.last_action)
        if last.awaits_user and last.entity:
            expected = last.entity
    mentions = detect_entities(utterance, model.entities, expected=expected)
    memory = ground(mentions, state.memory, state.turn, defs=model.entities)
    if (expected is not None and utterance.strip()
            and all(m.entity != expected for m in mentions)):
        ent = next((e for e in model.entities if e.name == expected), None)
        if ent is not None and ent.kind == "enum" and ent.values:
            matched = match_option(utterance,
                                   [(v.value, v.synonyms) for v in ent.values])
            if matched is not None:
                memory = remember(memory, expected, matched[0], state.turn,
                                  source="detected")
    return memory


def respond(model: PolicyModel, state: DialogState,
            utterance: str) -> tuple[list[ActionRecord], DialogState]:
    """Process one user turn: ground entities, then emit actions until the
    policy asks the user something or closes the dialog."""
    memory = resolve_entities(model, state, utterance)
    h, c = state.hidden, state.cell
    last_action = state.last_action
    actions: list[ActionRecord] = []
    while True:
        features = featurize_turn(model.featurizer, model.params["emb"],
                                  utterance, memory, last_action)
        x = features.concat()
        h, c, _ = lstm_step(model.params, x, h, c)
        probs = softmax(output_logits(model.params, h))
        allowed = allowed_templates(model.masks, memory)
        dist = apply_mask(probs, allowed)
        action_id = int(dist.argmax())
        template = model.template(action_id)
        actions.append(ActionRecord(
            template_id=action_id,
            text=fill_template(template, memory),
            probability=float(dist[action_id]),
            distribution=tuple(float(p) for p in dist),
            allowed=tuple(sorted(allowed)),
        ))
        last_action = action_id
        if template.awaits_user:
            done = False
            break
        if template.ends_dialog:
            done = True
            break
        if len(actions) >= MAX_ACTIONS_PER_TURN:
            raise ActionLoopError(
                f"{MAX_ACTIONS_PER_TURN} actions accumulated without awaiting input")
    new_state = DialogState(memory=memory, hidden=h, cell=c,
                            last_action=last_action, turn=state.turn + 1, done=done)
    return actions, new_state
