from .aggregate import aggregate_to_flow
from .dialogs import (
    ActionTemplate,
    SystemAction,
    TrainingDialog,
    Turn,
    UserTurn,
    derive_templates,
    fill_template,
    walks_to_training_dialogs,
)
from .masks import ActionMask, allowed_templates, derive_action_masks, empty_mask
from .walks import DEFAULT_MAX_CYCLE_VISITS, DEFAULT_MAX_WALKS, Walk, enumerate_walks

__all__ = [
    "ActionMask",
    "ActionTemplate",
    "DEFAULT_MAX_CYCLE_VISITS",
    "DEFAULT_MAX_WALKS",
    "SystemAction",
    "TrainingDialog",
    "Turn",
    "UserTurn",
    "Walk",
    "aggregate_to_flow",
    "allowed_templates",
    "derive_action_masks",
    "derive_templates",
    "empty_mask",
    "enumerate_walks",
    "fill_template",
    "walks_to_training_dialogs",
]
