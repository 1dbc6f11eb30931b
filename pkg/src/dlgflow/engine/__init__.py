from .featurizer import FeatureVector, Featurizer, build_featurizer, featurize_turn
from .model import (
    ActionRecord,
    DialogState,
    Hyperparams,
    PolicyModel,
    apply_mask,
    forward,
    respond,
)
from .serialize import load_model, save_model
from .training import gradient_check, replay_dialog_actions, train

__all__ = [
    "ActionRecord",
    "DialogState",
    "FeatureVector",
    "Featurizer",
    "Hyperparams",
    "PolicyModel",
    "apply_mask",
    "build_featurizer",
    "featurize_turn",
    "forward",
    "gradient_check",
    "load_model",
    "replay_dialog_actions",
    "respond",
    "save_model",
    "train",
]
