from __future__ import annotations

import pytest

from dlgflow.compiler import (
    derive_action_masks,
    derive_templates,
    enumerate_walks,
    walks_to_training_dialogs,
)
from dlgflow.compiler.dialogs import ActionTemplate
from dlgflow.compiler.masks import ActionMask
from dlgflow.engine import DialogState, Hyperparams, PolicyModel, respond, train
from dlgflow.engine.featurizer import Featurizer
from dlgflow.engine.network import param_shapes
from dlgflow.errors import ActionLoopError, EmptyMaskError

from .conftest import template_id_by_text


def _fresh(model: PolicyModel) -> DialogState:
    return DialogState.fresh(model.hyper.hidden_size)


def test_screen_request_reaches_solved_question(fonts_mini_model,
                                                fonts_mini_compiled) -> None:
    model, _ = fonts_mini_model
    templates = fonts_mini_compiled["templates"]
    opener, state = respond(model, _fresh(model), "")
    assert [a.template_id for a in opener] == [
        template_id_by_text(templates, "How can I help"),
        template_id_by_text(templates, "Would you like")]
    actions, state = respond(model, state, "size of text on screen")
    assert actions[-1].template_id == template_id_by_text(templates, "Did that solve")
    assert actions[-1].text == "Did that solve your problem?"
    assert actions[0].template_id == template_id_by_text(templates,
                                                         "Change the size of text")
    assert not state.done


def test_full_conversation_reaches_done(fonts_mini_model) -> None:
    model, _ = fonts_mini_model
    _, state = respond(model, _fresh(model), "")
    _, state = respond(model, state, "app")
    actions, state = respond(model, state, "yes")
    assert state.done
    assert actions[-1].text == "Great! Glad that helped."


def test_unmatched_reply_reasks_the_question(display_help) -> None:
    walks = enumerate_walks(display_help)
    templates, node_to_template = derive_templates(display_help)
    masks = derive_action_masks(display_help, templates, node_to_template)
    dialogs = walks_to_training_dialogs(display_help, walks, 0, templates,
                                        node_to_template)
    model, _ = train(dialogs, templates, masks, list(display_help.entities),
                     Hyperparams(seed=7))
    ask_target = template_id_by_text(templates, "Would you like")
    _, state = respond(model, _fresh(model), "")
    actions, state = respond(model, state, "the text on my monitor is tiny")
    # nothing grounds the paraphrase, so every fix stays masked out
    assert [a.template_id for a in actions] == [ask_target]
    assert state.memory.as_dict() == {}


def test_every_mask_closed_raises_empty_mask(fonts_mini_model) -> None:
    model, _ = fonts_mini_model
    closed = [ActionMask(template_id=m.template_id,
                         requires_values=frozenset({("target", "never")}))
              for m in model.masks]
    from dataclasses import replace as dc_replace

    blocked = dc_replace(model, masks=closed)
    with pytest.raises(EmptyMaskError):
        respond(blocked, _fresh(blocked), "hello")


def test_action_loop_guard_trips_at_ten_actions() -> None:
    shapes = param_shapes(1, 1, 1, 1, 1 + 1 + 0 + 1 + 1)
    import numpy as np

    params = {name: np.zeros(shape) for name, shape in shapes.items()}
    model = PolicyModel(
        featurizer=Featurizer(vocab={"<oov>": 0}, embedding_dim=1,
                              entity_order={}, template_count=1),
        params=params, hyper=Hyperparams(embedding_dim=1, hidden_size=1),
        templates=[ActionTemplate(id=0, kind="text", awaits_user=False,
                                  text="and another thing")],
        masks=[ActionMask(template_id=0)], entities=[])
    with pytest.raises(ActionLoopError):
        respond(model, _fresh(model), "hi")


def test_respond_is_deterministic(fonts_mini_model) -> None:
    model, _ = fonts_mini_model

    def run() -> list:
        _, state = respond(model, _fresh(model), "")
        actions, state = respond(model, state, "screen")
        return [(a.template_id, a.text, a.probability) for a in actions]

    assert run() == run()
