from __future__ import annotations

import json

import pytest

from dlgflow.compiler import (
    aggregate_to_flow,
    derive_templates,
    enumerate_walks,
    walks_to_training_dialogs,
)
from dlgflow.compiler.aggregate import walk_signatures
from dlgflow.compiler.dialogs import SystemAction, TrainingDialog, Turn, UserTurn
from dlgflow.entities import Mention
from dlgflow.errors import InconsistentDialogsError
from dlgflow.flow import parse_flow, validate_flow

from .oracles import random_acyclic_flow


def _round_trip(flow) -> None:
    templates, node_to_template = derive_templates(flow)
    walks = enumerate_walks(flow)
    dialogs = walks_to_training_dialogs(flow, walks, 0, templates, node_to_template)
    rebuilt = aggregate_to_flow(dialogs, templates, list(flow.entities))
    assert [i for i in validate_flow(rebuilt) if i.severity == "error"] == []
    original = walk_signatures(flow, walks, templates)
    recovered = walk_signatures(rebuilt, enumerate_walks(rebuilt), templates)
    assert original == recovered


def test_fonts_mini_round_trip(fonts_mini) -> None:
    _round_trip(fonts_mini)


def test_support_desk_round_trip(support_desk) -> None:
    _round_trip(support_desk)


def test_random_flow_round_trips() -> None:
    checked = 0
    for seed in range(40):
        doc = random_acyclic_flow(seed)
        flow = parse_flow(json.dumps(doc))
        if any(i.severity == "error" for i in validate_flow(flow)):
            continue
        _round_trip(flow)
        checked += 1
    assert checked >= 25


def _linear_dialog() -> TrainingDialog:
    return TrainingDialog(id="lin", turns=(
        Turn(user=None, system=(SystemAction(0, "hello"), SystemAction(1, "pick?"))),
        Turn(user=UserTurn(text="app", mentions=(
            Mention(entity="target", start=0, end=3, surface="app", value="app"),)),
            system=(SystemAction(2, "done"),)),
    ))


def test_single_linear_dialog_becomes_chain(fonts_mini_compiled) -> None:
    templates = fonts_mini_compiled["templates"]
    dialog = fonts_mini_compiled["dialogs"][0]
    flow = aggregate_to_flow([dialog], templates, [])
    walks = enumerate_walks(flow)
    assert len(walks) == 1
    assert len(flow.nodes) == len([a for t in dialog.turns for a in t.system]) + 1


def test_contradictory_final_actions_raise(fonts_mini_compiled) -> None:
    templates = fonts_mini_compiled["templates"]
    base = fonts_mini_compiled["dialogs"][0]
    *head, last = base.turns
    swapped_id = (last.system[0].template_id + 1) % len(templates)
    other = TrainingDialog(
        id="evil-twin",
        turns=(*head, Turn(user=last.user,
                           system=(SystemAction(swapped_id, "different"),))),
    )
    with pytest.raises(InconsistentDialogsError) as exc:
        aggregate_to_flow([base, other], templates, [])
    message = str(exc.value)
    assert base.id in message and "evil-twin" in message


def test_end_versus_continue_conflict_raises(fonts_mini_compiled) -> None:
    templates = fonts_mini_compiled["templates"]
    base = fonts_mini_compiled["dialogs"][0]
    longer = TrainingDialog(
        id="keeps-going",
        turns=(*base.turns[:-1],
               Turn(user=base.turns[-1].user,
                    system=base.turns[-1].system + (SystemAction(5, "again"),))),
    )
    with pytest.raises(InconsistentDialogsError):
        aggregate_to_flow([base, longer], templates, [])


def test_merge_reunifies_shared_tail(fonts_mini, fonts_mini_compiled) -> None:
    # all four dialogs share the solved question; the rebuilt graph should
    # not keep four copies of it
    rebuilt = aggregate_to_flow(fonts_mini_compiled["dialogs"],
                                fonts_mini_compiled["templates"],
                                list(fonts_mini.entities))
    questions = [n for n in rebuilt.nodes
                 if n.kind == "question" and n.entity == "solved"]
    assert len(questions) == 1
