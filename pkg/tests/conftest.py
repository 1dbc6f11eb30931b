from __future__ import annotations

from pathlib import Path

import pytest

from dlgflow.compiler import (
    derive_action_masks,
    derive_templates,
    enumerate_walks,
    walks_to_training_dialogs,
)
from dlgflow.flow import parse_flow

FLOWS_DIR = Path(__file__).resolve().parent.parent / "flows"


@pytest.fixture(scope="session")
def fonts_mini_doc() -> bytes:
    return (FLOWS_DIR / "fonts-mini.json").read_bytes()


@pytest.fixture(scope="session")
def fonts_mini(fonts_mini_doc):
    return parse_flow(fonts_mini_doc)


@pytest.fixture(scope="session")
def support_desk():
    return parse_flow((FLOWS_DIR / "support-desk.json").read_bytes())


@pytest.fixture(scope="session")
def display_help():
    return parse_flow((FLOWS_DIR / "display-help.json").read_bytes())


@pytest.fixture(scope="session")
def fonts_mini_compiled(fonts_mini):
    walks = enumerate_walks(fonts_mini)
    templates, node_to_template = derive_templates(fonts_mini)
    masks = derive_action_masks(fonts_mini, templates, node_to_template)
    dialogs = walks_to_training_dialogs(fonts_mini, walks, 0, templates,
                                        node_to_template)
    return {"walks": walks, "templates": templates, "masks": masks,
            "dialogs": dialogs, "node_to_template": node_to_template}


@pytest.fixture(scope="session")
def fonts_mini_model(fonts_mini, fonts_mini_compiled):
    from dlgflow.engine import Hyperparams, train

    model, metrics = train(fonts_mini_compiled["dialogs"],
                           fonts_mini_compiled["templates"],
                           fonts_mini_compiled["masks"],
                           list(fonts_mini.entities),
                           Hyperparams(seed=7))
    return model, metrics


def template_id_by_text(templates, prefix: str) -> int:
    for template in templates:
        if template.text and template.text.startswith(prefix):
            return template.id
    raise KeyError(prefix)
