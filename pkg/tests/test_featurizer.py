from __future__ import annotations

import numpy as np
import pytest

from dlgflow.engine import build_featurizer, featurize_turn
from dlgflow.entities import EMPTY_MEMORY, Mention, ground
from dlgflow.errors import EmptyCorpusError


def test_vocab_contains_user_tokens(fonts_mini, fonts_mini_compiled) -> None:
    featurizer = build_featurizer(fonts_mini_compiled["dialogs"],
                                  list(fonts_mini.entities),
                                  fonts_mini_compiled["templates"])
    for token in ("screen", "app", "yes", "no"):
        assert token in featurizer.vocab
    assert featurizer.vocab["<oov>"] == 0
    assert featurizer.template_count == len(fonts_mini_compiled["templates"])
    assert featurizer.input_size == (featurizer.embedding_dim
                                     + featurizer.vocab_size
                                     + featurizer.entity_count
                                     + featurizer.template_count + 1)


def test_build_is_order_independent(fonts_mini, fonts_mini_compiled) -> None:
    entities = list(fonts_mini.entities)
    templates = fonts_mini_compiled["templates"]
    forward = build_featurizer(fonts_mini_compiled["dialogs"], entities, templates)
    backward = build_featurizer(list(reversed(fonts_mini_compiled["dialogs"])),
                                entities, templates)
    assert forward == backward


def test_empty_corpus_rejected(fonts_mini, fonts_mini_compiled) -> None:
    with pytest.raises(EmptyCorpusError):
        build_featurizer([], list(fonts_mini.entities),
                         fonts_mini_compiled["templates"])


def test_single_token_features(fonts_mini, fonts_mini_compiled) -> None:
    featurizer = build_featurizer(fonts_mini_compiled["dialogs"],
                                  list(fonts_mini.entities),
                                  fonts_mini_compiled["templates"])
    rng = np.random.default_rng(0)
    table = rng.normal(size=(featurizer.vocab_size, featurizer.embedding_dim))

    fv = featurize_turn(featurizer, table, "screen", EMPTY_MEMORY, None)
    idx = featurizer.vocab["screen"]
    assert fv.bow[idx] == 1.0 and fv.bow.sum() == 1.0
    np.testing.assert_array_equal(fv.utterance_embedding, table[idx])
    assert fv.last_action[featurizer.template_count] == 1.0
    assert fv.last_action.sum() == 1.0

    repeated = featurize_turn(featurizer, table, "screen screen", EMPTY_MEMORY, None)
    np.testing.assert_array_equal(repeated.bow, fv.bow)
    np.testing.assert_allclose(repeated.utterance_embedding, fv.utterance_embedding)


def test_empty_utterance_features(fonts_mini, fonts_mini_compiled) -> None:
    featurizer = build_featurizer(fonts_mini_compiled["dialogs"],
                                  list(fonts_mini.entities),
                                  fonts_mini_compiled["templates"])
    table = np.ones((featurizer.vocab_size, featurizer.embedding_dim))
    memory = ground([Mention(entity="target", start=0, end=6,
                             surface="screen", value="screen")],
                    EMPTY_MEMORY, turn=0)
    fv = featurize_turn(featurizer, table, "", memory, None)
    assert fv.utterance_embedding.sum() == 0.0
    assert fv.bow.sum() == 0.0
    assert fv.entity_flags[featurizer.entity_order["target"]] == 1.0
    assert fv.entity_flags.sum() == 1.0
    assert fv.last_action[featurizer.template_count] == 1.0


def test_unknown_tokens_map_to_oov(fonts_mini, fonts_mini_compiled) -> None:
    featurizer = build_featurizer(fonts_mini_compiled["dialogs"],
                                  list(fonts_mini.entities),
                                  fonts_mini_compiled["templates"])
    table = np.zeros((featurizer.vocab_size, featurizer.embedding_dim))
    fv = featurize_turn(featurizer, table, "zebra waffles", EMPTY_MEMORY, 2)
    assert fv.bow[0] == 1.0 and fv.bow.sum() == 1.0
    assert fv.last_action[2] == 1.0
