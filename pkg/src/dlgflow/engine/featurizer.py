"""Turn featurization for the recurrent policy.

Each policy step sees the concatenation of the utterance embedding (mean of
learned token embeddings), a binary bag-of-words vector, entity-presence
flags, and a one-hot of the previous action (index T = "none").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..entities import EntityMemory, tokenize
from ..errors import EmptyCorpusError

OOV = "<oov>"


@dataclass(frozen=True)
class Featurizer:
    vocab: dict[str, int]          # token -> index, OOV at index 0
    embedding_dim: int
    entity_order: dict[str, int]   # entity name -> index
    template_count: int

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def entity_count(self) -> int:
        return len(self.entity_order)

    @property
    def input_size(self) -> int:
        return (self.embedding_dim + self.vocab_size + self.entity_count
                + self.template_count + 1)

    def token_indexes(self, utterance: str) -> list[int]:
        return [self.vocab.get(tok, 0) for tok in tokenize(utterance)]

    def to_dict(self) -> dict:
        tokens = [None] * len(self.vocab)
        for tok, idx in self.vocab.items():
            tokens[idx] = tok
        return {"tokens": tokens, "embedding_dim": self.embedding_dim,
                "entities": sorted(self.entity_order, key=self.entity_order.get),
                "template_count": self.template_count}

    @classmethod
    def from_dict(cls, d: dict) -> "Featurizer":
        return cls(vocab={tok: i for i, tok in enumerate(d["tokens"])},
                   embedding_dim=d["embedding_dim"],
                   entity_order={name: i for i, name in enumerate(d["entities"])},
                   template_count=d["template_count"])


@dataclass(frozen=True)
class FeatureVector:
    utterance_embedding: np.ndarray
    bow: np.ndarray
    entity_flags: np.ndarray
    last_action: np.ndarray
    token_indexes: tuple[int, ...]  # retained so training can push gradients
                                    # back into the embedding table

    def concat(self) -> np.ndarray:
        return np.concatenate([self.utterance_embedding, self.bow,
                               self.entity_flags, self.last_action])


def build_featurizer(dialogs, entities, templates, embedding_dim: int = 32) -> Featurizer:
    """Vocabulary from all user-utterance tokens, sorted, with OOV at 0."""
    if not dialogs:
        raise EmptyCorpusError("no training dialogs to build a vocabulary from")
    tokens: set[str] = set()
    for dialog in dialogs:
        for turn in dialog.turns:
            if turn.user is not None:
                tokens.update(tokenize(turn.user.text))
    vocab = {OOV: 0}
    for tok in sorted(tokens):
        vocab[tok] = len(vocab)
    entity_order = {name: i for i, name in enumerate(sorted(e.name for e in entities))}
    return Featurizer(vocab=vocab, embedding_dim=embedding_dim,
                      entity_order=entity_order, template_count=len(templates))


def featurize_turn(featurizer: Featurizer, embedding_table: np.ndarray,
                   utterance: str, memory: EntityMemory,
                   last_action: int | None) -> FeatureVector:
    """Feature vector for one policy step; empty utterances featurize to zeros."""
    idxs = featurizer.token_indexes(utterance)
    if idxs:
        embedding = embedding_table[idxs].mean(axis=0)
    else:
        embedding = np.zeros(featurizer.embedding_dim)
    bow = np.zeros(featurizer.vocab_size)
    bow[idxs] = 1.0
    flags = np.zeros(featurizer.entity_count)
    for name in memory.names():
        idx = featurizer.entity_order.get(name)
        if idx is not None:
            flags[idx] = 1.0
    one_hot = np.zeros(featurizer.template_count + 1)
    one_hot[featurizer.template_count if last_action is None else last_action] = 1.0
    return FeatureVector(utterance_embedding=embedding, bow=bow,
                         entity_flags=flags, last_action=one_hot,
                         token_indexes=tuple(idxs))
