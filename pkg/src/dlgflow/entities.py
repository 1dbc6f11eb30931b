"""Entity detection, grounding, option matching, and template substitution.

Detection is lexicon-driven: enum values and their synonyms are matched as
contiguous token spans, longest first. Free-form replies to a pending
question fall back to token-overlap matching against the question's options,
which is what lets the learned manager absorb paraphrases the rule-based
flow would bounce.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .errors import MissingEntityError, UnknownEntityError
from .flow.model import EntityDef, PLACEHOLDER_RE

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on whitespace and punctuation, empties dropped."""
    return [m.group(0).lower() for m in _TOKEN_RE.finditer(text)]


def _token_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0).lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class Mention:
    entity: str
    start: int
    end: int
    surface: str
    value: str


@dataclass(frozen=True)
class Grounding:
    value: str
    turn: int
    source: str  # detected | corrected | api


@dataclass(frozen=True)
class EntityMemory:
    slots: dict[str, Grounding] = field(default_factory=dict)

    def value(self, entity: str) -> str | None:
        g = self.slots.get(entity)
        return g.value if g else None

    def names(self) -> set[str]:
        return set(self.slots)

    def as_dict(self) -> dict[str, str]:
        return {name: g.value for name, g in self.slots.items()}

    def __eq__(self, other) -> bool:
        return isinstance(other, EntityMemory) and self.slots == other.slots


EMPTY_MEMORY = EntityMemory()


def detect_entities(utterance: str, defs: list[EntityDef],
                    expected: str | None = None) -> list[Mention]:
    """Find entity mentions in an utterance.

    Enum values/synonyms match as contiguous token spans, case-insensitive;
    overlaps resolve longest-first then leftmost. When nothing matches and
    `expected` names an open entity, the whole trimmed utterance becomes its
    mention.
    """
    spans = _token_spans(utterance)
    candidates: list[tuple[int, int, int, Mention]] = []
    for ent in defs:
        if ent.kind != "enum":
            continue
        for opt in ent.values:
            for surface in (opt.value, *opt.synonyms):
                surf_tokens = tokenize(surface)
                if not surf_tokens:
                    continue
                n = len(surf_tokens)
                for i in range(len(spans) - n + 1):
                    if [t for t, _, _ in spans[i:i + n]] == surf_tokens:
                        start, end = spans[i][1], spans[i + n - 1][2]
                        mention = Mention(entity=ent.name, start=start, end=end,
                                          surface=utterance[start:end], value=opt.value)
                        candidates.append((-(end - start), start, end, mention))
    candidates.sort(key=lambda c: c[:3])
    chosen: list[Mention] = []
    taken: list[tuple[int, int]] = []
    for _, start, end, mention in candidates:
        if any(s < end and start < e for s, e in taken):
            continue
        taken.append((start, end))
        chosen.append(mention)
    chosen.sort(key=lambda m: m.start)

    if not chosen and expected is not None:
        exp = next((d for d in defs if d.name == expected), None)
        if exp is not None and exp.kind == "open":
            trimmed = utterance.strip()
            if trimmed:
                start = utterance.index(trimmed)
                chosen.append(Mention(entity=expected, start=start,
                                      end=start + len(trimmed),
                                      surface=trimmed, value=trimmed))
    return chosen


def match_option(utterance: str, options: list[tuple[str, tuple[str, ...]]],
                 threshold: float = 0.5) -> tuple[str, float] | None:
    """Map a free-form reply onto the closest option, if close enough.

    Score is token overlap between the utterance and the option's surface
    forms, normalized by the option value's token count. Exact value match
    scores 1.0; ties keep declaration order.
    """
    if not options:
        raise ValueError("match_option requires at least one option")
    utt_tokens = set(tokenize(utterance))
    best: tuple[str, float] | None = None
    for value, synonyms in options:
        if utterance.strip().lower() == value.lower():
            score = 1.0
        else:
            value_tokens = set(tokenize(value))
            surface_tokens = set(value_tokens)
            for syn in synonyms:
                surface_tokens |= set(tokenize(syn))
            if not value_tokens:
                continue
            score = len(utt_tokens & surface_tokens) / len(value_tokens)
        if best is None or score > best[1]:
            best = (value, score)
    if best is not None and best[1] >= threshold:
        return best
    return None


def ground(mentions: list[Mention], memory: EntityMemory, turn: int,
           defs: list[EntityDef] | None = None, source: str = "detected") -> EntityMemory:
    """Write mentions into entity memory; later mentions win per entity."""
    slots = dict(memory.slots)
    known = {d.name for d in defs} if defs is not None else None
    for m in mentions:
        if known is not None and m.entity not in known:
            raise UnknownEntityError(f"mention names undeclared entity '{m.entity}'")
        slots[m.entity] = Grounding(value=m.value, turn=turn, source=source)
    return EntityMemory(slots=slots)


def substitute(text: str, memory: EntityMemory) -> str:
    """Fill every [entity] placeholder from memory; '[[' escapes a literal '['."""

    def repl(match: re.Match) -> str:
        if match.group(0) == "[[":
            return "["
        name = match.group(1)
        value = memory.value(name)
        if value is None:
            raise MissingEntityError(f"placeholder [{name}] has no grounded value",
                                     entity=name)
        return value

    return PLACEHOLDER_RE.sub(repl, text)


def forget(memory: EntityMemory, entity: str) -> EntityMemory:
    slots = {k: v for k, v in memory.slots.items() if k != entity}
    return EntityMemory(slots=slots)


def remember(memory: EntityMemory, entity: str, value: str, turn: int,
             source: str) -> EntityMemory:
    slots = dict(memory.slots)
    slots[entity] = Grounding(value=value, turn=turn, source=source)
    return EntityMemory(slots=slots)
