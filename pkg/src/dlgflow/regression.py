"""Replay-based comparison of two dialog managers.

Transcripts are replayed open loop: the original user turns are fed in order
no matter what either manager answers. A pair diverges at the first turn
whose (template_id, filled_text) action lists differ; pairs that never
diverge are auto-rated "same" and skip the human queue.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .engine.model import DialogState, PolicyModel, respond
from .errors import DlgflowError, DuplicateRatingError, TranscriptMismatchError

SENTINEL_TEMPLATE = -1
CONTEXT_TURNS_AFTER_DIVERGENCE = 3


@dataclass(frozen=True)
class Transcript:
    id: str
    user_turns: tuple[str, ...]
    reference_system_turns: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict, where: str = "transcript") -> "Transcript":
        if not isinstance(d, dict) or "id" not in d or "user_turns" not in d:
            raise TranscriptMismatchError(f"{where}: expected an object with "
                                          "'id' and 'user_turns'")
        turns = d["user_turns"]
        if (not isinstance(turns, list) or not turns
                or not all(isinstance(t, str) for t in turns)):
            raise TranscriptMismatchError(
                f"{where}: 'user_turns' must be a non-empty list of strings")
        return cls(id=str(d["id"]), user_turns=tuple(turns),
                   reference_system_turns=tuple(d.get("reference_system_turns", ())))

    def to_dict(self) -> dict:
        out = {"id": self.id, "user_turns": list(self.user_turns)}
        if self.reference_system_turns:
            out["reference_system_turns"] = list(self.reference_system_turns)
        return out


def parse_transcripts(data: bytes | str) -> list[Transcript]:
    """JSON Lines, one transcript per line."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    transcripts = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TranscriptMismatchError(f"line {lineno}: not valid JSON ({exc.msg})")
        transcripts.append(Transcript.from_dict(raw, where=f"line {lineno}"))
    return transcripts


@dataclass(frozen=True)
class ReplayedTurn:
    user: str | None
    actions: tuple[tuple[int, str], ...]  # (template_id, filled_text)
    error: str | None = None

    def to_dict(self) -> dict:
        return {"user": self.user,
                "actions": [{"template_id": t, "text": s} for t, s in self.actions],
                "error": self.error}


@dataclass(frozen=True)
class ReplayedTranscript:
    transcript_id: str
    turns: tuple[ReplayedTurn, ...]

    def to_dict(self) -> dict:
        return {"transcript_id": self.transcript_id,
                "turns": [t.to_dict() for t in self.turns]}


def replay(transcript: Transcript, model: PolicyModel) -> ReplayedTranscript:
    """Feed the transcript's user turns to a fresh conversation.

    Turn 0 is the manager's opener (no user input); manager failures become
    sentinel actions and the replay carries on with the next user turn.
    """
    state = DialogState.fresh(model.hyper.hidden_size)
    turns: list[ReplayedTurn] = []

    def step(user: str | None) -> None:
        nonlocal state
        try:
            actions, new_state = respond(model, state, user or "")
            state = new_state
            turns.append(ReplayedTurn(
                user=user,
                actions=tuple((a.template_id, a.text) for a in actions)))
        except DlgflowError as exc:
            turns.append(ReplayedTurn(
                user=user,
                actions=((SENTINEL_TEMPLATE, f"<error: {exc.code}>"),),
                error=exc.code))

    step(None)
    for user in transcript.user_turns:
        step(user)
    return ReplayedTranscript(transcript_id=transcript.id, turns=tuple(turns))


@dataclass(frozen=True)
class ReplayPair:
    transcript_id: str
    left: ReplayedTranscript
    right: ReplayedTranscript
    divergence: int | None
    auto_same: bool

    def to_dict(self) -> dict:
        return {"transcript_id": self.transcript_id,
                "left": self.left.to_dict(), "right": self.right.to_dict(),
                "divergence": self.divergence, "auto_same": self.auto_same}

    def view(self) -> dict:
        """Turns up to the divergence point plus a little context after it."""
        if self.divergence is None:
            cutoff = max(len(self.left.turns), len(self.right.turns))
        else:
            cutoff = self.divergence + 1 + CONTEXT_TURNS_AFTER_DIVERGENCE
        return {"transcript_id": self.transcript_id,
                "divergence": self.divergence,
                "left": [t.to_dict() for t in self.left.turns[:cutoff]],
                "right": [t.to_dict() for t in self.right.turns[:cutoff]]}


def diff(left: ReplayedTranscript, right: ReplayedTranscript) -> ReplayPair:
    if left.transcript_id != right.transcript_id:
        raise TranscriptMismatchError(
            f"cannot diff replays of '{left.transcript_id}' and "
            f"'{right.transcript_id}'")
    divergence = None
    for index in range(max(len(left.turns), len(right.turns))):
        a = left.turns[index].actions if index < len(left.turns) else None
        b = right.turns[index].actions if index < len(right.turns) else None
        if a != b:
            divergence = index
            break
    return ReplayPair(transcript_id=left.transcript_id, left=left, right=right,
                      divergence=divergence, auto_same=divergence is None)


VERDICTS = ("same", "left_better", "right_better")


@dataclass(frozen=True)
class RatingReport:
    counts: dict[str, int]
    total: int
    percentages: dict[str, float | None]
    overall_variation: float | None
    candidate_side: str

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "total": self.total,
                "percentages": dict(self.percentages),
                "overall_variation": self.overall_variation,
                "candidate_side": self.candidate_side}


def aggregate_ratings(ratings: list[dict], candidate_side: str = "right") -> RatingReport:
    """Fold verdicts into the side-by-side report.

    One verdict per pair; auto-same pairs are expected to arrive already
    injected as 'same' verdicts. Percentages are count/total*100 rounded to
    two decimals; overall variation is candidate-better minus candidate-worse.
    """
    if candidate_side not in ("left", "right"):
        raise ValueError("candidate_side must be 'left' or 'right'")
    counts = {v: 0 for v in VERDICTS}
    seen: set = set()
    for rating in ratings:
        pair_id = rating["pair_id"]
        verdict = rating["verdict"]
        if verdict not in VERDICTS:
            raise ValueError(f"unknown verdict '{verdict}'")
        if pair_id in seen:
            raise DuplicateRatingError(f"pair '{pair_id}' rated twice")
        seen.add(pair_id)
        counts[verdict] += 1
    total = sum(counts.values())
    if total == 0:
        percentages: dict[str, float | None] = {v: None for v in VERDICTS}
        overall = None
    else:
        percentages = {v: round(counts[v] / total * 100, 2) for v in VERDICTS}
        better = percentages["right_better" if candidate_side == "right"
                             else "left_better"]
        worse = percentages["left_better" if candidate_side == "right"
                            else "right_better"]
        overall = round(better - worse, 2)
    return RatingReport(counts=counts, total=total, percentages=percentages,
                        overall_variation=overall, candidate_side=candidate_side)


def format_percentage(value: float | None) -> str:
    return "—" if value is None else f"{value:.2f}%"
