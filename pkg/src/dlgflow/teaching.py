"""Machine-teaching service: logged conversations, a ranked review queue,
the three correction types, and guarded retraining.

Logs are evidence and never mutated; a correction yields a fresh training
dialog derived from the log's prefix. Corrections on the same log compose:
each application re-derives that log's corrected dialog and supersedes the
previous derivation in the training store.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace

from .compiler.dialogs import (
    ActionTemplate,
    SystemAction,
    TrainingDialog,
    Turn,
    UserTurn,
)
from .compiler.masks import empty_mask
from .engine.model import DialogState, Hyperparams, PolicyModel, respond
from .engine.serialize import load_model, save_model
from .engine.training import train
from .entities import Mention
from .errors import (
    ConflictingCorrectionError,
    DlgflowError,
    DuplicateRatingError,
    InvalidTurnError,
    RetrainInProgressError,
    TrainingFailedError,
    UnknownTemplateError,
)
from .flow.model import EntityDef, OptionValue
from .regression import (
    CONTEXT_TURNS_AFTER_DIVERGENCE,
    ReplayPair,
    Transcript,
    aggregate_ratings,
    diff,
    replay,
)
from .store import DataStore, LogDialog, ModelRegistry

CORRECTION_KINDS = ("entity_fix", "action_relabel", "new_template")


@dataclass
class ChatSession:
    conversation_id: str
    model: PolicyModel
    state: DialogState
    log_id: int
    lock: threading.Lock = field(default_factory=threading.Lock)


def rank_logs(logs: list[LogDialog],
              statuses: tuple[str, ...] = ("unreviewed",)) -> list[dict]:
    """Least-confident dialogs first; ties go to shorter, then older logs."""
    candidates = [log for log in logs if log.status in statuses]
    ranked = sorted(candidates,
                    key=lambda log: (log.min_confidence(), len(log.turns), log.id))
    return [{"log_id": log.id, "score": log.min_confidence(),
             "turns": len(log.turns), "status": log.status,
             "model_version": log.model_version} for log in ranked]


class TeachingService:
    """Stateful facade over one data directory."""

    def __init__(self, store: DataStore, hyper: Hyperparams | None = None):
        self.store = store
        self.registry = ModelRegistry(store)
        self.hyper = hyper or Hyperparams()
        self._sessions: dict[str, ChatSession] = {}
        self._sessions_lock = threading.Lock()
        self._retrain_lock = threading.Lock()
        self._active_model: PolicyModel | None = None
        self._active_lock = threading.Lock()

    # -- model access

    def active_model(self) -> PolicyModel:
        with self._active_lock:
            version = self.registry.active_version
            if version is None:
                raise DlgflowError("no trained model; run training first")
            if self._active_model is None or self._active_model.version != version:
                self._active_model = load_model(self.registry.load_blob(version),
                                                version=version)
            return self._active_model

    def model_info(self) -> dict:
        version = self.registry.active_version
        return {"active_version": version,
                "metrics": self.registry.metrics(version) if version else None,
                "versions": [v["version"] for v in self.registry.versions()]}

    # -- chat

    def chat(self, conversation_id: str, text: str) -> dict:
        session = self._session(conversation_id)
        with session.lock:
            records = []
            if session.state.turn == 0:
                records.extend(self._chat_turn(session, None))
            if text:
                records.extend(self._chat_turn(session, text))
            return {"actions": [{"template_id": r.template_id, "text": r.text}
                                for r in records],
                    "log_id": session.log_id,
                    "model_version": session.model.version,
                    "state_summary": session.state.summary()}

    def _session(self, conversation_id: str) -> ChatSession:
        with self._sessions_lock:
            session = self._sessions.get(conversation_id)
            if session is None:
                model = self.active_model()
                log_id = self.store.start_log(conversation_id, model.version)
                session = ChatSession(
                    conversation_id=conversation_id, model=model,
                    state=DialogState.fresh(model.hyper.hidden_size),
                    log_id=log_id)
                self._sessions[conversation_id] = session
            return session

    def _chat_turn(self, session: ChatSession, text: str | None):
        model = session.model
        actions, new_state = respond(model, session.state, text or "")
        user_part = None
        if text is not None:
            mentions = [m for m in _detected_mentions(model, session.state, text)]
            user_part = {"text": text,
                         "mentions": [{"entity": m.entity, "start": m.start,
                                       "end": m.end, "value": m.value}
                                      for m in mentions]}
        self.store.append_log_turn(session.log_id, {
            "user": user_part,
            "system": [a.to_dict() for a in actions],
        })
        session.state = new_state
        return actions

    # -- review queue

    def ranked_logs(self, status: str = "unreviewed") -> list[dict]:
        logs = list(self.store.load_logs().values())
        statuses = ("unreviewed",) if status == "unreviewed" else (status,)
        if status == "all":
            statuses = ("unreviewed", "corrected", "dismissed")
        return rank_logs(logs, statuses)

    def get_log(self, log_id: int) -> LogDialog:
        return self.store.get_log(log_id)

    # -- templates

    def templates(self) -> tuple[list[ActionTemplate], list]:
        return self.store.load_catalog()

    def create_template(self, spec: dict) -> ActionTemplate:
        """Register a template; identical payloads reuse the existing entry."""
        templates, masks = self.store.load_catalog()
        draft = ActionTemplate(
            id=len(templates), kind=spec.get("kind", "text"),
            awaits_user=bool(spec.get("awaits_user", False)),
            text=spec.get("text"), api_name=spec.get("api_name"),
            args=tuple(spec.get("args", ())), entity=spec.get("entity"),
            ends_dialog=bool(spec.get("ends_dialog", False)))
        if draft.kind not in ("text", "api"):
            raise DlgflowError(f"unknown template kind '{draft.kind}'")
        if draft.kind == "text" and not draft.text:
            raise DlgflowError("text templates need a non-empty text")
        if draft.kind == "api" and not draft.api_name:
            raise DlgflowError("api templates need an api_name")
        for existing in templates:
            if existing.identity() == draft.identity():
                return existing
        templates.append(draft)
        masks.append(empty_mask(draft.id))
        self.store.save_catalog(templates, masks)
        return draft

    # -- corrections

    def apply_correction(self, correction: dict) -> TrainingDialog:
        log_id = correction.get("log_id")
        kind = correction.get("kind")
        if kind not in CORRECTION_KINDS:
            raise DlgflowError(f"unknown correction kind '{kind}'")
        log = self.store.get_log(log_id)
        turn_index = correction.get("turn_index", -1)
        if not isinstance(turn_index, int) or not 0 <= turn_index < len(log.turns):
            raise InvalidTurnError(
                f"log {log_id} has {len(log.turns)} turns, got index {turn_index}")

        record = {"log_id": log_id, "turn_index": turn_index, "kind": kind,
                  "supersede": bool(correction.get("supersede", False)),
                  "confirm_turns": list(correction.get("confirm_turns", ()))}

        if kind == "new_template":
            template = self.create_template(correction.get("template", {}))
            record["kind"] = "action_relabel"
            record["correct_template_id"] = template.id
            kind = "action_relabel"
        elif kind == "action_relabel":
            target = correction.get("correct_template_id")
            templates, _ = self.store.load_catalog()
            if not isinstance(target, int) or not 0 <= target < len(templates):
                raise UnknownTemplateError(f"no template with id {target}")
            record["correct_template_id"] = target
        else:  # entity_fix
            record["add_mentions"] = list(correction.get("add", ()))
            record["remove_mentions"] = list(correction.get("remove", ()))
            self._validate_mentions(log, turn_index, record["add_mentions"])
            self._teach_synonyms(record["add_mentions"], log, turn_index)

        if kind == "action_relabel":
            self._check_conflict(log_id, turn_index, record["correct_template_id"],
                                 record["supersede"])

        self.store.append_correction(record)
        dialog = self._derive_corrected_dialog(log)
        self.store.append_dialog(dialog)
        self.store.set_log_status(log_id, "corrected")
        return dialog

    def _validate_mentions(self, log: LogDialog, turn_index: int,
                           mentions: list[dict]) -> None:
        turn = log.turns[turn_index]
        user = turn.get("user")
        if user is None:
            raise InvalidTurnError(
                f"turn {turn_index} of log {log.id} has no user utterance")
        text = user["text"]
        known = {e.name for e in self.store.load_entities()}
        for m in mentions:
            for key in ("entity", "start", "end", "value"):
                if key not in m:
                    raise DlgflowError(f"mention missing '{key}'")
            if m["entity"] not in known:
                raise DlgflowError(f"mention names undeclared entity '{m['entity']}'")
            if not 0 <= m["start"] < m["end"] <= len(text):
                raise InvalidTurnError(
                    f"mention span [{m['start']}, {m['end']}) outside the "
                    f"{len(text)}-char utterance")

    def _teach_synonyms(self, mentions: list[dict], log: LogDialog,
                        turn_index: int) -> None:
        """A corrected surface form becomes a synonym of its grounded value,
        so detection generalizes beyond the corrected dialog."""
        entities = self.store.load_entities()
        text = log.turns[turn_index]["user"]["text"]
        changed = False
        for m in mentions:
            surface = text[m["start"]:m["end"]].strip().lower()
            for i, ent in enumerate(entities):
                if ent.name != m["entity"] or ent.kind != "enum":
                    continue
                values = []
                for opt in ent.values:
                    if opt.value == m["value"]:
                        known = {opt.value.lower()}
                        known.update(s.lower() for s in opt.synonyms)
                        if surface and surface not in known:
                            opt = OptionValue(value=opt.value,
                                              synonyms=opt.synonyms + (surface,))
                            changed = True
                    values.append(opt)
                entities[i] = EntityDef(name=ent.name, kind=ent.kind,
                                        values=tuple(values))
        if changed:
            self.store.save_entities(entities)

    def _check_conflict(self, log_id: int, turn_index: int, new_label: int,
                        supersede: bool) -> None:
        for prior in self.store.load_corrections(log_id):
            if (prior["kind"] == "action_relabel"
                    and prior["turn_index"] == turn_index
                    and prior["correct_template_id"] != new_label
                    and not supersede):
                raise ConflictingCorrectionError(
                    f"turn {turn_index} of log {log_id} already relabeled to "
                    f"template {prior['correct_template_id']}; pass supersede "
                    "to replace it")

    def _derive_corrected_dialog(self, log: LogDialog) -> TrainingDialog:
        corrections = self.store.load_corrections(log.id)
        last_corrected = max(c["turn_index"] for c in corrections)
        confirmed: set[int] = set()
        relabels: dict[int, int] = {}
        mention_edits: dict[int, dict] = {}
        for c in corrections:
            confirmed.update(c.get("confirm_turns", ()))
            if c["kind"] == "action_relabel":
                relabels[c["turn_index"]] = c["correct_template_id"]
            else:
                edits = mention_edits.setdefault(
                    c["turn_index"], {"add": [], "remove": []})
                edits["add"].extend(c.get("add_mentions", ()))
                edits["remove"].extend(c.get("remove_mentions", ()))

        templates, _ = self.store.load_catalog()
        from .compiler.dialogs import fill_template
        from .entities import EMPTY_MEMORY, ground
        from .errors import MissingEntityError

        memory = EMPTY_MEMORY
        turns: list[Turn] = []
        for index, raw in enumerate(log.turns):
            if index > last_corrected and index not in confirmed:
                break
            user = None
            if raw.get("user"):
                mentions = [dict(m) for m in raw["user"].get("mentions", ())]
                edits = mention_edits.get(index)
                if edits:
                    removed = {(m["entity"], m["start"], m["end"])
                               for m in edits["remove"]}
                    mentions = [m for m in mentions
                                if (m["entity"], m["start"], m["end"]) not in removed]
                    mentions.extend(edits["add"])
                text = raw["user"]["text"]
                user = UserTurn(text=text, mentions=tuple(
                    Mention(entity=m["entity"], start=m["start"], end=m["end"],
                            surface=text[m["start"]:m["end"]], value=m["value"])
                    for m in mentions))
                memory = ground(list(user.mentions), memory, index)
            if index in relabels:
                # the relabel replaces the first logged action; the rest of the
                # turn's actions are unvalidated continuations and are dropped
                template = templates[relabels[index]]
                try:
                    filled = fill_template(template, memory)
                except MissingEntityError:
                    filled = template.text or template.api_name or ""
                system = (SystemAction(template_id=relabels[index],
                                       filled_text=filled),)
            else:
                system = tuple(SystemAction(template_id=a["template_id"],
                                            filled_text=a["text"])
                               for a in raw["system"])
            turns.append(Turn(user=user, system=system))
        return TrainingDialog(id=f"corrected-{log.id}", turns=tuple(turns),
                              source="corrected")

    # -- retraining

    def retrain(self, overrides: dict | None = None) -> tuple[int, dict]:
        if not self._retrain_lock.acquire(blocking=False):
            raise RetrainInProgressError("a retrain is already running")
        try:
            dialogs = self.store.load_dialogs()
            templates, masks = self.store.load_catalog()
            entities = self.store.load_entities()
            hyper = replace(self.hyper, **(overrides or {}))
            next_version = max((v["version"] for v in self.registry.versions()),
                               default=0) + 1
            try:
                model, metrics = train(dialogs, templates, masks, entities,
                                       hyper, version=next_version)
            except DlgflowError as exc:
                raise TrainingFailedError(f"training failed: {exc.code}: {exc}",
                                          cause=exc.code) from exc
            version = self.registry.register(save_model(model), metrics,
                                             self.store.training_set_hash())
            with self._active_lock:
                self._active_model = model
            return version, metrics
        finally:
            self._retrain_lock.release()

    # -- regression runs

    def start_regression_run(self, left_version: int, right_version: int,
                             transcripts: list[Transcript],
                             candidate_side: str = "right",
                             seed: int = 0) -> dict:
        left_model = load_model(self.registry.load_blob(left_version),
                                version=left_version)
        right_model = load_model(self.registry.load_blob(right_version),
                                 version=right_version)
        pairs: list[ReplayPair] = []
        for transcript in transcripts:
            pairs.append(diff(replay(transcript, left_model),
                              replay(transcript, right_model)))
        run = RegressionRun(store=self.store, left_version=left_version,
                            right_version=right_version,
                            candidate_side=candidate_side, seed=seed)
        run.save_pairs(pairs)
        return {"run_id": run.run_id, "pairs": len(pairs),
                "auto_same": sum(1 for p in pairs if p.auto_same),
                "needing_rating": sum(1 for p in pairs if not p.auto_same)}


def _detected_mentions(model: PolicyModel, state: DialogState,
                       text: str) -> list[Mention]:
    from .entities import detect_entities

    expected = None
    if state.last_action is not None:
        last = model.template(state.last_action)
        if last.awaits_user and last.entity:
            expected = last.entity
    return detect_entities(text, model.entities, expected=expected)


class RegressionRun:
    """One stored regression run: pairs, blinded rating queue, report."""

    def __init__(self, store: DataStore, run_id: str | None = None,
                 left_version: int = 0, right_version: int = 0,
                 candidate_side: str = "right", seed: int = 0):
        self.store = store
        if run_id is None:
            run_id = self._next_run_id(store)
            self.run_id = run_id
            self.meta = {"run_id": run_id, "left_version": left_version,
                         "right_version": right_version,
                         "candidate_side": candidate_side, "seed": seed}
            self.dir.mkdir(parents=True, exist_ok=True)
            self._write_meta()
        else:
            self.run_id = run_id
            if not self.dir.exists():
                raise DlgflowError(f"no regression run '{run_id}'")
            self.meta = json.loads((self.dir / "meta.json").read_text("utf-8"))

    @property
    def dir(self):
        return self.store.root / "runs" / self.run_id

    @staticmethod
    def _next_run_id(store: DataStore) -> str:
        existing = [int(p.name[1:]) for p in (store.root / "runs").iterdir()
                    if p.is_dir() and p.name.startswith("r") and p.name[1:].isdigit()]
        return f"r{max(existing, default=0) + 1}"

    def _write_meta(self) -> None:
        (self.dir / "meta.json").write_text(json.dumps(self.meta, indent=2),
                                            encoding="utf-8")

    def save_pairs(self, pairs: list[ReplayPair]) -> None:
        with (self.dir / "pairs.jsonl").open("w", encoding="utf-8") as fh:
            for index, pair in enumerate(pairs):
                record = pair.to_dict()
                record["pair_id"] = f"{self.run_id}-p{index}"
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def load_pairs(self) -> list[dict]:
        return DataStore._read_jsonl(self.dir / "pairs.jsonl")

    def swapped(self, pair_id: str) -> bool:
        """Deterministic per-pair side flip used to blind human raters."""
        digest = hashlib.sha256(
            f"{self.meta['seed']}:{pair_id}".encode("utf-8")).digest()
        return bool(digest[0] & 1)

    def rating_queue(self) -> list[dict]:
        queue = []
        for record in self.load_pairs():
            if record["auto_same"]:
                continue
            pair = _pair_view(record)
            if self.swapped(record["pair_id"]):
                pair["left"], pair["right"] = pair["right"], pair["left"]
            queue.append(pair)
        return queue

    def add_ratings(self, ratings: list[dict]) -> int:
        known = {r["pair_id"]: r for r in self.load_pairs()}
        existing = {r["pair_id"] for r in self.load_ratings()}
        accepted = []
        for rating in ratings:
            pair_id = rating.get("pair_id")
            verdict = rating.get("verdict")
            if pair_id not in known:
                raise DlgflowError(f"unknown pair '{pair_id}'")
            if known[pair_id]["auto_same"]:
                raise DlgflowError(f"pair '{pair_id}' was auto-rated same")
            if verdict not in ("same", "left_better", "right_better"):
                raise DlgflowError(f"unknown verdict '{verdict}'")
            if pair_id in existing or any(a["pair_id"] == pair_id for a in accepted):
                raise DuplicateRatingError(f"pair '{pair_id}' rated twice")
            if self.swapped(pair_id) and verdict != "same":
                verdict = ("right_better" if verdict == "left_better"
                           else "left_better")
            accepted.append({"pair_id": pair_id, "verdict": verdict})
        with (self.dir / "ratings.jsonl").open("a", encoding="utf-8") as fh:
            for rating in accepted:
                fh.write(json.dumps(rating, sort_keys=True) + "\n")
        return len(accepted)

    def load_ratings(self) -> list[dict]:
        return DataStore._read_jsonl(self.dir / "ratings.jsonl")

    def report(self):
        ratings = list(self.load_ratings())
        for record in self.load_pairs():
            if record["auto_same"]:
                ratings.append({"pair_id": record["pair_id"], "verdict": "same"})
        return aggregate_ratings(ratings, self.meta["candidate_side"])


def _pair_view(record: dict) -> dict:
    divergence = record["divergence"]
    if divergence is None:
        cutoff = max(len(record["left"]["turns"]), len(record["right"]["turns"]))
    else:
        cutoff = divergence + 1 + CONTEXT_TURNS_AFTER_DIVERGENCE
    return {"pair_id": record["pair_id"],
            "transcript_id": record["transcript_id"],
            "divergence": divergence,
            "left": record["left"]["turns"][:cutoff],
            "right": record["right"]["turns"][:cutoff]}
