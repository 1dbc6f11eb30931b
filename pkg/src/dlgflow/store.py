"""File-backed persistence for the teaching service.

Everything mutable is an append-only JSON Lines file (logs, training
dialogs, corrections, ratings); readers fold records, last write wins where
a record supersedes an earlier one. Models are immutable binary blobs in a
versioned directory with a manifest; activation swaps one manifest field.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .compiler.dialogs import ActionTemplate, TrainingDialog
from .compiler.masks import ActionMask
from .errors import DlgflowError, UnknownLogError
from .flow.model import DialogFlow, EntityDef, OptionValue
from .flow.parser import parse_flow, serialize_flow


@dataclass
class LogDialog:
    id: int
    conversation_id: str
    started_at: str
    model_version: int
    turns: list[dict] = field(default_factory=list)
    status: str = "unreviewed"

    def to_dict(self) -> dict:
        return {"id": self.id, "conversation_id": self.conversation_id,
                "started_at": self.started_at, "model_version": self.model_version,
                "turns": self.turns, "status": self.status}

    def min_confidence(self) -> float:
        probs = [action["probability"]
                 for turn in self.turns for action in turn["system"]]
        return min(probs) if probs else 1.0


def _validate_log_turn(turn: dict) -> None:
    if not isinstance(turn, dict) or "system" not in turn:
        raise DlgflowError("log turn must carry a system action list")
    for action in turn["system"]:
        for key in ("template_id", "text", "probability", "distribution", "allowed"):
            if key not in action:
                raise DlgflowError(f"log action missing '{key}' snapshot")


class DataStore:
    """Owns the on-disk layout under one data directory."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "models").mkdir(exist_ok=True)
        (self.root / "runs").mkdir(exist_ok=True)
        self._append_lock = threading.Lock()

    # -- paths

    @property
    def flow_path(self) -> Path:
        return self.root / "flow.json"

    @property
    def entities_path(self) -> Path:
        return self.root / "entities.json"

    @property
    def catalog_path(self) -> Path:
        return self.root / "catalog.json"

    @property
    def dialogs_path(self) -> Path:
        return self.root / "dialogs.jsonl"

    @property
    def logs_path(self) -> Path:
        return self.root / "logs.jsonl"

    @property
    def corrections_path(self) -> Path:
        return self.root / "corrections.jsonl"

    @property
    def manifest_path(self) -> Path:
        return self.root / "models" / "manifest.json"

    # -- primitives

    def _append(self, path: Path, record: dict) -> None:
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._append_lock:
            with path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    @staticmethod
    def _read_jsonl(path: Path) -> list[dict]:
        if not path.exists():
            return []
        records = []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    @staticmethod
    def _write_atomic(path: Path, data: bytes) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(data)
        tmp.replace(path)

    # -- flow / entities / catalog

    def save_flow(self, flow: DialogFlow) -> None:
        self._write_atomic(self.flow_path, serialize_flow(flow))
        self.save_entities(list(flow.entities))

    def load_flow(self) -> DialogFlow:
        return parse_flow(self.flow_path.read_bytes())

    def save_entities(self, entities: list[EntityDef]) -> None:
        payload = [{"name": e.name, "kind": e.kind,
                    "values": [{"value": v.value, "synonyms": list(v.synonyms)}
                               for v in e.values]}
                   for e in sorted(entities, key=lambda e: e.name)]
        self._write_atomic(self.entities_path,
                           json.dumps(payload, indent=2).encode("utf-8"))

    def load_entities(self) -> list[EntityDef]:
        raw = json.loads(self.entities_path.read_text(encoding="utf-8"))
        return [EntityDef(name=d["name"], kind=d["kind"],
                          values=tuple(OptionValue(value=v["value"],
                                                   synonyms=tuple(v["synonyms"]))
                                       for v in d.get("values", ())))
                for d in raw]

    def save_catalog(self, templates: list[ActionTemplate],
                     masks: list[ActionMask]) -> None:
        payload = {"templates": [t.to_dict() for t in templates],
                   "masks": [m.to_dict() for m in masks]}
        self._write_atomic(self.catalog_path,
                           json.dumps(payload, indent=2).encode("utf-8"))

    def load_catalog(self) -> tuple[list[ActionTemplate], list[ActionMask]]:
        raw = json.loads(self.catalog_path.read_text(encoding="utf-8"))
        return ([ActionTemplate.from_dict(t) for t in raw["templates"]],
                [ActionMask.from_dict(m) for m in raw["masks"]])

    # -- training dialogs

    def append_dialog(self, dialog: TrainingDialog) -> None:
        self._append(self.dialogs_path, dialog.to_dict())

    def load_dialogs(self) -> list[TrainingDialog]:
        by_id: dict[str, dict] = {}
        for record in self._read_jsonl(self.dialogs_path):
            by_id[record["id"]] = record
        return [TrainingDialog.from_dict(r) for r in by_id.values()]

    def training_set_hash(self) -> str:
        dialogs = sorted(self.load_dialogs(), key=lambda d: d.id)
        blob = json.dumps([d.to_dict() for d in dialogs], sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    # -- dialog logs (append-only event stream)

    def start_log(self, conversation_id: str, model_version: int) -> int:
        with self._append_lock:
            log_id = self._next_log_id()
            record = {"type": "log_start", "log_id": log_id,
                      "conversation_id": conversation_id,
                      "started_at": datetime.now(timezone.utc).isoformat(),
                      "model_version": model_version}
            with self.logs_path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return log_id

    def _next_log_id(self) -> int:
        last = 0
        for record in self._read_jsonl(self.logs_path):
            if record["type"] == "log_start":
                last = max(last, record["log_id"])
        return last + 1

    def append_log_turn(self, log_id: int, turn: dict) -> None:
        _validate_log_turn(turn)
        self._append(self.logs_path, {"type": "log_turn", "log_id": log_id,
                                      "turn": turn})

    def set_log_status(self, log_id: int, status: str) -> None:
        self._append(self.logs_path, {"type": "log_status", "log_id": log_id,
                                      "status": status})

    def load_logs(self) -> dict[int, LogDialog]:
        logs: dict[int, LogDialog] = {}
        for record in self._read_jsonl(self.logs_path):
            kind = record["type"]
            if kind == "log_start":
                logs[record["log_id"]] = LogDialog(
                    id=record["log_id"],
                    conversation_id=record["conversation_id"],
                    started_at=record["started_at"],
                    model_version=record["model_version"])
            elif kind == "log_turn":
                logs[record["log_id"]].turns.append(record["turn"])
            elif kind == "log_status":
                logs[record["log_id"]].status = record["status"]
        return logs

    def get_log(self, log_id: int) -> LogDialog:
        log = self.load_logs().get(log_id)
        if log is None:
            raise UnknownLogError(f"no log with id {log_id}")
        return log

    # -- corrections

    def append_correction(self, record: dict) -> None:
        self._append(self.corrections_path, record)

    def load_corrections(self, log_id: int | None = None) -> list[dict]:
        records = self._read_jsonl(self.corrections_path)
        if log_id is None:
            return records
        return [r for r in records if r["log_id"] == log_id]


class ModelRegistry:
    """Versioned, immutable model blobs plus an atomically switched pointer."""

    def __init__(self, store: DataStore):
        self.store = store
        self._lock = threading.Lock()

    def _manifest(self) -> dict:
        path = self.store.manifest_path
        if not path.exists():
            return {"versions": [], "active": None}
        return json.loads(path.read_text(encoding="utf-8"))

    def _save_manifest(self, manifest: dict) -> None:
        DataStore._write_atomic(self.store.manifest_path,
                                json.dumps(manifest, indent=2).encode("utf-8"))

    def register(self, blob: bytes, metrics: dict, training_set_hash: str,
                 activate: bool = True) -> int:
        with self._lock:
            manifest = self._manifest()
            version = max((v["version"] for v in manifest["versions"]), default=0) + 1
            path = self.store.root / "models" / f"v{version}.hcn"
            DataStore._write_atomic(path, blob)
            manifest["versions"].append({
                "version": version,
                "file": path.name,
                "created_at": datetime.now(timezone.utc).isoformat(),
                "training_set_hash": training_set_hash,
                "metrics": metrics,
            })
            if activate:
                manifest["active"] = version
            self._save_manifest(manifest)
        return version

    def activate(self, version: int) -> None:
        with self._lock:
            manifest = self._manifest()
            if all(v["version"] != version for v in manifest["versions"]):
                raise DlgflowError(f"no model version {version}")
            manifest["active"] = version
            self._save_manifest(manifest)

    @property
    def active_version(self) -> int | None:
        return self._manifest()["active"]

    def versions(self) -> list[dict]:
        return self._manifest()["versions"]

    def metrics(self, version: int) -> dict | None:
        for entry in self._manifest()["versions"]:
            if entry["version"] == version:
                return entry["metrics"]
        return None

    def load_blob(self, version: int) -> bytes:
        path = self.store.root / "models" / f"v{version}.hcn"
        if not path.exists():
            raise DlgflowError(f"no model version {version}")
        return path.read_bytes()
