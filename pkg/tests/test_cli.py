from __future__ import annotations

import json
import subprocess
import sys

import pytest

from .conftest import FLOWS_DIR


def run_cli(*args: str, cwd=None, env=None) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "dlgflow.cli", *args],
                          capture_output=True, text=True, cwd=cwd, env=env)


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    data = tmp_path_factory.mktemp("cli-data")
    imported = run_cli("--data-dir", str(data), "import",
                       str(FLOWS_DIR / "fonts-mini.json"))
    assert imported.returncode == 0, imported.stderr
    compiled = run_cli("--data-dir", str(data), "compile")
    assert compiled.returncode == 0, compiled.stderr
    assert compiled.stdout.strip() == "4 walks, 4 dialogs, 7 templates, 7 masks"
    return data


def test_import_reports_shape(pipeline_dir) -> None:
    result = run_cli("--data-dir", str(pipeline_dir), "import",
                     str(FLOWS_DIR / "fonts-mini.json"))
    assert result.returncode == 0
    assert result.stdout.strip() == "imported fonts-mini: 8 nodes, 9 edges"


def test_import_invalid_flow_exits_one(pipeline_dir, tmp_path) -> None:
    doc = json.loads((FLOWS_DIR / "fonts-mini.json").read_text())
    doc["nodes"].append({"id": "island", "kind": "message", "text": "x"})
    doc["edges"].append({"from": "island", "to": "done",
                         "condition": {"kind": "always"}})
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    result = run_cli("--data-dir", str(pipeline_dir), "import", str(bad))
    assert result.returncode == 1
    assert "UNREACHABLE_NODE" in result.stderr


def test_train_hash_is_seed_deterministic(pipeline_dir) -> None:
    hashes = []
    for _ in range(2):
        result = run_cli("--data-dir", str(pipeline_dir), "--seed", "7", "train")
        assert result.returncode == 0, result.stderr
        line = next(l for l in result.stdout.splitlines()
                    if l.startswith("model sha256"))
        hashes.append(line.split()[-1])
    assert hashes[0] == hashes[1]


def test_usage_error_exits_two(pipeline_dir) -> None:
    result = run_cli("--data-dir", str(pipeline_dir), "no-such-command")
    assert result.returncode == 2
    assert "Usage" in result.stderr or "usage" in result.stderr


def test_replay_writes_report_files(pipeline_dir, tmp_path) -> None:
    transcripts = tmp_path / "transcripts.jsonl"
    transcripts.write_text(
        '{"id": "t1", "user_turns": ["screen", "yes"]}\n'
        '{"id": "t2", "user_turns": ["app", "no"]}\n')
    out = tmp_path / "report"
    result = run_cli("--data-dir", str(pipeline_dir), "replay",
                     "--left", "v1", "--right", "v2",
                     "--transcripts", str(transcripts), "--out", str(out))
    assert result.returncode == 0, result.stderr
    assert (out / "pairs.csv").exists()
    assert (out / "report.json").exists()
    assert (out / "report.png").exists()
    payload = json.loads((out / "report.json").read_text())
    assert payload["left_version"] == 1 and payload["right_version"] == 2


def test_replay_with_mismatched_transcripts_exits_one(pipeline_dir, tmp_path) -> None:
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "t1"}\n')
    result = run_cli("--data-dir", str(pipeline_dir), "replay",
                     "--left", "v1", "--right", "v1",
                     "--transcripts", str(bad))
    assert result.returncode == 1
    assert "TranscriptMismatch" in result.stderr


def test_export_flow_round_trips(pipeline_dir, tmp_path) -> None:
    result = run_cli("--data-dir", str(pipeline_dir), "export-flow")
    assert result.returncode == 0, result.stderr
    from dlgflow.compiler import derive_templates, enumerate_walks
    from dlgflow.compiler.aggregate import walk_signatures
    from dlgflow.flow import parse_flow

    exported = parse_flow(result.stdout.encode())
    original = parse_flow((FLOWS_DIR / "fonts-mini.json").read_bytes())
    catalog, _ = derive_templates(original)
    assert (walk_signatures(original, enumerate_walks(original), catalog)
            == walk_signatures(exported, enumerate_walks(exported), catalog))


def test_gradcheck_command(pipeline_dir) -> None:
    result = run_cli("--data-dir", str(pipeline_dir), "gradcheck", "--seeds", "2")
    assert result.returncode == 0, result.stderr
    assert "max relative error" in result.stdout


def test_config_file_supplies_defaults(tmp_path) -> None:
    data = tmp_path / "from-config"
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"data_dir": str(data), "seed": 3}))
    result = run_cli("--config", str(config), "import",
                     str(FLOWS_DIR / "fonts-mini.json"))
    assert result.returncode == 0, result.stderr
    assert (data / "flow.json").exists()


def test_env_var_beats_config(tmp_path) -> None:
    import os

    config_dir = tmp_path / "config-dir"
    env_dir = tmp_path / "env-dir"
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"data_dir": str(config_dir)}))
    env = dict(os.environ, DLGF_DATA_DIR=str(env_dir))
    result = run_cli("--config", str(config), "import",
                     str(FLOWS_DIR / "fonts-mini.json"), env=env)
    assert result.returncode == 0, result.stderr
    assert (env_dir / "flow.json").exists()
    assert not (config_dir / "flow.json").exists()
