from __future__ import annotations

import csv
import json

from dlgflow.regression import aggregate_ratings
from dlgflow.report import (
    render_report_figure,
    render_training_curve,
    write_pairs_csv,
    write_report_json,
)


def _pair_record(pair_id: str, auto_same: bool, divergence) -> dict:
    turn = {"user": None, "actions": [{"template_id": 0, "text": "hi"}],
            "error": None}
    return {"pair_id": pair_id, "transcript_id": f"t-{pair_id}",
            "auto_same": auto_same, "divergence": divergence,
            "left": {"turns": [turn, turn]}, "right": {"turns": [turn]}}


def test_pairs_csv_layout(tmp_path) -> None:
    records = [_pair_record("p0", True, None), _pair_record("p1", False, 1)]
    path = tmp_path / "pairs.csv"
    write_pairs_csv(records, path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["pair_id", "transcript_id", "auto_same", "divergence",
                       "left_turns", "right_turns"]
    assert rows[1] == ["p0", "t-p0", "yes", "", "2", "1"]
    assert rows[2] == ["p1", "t-p1", "no", "1", "2", "1"]


def test_report_json_and_figure(tmp_path) -> None:
    report = aggregate_ratings(
        [{"pair_id": "a", "verdict": "same"},
         {"pair_id": "b", "verdict": "right_better"}], candidate_side="right")
    json_path = tmp_path / "report.json"
    write_report_json(report, json_path, extra={"run_id": "r1"})
    payload = json.loads(json_path.read_text())
    assert payload["run_id"] == "r1"
    assert payload["counts"] == {"same": 1, "left_better": 0, "right_better": 1}

    png_path = tmp_path / "report.png"
    render_report_figure(report, png_path, divergence_turns=[0, 1, 1, 2])
    assert png_path.exists()
    assert png_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_empty_report_still_renders(tmp_path) -> None:
    report = aggregate_ratings([])
    png_path = tmp_path / "empty.png"
    render_report_figure(report, png_path)
    assert png_path.exists()


def test_training_curve(tmp_path) -> None:
    path = tmp_path / "loss.png"
    render_training_curve([1.5, 0.7, 0.2, 0.05], path)
    assert path.exists()
    assert path.stat().st_size > 0
