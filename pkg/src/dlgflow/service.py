"""HTTP surface of the teaching service.

Every response is {"ok": true, "data": ...} or {"ok": false, "error":
{"code", "message"}}. Domain errors map onto conventional status codes;
RetrainInProgress and rating conflicts come back as 409.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import (
    ConflictingCorrectionError,
    DlgflowError,
    DuplicateRatingError,
    EmptyMaskError,
    InvalidTurnError,
    RetrainInProgressError,
    TranscriptMismatchError,
    UnknownLogError,
    UnknownTemplateError,
)
from .regression import Transcript
from .teaching import RegressionRun, TeachingService

STATUS_BY_ERROR = {
    UnknownLogError: 404,
    UnknownTemplateError: 404,
    RetrainInProgressError: 409,
    ConflictingCorrectionError: 409,
    DuplicateRatingError: 409,
    InvalidTurnError: 400,
    TranscriptMismatchError: 400,
    EmptyMaskError: 409,
}


def _ok(data) -> JSONResponse:
    return JSONResponse({"ok": True, "data": data})


class CorrectionBody(BaseModel):
    log_id: int
    turn_index: int
    kind: str
    add: list[dict] = Field(default_factory=list)
    remove: list[dict] = Field(default_factory=list)
    correct_template_id: int | None = None
    template: dict | None = None
    confirm_turns: list[int] = Field(default_factory=list)
    supersede: bool = False


class ChatBody(BaseModel):
    text: str = ""


class RetrainBody(BaseModel):
    overrides: dict = Field(default_factory=dict)


class TemplateBody(BaseModel):
    kind: str = "text"
    text: str | None = None
    api_name: str | None = None
    args: list[str] = Field(default_factory=list)
    awaits_user: bool = False
    entity: str | None = None
    ends_dialog: bool = False


class RegressionRunBody(BaseModel):
    left_model_version: int
    right_model_version: int
    transcript_set: list[dict] = Field(default_factory=list)
    transcript_file: str | None = None
    candidate_side: str = "right"
    seed: int = 0


class RatingsBody(BaseModel):
    ratings: list[dict]


def create_app(service: TeachingService,
               static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="dlgflow teaching service", docs_url=None, redoc_url=None)

    @app.exception_handler(DlgflowError)
    async def _domain_error(request: Request, exc: DlgflowError):
        status = STATUS_BY_ERROR.get(type(exc), 400)
        return JSONResponse(status_code=status,
                            content={"ok": False,
                                     "error": {"code": exc.code,
                                               "message": str(exc)}})

    @app.get("/api/logs")
    def list_logs(status: str = "unreviewed", ranked: bool = True):
        entries = service.ranked_logs(status=status)
        if not ranked:
            entries = sorted(entries, key=lambda e: e["log_id"])
        return _ok(entries)

    @app.get("/api/logs/{log_id}")
    def get_log(log_id: int):
        return _ok(service.get_log(log_id).to_dict())

    @app.post("/api/corrections")
    def post_correction(body: CorrectionBody):
        dialog = service.apply_correction(body.model_dump())
        return _ok({"training_dialog_id": dialog.id, "dialog": dialog.to_dict()})

    @app.post("/api/retrain")
    def post_retrain(body: RetrainBody | None = None):
        overrides = body.overrides if body else {}
        version, metrics = service.retrain(overrides)
        return _ok({"version": version, "metrics": metrics})

    @app.get("/api/model")
    def get_model():
        return _ok(service.model_info())

    @app.post("/api/chat/{conversation_id}")
    def post_chat(conversation_id: str, body: ChatBody):
        return _ok(service.chat(conversation_id, body.text))

    @app.get("/api/templates")
    def get_templates():
        templates, masks = service.templates()
        return _ok({"templates": [t.to_dict() for t in templates],
                    "masks": [m.to_dict() for m in masks]})

    @app.post("/api/templates")
    def post_template(body: TemplateBody):
        template = service.create_template(body.model_dump())
        return _ok(template.to_dict())

    @app.post("/api/regression/run")
    def post_regression_run(body: RegressionRunBody):
        if body.transcript_file:
            from .regression import parse_transcripts

            transcripts = parse_transcripts(Path(body.transcript_file).read_bytes())
        else:
            transcripts = [Transcript.from_dict(t, where=f"transcript_set[{i}]")
                           for i, t in enumerate(body.transcript_set)]
        if not transcripts:
            raise TranscriptMismatchError("transcript set is empty")
        result = service.start_regression_run(
            body.left_model_version, body.right_model_version, transcripts,
            candidate_side=body.candidate_side, seed=body.seed)
        return _ok(result)

    @app.get("/api/regression/{run_id}")
    def get_regression_queue(run_id: str):
        run = RegressionRun(service.store, run_id=run_id)
        return _ok({"run_id": run_id, "pairs": run.rating_queue()})

    @app.post("/api/regression/{run_id}/ratings")
    def post_ratings(run_id: str, body: RatingsBody):
        run = RegressionRun(service.store, run_id=run_id)
        accepted = run.add_ratings(body.ratings)
        return _ok({"accepted": accepted})

    @app.get("/api/regression/{run_id}/report")
    def get_report(run_id: str):
        run = RegressionRun(service.store, run_id=run_id)
        return _ok(run.report().to_dict())

    if static_dir is not None and static_dir.exists():
        index = static_dir / "index.html"

        @app.get("/")
        def root():
            return FileResponse(index)

        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
