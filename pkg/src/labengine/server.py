"""HTTP control plane.

Thin FastAPI layer over the engine: create and inspect projects, stream
their journals as NDJSON (with since-seq resume for reconnecting clients),
fetch artifacts, apply operator commands, and run evaluations. When
LAB_API_TOKEN is set every request must carry it as a bearer token;
otherwise the server is open, which is the right default for a local
sandbox and the wrong one for anything else.
"""

from __future__ import annotations

import json
import os
import threading
import time

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse
from pydantic import BaseModel

from .errors import (
    BudgetExhausted,
    Conflict,
    EmptyPrompt,
    HarnessBusy,
    InvalidTarget,
    LabError,
    NotFound,
    TargetAheadOfHead,
    UnknownProject,
    ValidationFailed,
    WriterConflict,
)
from .pipeline import ProjectEngine

STREAM_POLL_S = 0.25

_CONTENT_TYPES = {
    "manuscript": "text/markdown; charset=utf-8",
    "figure": "image/png",
    "metric-journal": "text/plain; charset=utf-8",
}


class NewProject(BaseModel):
    prompt: str
    mode: str = "Explore"
    project_id: str | None = None
    run: bool = False


class Command(BaseModel):
    action: str
    target_seq: int | None = None
    stage: str | None = None
    instruction: str | None = None
    idempotency_key: str | None = None


class EvalRequest(BaseModel):
    papers: list[dict]
    baseline: str
    candidate: str


def require_token(request: Request) -> None:
    token = os.environ.get("LAB_API_TOKEN")
    if not token:
        return
    header = request.headers.get("authorization", "")
    if header != f"Bearer {token}":
        raise HTTPException(status_code=401, detail="missing or bad bearer token")


def _run_in_background(engine: ProjectEngine, project_id: str) -> threading.Thread:
    def target():
        try:
            engine.run_project(project_id)
        except (WriterConflict, HarnessBusy):
            pass  # another runner holds the project; it will finish the work

    thread = threading.Thread(target=target, daemon=True)
    thread.start()
    return thread


def create_app(engine: ProjectEngine) -> FastAPI:
    app = FastAPI(title="lab control plane", dependencies=[Depends(require_token)])

    @app.exception_handler(LabError)
    async def lab_error_handler(request: Request, exc: LabError):
        status = 400
        if isinstance(exc, (UnknownProject, NotFound)):
            status = 404
        elif isinstance(exc, (Conflict, WriterConflict, HarnessBusy)):
            status = 409
        elif isinstance(exc, BudgetExhausted):
            status = 429
        elif isinstance(exc, (EmptyPrompt, ValidationFailed, InvalidTarget,
                              TargetAheadOfHead)):
            status = 422
        return JSONResponse(status_code=status, content={
            "error": type(exc).__name__, "detail": str(exc)})

    @app.post("/projects", status_code=201)
    def create_project(body: NewProject):
        project_id = engine.create_project(body.prompt, body.mode,
                                           project_id=body.project_id)
        if body.run:
            _run_in_background(engine, project_id)
        return {"project_id": project_id}

    @app.get("/projects")
    def list_projects():
        out = []
        for pid in engine.list_projects():
            state = engine.project_state(pid)
            out.append({
                "project_id": pid,
                "mode": state.mode,
                "stage": state.current_stage,
                "completed": state.completed,
                "paused": state.paused,
                "risk_flags": state.risk_flags,
            })
        return {"projects": out}

    @app.get("/projects/{project_id}/state")
    def project_state(project_id: str):
        log = engine.open_log(project_id)
        state = log.resume()
        return {"head_seq": log.head_seq(), "state": state.to_doc()}

    @app.get("/projects/{project_id}/events")
    def project_events(project_id: str, since: int = 0, follow: bool = False):
        log = engine.open_log(project_id)
        if not log.exists():
            raise UnknownProject(project_id)

        def stream():
            cursor = since
            while True:
                fresh = False
                for rec in log.read():
                    if rec.seq > cursor:
                        cursor = rec.seq
                        fresh = True
                        yield json.dumps(rec.to_doc(), ensure_ascii=False) + "\n"
                if not follow:
                    break
                if not fresh and log.resume().completed:
                    break
                time.sleep(STREAM_POLL_S)

        return StreamingResponse(stream(), media_type="application/x-ndjson")

    @app.post("/projects/{project_id}/commands")
    def apply_command(project_id: str, body: Command):
        if body.action == "run":
            if not engine.open_log(project_id).exists():
                raise UnknownProject(project_id)
            _run_in_background(engine, project_id)
            return {"action": "run", "started": True}
        return engine.apply_command(project_id, body.model_dump(exclude_none=True))

    @app.get("/artifacts/{artifact_id}")
    def get_artifact(artifact_id: str):
        content = engine.store.get(artifact_id)
        meta = engine.store.meta(artifact_id)
        media = _CONTENT_TYPES.get(meta.get("kind"), "application/octet-stream")
        return Response(content=content, media_type=media,
                        headers={"X-Artifact-Kind": str(meta.get("kind"))})

    @app.get("/artifacts/{artifact_id}/meta")
    def get_artifact_meta(artifact_id: str):
        meta = engine.store.meta(artifact_id)
        meta["lineage"] = engine.store.lineage(artifact_id)
        return meta

    @app.post("/eval")
    def run_eval(body: EvalRequest):
        return engine.evaluate(body.papers, body.baseline, body.candidate)

    return app
