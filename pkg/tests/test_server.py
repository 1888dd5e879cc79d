from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from labengine import LabConfig, ProjectEngine
from labengine.model import Mode
from labengine.server import create_app


@pytest.fixture
def engine(home, fast_config):
    return ProjectEngine(home, fast_config)


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


def finished_project(engine, prompt="served study"):
    pid = engine.create_project(prompt, Mode.EXPLORE)
    engine.run_project(pid)
    return pid


# --- auth ---

def test_open_when_no_token_configured(client, monkeypatch):
    monkeypatch.delenv("LAB_API_TOKEN", raising=False)
    assert client.get("/projects").status_code == 200


def test_token_required_when_configured(client, monkeypatch):
    monkeypatch.setenv("LAB_API_TOKEN", "sekrit")
    assert client.get("/projects").status_code == 401
    ok = client.get("/projects", headers={"Authorization": "Bearer sekrit"})
    assert ok.status_code == 200
    bad = client.get("/projects", headers={"Authorization": "Bearer wrong"})
    assert bad.status_code == 401


# --- projects ---

def test_create_and_list(client):
    res = client.post("/projects", json={"prompt": "latency study"})
    assert res.status_code == 201
    pid = res.json()["project_id"]
    listing = client.get("/projects").json()["projects"]
    assert [p for p in listing if p["project_id"] == pid]


def test_create_with_empty_prompt_422(client):
    res = client.post("/projects", json={"prompt": "  "})
    assert res.status_code == 422
    assert res.json()["error"] == "EmptyPrompt"


def test_duplicate_project_409(client):
    client.post("/projects", json={"prompt": "x", "project_id": "twin"})
    res = client.post("/projects", json={"prompt": "x", "project_id": "twin"})
    assert res.status_code == 409


def test_budget_exhaustion_429(home):
    engine = ProjectEngine(home, LabConfig(daily_paper_budget=1))
    client = TestClient(create_app(engine))
    assert client.post("/projects", json={"prompt": "a"}).status_code == 201
    res = client.post("/projects", json={"prompt": "b"})
    assert res.status_code == 429
    assert res.json()["error"] == "BudgetExhausted"


def test_unknown_project_404(client):
    assert client.get("/projects/ghost/state").status_code == 404


def test_state_endpoint_reports_progress(client, engine):
    pid = finished_project(engine)
    doc = client.get(f"/projects/{pid}/state").json()
    assert doc["state"]["completed"] is True
    assert doc["head_seq"] >= 10


# --- event stream ---

def test_event_stream_ndjson(client, engine):
    pid = finished_project(engine)
    res = client.get(f"/projects/{pid}/events")
    assert res.status_code == 200
    assert res.headers["content-type"].startswith("application/x-ndjson")
    lines = [json.loads(l) for l in res.text.splitlines() if l]
    assert lines[0]["seq"] == 1
    assert lines[0]["kind"] == "ProjectCreated"
    assert [l["seq"] for l in lines] == list(range(1, len(lines) + 1))


def test_event_stream_since_resumes(client, engine):
    pid = finished_project(engine)
    full = [json.loads(l) for l in
            client.get(f"/projects/{pid}/events").text.splitlines() if l]
    tail = [json.loads(l) for l in
            client.get(f"/projects/{pid}/events", params={"since": 5}).text.splitlines() if l]
    assert tail == [l for l in full if l["seq"] > 5]


def test_event_stream_follow_drains_completed(client, engine):
    pid = finished_project(engine)
    res = client.get(f"/projects/{pid}/events", params={"follow": True})
    lines = [json.loads(l) for l in res.text.splitlines() if l]
    assert lines[-1]["kind"] == "ProjectCompleted" or any(
        l["kind"] == "ProjectCompleted" for l in lines)


def test_event_stream_unknown_project(client):
    assert client.get("/projects/ghost/events").status_code == 404


# --- commands ---

def test_pause_resume_roundtrip(client, engine):
    pid = engine.create_project("cmd target", Mode.EXPLORE)
    res = client.post(f"/projects/{pid}/commands",
                      json={"action": "pause", "idempotency_key": "a"})
    assert res.status_code == 200
    assert engine.project_state(pid).paused
    again = client.post(f"/projects/{pid}/commands",
                        json={"action": "pause", "idempotency_key": "a"})
    assert again.json()["seq"] == res.json()["seq"]


def test_rollback_command_validation(client, engine):
    pid = engine.create_project("rb target", Mode.EXPLORE)
    head = engine.open_log(pid).head_seq()
    res = client.post(f"/projects/{pid}/commands",
                      json={"action": "rollback", "target_seq": head + 10})
    assert res.status_code == 422


def test_run_command_starts_background_run(client, engine):
    pid = engine.create_project("bg run", Mode.EXPLORE)
    res = client.post(f"/projects/{pid}/commands", json={"action": "run"})
    assert res.status_code == 200 and res.json()["started"]
    res = client.get(f"/projects/{pid}/events", params={"follow": True})
    lines = [json.loads(l) for l in res.text.splitlines() if l]
    assert any(l["kind"] == "ProjectCompleted" for l in lines)


# --- artifacts ---

def test_artifact_roundtrip(client, engine):
    pid = finished_project(engine)
    state = engine.project_state(pid)
    ref = state.journal_refs[-1]
    res = client.get(f"/artifacts/{ref}")
    assert res.status_code == 200
    assert res.headers["x-artifact-kind"] == "metric-journal"
    assert b"|" in res.content

    meta = client.get(f"/artifacts/{ref}/meta").json()
    assert meta["kind"] == "metric-journal"
    assert "lineage" in meta


def test_artifact_404(client):
    assert client.get("/artifacts/" + "0" * 64).status_code == 404


def test_figure_served_as_png(client, engine):
    pid = finished_project(engine)
    ref = engine.project_state(pid).figure_refs[-1]
    res = client.get(f"/artifacts/{ref}")
    assert res.headers["content-type"] == "image/png"
    assert res.content[:8] == b"\x89PNG\r\n\x1a\n"


# --- eval ---

def test_eval_endpoint(client):
    res = client.post("/eval", json={
        "papers": [{"paper_id": "p1",
                    "systems": {"A": ["draft a"], "B": ["draft b"]}}],
        "baseline": "A", "candidate": "B"})
    assert res.status_code == 200
    body = res.json()
    assert "p1" in body["gains"]
    assert body["radar"][0]["paper_id"] == "p1"
