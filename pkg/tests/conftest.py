from __future__ import annotations

import pytest

from labengine import LabConfig, ProjectEngine
from labengine.events import ProjectLog
from labengine.harness.journal import format_record
from labengine.model import EventKind, Stage


@pytest.fixture
def home(tmp_path):
    return tmp_path / "home"


@pytest.fixture
def engine(home):
    return ProjectEngine(home, LabConfig())


@pytest.fixture
def fast_config():
    # tight budgets keep harness tests snappy without changing semantics
    return LabConfig(experiment_time_budget_seconds=60.0, grace_seconds=2.0)


def new_log(root, project_id="proj", bootstrap=True) -> ProjectLog:
    log = ProjectLog(root, project_id, writer=True)
    if bootstrap:
        log.append(EventKind.PROJECT_CREATED,
                   payload={"mode": "Explore", "prompt": "test prompt"})
        log.append(EventKind.STAGE_ENTERED, stage=Stage.IDEA,
                   payload={"reason": "start"})
    return log


def write_journal(path, rows):
    """rows: iterable of (name, value, step). Produces a valid journal."""
    lines = []
    for i, (name, value, step) in enumerate(rows, start=1):
        lines.append(format_record(i, name, value, step, ts=1000.0 + i))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
