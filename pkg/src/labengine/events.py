"""Append-only per-project event log with replay, rollback, and resume.

One journal file per project, one JSON record per line, fsync before an
append returns. The journal is the sole source of truth: state is always a
replay. Rollback never truncates; it appends a RollbackMarker whose
target_seq masks the open interval (target_seq, marker_seq) from replay,
keeping the full audit trail inspectable.

Single writer per project, enforced by an exclusive flock on a lock file;
readers may open the journal concurrently without coordination.
"""

from __future__ import annotations

import fcntl
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .errors import (
    CorruptLog,
    HarnessBusy,
    InvalidTarget,
    TargetAheadOfHead,
    UnknownProject,
    WriterConflict,
)
from .model import EventKind
from .state import WorkflowState, apply_event, canonical_json, digest_doc

JOURNAL_NAME = "events.ndjson"
CHECKPOINT_DIR = "checkpoints"


@dataclass(frozen=True)
class EventRecord:
    project_id: str
    seq: int
    ts: str
    stage: str | None
    kind: str
    payload: dict = field(default_factory=dict)
    artifact_refs: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "ts": self.ts,
            "project": self.project_id,
            "stage": self.stage,
            "kind": self.kind,
            "payload": self.payload,
            "artifact_refs": self.artifact_refs,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EventRecord":
        return cls(
            project_id=doc["project"],
            seq=doc["seq"],
            ts=doc["ts"],
            stage=doc.get("stage"),
            kind=doc["kind"],
            payload=doc.get("payload", {}),
            artifact_refs=list(doc.get("artifact_refs", [])),
        )


@dataclass(frozen=True)
class Checkpoint:
    project_id: str
    seq: int
    state_digest: str
    created_ts: str


def effective_records(records: Iterable[EventRecord],
                      up_to_seq: int | None = None) -> list[EventRecord]:
    """Apply rollback masking: a RollbackMarker drops every already-collected
    record with seq > target_seq. Nested markers compose naturally because a
    later marker with an earlier target also drops earlier markers' tails."""
    effective: list[EventRecord] = []
    for rec in records:
        if up_to_seq is not None and rec.seq > up_to_seq:
            break
        if rec.kind == EventKind.ROLLBACK_MARKER:
            target = int(rec.payload["target_seq"])
            effective = [r for r in effective if r.seq <= target]
        else:
            effective.append(rec)
    return effective


def materialize(project_id: str, records: Iterable[EventRecord],
                up_to_seq: int | None = None) -> WorkflowState:
    state = WorkflowState(project_id=project_id)
    for rec in effective_records(records, up_to_seq):
        apply_event(state, rec.kind, rec.stage, rec.payload, rec.artifact_refs)
    return state


class ProjectLog:
    """Handle on one project's journal. Opening with `writer=True` takes the
    project's exclusive writer token for the lifetime of the handle."""

    def __init__(self, projects_root: Path, project_id: str, writer: bool = False):
        self.project_id = project_id
        self.dir = Path(projects_root) / project_id
        self.path = self.dir / JOURNAL_NAME
        self._lock_fd: int | None = None
        self._append_fh = None
        self._head_seq: int | None = None
        # control plane wires this to the harness so rollback can refuse
        # while a tool or experiment is in flight
        self.busy_probe: Callable[[], bool] | None = None
        if writer:
            self.dir.mkdir(parents=True, exist_ok=True)
            self._acquire_writer()

    # -- writer token --------------------------------------------------------

    def _acquire_writer(self) -> None:
        fd = os.open(self.dir / "writer.lock", os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            os.close(fd)
            raise WriterConflict(
                f"project {self.project_id} already has an active writer")
        self._lock_fd = fd

    def close(self) -> None:
        if self._append_fh is not None:
            self._append_fh.close()
            self._append_fh = None
        if self._lock_fd is not None:
            fcntl.flock(self._lock_fd, fcntl.LOCK_UN)
            os.close(self._lock_fd)
            self._lock_fd = None

    def __enter__(self) -> "ProjectLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- reads ---------------------------------------------------------------

    def exists(self) -> bool:
        return self.path.exists()

    def read(self, up_to_seq: int | None = None) -> list[EventRecord]:
        if not self.path.exists():
            raise UnknownProject(self.project_id)
        records: list[EventRecord] = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = EventRecord.from_doc(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise CorruptLog(
                        f"{self.project_id}: unparseable record at line {lineno}: {exc}")
                if rec.seq != len(records) + 1:
                    raise CorruptLog(
                        f"{self.project_id}: seq gap at line {lineno}: "
                        f"expected {len(records) + 1}, found {rec.seq}")
                records.append(rec)
                if up_to_seq is not None and rec.seq >= up_to_seq:
                    break
        return records

    def head_seq(self) -> int:
        if self._head_seq is None:
            self._head_seq = len(self.read()) if self.path.exists() else 0
        return self._head_seq

    # -- append --------------------------------------------------------------

    def append(self, kind: EventKind | str, stage=None, payload: dict | None = None,
               artifact_refs: list[str] | None = None) -> EventRecord:
        if self._lock_fd is None:
            raise WriterConflict(
                f"project {self.project_id}: appending without the writer token")
        kind = EventKind(kind).value
        if not self.path.exists() and kind != EventKind.PROJECT_CREATED:
            raise UnknownProject(self.project_id)
        rec = EventRecord(
            project_id=self.project_id,
            seq=self.head_seq() + 1,
            ts=_utc_now_iso(),
            stage=str(stage.value) if hasattr(stage, "value") else stage,
            kind=kind,
            payload=payload or {},
            artifact_refs=list(artifact_refs or []),
        )
        if self._append_fh is None:
            self._append_fh = open(self.path, "a", encoding="utf-8")
        self._append_fh.write(json.dumps(rec.to_doc(), ensure_ascii=False) + "\n")
        self._append_fh.flush()
        os.fsync(self._append_fh.fileno())
        self._head_seq = rec.seq
        return rec

    # -- replay / rollback ---------------------------------------------------

    def replay(self, up_to_seq: int | None = None) -> WorkflowState:
        return materialize(self.project_id, self.read(), up_to_seq)

    def rollback_to(self, target_seq: int) -> EventRecord:
        if self.busy_probe is not None and self.busy_probe():
            raise HarnessBusy(
                f"project {self.project_id}: tool execution in flight")
        head = self.head_seq()
        if target_seq >= head:
            raise TargetAheadOfHead(
                f"rollback target {target_seq} not strictly before head {head}")
        if target_seq < 1:
            raise InvalidTarget(f"rollback target {target_seq} is not a valid seq")
        # the target must be on the visible timeline: rewinding into an
        # already-masked interval would resurrect records that the current
        # state has never seen, breaking rollback == replay(up_to=target)
        records = self.read()
        visible_prefix = [r.seq for r in effective_records(records)
                          if r.seq <= target_seq]
        replay_prefix = [r.seq for r in effective_records(records, target_seq)]
        if visible_prefix != replay_prefix:
            raise InvalidTarget(
                f"rollback target {target_seq} lies inside a rolled-back interval")
        stage_at_target = self.replay(up_to_seq=target_seq).current_stage
        marker = self.append(
            EventKind.ROLLBACK_MARKER,
            stage=stage_at_target,
            payload={"target_seq": target_seq},
        )
        self.append(
            EventKind.STAGE_ENTERED,
            stage=stage_at_target,
            payload={"reason": "rollback", "marker_seq": marker.seq},
        )
        return marker

    # -- checkpoint / resume ---------------------------------------------------

    def _checkpoint_dir(self) -> Path:
        return self.dir / CHECKPOINT_DIR

    def checkpoint(self) -> Checkpoint:
        records = self.read()
        if not records:
            raise UnknownProject(self.project_id)
        state = materialize(self.project_id, records)
        ckpt = Checkpoint(
            project_id=self.project_id,
            seq=records[-1].seq,
            state_digest=state.digest(),
            created_ts=_utc_now_iso(),
        )
        self._checkpoint_dir().mkdir(parents=True, exist_ok=True)
        doc = {
            "project_id": ckpt.project_id,
            "seq": ckpt.seq,
            "state_digest": ckpt.state_digest,
            "created_ts": ckpt.created_ts,
            "state": state.to_doc(),
        }
        path = self._checkpoint_dir() / f"ckpt-{ckpt.seq:08d}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(canonical_json(doc), encoding="utf-8")
        os.replace(tmp, path)
        return ckpt

    def latest_checkpoint(self) -> dict | None:
        cdir = self._checkpoint_dir()
        if not cdir.is_dir():
            return None
        paths = sorted(cdir.glob("ckpt-*.json"))
        if not paths:
            return None
        try:
            return json.loads(paths[-1].read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptLog(f"{self.project_id}: unreadable checkpoint: {exc}")

    def resume(self) -> WorkflowState:
        """Restore state from the latest checkpoint plus the journal tail.

        The stored snapshot is verified against its recorded digest, so any
        corruption of the checkpoint is detected here. A rollback marker in
        the tail that targets a seq before the checkpoint would need to
        rewind the snapshot, so that case falls back to a full replay.
        """
        if not self.path.exists():
            raise UnknownProject(self.project_id)
        records = self.read()
        ckpt = self.latest_checkpoint()
        if ckpt is None:
            return materialize(self.project_id, records)
        if digest_doc(ckpt["state"]) != ckpt["state_digest"]:
            raise CorruptLog(
                f"{self.project_id}: checkpoint digest mismatch at seq {ckpt['seq']}")
        tail = [r for r in records if r.seq > ckpt["seq"]]
        if any(r.kind == EventKind.ROLLBACK_MARKER
               and int(r.payload["target_seq"]) < ckpt["seq"] for r in tail):
            return materialize(self.project_id, records)
        state = WorkflowState.from_doc(ckpt["state"])
        for rec in effective_records(tail):
            apply_event(state, rec.kind, rec.stage, rec.payload, rec.artifact_refs)
        return state


def list_projects(projects_root: Path) -> list[str]:
    root = Path(projects_root)
    if not root.is_dir():
        return []
    return sorted(
        p.name for p in root.iterdir()
        if (p / JOURNAL_NAME).exists() and not p.name.startswith("_")
    )


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")
