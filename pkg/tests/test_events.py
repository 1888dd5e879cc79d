"""Journal semantics: append, replay, masking, rollback, checkpoint, resume.

The masking oracle here is deliberately written as a different algorithm
from the production one (integer stack simulation instead of record-list
filtering) so the two can disagree if either picks up an off-by-one.
"""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labengine.errors import (
    CorruptLog,
    HarnessBusy,
    InvalidTarget,
    TargetAheadOfHead,
    UnknownProject,
    WriterConflict,
)
from labengine.events import ProjectLog, effective_records
from labengine.model import EventKind, Stage

from conftest import new_log


def mask_oracle(entries):
    """entries: list of ("event", seq) / ("marker", seq, target).
    Returns the visible event seqs. Stack simulation: a marker pops every
    live seq above its target."""
    live: list[int] = []
    for entry in entries:
        if entry[0] == "marker":
            target = entry[2]
            while live and live[-1] > target:
                live.pop()
        else:
            live.append(entry[1])
    return live


def visible_targets(log: ProjectLog) -> list[int]:
    records = log.read()
    head = records[-1].seq
    vis = {r.seq for r in effective_records(records)}
    return sorted(s for s in vis if s < head)


def test_append_assigns_contiguous_seq(tmp_path):
    log = new_log(tmp_path)
    for i in range(5):
        rec = log.append(EventKind.RISK_FLAG, stage=Stage.IDEA,
                         payload={"reason": "t", "n": i})
    assert [r.seq for r in log.read()] == [1, 2, 3, 4, 5, 6, 7]
    assert rec.seq == 7


def test_first_event_must_create_project(tmp_path):
    log = ProjectLog(tmp_path, "fresh", writer=True)
    with pytest.raises(UnknownProject):
        log.append(EventKind.RISK_FLAG, payload={})


def test_read_missing_project(tmp_path):
    with pytest.raises(UnknownProject):
        ProjectLog(tmp_path, "ghost").read()


def test_writer_token_is_exclusive(tmp_path):
    log = new_log(tmp_path)
    with pytest.raises(WriterConflict):
        ProjectLog(tmp_path, "proj", writer=True)
    log.close()
    # released token can be re-acquired
    again = ProjectLog(tmp_path, "proj", writer=True)
    again.close()


def test_append_without_token_refused(tmp_path):
    new_log(tmp_path).close()
    reader = ProjectLog(tmp_path, "proj")
    with pytest.raises(WriterConflict):
        reader.append(EventKind.RISK_FLAG, payload={})


def test_replay_is_deterministic(tmp_path):
    log = new_log(tmp_path)
    for i in range(10):
        log.append(EventKind.VALIDATION_SCORED, stage=Stage.IDEA,
                   payload={"score": 2.0 + i / 10, "iteration": 1, "passed": False})
    assert log.replay().digest() == log.replay().digest()


def test_seq_gap_detected(tmp_path):
    log = new_log(tmp_path)
    log.close()
    lines = log.path.read_text().splitlines()
    doc = json.loads(lines[-1])
    doc["seq"] = 9
    lines[-1] = json.dumps(doc)
    log.path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptLog):
        ProjectLog(tmp_path, "proj").read()


def test_garbage_line_detected(tmp_path):
    log = new_log(tmp_path)
    log.close()
    with open(log.path, "a") as fh:
        fh.write("not json at all\n")
    with pytest.raises(CorruptLog):
        ProjectLog(tmp_path, "proj").read()


# -- rollback ---------------------------------------------------------------------


def test_rollback_appends_never_truncates(tmp_path):
    log = new_log(tmp_path)
    for i in range(4):
        log.append(EventKind.STAGE_ENTERED, stage=Stage.PLANNING,
                   payload={"reason": "advance"})
    before = len(log.read())
    log.rollback_to(2)
    after = log.read()
    assert len(after) == before + 2  # marker + stage re-entry
    assert after[before].kind == EventKind.ROLLBACK_MARKER
    assert after[before].payload["target_seq"] == 2


def test_rollback_state_equals_replay_at_target(tmp_path):
    log = new_log(tmp_path)
    stages = [Stage.PLANNING, Stage.CODING, Stage.EXPERIMENT]
    for s in stages:
        log.append(EventKind.STAGE_ENTERED, stage=s, payload={"reason": "advance"})
    want = log.replay(up_to_seq=3).digest()
    log.rollback_to(3)
    assert log.replay().digest() == want
    assert log.replay().current_stage == Stage.PLANNING.value


def test_rollback_target_bounds(tmp_path):
    log = new_log(tmp_path)
    with pytest.raises(TargetAheadOfHead):
        log.rollback_to(2)  # head == 2, must be strictly before
    with pytest.raises(TargetAheadOfHead):
        log.rollback_to(99)
    with pytest.raises(InvalidTarget):
        log.rollback_to(0)


def test_rollback_into_masked_interval_refused(tmp_path):
    log = new_log(tmp_path)
    for _ in range(6):
        log.append(EventKind.STAGE_ENTERED, stage=Stage.PLANNING,
                   payload={"reason": "advance"})
    log.rollback_to(3)  # masks (3, 9]
    with pytest.raises(InvalidTarget):
        log.rollback_to(5)
    # the boundary itself is still addressable
    log.append(EventKind.STAGE_ENTERED, stage=Stage.CODING,
               payload={"reason": "advance"})
    log.rollback_to(3)


def test_rollback_refused_while_harness_busy(tmp_path):
    log = new_log(tmp_path)
    log.append(EventKind.STAGE_ENTERED, stage=Stage.PLANNING,
               payload={"reason": "advance"})
    log.busy_probe = lambda: True
    with pytest.raises(HarnessBusy):
        log.rollback_to(1)


def test_nested_rollbacks_compose(tmp_path):
    log = new_log(tmp_path)
    for _ in range(5):
        log.append(EventKind.STAGE_ENTERED, stage=Stage.PLANNING,
                   payload={"reason": "advance"})
    log.rollback_to(4)
    log.append(EventKind.STAGE_ENTERED, stage=Stage.CODING,
               payload={"reason": "advance"})
    want = log.replay(up_to_seq=2).digest()
    log.rollback_to(2)
    assert log.replay().digest() == want


# -- masking oracle -----------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=40))
def test_masking_matches_oracle(tmp_path_factory, ops):
    """ops: 0 = append event, 1..4 = rollback to a pseudo-chosen visible seq."""
    root = tmp_path_factory.mktemp("mask")
    log = new_log(root, "m")
    entries = [("event", 1), ("event", 2)]
    for op in ops:
        if op == 0 or len(log.read()) < 3:
            rec = log.append(EventKind.RISK_FLAG, stage=Stage.IDEA,
                             payload={"reason": "x"})
            entries.append(("event", rec.seq))
        else:
            targets = visible_targets(log)
            if not targets:
                continue
            target = targets[op % len(targets)]
            marker = log.rollback_to(target)
            entries.append(("marker", marker.seq, target))
            # rollback_to also appends a stage re-entry event
            entries.append(("event", marker.seq + 1))
    got = [r.seq for r in effective_records(log.read())]
    assert got == mask_oracle(entries)
    log.close()


# -- checkpoint / resume ----------------------------------------------------------


def test_resume_equals_full_replay(tmp_path):
    log = new_log(tmp_path)
    for i in range(6):
        log.append(EventKind.VALIDATION_SCORED, stage=Stage.IDEA,
                   payload={"score": 3.0, "iteration": 1, "passed": True})
        if i == 2:
            log.checkpoint()
    assert log.resume().digest() == log.replay().digest()


def test_resume_without_checkpoint(tmp_path):
    log = new_log(tmp_path)
    assert log.resume().digest() == log.replay().digest()


def test_resume_detects_corrupt_checkpoint(tmp_path):
    log = new_log(tmp_path)
    ckpt = log.checkpoint()
    path = log.dir / "checkpoints" / f"ckpt-{ckpt.seq:08d}.json"
    doc = json.loads(path.read_text())
    doc["state"]["prompt"] = "tampered"
    path.write_text(json.dumps(doc))
    with pytest.raises(CorruptLog):
        log.resume()


def test_resume_with_rollback_crossing_checkpoint(tmp_path):
    log = new_log(tmp_path)
    for _ in range(4):
        log.append(EventKind.STAGE_ENTERED, stage=Stage.PLANNING,
                   payload={"reason": "advance"})
    log.checkpoint()  # at seq 6
    log.append(EventKind.STAGE_ENTERED, stage=Stage.CODING,
               payload={"reason": "advance"})
    log.rollback_to(3)  # target below the checkpoint: full replay fallback
    assert log.resume().digest() == log.replay().digest()


def test_resume_missing_project(tmp_path):
    with pytest.raises(UnknownProject):
        ProjectLog(tmp_path, "ghost").resume()
